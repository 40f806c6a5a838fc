"""Incremental base classifiers: river's Gaussian Naive Bayes and Hoeffding Tree behind one component interface."""

import math
from abc import ABC, abstractmethod
from typing import Any, Dict, Mapping, Optional

import numpy as np
from river import naive_bayes, tree

from .errors import SchemaMismatchError
from .models import Chunk, LabeledInstance, ScoreVector, StreamSchema

# Size accounting (bytes). One statistics entry is the Gaussian summary of one
# (feature, class) pair: count, mean, M2, min and max as 8-byte floats.
STAT_ENTRY_BYTES = 40
NODE_OVERHEAD_BYTES = 96
COMPONENT_OVERHEAD_BYTES = 128


def hoeffding_bound(range_: float, delta: float, n: int) -> float:
    """epsilon = sqrt(R^2 ln(1/delta) / (2n))."""
    if range_ <= 0:
        raise ValueError(f"range must be > 0, got {range_}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must be in (0, 1], got {delta}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return math.sqrt(range_ * range_ * math.log(1.0 / delta) / (2.0 * n))


def as_features(x: np.ndarray) -> Dict[int, float]:
    return {j: float(v) for j, v in enumerate(x)}


def proba_vector(proba: Optional[Mapping[Any, float]], num_classes: int) -> np.ndarray:
    out = np.zeros(num_classes)
    for label, p in (proba or {}).items():
        out[int(label)] = p
    return out


class ClassifierComponent(ABC):
    """A member classifier of an ensemble, wrapping one river model."""

    kind: str = ""

    def __init__(self, schema: StreamSchema, component_id: int = 0, birth_chunk: int = 0):
        self.schema = schema
        self.id = component_id
        self.birth_chunk = birth_chunk
        self.n_seen = 0
        self.class_counts = np.zeros(schema.num_classes)
        self.model = self._build()

    @property
    def num_classes(self) -> int:
        return self.schema.num_classes

    @property
    def cold(self) -> bool:
        return self.n_seen == 0

    def train_incremental(self, instance: LabeledInstance) -> "ClassifierComponent":
        self.schema.check(instance)
        label = int(instance.label)
        self.model.learn_one(as_features(np.asarray(instance.features, dtype=np.float64)), label)
        self.class_counts[label] += 1.0
        self.n_seen += 1
        return self

    def train_chunk(self, chunk: Chunk) -> "ClassifierComponent":
        for instance in chunk.instances:
            self.train_incremental(instance)
        return self

    def predict_scores(self, features: np.ndarray) -> ScoreVector:
        """Normalized per-class scores; an untrained component answers uniformly and flags itself cold."""
        features = np.asarray(features, dtype=np.float64)
        if features.shape != (self.schema.num_features,):
            raise SchemaMismatchError(
                f"expected {self.schema.num_features} features, got shape {features.shape}"
            )
        if self.cold:
            return ScoreVector(np.full(self.num_classes, 1.0 / self.num_classes), cold=True)
        return ScoreVector(self._score_row(features))

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        """Row-wise predict_scores for an (m, d) matrix, shape (m, L)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.schema.num_features:
            raise SchemaMismatchError(
                f"expected (m, {self.schema.num_features}) matrix, got shape {X.shape}"
            )
        if self.cold:
            return np.full((X.shape[0], self.num_classes), 1.0 / self.num_classes)
        if X.shape[0] == 0:
            return np.zeros((0, self.num_classes))
        return np.stack([self._score_row(x) for x in X])

    def _score_row(self, x: np.ndarray) -> np.ndarray:
        scores = self._adjust(proba_vector(self.model.predict_proba_one(as_features(x)), self.num_classes))
        total = scores.sum()
        if not total > 0:
            return np.full(self.num_classes, 1.0 / self.num_classes)
        return scores / total

    def _adjust(self, proba: np.ndarray) -> np.ndarray:
        return proba

    def class_distribution(self) -> np.ndarray:
        """Maximum-likelihood class frequencies over everything trained on."""
        total = self.class_counts.sum()
        if total == 0:
            return np.full(self.num_classes, 1.0 / self.num_classes)
        return self.class_counts / total

    @abstractmethod
    def _build(self) -> Any: ...

    @abstractmethod
    def estimate_size(self) -> int: ...

    def hyperparameters(self) -> Dict[str, Any]:
        return {}


class GaussianNaiveBayes(ClassifierComponent):
    """
    Gaussian Naive Bayes with an add-one class prior.

    river's posterior uses the maximum-likelihood prior n_c / N. Multiplying a
    seen class by (n_c + 1) / n_c swaps in the add-one prior. A class never seen
    takes the evidence p(x) as its likelihood, which after the common factor
    N p(x) / (N + L) is cancelled leaves it the weight 1 / N.
    """

    kind = "naive-bayes"

    def _build(self):
        return naive_bayes.GaussianNB()

    def _adjust(self, proba):
        counts = self.class_counts
        seen = counts > 0
        weights = np.full(self.num_classes, 1.0 / counts.sum())
        weights[seen] = proba[seen] * (counts[seen] + 1.0) / counts[seen]
        return weights

    def estimate_size(self) -> int:
        return COMPONENT_OVERHEAD_BYTES + self.schema.num_features * self.num_classes * STAT_ENTRY_BYTES


class HoeffdingTree(ClassifierComponent):
    """
    VFDT: information-gain splits with R = log2(L), Gaussian numeric observers,
    Naive Bayes ("nb") or majority-class ("mc") leaves.
    """

    kind = "hoeffding-tree"

    def __init__(
        self,
        schema: StreamSchema,
        component_id: int = 0,
        birth_chunk: int = 0,
        grace_period: int = 200,
        delta: float = 1e-7,
        tie_threshold: float = 0.05,
        leaf_prediction: str = "nb",
    ):
        if grace_period < 1:
            raise ValueError(f"grace_period must be >= 1, got {grace_period}")
        if not 0 < delta <= 1:
            raise ValueError(f"delta must be in (0, 1], got {delta}")
        if tie_threshold < 0:
            raise ValueError(f"tie_threshold must be >= 0, got {tie_threshold}")
        if leaf_prediction not in ("nb", "mc"):
            raise ValueError(f"leaf_prediction must be 'nb' or 'mc', got {leaf_prediction!r}")
        self.grace_period = grace_period
        self.delta = delta
        self.tie_threshold = tie_threshold
        self.leaf_prediction = leaf_prediction
        super().__init__(schema, component_id, birth_chunk)

    def _build(self):
        return tree.HoeffdingTreeClassifier(
            grace_period=self.grace_period,
            delta=self.delta,
            tau=self.tie_threshold,
            leaf_prediction=self.leaf_prediction,
            split_criterion="info_gain",
        )

    @property
    def n_leaves(self) -> int:
        # an untrained tree is a single empty leaf
        return max(self.model.n_leaves, 1)

    @property
    def n_internal_nodes(self) -> int:
        return self.model.n_branches

    @property
    def depth(self) -> int:
        return max(self.model.height - 1, 0)

    def hyperparameters(self) -> Dict[str, Any]:
        return {
            "grace_period": self.grace_period,
            "delta": self.delta,
            "tie_threshold": self.tie_threshold,
            "leaf_prediction": self.leaf_prediction,
        }

    def estimate_size(self) -> int:
        leaves = self.n_leaves
        nodes = leaves + self.n_internal_nodes
        entries = leaves * self.schema.num_features * self.num_classes
        return COMPONENT_OVERHEAD_BYTES + nodes * NODE_OVERHEAD_BYTES + entries * STAT_ENTRY_BYTES


LEARNERS = {
    HoeffdingTree.kind: HoeffdingTree,
    GaussianNaiveBayes.kind: GaussianNaiveBayes,
}


def make_learner(
    kind: str,
    schema: StreamSchema,
    component_id: int = 0,
    birth_chunk: int = 0,
    **hyperparameters: Any,
) -> ClassifierComponent:
    try:
        cls = LEARNERS[kind]
    except KeyError:
        raise ValueError(f"Unknown learner kind {kind!r}; choose from {sorted(LEARNERS)}") from None
    return cls(schema, component_id, birth_chunk, **hyperparameters)
