"""Chunk-based weighted ensembles (AWE, GOOWE) with pluggable replacement."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import EmptyEnsembleError, SchemaMismatchError
from .learners import ClassifierComponent
from .models import Chunk, StreamSchema

if TYPE_CHECKING:
    from .pruner import PruneOutcome

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
RIDGE_SCALE = 1e-6

LearnerFactory = Callable[[int, int], ClassifierComponent]
PruneHook = Callable[["ChunkEnsemble"], "PruneOutcome"]


class VoteResult(NamedTuple):
    combined: np.ndarray
    predicted_class: int


def combine_scores(scores: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Weighted vote over a (q, m, L) score stack, returning normalized (m, L) scores.
    Negative weights are clamped to 0; if no weight is positive the vote is unweighted.
    """
    w = np.maximum(np.asarray(weights, dtype=np.float64), 0.0)
    if not (w > 0).any():
        w = np.ones_like(w)
    combined = np.einsum("q,qml->ml", w, scores)
    totals = combined.sum(axis=1, keepdims=True)
    num_classes = scores.shape[2]
    return np.where(totals > 0, combined / np.where(totals > 0, totals, 1.0), 1.0 / num_classes)


def awe_weight_from_scores(scores: np.ndarray, labels: np.ndarray, num_classes: int) -> float:
    """MSE_r - MSE_k for an (n, L) score matrix against integer labels."""
    n = labels.shape[0]
    if n == 0:
        raise ValueError("cannot weigh a component on an empty chunk")
    true_scores = scores[np.arange(n), labels]
    mse_k = float(np.mean((1.0 - true_scores) ** 2))
    priors = np.bincount(labels, minlength=num_classes) / n
    mse_r = float(np.sum(priors * (1.0 - priors) ** 2))
    return mse_r - mse_k


def awe_weight(component: ClassifierComponent, chunk: Chunk, scores: Optional[np.ndarray] = None) -> float:
    """Accuracy-weighted-ensemble weight of one component on a chunk."""
    if len(chunk) == 0:
        raise ValueError("cannot weigh a component on an empty chunk")
    if scores is None:
        scores = component.predict_many(chunk.X)
    return awe_weight_from_scores(scores, chunk.y, component.num_classes)


def goowe_system(scores: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """A[j][m] = sum_i sum_l s_ijl s_iml and d[j] = sum_i sum_l s_ijl y_il for a (q, n, L) stack."""
    q, n, num_classes = scores.shape
    truth = np.zeros((n, num_classes))
    truth[np.arange(n), labels] = 1.0
    flat = scores.reshape(q, n * num_classes)
    return flat @ flat.T, flat @ truth.reshape(n * num_classes)


def goowe_weights(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Least-squares optimal component weights; falls back to ridge when A is singular or ill-conditioned."""
    q, n, _ = scores.shape
    if q == 0 or n == 0:
        raise ValueError("goowe_weights needs at least one component and one instance")
    A, d = goowe_system(scores, labels)
    try:
        if np.linalg.cond(A) > COND_LIMIT:
            raise np.linalg.LinAlgError("ill-conditioned")
        return np.linalg.solve(A, d)
    except np.linalg.LinAlgError:
        trace = float(np.trace(A))
        lam = RIDGE_SCALE * trace / q if trace > 0 else RIDGE_SCALE
        log.debug("GOOWE system singular or ill-conditioned, ridge lambda=%g", lam)
        return np.linalg.solve(A + lam * np.eye(q), d)


@dataclass
class ChunkOutcome:
    chunk: int
    fresh_id: int
    replaced: Optional[int] = None
    prune: Optional["PruneOutcome"] = None
    pre_replace_bytes: Optional[int] = None
    post_replace_bytes: Optional[int] = None


class ChunkEnsemble(ABC):
    """
    Grows one component per chunk up to max_size. At every chunk boundary it
    re-weights, then (when full) replaces its lowest-weight member or hands
    over to an installed prune hook, then appends a component trained on the chunk.
    """

    kind: str = ""

    def __init__(self, schema: StreamSchema, max_size: int, learner_factory: LearnerFactory):
        if max_size < 1:
            raise ValueError(f"max_size must be >= 1, got {max_size}")
        self.schema = schema
        self.max_size = max_size
        self.learner_factory = learner_factory
        self.components: List[ClassifierComponent] = []
        self.weights = np.zeros(0)
        self.chunks_seen = 0
        self._next_id = 1

    def __len__(self) -> int:
        return len(self.components)

    @property
    def ids(self) -> List[int]:
        return [c.id for c in self.components]

    @property
    def is_full(self) -> bool:
        return len(self.components) >= self.max_size

    def add(self, component: ClassifierComponent, weight: float = 1.0) -> None:
        if len(self.components) >= self.max_size:
            raise ValueError(f"ensemble already holds {self.max_size} components")
        self.components.append(component)
        self.weights = np.append(self.weights, weight)
        self._next_id = max(self._next_id, component.id + 1)

    def remove(self, ids: Iterable[int]) -> List[ClassifierComponent]:
        doomed = set(ids)
        keep = [i for i, c in enumerate(self.components) if c.id not in doomed]
        removed = [c for c in self.components if c.id in doomed]
        self.components = [self.components[i] for i in keep]
        self.weights = self.weights[keep]
        return removed

    def weight_of(self, component_id: int) -> float:
        return float(self.weights[self.ids.index(component_id)])

    def size_bytes(self) -> int:
        return sum(c.estimate_size() for c in self.components)

    def component_scores(self, X: np.ndarray) -> np.ndarray:
        """Score stack of shape (q, m, L)."""
        if not self.components:
            raise EmptyEnsembleError()
        return np.stack([c.predict_many(X) for c in self.components])

    def vote(self, scores: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Combined (m, L) scores and predicted classes for a (q, m, L) stack; ties go to the lowest class."""
        combined = combine_scores(scores, self.weights)
        return combined, combined.argmax(axis=1)

    def predict(self, features: np.ndarray) -> VoteResult:
        features = np.asarray(features, dtype=np.float64)
        combined, predicted = self.vote(self.component_scores(features[None, :]))
        return VoteResult(combined[0], int(predicted[0]))

    def process_chunk(
        self,
        chunk: Chunk,
        scores: Optional[np.ndarray] = None,
        prune_hook: Optional[PruneHook] = None,
    ) -> ChunkOutcome:
        """
        Run the chunk-boundary actions. `scores` may carry the (q, n, L) predictions
        the current members already made on this chunk.
        """
        if len(chunk) == 0:
            raise SchemaMismatchError("empty chunk")
        for instance in chunk.instances:
            self.schema.check(instance)

        cached: Dict[int, np.ndarray] = {}
        if self.components:
            if scores is None:
                scores = self.component_scores(chunk.X)
            self.weights = np.asarray(self._reweight(chunk, scores), dtype=np.float64)
            cached = dict(zip(self.ids, scores))

        fresh = self.learner_factory(self._next_id, chunk.index)
        self._next_id += 1
        outcome = ChunkOutcome(chunk=chunk.index, fresh_id=fresh.id)

        if self.is_full:
            outcome.pre_replace_bytes = self.size_bytes()
            if prune_hook is not None:
                outcome.prune = prune_hook(self)
            else:
                victim = self.components[int(np.argmin(self.weights))]
                self.remove([victim.id])
                outcome.replaced = victim.id
            outcome.post_replace_bytes = self.size_bytes()

        fresh.train_chunk(chunk)
        self.components.append(fresh)
        cached[fresh.id] = fresh.predict_many(chunk.X)
        self.weights = np.asarray(
            self._weigh_members(chunk, np.stack([cached[c.id] for c in self.components])),
            dtype=np.float64,
        )
        self.chunks_seen += 1
        return outcome

    @abstractmethod
    def _reweight(self, chunk: Chunk, scores: np.ndarray) -> np.ndarray:
        """Weights of the current members from their (q, n, L) scores on the chunk."""

    @abstractmethod
    def _weigh_members(self, chunk: Chunk, scores: np.ndarray) -> np.ndarray:
        """Weights after the fresh component joined (it is the last row of `scores`)."""


class AccuracyWeightedEnsemble(ChunkEnsemble):
    kind = "awe"

    def _reweight(self, chunk, scores):
        L = self.schema.num_classes
        return np.array([awe_weight_from_scores(s, chunk.y, L) for s in scores])

    def _weigh_members(self, chunk, scores):
        fresh = awe_weight_from_scores(scores[-1], chunk.y, self.schema.num_classes)
        return np.append(self.weights, fresh)


class GeometricallyOptimumEnsemble(ChunkEnsemble):
    kind = "goowe"

    def _reweight(self, chunk, scores):
        return goowe_weights(scores, chunk.y)

    def _weigh_members(self, chunk, scores):
        return goowe_weights(scores, chunk.y)


ENSEMBLES = {
    AccuracyWeightedEnsemble.kind: AccuracyWeightedEnsemble,
    GeometricallyOptimumEnsemble.kind: GeometricallyOptimumEnsemble,
}
