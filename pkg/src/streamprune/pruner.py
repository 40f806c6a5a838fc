"""
Class-wise component ranking pruner.

Predictions of every member and the ground truth are kept over the latest N
instances. At prune time each member gets a per-class squared-error loss, the
members are ranked per class, the class rankings are fused with a Modified
Borda Count (a class winner earns K*L points instead of K) and the top phi
members survive. Regular Borda and weight-based selection are provided as
baselines.
"""

import csv
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Deque, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import PruneError
from .models import PruneConfig, PruneScheme, RecordMode

if TYPE_CHECKING:
    from .ensembles import ChunkEnsemble

log = logging.getLogger(__name__)


class RecordWindow:
    """Paired FIFO buffers of one-hot truths and per-component score vectors."""

    def __init__(self, capacity: int, num_classes: int, record_mode: RecordMode = RecordMode.soft):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.num_classes = num_classes
        self.record_mode = RecordMode(record_mode)
        self.truth: Deque[np.ndarray] = deque(maxlen=capacity)
        self.predictions: Dict[int, Deque[np.ndarray]] = {}
        self._joined: Dict[int, int] = {}
        self._recorded = 0

    def __len__(self) -> int:
        return len(self.truth)

    @property
    def component_ids(self) -> List[int]:
        return list(self.predictions)

    def counts(self) -> Dict[int, int]:
        return {cid: len(buf) for cid, buf in self.predictions.items()}

    def _encode(self, scores: np.ndarray) -> np.ndarray:
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != (self.num_classes,):
            raise PruneError(f"score vector of shape {scores.shape}, expected ({self.num_classes},)")
        if self.record_mode is RecordMode.crisp:
            crisp = np.zeros(self.num_classes)
            crisp[int(np.argmax(scores))] = 1.0
            return crisp
        return scores.copy()

    def record(self, truth: int, predictions: Mapping[int, np.ndarray]) -> "RecordWindow":
        if not 0 <= truth < self.num_classes:
            raise PruneError(f"truth class {truth} outside [0, {self.num_classes})")
        missing = self.predictions.keys() - predictions.keys()
        if missing:
            raise PruneError(f"no prediction recorded for tracked components {sorted(missing)}")
        encoded = {cid: self._encode(s) for cid, s in predictions.items()}
        one_hot = np.zeros(self.num_classes)
        one_hot[truth] = 1.0
        self.truth.append(one_hot)
        for cid, scores in encoded.items():
            if cid not in self.predictions:
                self.predictions[cid] = deque(maxlen=self.capacity)
                self._joined[cid] = self._recorded
            self.predictions[cid].append(scores)
        self._recorded += 1
        return self

    def record_many(self, truths: np.ndarray, ids: Sequence[int], scores: np.ndarray) -> "RecordWindow":
        """Record m instances at once from a (q, m, L) score stack aligned with `ids`."""
        for i, truth in enumerate(truths):
            self.record(int(truth), {cid: scores[k, i] for k, cid in enumerate(ids)})
        return self

    def drop(self, ids: Sequence[int]) -> None:
        for cid in ids:
            self.predictions.pop(cid, None)
            self._joined.pop(cid, None)

    def truth_matrix(self) -> np.ndarray:
        return np.array(self.truth).reshape(len(self.truth), self.num_classes)

    def prediction_matrix(self, component_id: int) -> np.ndarray:
        return np.array(self.predictions[component_id]).reshape(-1, self.num_classes)

    def join_order(self) -> Dict[int, int]:
        return dict(self._joined)


@dataclass
class ClasswiseLoss:
    component_ids: Tuple[int, ...]
    birth_chunks: Tuple[int, ...]
    losses: np.ndarray  # (K, L)

    def aggregate(self) -> Dict[int, float]:
        return dict(zip(self.component_ids, self.losses.sum(axis=1).tolist()))

    def births(self) -> Dict[int, int]:
        return dict(zip(self.component_ids, self.birth_chunks))


@dataclass
class FusedRanking:
    order: List[int]
    points: Dict[int, int]

    def top(self, phi: int) -> List[int]:
        return self.order[:phi]


def classwise_mse(
    window: RecordWindow,
    birth_chunks: Optional[Mapping[int, int]] = None,
    ids: Optional[Sequence[int]] = None,
) -> ClasswiseLoss:
    """
    L[k][l] = sum over the window of (prediction_kl - truth_l)^2. A component with
    n_k < N records is summed over its own records and scaled by N / n_k.
    """
    n = len(window)
    if n == 0:
        raise PruneError("empty record window")
    ids = list(window.component_ids if ids is None else ids)
    births = window.join_order() if birth_chunks is None else dict(birth_chunks)
    truth = window.truth_matrix()
    losses = np.zeros((len(ids), window.num_classes))
    for k, cid in enumerate(ids):
        if cid not in window.predictions or not window.predictions[cid]:
            raise PruneError(f"component {cid} has no records in the window")
        preds = window.prediction_matrix(cid)
        n_k = preds.shape[0]
        diff = preds - truth[n - n_k:]
        losses[k] = (diff * diff).sum(axis=0)
        if n_k < n:
            losses[k] *= n / n_k
    return ClasswiseLoss(tuple(ids), tuple(births[cid] for cid in ids), losses)


def classwise_rank(losses: ClasswiseLoss) -> List[List[int]]:
    """Per class, component ids by ascending loss; ties go to the younger component, then the lower id."""
    rankings = []
    for l in range(losses.losses.shape[1]):
        column = losses.losses[:, l]
        order = sorted(
            range(len(losses.component_ids)),
            key=lambda k: (column[k], -losses.birth_chunks[k], losses.component_ids[k]),
        )
        rankings.append([losses.component_ids[k] for k in order])
    return rankings


def _fuse(
    per_class: Sequence[Sequence[int]],
    K: Optional[int],
    L: Optional[int],
    points_for: Callable[[int, int, int], int],
    aggregate_loss: Optional[Mapping[int, float]],
    birth_chunks: Optional[Mapping[int, int]],
) -> FusedRanking:
    if not per_class:
        raise PruneError("no class rankings to fuse")
    ids = list(per_class[0])
    members = set(ids)
    K = len(ids) if K is None else K
    L = len(per_class) if L is None else L
    if len(per_class) != L:
        raise PruneError(f"got {len(per_class)} class rankings, expected {L}")
    for ranking in per_class:
        if len(ranking) != K or set(ranking) != members:
            raise PruneError("class rankings are not permutations of one component set")

    points = dict.fromkeys(ids, 0)
    for ranking in per_class:
        for rank, cid in enumerate(ranking, start=1):
            points[cid] += points_for(rank, K, L)

    aggregate_loss = aggregate_loss or {}
    birth_chunks = birth_chunks or {}
    order = sorted(
        ids,
        key=lambda c: (-points[c], aggregate_loss.get(c, 0.0), -birth_chunks.get(c, 0), c),
    )
    return FusedRanking(order, points)


def _modified_points(rank: int, K: int, L: int) -> int:
    return K * L if rank == 1 else K - rank + 1


def _regular_points(rank: int, K: int, L: int) -> int:
    return K - rank + 1


def modified_borda(
    per_class: Sequence[Sequence[int]],
    K: Optional[int] = None,
    L: Optional[int] = None,
    aggregate_loss: Optional[Mapping[int, float]] = None,
    birth_chunks: Optional[Mapping[int, int]] = None,
) -> FusedRanking:
    """Borda fusion where each class-wise winner earns K*L points; rank r >= 2 earns K - r + 1."""
    return _fuse(per_class, K, L, _modified_points, aggregate_loss, birth_chunks)


def regular_borda(
    per_class: Sequence[Sequence[int]],
    K: Optional[int] = None,
    L: Optional[int] = None,
    aggregate_loss: Optional[Mapping[int, float]] = None,
    birth_chunks: Optional[Mapping[int, int]] = None,
) -> FusedRanking:
    """Borda fusion where rank r earns K - r + 1 points."""
    return _fuse(per_class, K, L, _regular_points, aggregate_loss, birth_chunks)


@dataclass
class PruneDiagnostics:
    scheme: PruneScheme
    component_ids: List[int]
    birth_chunks: List[int]
    weights: List[float]
    kept: List[int]
    losses: Optional[np.ndarray] = None
    ranks: Optional[np.ndarray] = None  # (K, L) 1-based position of each component per class
    points: Dict[int, int] = field(default_factory=dict)


@dataclass
class PruneOutcome:
    kept: List[int]
    removed: List[int]
    diagnostics: PruneDiagnostics


def warn_if_undersized(config: PruneConfig, num_classes: int) -> None:
    if config.scheme is PruneScheme.ccrp and config.size < num_classes:
        log.warning(
            "Pruned size %d is below the number of classes %d; some class winners may be dropped",
            config.size,
            num_classes,
        )


def prune(ensemble: "ChunkEnsemble", window: RecordWindow, config: PruneConfig) -> PruneOutcome:
    """Shrink the ensemble in place to config.size members chosen by config.scheme."""
    K = len(ensemble)
    phi = config.size
    if phi >= K:
        raise PruneError(f"pruned size {phi} must be smaller than the ensemble size {K}")
    ids = ensemble.ids
    births = {c.id: c.birth_chunk for c in ensemble.components}
    weights = dict(zip(ids, ensemble.weights.tolist()))
    diagnostics = PruneDiagnostics(
        scheme=config.scheme,
        component_ids=ids,
        birth_chunks=[births[c] for c in ids],
        weights=[weights[c] for c in ids],
        kept=[],
    )

    if config.scheme is PruneScheme.weight_based:
        order = sorted(ids, key=lambda c: (-weights[c], -births[c], c))
    else:
        if len(window) == 0:
            raise PruneError("empty record window")
        losses = classwise_mse(window, births, ids)
        per_class = classwise_rank(losses)
        fuse = modified_borda if config.scheme is PruneScheme.ccrp else regular_borda
        fused = fuse(per_class, K, window.num_classes, losses.aggregate(), births)
        order = fused.order
        position = {cid: k for k, cid in enumerate(ids)}
        ranks = np.zeros((K, window.num_classes), dtype=np.int64)
        for l, ranking in enumerate(per_class):
            for rank, cid in enumerate(ranking, start=1):
                ranks[position[cid], l] = rank
        diagnostics.losses = losses.losses
        diagnostics.ranks = ranks
        diagnostics.points = fused.points

    kept = order[:phi]
    removed = [c.id for c in ensemble.remove(order[phi:])]
    window.drop(removed)
    diagnostics.kept = kept
    log.debug("Pruned %s -> kept %s, removed %s", config.scheme.value, kept, removed)
    return PruneOutcome(kept, removed, diagnostics)


def write_diagnostics_csv(diagnostics: PruneDiagnostics, path: Union[str, Path]) -> None:
    """One row per component: id, birth chunk, weight, per-class loss and rank, points, kept flag."""
    num_classes = 0 if diagnostics.losses is None else diagnostics.losses.shape[1]
    header = (
        ["component_id", "birth_chunk", "weight"]
        + [f"loss_{l}" for l in range(num_classes)]
        + [f"rank_{l}" for l in range(num_classes)]
        + ["points", "kept"]
    )
    kept = set(diagnostics.kept)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for k, cid in enumerate(diagnostics.component_ids):
            row = [cid, diagnostics.birth_chunks[k], repr(diagnostics.weights[k])]
            if diagnostics.losses is not None:
                row += [repr(float(v)) for v in diagnostics.losses[k]]
                row += [int(r) for r in diagnostics.ranks[k]]
            row += [diagnostics.points.get(cid, ""), int(cid in kept)]
            writer.writerow(row)
