from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import SchemaMismatchError

FORMAT_VERSION = 1


class StreamSchema(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    num_features: int = Field(ge=1)
    num_classes: int = Field(ge=2)
    feature_names: Optional[Tuple[str, ...]] = None

    @model_validator(mode="after")
    def _names_match(self) -> "StreamSchema":
        if self.feature_names is not None and len(self.feature_names) != self.num_features:
            raise ValueError(
                f"feature_names has {len(self.feature_names)} entries, expected {self.num_features}"
            )
        return self

    def check(self, instance: "LabeledInstance") -> None:
        """Raise SchemaMismatchError unless the instance conforms."""
        if len(instance.features) != self.num_features:
            raise SchemaMismatchError(
                f"instance has {len(instance.features)} features, schema expects {self.num_features}"
            )
        if not 0 <= instance.label < self.num_classes:
            raise SchemaMismatchError(
                f"label {instance.label} outside [0, {self.num_classes})"
            )


class LabeledInstance(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Chunk:
    instances: Tuple[LabeledInstance, ...]
    index: int

    def __len__(self) -> int:
        return len(self.instances)

    @cached_property
    def X(self) -> np.ndarray:
        return np.vstack([inst.features for inst in self.instances])

    @cached_property
    def y(self) -> np.ndarray:
        return np.fromiter((inst.label for inst in self.instances), dtype=np.int64, count=len(self.instances))


class ScoreVector(NamedTuple):
    scores: np.ndarray
    cold: bool = False


class PruneScheme(str, Enum):
    ccrp = "ccrp"
    regular_borda = "regular-borda"
    weight_based = "weight-based"


class RecordMode(str, Enum):
    soft = "soft"
    crisp = "crisp"


class PruneConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    size: int = Field(ge=1, description="Pruned ensemble size (phi).")
    window: Optional[int] = Field(default=None, ge=1, description="Record window capacity N; defaults to the chunk size.")
    scheme: PruneScheme = PruneScheme.ccrp
    record_mode: RecordMode = RecordMode.soft


class ChunkMetricsRow(BaseModel):
    chunk: int
    seen: int
    prequential_accuracy: float = Field(ge=0.0, le=1.0)
    overall_accuracy: float = Field(ge=0.0, le=1.0)
    ensemble_size: int
    ensemble_bytes: int = Field(ge=0)
    baseline_bytes: Optional[int] = None
    prune_event: bool = False
    pre_prune_bytes: Optional[int] = None
    post_prune_bytes: Optional[int] = None


class RunMetadata(BaseModel):
    label: str
    stream: Dict[str, Any]
    ensemble: str
    learner: Dict[str, Any]
    chunk_size: int
    max_size: int
    prune: Optional[Dict[str, Any]] = None
    prequential_window: int
    partial_chunk: str = "discarded"
    chunk_boundary_order: str = "reweight, replace-or-prune, append"
    paired: bool = False
    config: Optional[Dict[str, Any]] = None


class RunReport(BaseModel):
    format_version: int = FORMAT_VERSION
    label: str
    rows: List[ChunkMetricsRow]
    overall_accuracy: float
    memory_ratio: Optional[float] = None
    metadata: RunMetadata

    @property
    def prune_events(self) -> List[int]:
        """Instance counts at which a prune took place."""
        return [row.seen for row in self.rows if row.prune_event]


class ComparisonRow(BaseModel):
    label: str
    scheme: str
    overall_accuracy: float
    memory_ratio: Optional[float] = None
    winner: bool = False


class ComparisonTable(BaseModel):
    format_version: int = FORMAT_VERSION
    stream: Dict[str, Any]
    rows: List[ComparisonRow]
