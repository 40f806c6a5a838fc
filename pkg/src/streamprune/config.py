import json
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .models import PruneConfig, PruneScheme

GENERATOR_PARAMS = {
    "moving-squares": {"speed"},
    "moving-rbf": {"drift_speed", "sigma"},
    "transient-chessboard": {"segment_length"},
}
DEFAULT_MAX_SIZE = {"awe": 20, "goowe": 30}


class StreamSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    origin: Literal["csv-file", "moving-squares", "moving-rbf", "transient-chessboard"]
    path: Optional[Path] = None
    seed: int = Field(default=1, ge=0, lt=2**64)
    total_instances: Optional[int] = Field(default=None, ge=0)
    params: Dict[str, float] = {}

    @model_validator(mode="after")
    def _origin_fields(self) -> "StreamSpec":
        if self.origin == "csv-file":
            if self.path is None:
                raise ValueError("csv-file streams need a 'path'")
            if self.params:
                raise ValueError("csv-file streams take no generator params")
            return self
        if self.total_instances is None:
            raise ValueError(f"{self.origin} streams need 'total_instances'")
        unknown = set(self.params) - GENERATOR_PARAMS[self.origin]
        if unknown:
            raise ValueError(
                f"unknown params {sorted(unknown)} for {self.origin}; allowed: {sorted(GENERATOR_PARAMS[self.origin])}"
            )
        if "segment_length" in self.params:
            if self.params["segment_length"] < 1 or not float(self.params["segment_length"]).is_integer():
                raise ValueError("segment_length must be a positive integer")
        for key in ("speed", "drift_speed"):
            if self.params.get(key, 0.0) < 0:
                raise ValueError(f"{key} must be >= 0")
        if self.params.get("sigma", 1.0) <= 0:
            raise ValueError("sigma must be > 0")
        return self


class LearnerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["hoeffding-tree", "naive-bayes"] = "hoeffding-tree"
    grace_period: int = Field(default=200, ge=1)
    delta: float = Field(default=1e-7, gt=0, le=1)
    tie_threshold: float = Field(default=0.05, ge=0)
    leaf_prediction: Literal["nb", "mc"] = "nb"

    def hyperparameters(self) -> Dict[str, Any]:
        if self.kind == "naive-bayes":
            return {}
        return self.model_dump(exclude={"kind"})


class EnsembleSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["awe", "goowe"] = "awe"
    max_size: Optional[int] = Field(default=None, ge=1)
    chunk_size: int = Field(default=1_000, ge=1)

    @model_validator(mode="after")
    def _default_size(self) -> "EnsembleSpec":
        if self.max_size is None:
            self.max_size = DEFAULT_MAX_SIZE[self.kind]
        return self


class PruneSpec(PruneConfig):
    paired: bool = True

    def to_config(self) -> PruneConfig:
        return PruneConfig.model_validate(self.model_dump(exclude={"paired"}))


class EvalSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    window: int = Field(default=1_000, ge=1)
    out_dir: Path = Path("results")
    label: Optional[str] = None
    diagnostics: bool = False


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    stream: StreamSpec
    learner: LearnerSpec = LearnerSpec()
    ensemble: EnsembleSpec = EnsembleSpec()
    prune: Optional[PruneSpec] = None
    eval: EvalSpec = EvalSpec()
    schemes: Optional[List[PruneScheme]] = None

    @field_validator("prune", mode="before")
    @classmethod
    def _none_string(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip().lower() == "none":
            return None
        return value

    @model_validator(mode="after")
    def _cross_checks(self) -> "ExperimentConfig":
        K = self.ensemble.max_size
        if self.prune is not None and self.prune.size >= K:
            raise ValueError(f"prune.size (phi={self.prune.size}) must be smaller than ensemble.max_size (K={K})")
        if self.schemes is not None and self.prune is None:
            raise ValueError("'schemes' needs a 'prune' table to take the pruned size from")
        return self

    @property
    def label(self) -> str:
        if self.eval.label:
            return self.eval.label
        scheme = self.prune.scheme.value if self.prune else "none"
        return f"{self.ensemble.kind}-{scheme}"


def format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{loc}: {item['msg']}")
    return "; ".join(lines)


def parse_experiment(data: Any) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(
            f"Invalid experiment config: {format_validation_error(e)}",
            hint="See README.md for the config schema.",
        ) from e


def load_experiment(path: Path) -> ExperimentConfig:
    """Load and validate an experiment config (.json or .toml)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        if path.suffix == ".toml":
            with open(path, "rb") as f:
                data = tomllib.load(f)
        elif path.suffix == ".json":
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        else:
            raise ConfigError(f"Unsupported config format {path.suffix!r}", hint="Use a .json or .toml file.")
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"Cannot parse {path}: {e}") from e
    return parse_experiment(data)


def save_experiment(config: ExperimentConfig, path: Path) -> None:
    """Write the fully-resolved config so the run can be replayed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.model_dump(mode="json"), f, indent=2)
        f.write("\n")


def apply_overrides(config: ExperimentConfig, seed: Optional[int] = None, out_dir: Optional[Path] = None) -> ExperimentConfig:
    data = config.model_dump(mode="json")
    if seed is not None:
        data["stream"]["seed"] = seed
    if out_dir is not None:
        data["eval"]["out_dir"] = str(out_dir)
    return parse_experiment(data)
