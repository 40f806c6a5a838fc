"""Stream sources: csv files and seeded synthetic drift generators."""

import csv
import logging
import math
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from .errors import SchemaMismatchError, StreamDataError
from .models import Chunk, LabeledInstance, StreamSchema

log = logging.getLogger(__name__)

MAX_SEED = 2**64
MISSING_TOKENS = {"", "?", "na", "nan", "null", "none"}


def _frozen(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


class StreamSource(ABC):
    """A time-ordered, re-iterable sequence of labeled instances."""

    origin: str = ""

    def __init__(self, schema: StreamSchema, seed: Optional[int] = None, total_instances: Optional[int] = None):
        self.schema = schema
        self.seed = seed
        self.total_instances = total_instances

    @abstractmethod
    def __iter__(self) -> Iterator[LabeledInstance]: ...

    def params(self) -> Dict[str, Any]:
        return {}

    def metadata(self) -> Dict[str, Any]:
        return {
            "origin": self.origin,
            "seed": self.seed,
            "total_instances": self.total_instances,
            "num_features": self.schema.num_features,
            "num_classes": self.schema.num_classes,
            "params": self.params(),
            "normalization": "none",
        }


# --- csv -------------------------------------------------------------------


def _label_key(cell: str) -> str:
    text = cell.strip()
    try:
        value = float(text)
    except ValueError:
        return text
    if math.isfinite(value) and value.is_integer():
        return str(int(value))
    return text


def _parse_features(cells: List[str], row: int) -> List[float]:
    values = []
    for cell in cells:
        text = cell.strip()
        if text.lower() in MISSING_TOKENS:
            raise StreamDataError("missing values are not supported", row)
        try:
            value = float(text)
        except ValueError:
            raise StreamDataError(f"non-numeric feature cell {cell!r}", row) from None
        if not math.isfinite(value):
            raise StreamDataError(f"non-finite feature cell {cell!r}", row)
        values.append(value)
    return values


def _looks_like_header(row: List[str]) -> bool:
    for cell in row[:-1]:
        try:
            float(cell.strip())
        except ValueError:
            return True
    return False


class CsvStream(StreamSource):
    origin = "csv-file"

    def __init__(
        self,
        path: Path,
        schema: StreamSchema,
        label_map: Dict[str, int],
        total_instances: int,
        has_header: bool,
    ):
        super().__init__(schema, None, total_instances)
        self.path = path
        self.label_map = label_map
        self.has_header = has_header
        self.label_names: Tuple[str, ...] = tuple(label_map)

    def __iter__(self) -> Iterator[LabeledInstance]:
        with open(self.path, newline="", encoding="utf-8") as f:
            rows = csv.reader(f)
            if self.has_header:
                next(rows, None)
            for row in rows:
                if not row:
                    continue
                yield LabeledInstance(
                    _frozen([float(c) for c in row[:-1]]),
                    self.label_map[_label_key(row[-1])],
                )

    def params(self) -> Dict[str, Any]:
        return {"path": str(self.path), "has_header": self.has_header, "label_map": self.label_map}


def load_csv(path: Union[str, Path], schema_hint: Optional[StreamSchema] = None) -> CsvStream:
    """
    Scan a csv file (features first, label last) and return a re-iterable source.
    Labels are densified to [0, L) in order of first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise StreamDataError(f"File not found: {path}")

    label_map: Dict[str, int] = {}
    header: Optional[List[str]] = None
    width: Optional[int] = None
    count = 0
    with open(path, newline="", encoding="utf-8") as f:
        for row_no, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if row_no == 1 and _looks_like_header(row):
                header = [c.strip() for c in row]
                width = len(row)
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise StreamDataError(f"expected {width} columns, found {len(row)}", row_no)
            if width < 2:
                raise StreamDataError("need at least one feature column and a label column", row_no)
            _parse_features(row[:-1], row_no)
            key = _label_key(row[-1])
            if key.lower() in MISSING_TOKENS:
                raise StreamDataError("missing class label", row_no)
            label_map.setdefault(key, len(label_map))
            count += 1

    if count == 0:
        raise StreamDataError(f"no data rows in {path}")

    num_features = width - 1
    feature_names = tuple(header[:-1]) if header else None
    num_classes = max(len(label_map), 2)
    if schema_hint is not None:
        if schema_hint.num_features != num_features:
            raise SchemaMismatchError(
                f"{path} has {num_features} features, schema hint expects {schema_hint.num_features}"
            )
        if len(label_map) > schema_hint.num_classes:
            raise SchemaMismatchError(
                f"{path} has {len(label_map)} classes, schema hint allows {schema_hint.num_classes}"
            )
        num_classes = schema_hint.num_classes
        feature_names = schema_hint.feature_names or feature_names

    schema = StreamSchema(num_features=num_features, num_classes=num_classes, feature_names=feature_names)
    log.info("Scanned %s: %d instances, %d features, %d classes", path, count, num_features, len(label_map))
    return CsvStream(path, schema, label_map, count, header is not None)


def write_csv(source: StreamSource, path: Union[str, Path]) -> int:
    """Materialize a source as csv with a header row. Returns the number of rows written."""
    path = Path(path)
    names = list(source.schema.feature_names or (f"x{i}" for i in range(source.schema.num_features)))
    written = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(names + ["class"])
        for instance in source:
            writer.writerow([repr(float(v)) for v in instance.features] + [instance.label])
            written += 1
    return written


# --- synthetic generators --------------------------------------------------


class _SyntheticStream(StreamSource):
    def __init__(self, schema: StreamSchema, seed: int, total_instances: int):
        if not 0 <= seed < MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if total_instances < 0:
            raise ValueError(f"total_instances must be >= 0, got {total_instances}")
        super().__init__(schema, seed, total_instances)

    def __iter__(self) -> Iterator[LabeledInstance]:
        rng = np.random.default_rng(self.seed)
        for features, label in self._generate(rng):
            yield LabeledInstance(_frozen(features), label)

    @abstractmethod
    def _generate(self, rng: np.random.Generator) -> Iterator[Tuple[np.ndarray, int]]: ...


class MovingSquares(_SyntheticStream):
    """Four stacked squares drifting horizontally with wrap-around (incremental drift)."""

    origin = "moving-squares"
    HEIGHTS = (0.125, 0.375, 0.625, 0.875)
    SIDE = 0.1

    def __init__(self, seed: int, total_instances: int, speed: float = 1.0 / 50_000):
        super().__init__(StreamSchema(num_features=2, num_classes=4), seed, total_instances)
        if speed < 0:
            raise ValueError(f"speed must be >= 0, got {speed}")
        self.speed = speed

    def params(self) -> Dict[str, Any]:
        return {"speed": self.speed}

    def _generate(self, rng):
        for t in range(self.total_instances):
            label = int(rng.integers(4))
            u, v = rng.random(2)
            offset = (t * self.speed) % 1.0
            x = (offset + u * self.SIDE) % 1.0
            y = self.HEIGHTS[label] - self.SIDE / 2 + v * self.SIDE
            yield (x, y), label


class MovingRBF(_SyntheticStream):
    """Gaussian blobs, one per class, whose centroids drift and reflect inside the unit cube."""

    origin = "moving-rbf"

    def __init__(
        self,
        seed: int,
        total_instances: int,
        drift_speed: float = 1e-4,
        sigma: float = 0.1,
        num_features: int = 10,
        num_classes: int = 5,
    ):
        super().__init__(StreamSchema(num_features=num_features, num_classes=num_classes), seed, total_instances)
        if drift_speed < 0:
            raise ValueError(f"drift_speed must be >= 0, got {drift_speed}")
        if sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {sigma}")
        self.drift_speed = drift_speed
        self.sigma = sigma

    def params(self) -> Dict[str, Any]:
        return {"drift_speed": self.drift_speed, "sigma": self.sigma}

    def _generate(self, rng):
        n_classes, n_features = self.schema.num_classes, self.schema.num_features
        centroids = rng.random((n_classes, n_features))
        directions = rng.normal(size=(n_classes, n_features))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        for _ in range(self.total_instances):
            label = int(rng.integers(n_classes))
            yield centroids[label] + rng.normal(0.0, self.sigma, n_features), label
            if self.drift_speed:
                centroids += self.drift_speed * directions
                high = centroids > 1.0
                low = centroids < 0.0
                centroids[high] = 2.0 - centroids[high]
                centroids[low] = -centroids[low]
                directions[high | low] *= -1.0


def chessboard_class(x: float, y: float, size: int = 8) -> int:
    """Class of a point on the size x size board: (row + col) mod size."""
    row = min(int(y * size), size - 1)
    col = min(int(x * size), size - 1)
    return (row + col) % size


class TransientChessboard(_SyntheticStream):
    """
    8x8 chessboard alternating transient segments (one band of two rows revealed,
    bands cycling) with global segments over the whole board.
    """

    origin = "transient-chessboard"
    BOARD = 8
    BAND_ROWS = 2

    def __init__(self, seed: int, total_instances: int, segment_length: int = 1_000):
        super().__init__(StreamSchema(num_features=2, num_classes=8), seed, total_instances)
        if segment_length < 1:
            raise ValueError(f"segment_length must be >= 1, got {segment_length}")
        self.segment_length = segment_length

    def params(self) -> Dict[str, Any]:
        return {"segment_length": self.segment_length}

    def _generate(self, rng):
        n_bands = self.BOARD // self.BAND_ROWS
        for t in range(self.total_instances):
            segment = t // self.segment_length
            x, v = rng.random(2)
            if segment % 2 == 0:
                band = (segment // 2) % n_bands
                y = (band * self.BAND_ROWS + v * self.BAND_ROWS) / self.BOARD
            else:
                y = v
            yield (x, y), chessboard_class(x, y, self.BOARD)


def gen_moving_squares(seed: int, total_instances: int, **params) -> MovingSquares:
    return MovingSquares(seed, total_instances, **params)


def gen_moving_rbf(seed: int, total_instances: int, **params) -> MovingRBF:
    return MovingRBF(seed, total_instances, **params)


def gen_transient_chessboard(seed: int, total_instances: int, **params) -> TransientChessboard:
    return TransientChessboard(seed, total_instances, **params)


GENERATORS = {
    MovingSquares.origin: gen_moving_squares,
    MovingRBF.origin: gen_moving_rbf,
    TransientChessboard.origin: gen_transient_chessboard,
}


def chunked(source: StreamSource, chunk_size: int) -> Iterator[Chunk]:
    """Consecutive chunks of exactly chunk_size instances; a short tail is discarded."""
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be >= 1, got {chunk_size}")
    buffer: List[LabeledInstance] = []
    index = 0
    for instance in source:
        buffer.append(instance)
        if len(buffer) == chunk_size:
            yield Chunk(tuple(buffer), index)
            buffer = []
            index += 1
    if buffer:
        log.debug("Discarding %d trailing instances (partial chunk)", len(buffer))
