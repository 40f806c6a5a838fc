"""Prequential (test-then-train) evaluation, memory accounting and report I/O."""

import csv
import json
import logging
from collections import deque
from pathlib import Path
from typing import Any, Callable, Deque, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .ensembles import ChunkEnsemble
from .errors import ReportMismatchError, SchemaMismatchError, StreamPruneError
from .models import (
    FORMAT_VERSION,
    ChunkMetricsRow,
    ComparisonRow,
    ComparisonTable,
    PruneConfig,
    RunMetadata,
    RunReport,
)
from .pruner import RecordWindow, prune, write_diagnostics_csv
from .stream import StreamSource, chunked

log = logging.getLogger(__name__)

REPORT_COLUMNS = ["format_version"] + list(ChunkMetricsRow.model_fields)
CURVE_COLUMNS = ["format_version", "run", "kind", "seen", "prequential_accuracy"]
COMPARISON_COLUMNS = ["format_version"] + list(ComparisonRow.model_fields)


class PrequentialState:
    """Sliding-window and overall accuracy of test-then-train predictions."""

    def __init__(self, window_size: int = 1_000):
        if window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {window_size}")
        self.window_size = window_size
        self.outcomes: Deque[bool] = deque(maxlen=window_size)
        self.window_correct = 0
        self.seen = 0
        self.correct_total = 0

    def update(self, correct: bool) -> None:
        correct = bool(correct)
        if len(self.outcomes) == self.window_size:
            self.window_correct -= self.outcomes[0]
        self.outcomes.append(correct)
        self.window_correct += correct
        self.seen += 1
        self.correct_total += correct

    @property
    def prequential_accuracy(self) -> float:
        return self.window_correct / len(self.outcomes) if self.outcomes else 0.0

    @property
    def overall_accuracy(self) -> float:
        return self.correct_total / self.seen if self.seen else 0.0


def run_prequential(
    source: StreamSource,
    ensemble: ChunkEnsemble,
    prune_config: Optional[PruneConfig] = None,
    chunk_size: int = 1_000,
    window_size: int = 1_000,
    metadata: Optional[RunMetadata] = None,
    diagnostics_dir: Optional[Path] = None,
    on_chunk: Optional[Callable[[ChunkMetricsRow], None]] = None,
) -> RunReport:
    """
    Every instance is predicted before any component trained on its chunk exists.
    Members are static inside a chunk, so their predictions for the whole chunk
    are computed in one batch and then consumed instance by instance.
    """
    if (source.schema.num_features, source.schema.num_classes) != (
        ensemble.schema.num_features,
        ensemble.schema.num_classes,
    ):
        raise SchemaMismatchError(
            f"stream schema ({source.schema.num_features} features, {source.schema.num_classes} classes) "
            f"does not match the ensemble ({ensemble.schema.num_features}, {ensemble.schema.num_classes})"
        )

    state = PrequentialState(window_size)
    num_classes = source.schema.num_classes
    window: Optional[RecordWindow] = None
    hook = None
    if prune_config is not None:
        window = RecordWindow(prune_config.window or chunk_size, num_classes, prune_config.record_mode)
        hook = lambda ens: prune(ens, window, prune_config)  # noqa: E731

    rows: List[ChunkMetricsRow] = []
    for chunk in chunked(source, chunk_size):
        labels = chunk.y
        scores = None
        if len(ensemble):
            scores = ensemble.component_scores(chunk.X)
            _, predicted = ensemble.vote(scores)
            if window is not None:
                window.record_many(labels, ensemble.ids, scores)
        else:
            # Cold start: uniform vote, lowest class index wins the tie.
            predicted = np.zeros(len(chunk), dtype=np.int64)
        for guess, truth in zip(predicted.tolist(), labels.tolist()):
            state.update(guess == truth)

        outcome = ensemble.process_chunk(chunk, scores, hook)
        row = ChunkMetricsRow(
            chunk=chunk.index,
            seen=state.seen,
            prequential_accuracy=state.prequential_accuracy,
            overall_accuracy=state.overall_accuracy,
            ensemble_size=len(ensemble),
            ensemble_bytes=ensemble.size_bytes(),
            prune_event=outcome.prune is not None,
            pre_prune_bytes=outcome.pre_replace_bytes if outcome.prune else None,
            post_prune_bytes=outcome.post_replace_bytes if outcome.prune else None,
        )
        rows.append(row)
        if outcome.prune is not None:
            log.debug("Chunk %d: pruned to %s", chunk.index, outcome.prune.kept)
            if diagnostics_dir is not None:
                write_diagnostics_csv(outcome.prune.diagnostics, Path(diagnostics_dir) / f"prune_chunk{chunk.index:06d}.csv")
        if on_chunk is not None:
            on_chunk(row)

    if not rows:
        raise StreamPruneError(
            "empty stream: no complete chunk was read",
            hint="Check the stream length against the chunk size.",
        )

    if metadata is None:
        metadata = RunMetadata(
            label="run",
            stream=source.metadata(),
            ensemble=ensemble.kind,
            learner={},
            chunk_size=chunk_size,
            max_size=ensemble.max_size,
            prune=prune_config.model_dump(mode="json") if prune_config else None,
            prequential_window=window_size,
        )
    return RunReport(
        label=metadata.label,
        rows=rows,
        overall_accuracy=state.overall_accuracy,
        metadata=metadata,
    )


def memory_ratio(pruned: RunReport, baseline: RunReport) -> float:
    """Sum of pruned ensemble bytes over chunks divided by the baseline's sum."""
    if [r.chunk for r in pruned.rows] != [r.chunk for r in baseline.rows]:
        raise ReportMismatchError("reports do not cover the same chunk indices")
    denominator = sum(r.ensemble_bytes for r in baseline.rows)
    if denominator == 0:
        raise ReportMismatchError("baseline report has zero total size")
    return sum(r.ensemble_bytes for r in pruned.rows) / denominator


def pair_reports(pruned: RunReport, baseline: RunReport) -> RunReport:
    """Copy of the pruned report with the memory ratio and per-chunk baseline bytes filled in."""
    ratio = memory_ratio(pruned, baseline)
    rows = [
        row.model_copy(update={"baseline_bytes": base.ensemble_bytes})
        for row, base in zip(pruned.rows, baseline.rows)
    ]
    metadata = pruned.metadata.model_copy(update={"paired": True})
    return pruned.model_copy(update={"rows": rows, "memory_ratio": ratio, "metadata": metadata})


def _scheme(report: RunReport) -> str:
    prune_spec = report.metadata.prune
    return prune_spec["scheme"] if prune_spec else "none"


def compare_runs(reports: Sequence[RunReport]) -> ComparisonTable:
    """Align overall accuracy and memory ratio per run; the best accuracy (ties included) is flagged."""
    if not reports:
        raise ReportMismatchError("no reports to compare")
    stream = reports[0].metadata.stream
    for report in reports[1:]:
        if report.metadata.stream != stream:
            raise ReportMismatchError(
                f"report {report.label!r} ran on a different stream than {reports[0].label!r}"
            )
    best = max(r.overall_accuracy for r in reports)
    flag = len(reports) > 1
    rows = [
        ComparisonRow(
            label=r.label,
            scheme=_scheme(r),
            overall_accuracy=r.overall_accuracy,
            memory_ratio=r.memory_ratio,
            winner=flag and r.overall_accuracy == best,
        )
        for r in reports
    ]
    return ComparisonTable(stream=stream, rows=rows)


# --- file formats ----------------------------------------------------------


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    return value


def write_report_csv(report: RunReport, path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(REPORT_COLUMNS)
        for row in report.rows:
            writer.writerow([FORMAT_VERSION] + [_cell(v) for v in row.model_dump().values()])


def read_report_csv(path: Union[str, Path]) -> List[ChunkMetricsRow]:
    path = Path(path)
    if not path.is_file():
        raise ReportMismatchError(f"report not found: {path}")
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for record in csv.DictReader(f):
            version = int(record.pop("format_version"))
            if version != FORMAT_VERSION:
                raise ReportMismatchError(f"{path}: unsupported report format version {version}")
            rows.append(ChunkMetricsRow.model_validate({k: (v if v != "" else None) for k, v in record.items()}))
    return rows


def summary_dict(report: RunReport) -> Dict[str, Any]:
    return {
        "format_version": report.format_version,
        "label": report.label,
        "overall_accuracy": report.overall_accuracy,
        "memory_ratio": report.memory_ratio,
        "chunks": len(report.rows),
        "instances": report.rows[-1].seen if report.rows else 0,
        "prune_events": report.prune_events,
        "metadata": report.metadata.model_dump(mode="json"),
    }


def write_summary_json(report: RunReport, path: Union[str, Path]) -> None:
    data = summary_dict(report)
    if data["memory_ratio"] is None:
        del data["memory_ratio"]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def read_summary_json(path: Union[str, Path]) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if data.get("format_version") != FORMAT_VERSION:
        raise ReportMismatchError(f"{path}: unsupported summary format version {data.get('format_version')}")
    return data


def write_comparison_csv(table: ComparisonTable, path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(COMPARISON_COLUMNS)
        for row in table.rows:
            writer.writerow([FORMAT_VERSION] + [_cell(v) for v in row.model_dump().values()])


def curve_rows(runs: Sequence[Tuple[str, Sequence[ChunkMetricsRow]]]) -> List[Dict[str, Any]]:
    """
    Long-format prequential curves, one "curve" row per chunk plus one "prune"
    row per prune event, interleaved by instances seen.
    """
    out = []
    for order, (label, rows) in enumerate(runs):
        for row in rows:
            out.append((row.seen, order, 0, {"run": label, "kind": "curve", "seen": row.seen, "prequential_accuracy": row.prequential_accuracy}))
            if row.prune_event:
                out.append((row.seen, order, 1, {"run": label, "kind": "prune", "seen": row.seen, "prequential_accuracy": row.prequential_accuracy}))
    out.sort(key=lambda item: item[:3])
    return [item[3] for item in out]


def write_curves_csv(runs: Sequence[Tuple[str, Sequence[ChunkMetricsRow]]], path: Union[str, Path]) -> int:
    rows = curve_rows(runs)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CURVE_COLUMNS)
        for row in rows:
            writer.writerow([FORMAT_VERSION] + [_cell(row[c]) for c in CURVE_COLUMNS[1:]])
    return len(rows)
