"""Turns an ExperimentConfig into sources, ensembles and finished reports."""

import logging
from collections import Counter
from pathlib import Path
from typing import List, Optional, Tuple

from joblib import Parallel, delayed

from .config import ExperimentConfig, LearnerSpec, StreamSpec, parse_experiment
from .ensembles import ENSEMBLES, ChunkEnsemble, LearnerFactory
from .errors import ConfigError
from .evaluation import compare_runs, pair_reports, run_prequential, write_report_csv, write_summary_json
from .learners import make_learner
from .models import ComparisonTable, PruneScheme, RunMetadata, RunReport, StreamSchema
from .pruner import warn_if_undersized
from .stream import GENERATORS, StreamSource, load_csv

log = logging.getLogger(__name__)


def build_source(spec: StreamSpec) -> StreamSource:
    if spec.origin == "csv-file":
        source = load_csv(spec.path)
        if source.schema.num_classes <= 2:
            raise ConfigError(
                f"{spec.path} has {len(source.label_map)} classes; pruning experiments need more than 2",
            )
        return source
    params = dict(spec.params)
    if "segment_length" in params:
        params["segment_length"] = int(params["segment_length"])
    return GENERATORS[spec.origin](spec.seed, spec.total_instances, **params)


def learner_factory(spec: LearnerSpec, schema: StreamSchema) -> LearnerFactory:
    hyperparameters = spec.hyperparameters()

    def factory(component_id: int, birth_chunk: int):
        return make_learner(spec.kind, schema, component_id, birth_chunk, **hyperparameters)

    return factory


def build_ensemble(config: ExperimentConfig, schema: StreamSchema) -> ChunkEnsemble:
    cls = ENSEMBLES[config.ensemble.kind]
    return cls(schema, config.ensemble.max_size, learner_factory(config.learner, schema))


def run_experiment(config: ExperimentConfig, prune: bool = True, label: Optional[str] = None) -> RunReport:
    """One prequential run; `prune=False` runs the same config with the default replacement policy."""
    source = build_source(config.stream)
    prune_config = config.prune.to_config() if prune and config.prune is not None else None
    if prune_config is not None:
        if prune_config.window is None:
            prune_config = prune_config.model_copy(update={"window": config.ensemble.chunk_size})
        warn_if_undersized(prune_config, source.schema.num_classes)

    if label is None:
        label = config.label if prune_config is not None or config.prune is None else f"{config.label}-baseline"
    metadata = RunMetadata(
        label=label,
        stream=source.metadata(),
        ensemble=config.ensemble.kind,
        learner={"kind": config.learner.kind, **config.learner.hyperparameters()},
        chunk_size=config.ensemble.chunk_size,
        max_size=config.ensemble.max_size,
        prune=prune_config.model_dump(mode="json") if prune_config is not None else None,
        prequential_window=config.eval.window,
        config=config.model_dump(mode="json"),
    )
    diagnostics_dir = None
    if config.eval.diagnostics and prune_config is not None:
        diagnostics_dir = Path(config.eval.out_dir) / f"{label}-diagnostics"
        diagnostics_dir.mkdir(parents=True, exist_ok=True)

    log.info("Running %s on %s", label, source.origin)
    return run_prequential(
        source,
        build_ensemble(config, source.schema),
        prune_config,
        chunk_size=config.ensemble.chunk_size,
        window_size=config.eval.window,
        metadata=metadata,
        diagnostics_dir=diagnostics_dir,
    )


def replay(metadata: RunMetadata) -> RunReport:
    """Re-run a report from its own metadata; a paired report gets its baseline re-run and paired again."""
    if metadata.config is None:
        raise ConfigError(f"report {metadata.label!r} carries no config to replay")
    config = parse_experiment(metadata.config)
    report = run_experiment(config, prune=metadata.prune is not None, label=metadata.label)
    if not metadata.paired:
        return report
    return pair_reports(report, run_experiment(config, prune=False))


def run_paired(config: ExperimentConfig) -> Tuple[RunReport, Optional[RunReport]]:
    """The configured run plus, when pruning is paired, the unpruned baseline on the same stream."""
    report = run_experiment(config)
    if config.prune is None or not config.prune.paired:
        return report, None
    baseline = run_experiment(config, prune=False)
    return pair_reports(report, baseline), baseline


def scheme_config(config: ExperimentConfig, scheme: PruneScheme, label: Optional[str] = None) -> ExperimentConfig:
    data = config.model_dump(mode="json")
    data["prune"]["scheme"] = PruneScheme(scheme).value
    data["eval"]["label"] = label or f"{config.ensemble.kind}-{PruneScheme(scheme).value}"
    data["schemes"] = None
    return parse_experiment(data)


def scheme_labels(config: ExperimentConfig) -> List[str]:
    """One label per listed scheme; a scheme listed more than once gets a -1, -2, ... suffix."""
    names = [PruneScheme(s).value for s in config.schemes or []]
    totals = Counter(names)
    seen: Counter = Counter()
    labels = []
    for name in names:
        label = f"{config.ensemble.kind}-{name}"
        if totals[name] > 1:
            seen[name] += 1
            label = f"{label}-{seen[name]}"
        labels.append(label)
    return labels


def run_compare(config: ExperimentConfig, jobs: int = 1) -> Tuple[ComparisonTable, List[RunReport], RunReport]:
    """Run every listed scheme as the replacement/prune policy, plus one shared baseline."""
    if not config.schemes or len(config.schemes) < 2:
        raise ConfigError(
            "compare needs at least two entries in 'schemes'",
            hint="e.g. \"schemes\": [\"ccrp\", \"weight-based\", \"regular-borda\"]",
        )
    labels = scheme_labels(config)
    tasks = [(scheme_config(config, s, label), True) for s, label in zip(config.schemes, labels)]
    tasks.append((scheme_config(config, config.schemes[0]), False))
    labels.append(f"{config.ensemble.kind}-baseline")
    results = Parallel(n_jobs=jobs)(
        delayed(run_experiment)(cfg, prune, label) for (cfg, prune), label in zip(tasks, labels)
    )
    baseline = results[-1]
    reports = [pair_reports(r, baseline) for r in results[:-1]]
    return compare_runs(reports), reports, baseline


def write_run_outputs(report: RunReport, out_dir: Path) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{report.label}.csv"
    json_path = out_dir / f"{report.label}.summary.json"
    write_report_csv(report, csv_path)
    write_summary_json(report, json_path)
    return csv_path, json_path
