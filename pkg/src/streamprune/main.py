import contextlib
import functools
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, List, Optional

import toon_format as toon
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .config import ExperimentConfig, apply_overrides, load_experiment, save_experiment
from .errors import ConfigError, StreamPruneError
from .evaluation import read_report_csv, read_summary_json, write_comparison_csv, write_curves_csv
from .experiment import run_compare, run_paired, write_run_outputs
from .stream import GENERATORS, write_csv

app = typer.Typer(help="streamprune: class-wise ranking ensemble pruning for evolving data streams")
console = Console(stderr=True)


class OutputFormat(str, Enum):
    json = "json"
    toon = "toon"


class State:
    config_path: Optional[Path] = None
    out_dir: Optional[Path] = None
    seed: Optional[int] = None
    quiet: bool = False
    output_format: OutputFormat = OutputFormat.toon


state = State()


def configure_logging(quiet: bool) -> None:
    logger = logging.getLogger("streamprune")
    logger.handlers.clear()
    logger.addHandler(RichHandler(console=console, show_path=False))
    logger.setLevel(logging.WARNING if quiet else logging.INFO)
    logger.propagate = False


@app.callback()
def main(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Experiment config file (.json or .toml)."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory (overrides eval.out_dir)."),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Stream seed override."),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only print results and warnings."),
    format: OutputFormat = typer.Option(OutputFormat.toon, "--format", "-f", help="Output format: toon (default) or json."),
):
    """
    streamprune: prequential benchmark harness for pruned streaming ensembles
    """
    state.config_path = config
    state.out_dir = out
    state.seed = seed
    state.quiet = quiet
    state.output_format = format
    configure_logging(quiet)


def output_data(data: Any):
    """Helper to output data in the selected format."""
    if hasattr(data, "model_dump"):
        data = data.model_dump(mode="json")
    if state.output_format == OutputFormat.toon:
        print(toon.encode(data))
    else:
        print(json.dumps(data, indent=2))


def status(message: str):
    if state.quiet:
        return contextlib.nullcontext()
    return console.status(message)


def handle_errors(func):
    """Print errors as JSON with a hint and exit 1 (config) or 2 (runtime)."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except typer.Exit:
            raise
        except StreamPruneError as e:
            print(json.dumps({"error": str(e), "status": e.exit_code, "hint": e.hint}, indent=2))
            raise typer.Exit(code=e.exit_code)
        except Exception as e:
            print(json.dumps({
                "error": f"Unexpected error: {type(e).__name__}: {e}",
                "status": 2,
                "hint": "Runs are deterministic; re-running the saved config reproduces this error.",
            }))
            raise typer.Exit(code=2)

    return wrapper


def resolve_config(config: Optional[Path]) -> ExperimentConfig:
    path = config or state.config_path
    if path is None:
        raise ConfigError("No experiment config given.", hint="Pass a config path or use --config.")
    return apply_overrides(load_experiment(path), seed=state.seed, out_dir=state.out_dir)


@app.command()
@handle_errors
def run(config: Optional[Path] = typer.Argument(None, help="Experiment config file.")):
    """
    Run one prequential experiment (plus its unpruned baseline when pruning is paired).

    Example: streamprune run experiments/squares_awe_ccrp.json
    """
    cfg = resolve_config(config)
    with status(f"[bold green]Running {cfg.label}..."):
        report, baseline = run_paired(cfg)

    out_dir = Path(cfg.eval.out_dir)
    save_experiment(cfg, out_dir / f"{report.label}.config.json")
    csv_path, json_path = write_run_outputs(report, out_dir)
    summary = {
        "label": report.label,
        "overall_accuracy": report.overall_accuracy,
        "chunks": len(report.rows),
        "prune_events": len(report.prune_events),
        "report": str(csv_path),
        "summary": str(json_path),
    }
    if baseline is not None:
        write_run_outputs(baseline, out_dir)
        summary["baseline_overall_accuracy"] = baseline.overall_accuracy
        summary["memory_ratio"] = f"{report.memory_ratio:.1%}"
    output_data(summary)


@app.command()
@handle_errors
def compare(
    config: Optional[Path] = typer.Argument(None, help="Experiment config file with a 'schemes' list."),
    jobs: int = typer.Option(1, "--jobs", "-j", min=1, help="Scheme runs to execute in parallel."),
    pretty: bool = typer.Option(False, "--pretty", "-p", help="Display the comparison as a table for humans."),
):
    """
    Run each listed pruning scheme as the ensemble's replacement policy and compare them.

    Example: streamprune compare experiments/rbf_goowe_ablation.json --pretty
    """
    cfg = resolve_config(config)
    with status(f"[bold green]Comparing {len(cfg.schemes or [])} schemes..."):
        table, reports, baseline = run_compare(cfg, jobs)

    out_dir = Path(cfg.eval.out_dir)
    save_experiment(cfg, out_dir / "comparison.config.json")
    for report in reports + [baseline]:
        write_run_outputs(report, out_dir)
    comparison_path = out_dir / "comparison.csv"
    write_comparison_csv(table, comparison_path)

    if pretty:
        rich_table = Table(title="Overall accuracy by pruning scheme")
        rich_table.add_column("Run", style="cyan")
        rich_table.add_column("Scheme", style="white")
        rich_table.add_column("Accuracy", style="green")
        rich_table.add_column("Memory", style="blue")
        for row in table.rows:
            accuracy = f"{row.overall_accuracy:.3f}"
            rich_table.add_row(
                row.label,
                row.scheme,
                f"[underline]{accuracy}[/underline]" if row.winner else accuracy,
                f"{row.memory_ratio:.0%}" if row.memory_ratio is not None else "-",
            )
        Console().print(rich_table)
    else:
        output_data({
            "comparison": [row.model_dump(mode="json") for row in table.rows],
            "path": str(comparison_path),
        })


@app.command()
@handle_errors
def gen(
    name: str = typer.Argument(..., help=f"Generator: {', '.join(GENERATORS)}"),
    output: Path = typer.Argument(..., help="Destination csv file."),
    count: int = typer.Option(200_000, "--count", "-n", min=0, help="Number of instances."),
    seed: int = typer.Option(1, "--seed", min=0, help="Generator seed (the global --seed wins)."),
    param: Optional[List[str]] = typer.Option(None, "--param", help="Generator parameter as key=value."),
):
    """
    Materialize a synthetic stream as csv.

    Example: streamprune gen moving-squares squares.csv --count 200000 --seed 7
    """
    if name not in GENERATORS:
        raise ConfigError(f"Unknown generator {name!r}", hint=f"Choose one of: {', '.join(GENERATORS)}")
    params = {}
    for item in param or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"Malformed --param {item!r}", hint="Use key=value, e.g. --param drift_speed=0")
        try:
            params[key.strip()] = int(value) if key.strip() == "segment_length" else float(value)
        except ValueError:
            raise ConfigError(f"Parameter {key!r} needs a number, got {value!r}") from None
    try:
        source = GENERATORS[name](state.seed if state.seed is not None else seed, count, **params)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid generator parameters: {e}") from e
    try:
        with status(f"[bold green]Writing {count} instances to {output}..."):
            written = write_csv(source, output)
    except OSError as e:
        raise StreamPruneError(f"Cannot write {output}: {e}") from e
    output_data({"generator": name, "seed": source.seed, "rows": written, "path": str(output)})


@app.command()
@handle_errors
def curves(
    reports: Optional[List[Path]] = typer.Argument(None, help="Report csv files written by run/compare."),
    output: Optional[Path] = typer.Option(None, "--output", help="Destination csv (default: <out>/curves.csv)."),
):
    """
    Merge report curves into one long-format csv with prune-event rows.

    Example: streamprune curves results/awe-ccrp.csv results/awe-ccrp-baseline.csv --output curves.csv
    """
    if not reports:
        raise ConfigError("No reports given.", hint="Pass one or more report csv files.")
    runs = []
    for path in reports:
        label = path.stem
        summary_path = path.with_name(f"{path.stem}.summary.json")
        if summary_path.is_file():
            label = read_summary_json(summary_path)["label"]
        runs.append((label, read_report_csv(path)))
    if output is None:
        output = (state.out_dir or Path(".")) / "curves.csv"
    output.parent.mkdir(parents=True, exist_ok=True)
    rows = write_curves_csv(runs, output)
    output_data({
        "runs": len(runs),
        "rows": rows,
        "prune_events": sum(1 for _, rs in runs for r in rs if r.prune_event),
        "path": str(output),
    })


if __name__ == "__main__":
    app()
