"""Batch driver: synthetic data, spec validation, grid evaluation, reports.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime error.
"""

from __future__ import annotations

import json
import os
import sys

import click

from . import dsl, session as session_mod, sweep
from .ehr import HOURS_PER_DAY, load_store
from .errors import DslError, IngestError, SessionError, TrialGridError
from .grid import GridTooLargeError, grid_size
from .metrics import EngineConfig
from .synth import SyntheticConfig, generate_synthetic, write_store

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


@click.group()
def cli():
    """Eligibility-criteria exploration engine."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="Generator config JSON; defaults apply when omitted.")
@click.option("--seed", type=int, required=True)
@click.option("--out", "outdir", type=click.Path(), required=True)
def simulate(config_path, seed, outdir):
    """Generate a synthetic patient store into OUTDIR."""
    doc = {}
    if config_path:
        with open(config_path) as fh:
            doc = json.load(fh)
    config = SyntheticConfig.from_dict(doc)
    store = generate_synthetic(config, seed)
    paths = write_store(store, outdir)
    n_events = sum(len(p.events) for p in store.patients.values())
    n_labs = sum(
        len(s.points) for p in store.patients.values() for s in p.labs.values()
    )
    click.echo(
        f"wrote {len(store)} patients, {n_events} events, {n_labs} lab points "
        f"to {outdir}"
    )
    for path in paths.values():
        click.echo(f"  {path}")


@cli.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True), required=True)
def validate(spec_path):
    """Parse and validate a criteria spec; print the candidate grid size."""
    with open(spec_path) as fh:
        spec = dsl.parse_spec(fh.read())
    size = grid_size(spec)
    click.echo(
        f"ok: {len(spec.inclusions)} inclusion(s), {len(spec.exclusions)} "
        f"exclusion(s), {len(spec.adjustables)} adjustable(s)"
    )
    click.echo(str(size))


def _load_data_dir(data_dir):
    return load_store(
        os.path.join(data_dir, "patients.csv"),
        os.path.join(data_dir, "events.csv"),
        os.path.join(data_dir, "labs.csv"),
        os.path.join(data_dir, "dictionary.json"),
    )


@cli.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--spec", "spec_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--horizon-days", type=int, default=28, show_default=True)
@click.option("--ties", type=click.Choice(["breslow", "efron"]), default="breslow",
              show_default=True)
@click.option("--covariate", "covariates", multiple=True,
              help="Extra Cox covariate (repeatable).")
def evaluate(data_dir, spec_path, out_path, csv_path, threads, horizon_days, ties,
             covariates):
    """Evaluate every criterion candidate and write the results table."""
    store = _load_data_dir(data_dir)
    with open(spec_path) as fh:
        spec_text = fh.read()
    spec = dsl.parse_spec(spec_text)
    config = EngineConfig(
        horizon_hours=horizon_days * HOURS_PER_DAY,
        cox_covariates=tuple(covariates),
        ties=ties,
    )
    grid, results = sweep.evaluate_grid(store, spec, config, threads=threads)
    with open(out_path, "w") as fh:
        fh.write(sweep.results_json(grid, results, config))
    click.echo(f"evaluated {len(results)} candidates -> {out_path}")
    if csv_path:
        with open(csv_path, "w") as fh:
            fh.write(sweep.results_csv(results))
        click.echo(f"csv -> {csv_path}")


@cli.command()
@click.option("--results", "results_path", type=click.Path(exists=True), required=True)
@click.option("--session", "session_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def report(results_path, session_path, out_path):
    """Export a Markdown stage report for a saved session."""
    doc = sweep.load_results_json(results_path)
    sess = session_mod.load_session(session_path)
    adjustables = [
        dsl.AdjustableParam(
            name=a["name"], values=tuple(a["values"]), unit=a.get("unit")
        )
        for a in doc["manifest"]["adjustables"]
    ]
    text = session_mod.stage_report(sess, doc["results"], adjustables)
    with open(out_path, "w") as fh:
        fh.write(text)
    click.echo(f"report -> {out_path}")


@cli.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--threads", type=int, default=2, show_default=True,
              help="Worker count for evaluation jobs.")
@click.option("--horizon-days", type=int, default=28, show_default=True)
def serve(data_dir, port, host, threads, horizon_days):
    """Start the HTTP API over a data directory."""
    import uvicorn

    from .api import create_app

    store = _load_data_dir(data_dir)
    config = EngineConfig(horizon_hours=horizon_days * HOURS_PER_DAY)
    app = create_app(store, config, default_threads=threads,
                     session_dir=os.path.join(data_dir, "sessions"))
    uvicorn.run(app, host=host, port=port)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except (DslError, IngestError, GridTooLargeError, SessionError, ValueError) as exc:
        click.echo(f"validation error: {exc}", err=True)
        return EXIT_VALIDATION
    except (TrialGridError, OSError) as exc:
        click.echo(f"runtime error: {exc}", err=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
