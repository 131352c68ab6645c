"""Command-line front end: validate configs, run simulations, serve campaigns.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration. The
KGDP_THREADS environment variable caps how many replications run in
parallel (default 1, i.e. serial); results are byte-identical either way
because every replication is self-contained in its seed and rows are
written in seed order.
"""

from __future__ import annotations

import json
import os
import socket
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import __version__
from .config import ConfigError, config_digest, load_config_file, parse_config
from .harness import Trajectory, run_campaign, run_replications, summary_metric_names

RESULTS_NAME = "results.csv"
SUMMARY_NAME = "summary.csv"
MANIFEST_NAME = "manifest.json"


def _fmt(value) -> str:
    """Nothing for missing values, shortest round-trip form for floats."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def results_columns(dimension: int) -> list[str]:
    return [
        "run_id",
        "n",
        "policy",
        "x_index",
        "y_observed",
        "oc",
        "oc_pct",
        "entropy",
        "p_truth",
        "resampled",
        "f_mse_sqrt_norm",
    ] + [f"theta_err_{d}" for d in range(dimension)]


def _write_results(path: Path, cfg, trajectories: list[Trajectory]) -> None:
    cols = results_columns(cfg.model.dimension)
    lines = [",".join(cols)]
    for run_id, traj in enumerate(trajectories):
        for rec in traj.records:
            row = [
                str(run_id),
                str(rec.n),
                cfg.policy.value,
                str(rec.x_index),
                _fmt(rec.y),
                _fmt(rec.oc),
                _fmt(rec.oc_pct),
                _fmt(rec.entropy),
                _fmt(rec.p_truth),
                _fmt(rec.resampled),
                _fmt(rec.f_mse_sqrt_norm),
            ] + [_fmt(e) for e in rec.theta_errors]
            lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def _write_summary(path: Path, cfg, summary) -> None:
    names = summary_metric_names(cfg.model.dimension)
    cols = ["n"] + [f"mean_{m}" for m in names] + [f"sem_{m}" for m in names]
    lines = [",".join(cols)]
    for i, n in enumerate(summary.steps):
        row = [str(int(n))]
        row += [_fmt(float(summary.means[m][i])) for m in names]
        row += [_fmt(float(summary.sems[m][i])) for m in names]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def _worker_run(args: tuple[str, int]) -> Trajectory:
    doc_json, seed = args
    return run_campaign(parse_config(json.loads(doc_json)), seed)


def _max_workers() -> int:
    raw = os.environ.get("KGDP_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Sequential learning campaigns: simulate, validate, serve."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="JSON config file.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--seed", type=int, default=None, help="Override the config's base seed.")
@click.option("--replications", type=int, default=None, help="Override the replication count.")
def simulate(config_path, out_dir, seed, replications):
    """Run the configured campaign replications and write CSV results."""
    try:
        doc = load_config_file(config_path)
        if seed is not None:
            doc["seed"] = seed
        if replications is not None:
            doc["replications"] = replications
        cfg = parse_config(doc)
        if cfg.truth_mode == "external":
            raise ConfigError("truth_mode 'external' cannot be simulated; use from-pool or from-candidates")
    except ConfigError as exc:
        for message in exc.errors:
            click.echo(f"config error: {message}", err=True)
        sys.exit(2)

    try:
        seeds = cfg.replication_seeds()
        workers = min(_max_workers(), len(seeds))
        if workers > 1:
            doc_json = json.dumps(doc)
            with ProcessPoolExecutor(max_workers=workers) as pool:
                trajectories = list(pool.map(_worker_run, [(doc_json, s) for s in seeds]))
        else:
            trajectories = None
        trajectories, summary = run_replications(cfg, seeds=seeds, trajectories=trajectories)

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_results(out / RESULTS_NAME, cfg, trajectories)
        _write_summary(out / SUMMARY_NAME, cfg, summary)
        manifest = {
            "artifact_version": __version__,
            "config_digest": config_digest(doc),
            "replications": len(seeds),
            "seeds": seeds,
            "outputs": {
                "results": str(out / RESULTS_NAME),
                "summary": str(out / SUMMARY_NAME),
            },
        }
        (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except Exception as exc:  # noqa: BLE001
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    sys.exit(0)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def validate(config_path):
    """Parse and validate a config file without running anything."""
    try:
        parse_config(load_config_file(config_path))
    except ConfigError as exc:
        for message in exc.errors:
            click.echo(f"config error: {message}", err=True)
        sys.exit(2)
    click.echo("ok")
    sys.exit(0)


@main.command()
@click.option("--state", "state_dir", required=True, type=click.Path(), help="Campaign state directory.")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="Directory of built frontend assets to mount at /ui (default: ./webui/dist if present).")
def serve(state_dir, port, host, ui_dir):
    """Serve the campaign advisor HTTP API until terminated."""
    import uvicorn

    from .service import create_app

    state = Path(state_dir)
    if ui_dir is None:
        default_ui = Path.cwd() / "webui" / "dist"
        ui_dir = default_ui if default_ui.is_dir() else None
    try:
        state.mkdir(parents=True, exist_ok=True)
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        try:
            probe.bind((host, port))
        finally:
            probe.close()
    except OSError as exc:
        click.echo(f"error: cannot serve on {host}:{port}: {exc}", err=True)
        sys.exit(1)
    uvicorn.run(create_app(state, ui_dir=ui_dir), host=host, port=port, log_level="info")
