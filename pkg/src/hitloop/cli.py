"""Operator entry points.

Experiment parameters live in JSON configs; flags are only paths, ports
and mode toggles, so a run directory plus its config copy reproduces the
result exactly. Exit codes: 0 done, 2 bad config, 3 runtime abort.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .data import ClassLabel, Dataset, class_distribution
from .env2d import load_task
from .labeling import relabel_preintv
from .loop import RunConfig, load_run_config, load_snapshot, run
from .memory import STRATEGIES, MemoryBuffer, intervention_count
from .metrics import convergence_epochs
from .oracle import generate_demo
from .seeding import DEMO_STREAM, derive_seed
from .trainer import TrainConfig, top_k_checkpoint_average, train
from .trajlog import read_dataset, write_manifest, write_trajectories
from .weighting import WeightingScheme, sweep_targets

log = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(click.ClickException):
    exit_code = EXIT_CONFIG


def _load_run_config(path: str) -> RunConfig:
    try:
        return load_run_config(path)
    except FileNotFoundError as err:
        raise ConfigError(f"config not found: {err}") from err
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"invalid run config: {err}") from err


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info logging.")
def main(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@main.command("demo-gen")
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--count", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_demo_gen(task_path: str, out_dir: str, count: int, seed: int) -> None:
    """Collect scripted demonstrations into a dataset directory."""
    if count < 1:
        raise ConfigError("--count must be >= 1")
    try:
        task = load_task(task_path)
    except (KeyError, ValueError) as err:
        raise ConfigError(f"invalid task file: {err}") from err
    out = Path(out_dir)
    try:
        demos = [generate_demo(task, derive_seed(seed, DEMO_STREAM, j)) for j in range(count)]
        write_trajectories(out / "demos.jsonl", demos, task.task_id)
        write_manifest(out, ["demos.jsonl"], task.task_id)
    except Exception as err:
        click.echo(f"demo generation failed: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(f"wrote {count} demonstrations to {out}")


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--sequential", is_flag=True, help="Run learning before deployment each round.")
def cmd_run(config_path: str, out_dir: str, sequential: bool) -> None:
    """Execute the full deployment-learning loop."""
    cfg = _load_run_config(config_path)
    if sequential:
        cfg = replace(cfg, parallel=False)
    try:
        result = run(cfg, out_dir)
    except Exception as err:
        click.echo(f"run aborted: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    for rec in result.records:
        click.echo(
            f"round {rec.round}: {rec.episodes} episodes, "
            f"intv_ratio {rec.intv_sample_ratio:.3f}, eval {rec.success_rate:.2f}"
        )
    click.echo(f"run complete: {len(result.records)} round records in {out_dir}")


def _round1_dataset(cfg: RunConfig, out: Path):
    """Warmstart plus the initial deployment, reused by both ablation sweeps."""
    base = replace(cfg, rounds=1)
    result = run(base, out / "round1_collect")
    return load_snapshot(out / "round1_collect", 1)


@main.command("ablate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--sweep", type=click.Choice(["intv_ratio", "remove_class"]), required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--grid-size", default=5, show_default=True, help="Points for intv_ratio sweep.")
def cmd_ablate(config_path: str, sweep: str, out_dir: str, grid_size: int) -> None:
    """Weighting ablations retrained on freshly collected round-1 data."""
    cfg = _load_run_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        trajs = _round1_dataset(cfg, out)
        p = class_distribution(Dataset(tuple(trajs), cfg.task.task_id))
        rows = []
        if sweep == "remove_class":
            settings = [("full", frozenset())] + [
                (f"-{flag.removeprefix('remove_')}", frozenset({flag}))
                for flag in ("remove_demo", "remove_intv", "remove_preintv")
            ]
            for name, flags in settings:
                scheme = replace(cfg.weighting, ablation_flags=flags)
                rows.append({"setting": name, **_retrain_score(trajs, scheme, cfg)})
        else:
            lo = p[ClassLabel.INTV]
            hi = 1.0 - p[ClassLabel.DEMO] - cfg.weighting.p_star_preintv
            grid = list(np.linspace(lo, hi, grid_size))
            for entry in sweep_targets(p, grid, cfg.weighting.p_star_preintv):
                row = {"setting": f"p_star_intv={entry.p_star_intv:.4f}", "status": entry.status}
                if entry.status == "ok":
                    scheme = replace(cfg.weighting, p_star_intv=entry.p_star_intv)
                    row.update(_retrain_score(trajs, scheme, cfg))
                rows.append(row)
        (out / "ablation.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    except Exception as err:
        click.echo(f"ablation aborted: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    for row in rows:
        click.echo(json.dumps(row))
    click.echo(f"wrote {out / 'ablation.json'}")


def _retrain_score(trajs, scheme: WeightingScheme, cfg: RunConfig) -> dict:
    tcfg = replace(cfg.train, seed=derive_seed(cfg.seed, 99))
    res = train(trajs, scheme, cfg.arch, tcfg, cfg.task)
    return {
        "status": "ok",
        "top3_success": top_k_checkpoint_average(res.log, 3),
        "fallback_unweighted": res.fallback_unweighted,
    }


@main.command("bench-memory")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--run-dir", "run_dir", required=True, type=click.Path(exists=True),
              help="A completed run directory whose data stream to replay.")
@click.option("--strategies", default="all", show_default=True)
@click.option("--caps", default="0.15,0.3,1.0", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_bench_memory(config_path: str, run_dir: str, strategies: str, caps: str, out_dir: str) -> None:
    """Replay a recorded run through each eviction strategy and retrain."""
    cfg = _load_run_config(config_path)
    names = list(STRATEGIES) if strategies == "all" else strategies.split(",")
    bad = [s for s in names if s not in STRATEGIES]
    if bad:
        raise ConfigError(f"unknown strategies {bad}; valid: {list(STRATEGIES)}")
    try:
        fractions = [float(c) for c in caps.split(",")]
    except ValueError as err:
        raise ConfigError(f"bad --caps: {err}") from err
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        stream = list(read_dataset(Path(run_dir)).trajectories)
        rows = bench_memory(stream, names, fractions, cfg)
        (out / "memory_bench.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    except Exception as err:
        click.echo(f"memory bench aborted: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    for row in rows:
        click.echo(json.dumps(row))
    click.echo(f"wrote {out / 'memory_bench.json'}")


def bench_memory(stream, names, fractions, cfg: RunConfig) -> list[dict]:
    total = len(stream)
    rows = []
    for frac in fractions:
        capacity = max(1, int(np.ceil(frac * total)))
        for name in names:
            buf = MemoryBuffer(capacity, name, rng_seed=derive_seed(cfg.seed, 7),
                               protect_demos=cfg.protect_demos)
            for traj in stream:
                buf.insert(traj)
            kept = list(buf.trajectories)
            tcfg = replace(cfg.train, seed=derive_seed(cfg.seed, 98))
            res = train(kept, cfg.weighting, cfg.arch, tcfg, cfg.task)
            rows.append(
                {
                    "strategy": name,
                    "cap_fraction": frac,
                    "capacity": capacity,
                    "kept_trajectories": len(kept),
                    "kept_intv_samples": sum(intervention_count(t) for t in kept),
                    "top3_success": top_k_checkpoint_average(res.log, 3),
                    "convergence_epochs": convergence_epochs(res.log),
                }
            )
    return rows


@main.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--port", default=8711, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def cmd_serve(config_path: str, out_dir: str, port: int, host: str) -> None:
    """Run the deployment loop with a live human intervenor over WebSocket."""
    cfg = _load_run_config(config_path)
    from .gateway import serve_live_run

    try:
        serve_live_run(cfg, Path(out_dir), host=host, port=port)
    except OSError as err:
        click.echo(f"cannot bind {host}:{port}: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    except KeyboardInterrupt:
        click.echo("interrupted; buffers flushed")


if __name__ == "__main__":
    main()
