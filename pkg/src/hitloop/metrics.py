"""Workload metrics per round and cross-run aggregation.

Everything is a pure function of stored trajectories, so every number in a
report can be recomputed from the logs alone.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import ClassLabel, Trajectory, intervention_segments
from .trainer import LogRow


class EmptyRound(ValueError):
    """Metric requested over a round with no trajectories."""


class MismatchedConfigs(ValueError):
    """Aggregation inputs do not share the same run shape."""


@dataclass(frozen=True)
class WorkloadMetrics:
    intv_sample_ratio: float
    intv_frequency: float
    mean_intv_length: float
    n_rollouts: int
    n_segments: int

    def to_dict(self) -> dict:
        return asdict(self)


def intervention_sample_ratio(trajs: Sequence[Trajectory]) -> float:
    if not trajs:
        raise EmptyRound("no trajectories in round")
    total = sum(len(t) for t in trajs)
    intv = sum(1 for t in trajs for s in t.samples if s.label is ClassLabel.INTV)
    return intv / total


def intervention_frequency(trajs: Sequence[Trajectory]) -> float:
    """Intervention occurrences per rollout (context switches onto the human)."""
    if not trajs:
        raise EmptyRound("no trajectories in round")
    segments = sum(len(intervention_segments(t)) for t in trajs)
    return segments / len(trajs)


def mean_intervention_length(trajs: Sequence[Trajectory]) -> float:
    """Mean intervention segment length in steps; 0.0 when there are none."""
    lengths = [e - s for t in trajs for s, e in intervention_segments(t)]
    if not lengths:
        return 0.0
    return float(np.mean(lengths))


def workload_metrics(trajs: Sequence[Trajectory]) -> WorkloadMetrics:
    segments = sum(len(intervention_segments(t)) for t in trajs)
    return WorkloadMetrics(
        intv_sample_ratio=intervention_sample_ratio(trajs),
        intv_frequency=intervention_frequency(trajs),
        mean_intv_length=mean_intervention_length(trajs),
        n_rollouts=len(trajs),
        n_segments=segments,
    )


def convergence_epochs(rows: Sequence[LogRow], target: float = 0.9) -> int | None:
    """First epoch whose evaluated success reaches the target; None if never."""
    for r in rows:
        if r.eval_success is not None and r.eval_success >= target:
            return r.epoch
    return None


def ownership_timeline(trajs: Sequence[Trajectory], round_idx: int) -> list[tuple[str, int, str]]:
    """(rollout_id, t, owner) rows: a step belongs to the human iff it is intv."""
    rows = []
    for k, traj in enumerate(trajs):
        rid = f"round{round_idx}_ep{k}"
        for s in traj.samples:
            owner = "human" if s.label is ClassLabel.INTV else "robot"
            rows.append((rid, s.t, owner))
    return rows


def write_timeline_csv(path: str | Path, rows: Sequence[tuple[str, int, str]]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["rollout_id", "t", "owner"])
        writer.writerows(rows)


def aggregate(run_dirs: Sequence[str | Path], out_dir: str | Path) -> list[dict]:
    """Combine per-round records across runs into mean/std report tables.

    Expects each run directory to hold a records.json written by the
    deployment loop. Emits report.csv; returns the table rows.
    """
    all_records = []
    for d in run_dirs:
        path = Path(d) / "records.json"
        if not path.exists():
            raise MismatchedConfigs(f"{d} has no records.json")
        all_records.append(json.loads(path.read_text(encoding="utf-8")))

    shapes = {tuple(rec["round"] for rec in records) for records in all_records}
    if len(shapes) != 1:
        raise MismatchedConfigs(f"runs disagree on round structure: {sorted(shapes)}")

    rounds = sorted(shapes)[0]
    table = []
    for i, round_idx in enumerate(rounds):
        per_run = [records[i] for records in all_records]
        row = {"round": round_idx, "n_runs": len(per_run)}
        for key in ("success_rate", "intv_sample_ratio", "intv_frequency", "mean_intv_length"):
            values = [rec[key] for rec in per_run]
            row[f"{key}_mean"] = float(np.mean(values))
            row[f"{key}_std"] = float(np.std(values))
        table.append(row)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(table[0].keys()))
        writer.writeheader()
        writer.writerows(table)
    return table
