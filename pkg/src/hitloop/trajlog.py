"""Trajectory log files: JSON-lines episodes plus a directory manifest.

Each episode is a header line

    {"traj": {"round": ..., "seed": ..., "success": ..., "source": ..., "task_id": ..., "len": ...}}

followed by exactly `len` sample lines

    {"t": ..., "s": [...], "a": [...], "r": ..., "c": "demo"|"intv"|"preintv"|"robot"}

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly. Files are append-only; a dataset directory carries a
manifest naming the file order.
"""

from __future__ import annotations

import json
from pathlib import Path

from .data import ClassLabel, Dataset, Sample, Trajectory

MANIFEST_NAME = "manifest.json"


def _fmt(x: float) -> str:
    # 17 significant digits: exact float64 round-trip.
    return format(float(x), ".17g")


def _sample_line(s: Sample) -> str:
    sv = ", ".join(_fmt(v) for v in s.state)
    av = ", ".join(_fmt(v) for v in s.action)
    return '{"t": %d, "s": [%s], "a": [%s], "r": %s, "c": "%s"}' % (
        s.t,
        sv,
        av,
        _fmt(s.reward),
        s.label.value,
    )


def append_trajectory(path: Path, traj: Trajectory, task_id: str) -> None:
    """Append one episode (header + sample lines) to a log file."""
    header = {
        "traj": {
            "round": traj.round,
            "seed": traj.seed,
            "success": traj.success,
            "source": traj.source,
            "task_id": task_id,
            "len": len(traj),
        }
    }
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(header, separators=(", ", ": ")) + "\n")
        for s in traj.samples:
            f.write(_sample_line(s) + "\n")


def write_trajectories(path: Path, trajs: list[Trajectory], task_id: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("", encoding="utf-8")
    for traj in trajs:
        append_trajectory(path, traj, task_id)


def read_trajectories(path: Path) -> tuple[list[Trajectory], str]:
    """Read every episode from one log file. Returns (trajectories, task_id)."""
    trajs: list[Trajectory] = []
    task_id = ""
    with open(path, encoding="utf-8") as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    i = 0
    while i < len(lines):
        header = json.loads(lines[i])["traj"]
        task_id = header["task_id"]
        n = header["len"]
        samples = []
        for j in range(n):
            row = json.loads(lines[i + 1 + j])
            samples.append(
                Sample(
                    state=tuple(float(v) for v in row["s"]),
                    action=tuple(float(v) for v in row["a"]),
                    reward=float(row["r"]),
                    label=ClassLabel(row["c"]),
                    t=int(row["t"]),
                )
            )
        trajs.append(
            Trajectory(
                samples=tuple(samples),
                round=int(header["round"]),
                seed=int(header["seed"]),
                success=bool(header["success"]),
                source=str(header["source"]),
            )
        )
        i += 1 + n
    return trajs, task_id


def write_manifest(directory: Path, files: list[str], task_id: str) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    doc = {"task_id": task_id, "files": list(files)}
    (directory / MANIFEST_NAME).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_dataset(directory: Path) -> Dataset:
    """Load a dataset directory in manifest file order."""
    manifest = json.loads((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
    trajs: list[Trajectory] = []
    for name in manifest["files"]:
        file_trajs, _ = read_trajectories(directory / name)
        trajs.extend(file_trajs)
    return Dataset(trajectories=tuple(trajs), task_id=manifest["task_id"])
