"""Fixed-capacity trajectory buffer with pluggable eviction.

Capacity counts trajectories. Strategies rank eviction victims: by
intervention-sample count (LFI least first, MFI most first), by insertion
age (FIFO oldest first, FILO newest first), or seeded-uniformly. Demos are
exempt by default, so eviction pressure falls entirely on deployment data;
if the protected demos alone fill the cap there is nothing left to evict
and insertion fails loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import ClassLabel, Trajectory

STRATEGIES = ("LFI", "MFI", "FIFO", "FILO", "Uniform")


class CapacityInfeasible(RuntimeError):
    """Protected trajectories alone exceed the buffer capacity."""


def intervention_count(traj: Trajectory) -> int:
    """Number of intv-labeled samples (the unit eviction strategies rank by)."""
    return sum(1 for s in traj.samples if s.label is ClassLabel.INTV)


def _is_demo(traj: Trajectory) -> bool:
    return len(traj) > 0 and traj.samples[0].label is ClassLabel.DEMO


@dataclass
class _Entry:
    seq: int  # insertion order, total and stable
    traj: Trajectory
    intv: int


class MemoryBuffer:
    def __init__(
        self,
        capacity: int,
        strategy: str = "FIFO",
        rng_seed: int = 0,
        protect_demos: bool = True,
    ):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
        self.capacity = capacity
        self.strategy = strategy
        self.rng_seed = rng_seed
        self.protect_demos = protect_demos
        self._rng = np.random.default_rng(rng_seed)
        self._entries: list[_Entry] = []
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def trajectories(self) -> tuple[Trajectory, ...]:
        return tuple(e.traj for e in self._entries)

    def snapshot(self) -> tuple[Trajectory, ...]:
        """Immutable view for the learning thread; safe under concurrent inserts."""
        return self.trajectories

    def insert(self, traj: Trajectory) -> None:
        self._entries.append(_Entry(self._next_seq, traj, intervention_count(traj)))
        self._next_seq += 1
        self.evict()

    def evict(self) -> None:
        """Remove trajectories per the strategy until back at capacity."""
        while len(self._entries) > self.capacity:
            self.evict_one()

    def evict_one(self) -> Trajectory:
        candidates = [
            e for e in self._entries if not (self.protect_demos and _is_demo(e.traj))
        ]
        if not candidates:
            raise CapacityInfeasible(
                f"{len(self._entries)} protected trajectories exceed capacity {self.capacity}"
            )
        victim = self._pick_victim(candidates)
        self._entries = [e for e in self._entries if e.seq != victim.seq]
        return victim.traj

    def _pick_victim(self, candidates: list[_Entry]) -> _Entry:
        if self.strategy == "LFI":
            # Least-intervened goes first; ties evict the older insertion.
            return min(candidates, key=lambda e: (e.intv, e.seq))
        if self.strategy == "MFI":
            return min(candidates, key=lambda e: (-e.intv, e.seq))
        if self.strategy == "FIFO":
            return min(candidates, key=lambda e: e.seq)
        if self.strategy == "FILO":
            return max(candidates, key=lambda e: e.seq)
        return candidates[int(self._rng.integers(len(candidates)))]

    def manifest(self) -> dict:
        """Resumable state: ordered trajectory references plus intv counts."""
        return {
            "capacity": self.capacity,
            "strategy": self.strategy,
            "rng_seed": self.rng_seed,
            "protect_demos": self.protect_demos,
            "entries": [
                {
                    "seq": e.seq,
                    "round": e.traj.round,
                    "seed": e.traj.seed,
                    "intv_samples": e.intv,
                    "len": len(e.traj),
                }
                for e in self._entries
            ],
        }

    def write_manifest(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.manifest(), indent=2) + "\n", encoding="utf-8")
