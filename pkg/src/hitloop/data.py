"""Shared data model: samples, trajectories, class labels, datasets.

Everything here has value semantics. Samples and trajectories are frozen
after construction; relabeling passes build new trajectories instead of
mutating, so data can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class ClassLabel(str, Enum):
    """Per-sample data class: who produced the action and how we treat it."""

    DEMO = "demo"
    INTV = "intv"
    PREINTV = "preintv"
    ROBOT = "robot"


ALL_LABELS = (ClassLabel.DEMO, ClassLabel.INTV, ClassLabel.PREINTV, ClassLabel.ROBOT)


class EmptyDataset(ValueError):
    """Raised when an operation needs at least one sample."""


@dataclass(frozen=True)
class Sample:
    """One timestep: state and action vectors, sparse reward, class label."""

    state: tuple[float, ...]
    action: tuple[float, ...]
    reward: float
    label: ClassLabel
    t: int

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError(f"step index must be non-negative, got {self.t}")
        if any(a < -1.0 or a > 1.0 for a in self.action):
            raise ValueError(f"action components must lie in [-1, 1]: {self.action}")


@dataclass(frozen=True)
class Trajectory:
    """An ordered episode of samples plus collection provenance.

    round 0 is reserved for warmstart demonstrations. Demonstrations are
    pure: a trajectory with any demo sample is all-demo.
    """

    samples: tuple[Sample, ...]
    round: int
    seed: int
    success: bool
    source: str = "scripted_oracle"

    def __post_init__(self) -> None:
        for i, s in enumerate(self.samples):
            if s.t != i:
                raise ValueError(f"sample t indices must be contiguous from 0, got {s.t} at {i}")
        labels = [s.label for s in self.samples]
        if ClassLabel.DEMO in labels and any(l is not ClassLabel.DEMO for l in labels):
            raise ValueError("demo trajectories must be pure (all samples labeled demo)")

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> list[ClassLabel]:
        return [s.label for s in self.samples]


@dataclass(frozen=True)
class Dataset:
    """A list of trajectories belonging to one task."""

    trajectories: tuple[Trajectory, ...]
    task_id: str

    def __len__(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def samples(self):
        for traj in self.trajectories:
            yield from traj.samples


@dataclass(frozen=True)
class ClassDistribution:
    """Probabilities over the four class labels; sums to one."""

    p: dict[ClassLabel, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        full = {c: float(self.p.get(c, 0.0)) for c in ALL_LABELS}
        object.__setattr__(self, "p", full)
        if any(v < 0.0 for v in full.values()):
            raise ValueError(f"probabilities must be non-negative: {full}")
        total = sum(full.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {total!r}")

    def __getitem__(self, c: ClassLabel) -> float:
        return self.p[c]


def class_counts(dataset: Dataset) -> dict[ClassLabel, int]:
    """Count samples per class; absent classes report 0."""
    counts = {c: 0 for c in ALL_LABELS}
    for s in dataset.samples():
        counts[s.label] += 1
    return counts


def class_distribution(dataset: Dataset) -> ClassDistribution:
    """Empirical class distribution n_c / N. Errors on an empty dataset."""
    counts = class_counts(dataset)
    n = sum(counts.values())
    if n == 0:
        raise EmptyDataset("cannot compute a class distribution over zero samples")
    return ClassDistribution({c: counts[c] / n for c in ALL_LABELS})


def intervention_segments(traj: Trajectory) -> list[tuple[int, int]]:
    """Maximal runs of intv-labeled samples as half-open [start, end) pairs."""
    segments: list[tuple[int, int]] = []
    start = None
    for i, s in enumerate(traj.samples):
        if s.label is ClassLabel.INTV:
            if start is None:
                start = i
        elif start is not None:
            segments.append((start, i))
            start = None
    if start is not None:
        segments.append((start, len(traj.samples)))
    return segments
