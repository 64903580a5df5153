"""Pre-intervention relabeling.

The window of robot-controlled samples immediately before each human
takeover is what the human implicitly judged as heading toward failure;
those samples get the preintv class so the weighting scheme can null them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .data import ClassLabel, Trajectory, intervention_segments


@dataclass(frozen=True)
class LabelingConfig:
    """Window length (in steps) marked before each intervention start."""

    ell: int = 15

    def __post_init__(self) -> None:
        if self.ell < 0:
            raise ValueError("ell must be >= 0")


def relabel_preintv(traj: Trajectory, config: LabelingConfig) -> Trajectory:
    """Mark the ell robot-labeled steps before each intervention as preintv.

    Only robot samples change class; demo and intv samples are never
    touched, so applying the pass twice equals applying it once. Windows
    clip at the episode start and may cover the whole gap between two
    close interventions.
    """
    ell = config.ell
    to_mark = set()
    for start, _ in intervention_segments(traj):
        for i in range(max(0, start - ell), start):
            if traj.samples[i].label is ClassLabel.ROBOT:
                to_mark.add(i)
    if not to_mark:
        return traj
    samples = tuple(
        replace(s, label=ClassLabel.PREINTV) if i in to_mark else s
        for i, s in enumerate(traj.samples)
    )
    return replace(traj, samples=samples)
