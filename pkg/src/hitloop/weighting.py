"""Class rebalancing: target distributions and per-sample weights.

Weighting a sample of class c by w(c) = P*(c) / P(c) makes the weighted
training objective an expectation under the target distribution P*, so
choosing P* is choosing what the policy pays attention to. The default
scheme boosts interventions to a fixed share, nulls pre-interventions,
pins the demo share at its empirical value, and lets the robot share
absorb the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import ALL_LABELS, ClassDistribution, ClassLabel


class InfeasibleTarget(ValueError):
    """The requested targets leave negative mass for the robot class."""


class MissingClass(ValueError):
    """A scheme wants to boost a class that has no samples."""


class DivisionByZeroClass(ValueError):
    """Target mass assigned to a class with zero probability."""


VALID_KINDS = ("sirius", "iwr", "unweighted")
ABLATION_CLASSES = {
    "remove_demo": ClassLabel.DEMO,
    "remove_intv": ClassLabel.INTV,
    "remove_preintv": ClassLabel.PREINTV,
}


@dataclass(frozen=True)
class WeightingScheme:
    kind: str = "sirius"
    p_star_intv: float = 0.5
    p_star_preintv: float = 0.0
    ablation_flags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.kind not in VALID_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if not 0.0 < self.p_star_intv < 1.0:
            raise ValueError("p_star_intv must lie in (0, 1)")
        if self.p_star_preintv < 0.0:
            raise ValueError("p_star_preintv must be >= 0")
        if self.p_star_intv + self.p_star_preintv >= 1.0:
            raise ValueError("intv and preintv targets must leave room for the rest")
        object.__setattr__(self, "ablation_flags", frozenset(self.ablation_flags))
        unknown = self.ablation_flags - set(ABLATION_CLASSES)
        if unknown:
            raise ValueError(f"unknown ablation flags {sorted(unknown)}")


@dataclass(frozen=True)
class WeightTable:
    """Per-class loss weights; the weighted class distribution stays a distribution."""

    w: dict[ClassLabel, float]

    def __post_init__(self) -> None:
        if any(v < 0.0 for v in self.w.values()):
            raise ValueError("weights must be non-negative")

    def __getitem__(self, c: ClassLabel) -> float:
        return self.w[c]


def target_distribution(p: ClassDistribution, scheme: WeightingScheme) -> ClassDistribution:
    """Compute P* for the scheme. Ablation flags fold a class into robot:
    its samples inherit whatever weight the robot class ends up with."""
    if scheme.kind == "unweighted":
        return ClassDistribution(dict(p.p))
    if scheme.kind == "iwr":
        return _iwr_target(p, scheme)
    return _sirius_target(p, scheme)


def _sirius_target(p: ClassDistribution, scheme: WeightingScheme) -> ClassDistribution:
    grouped = {ClassLabel.ROBOT} | {ABLATION_CLASSES[f] for f in scheme.ablation_flags}
    pinned: dict[ClassLabel, float] = {}
    if ClassLabel.INTV not in grouped:
        pinned[ClassLabel.INTV] = scheme.p_star_intv
    if ClassLabel.PREINTV not in grouped:
        pinned[ClassLabel.PREINTV] = scheme.p_star_preintv
    if ClassLabel.DEMO not in grouped:
        pinned[ClassLabel.DEMO] = p[ClassLabel.DEMO]

    for c, mass in pinned.items():
        if mass > 0.0 and p[c] == 0.0:
            raise MissingClass(f"target boosts class {c.value!r} but it has no samples")

    residual = 1.0 - sum(pinned.values())
    group_mass = sum(p[c] for c in grouped)
    if residual < -1e-12:
        raise InfeasibleTarget(
            f"targets sum to {sum(pinned.values()):.6f}; no mass left for the robot group"
        )
    residual = max(residual, 0.0)
    if group_mass == 0.0:
        if residual > 1e-12:
            raise MissingClass("residual mass assigned to an empty robot group")
        scale = 0.0
    else:
        scale = residual / group_mass

    target = dict(pinned)
    for c in grouped:
        target[c] = p[c] * scale
    return ClassDistribution(target)


def _iwr_target(p: ClassDistribution, scheme: WeightingScheme) -> ClassDistribution:
    """Two-class rebalance: intv versus everything else, the rest keeping
    their relative proportions."""
    boost = scheme.p_star_intv
    if p[ClassLabel.INTV] == 0.0:
        raise MissingClass("iwr boosts intv but there are no intv samples")
    rest = 1.0 - p[ClassLabel.INTV]
    if rest == 0.0:
        raise InfeasibleTarget("iwr needs at least one non-intv sample")
    target = {c: (1.0 - boost) * p[c] / rest for c in ALL_LABELS if c is not ClassLabel.INTV}
    target[ClassLabel.INTV] = boost
    return ClassDistribution(target)


def weight_table(p: ClassDistribution, p_star: ClassDistribution) -> WeightTable:
    """w(c) = P*(c) / P(c); absent classes with no target mass get weight 0."""
    w: dict[ClassLabel, float] = {}
    for c in ALL_LABELS:
        if p[c] > 0.0:
            w[c] = p_star[c] / p[c]
        elif p_star[c] == 0.0:
            w[c] = 0.0
        else:
            raise DivisionByZeroClass(f"class {c.value!r} has target mass but no samples")
    return WeightTable(w)


@dataclass(frozen=True)
class SweepEntry:
    p_star_intv: float
    target: ClassDistribution | None
    status: str  # "ok" | error message


def sweep_targets(
    p: ClassDistribution,
    grid: list[float],
    p_star_preintv: float = 0.0,
) -> list[SweepEntry]:
    """One target per grid value of the intv share; infeasible entries are
    reported in place rather than dropped."""
    entries: list[SweepEntry] = []
    for value in grid:
        try:
            scheme = WeightingScheme(kind="sirius", p_star_intv=value, p_star_preintv=p_star_preintv)
            target = target_distribution(p, scheme)
        except (ValueError, InfeasibleTarget, MissingClass) as err:
            entries.append(SweepEntry(p_star_intv=value, target=None, status=str(err)))
        else:
            entries.append(SweepEntry(p_star_intv=value, target=target, status="ok"))
    return entries
