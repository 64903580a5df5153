"""Deterministic 2D pick-and-insert task with a bottleneck channel.

The workspace is the unit square. A wall slab spans the middle with a
narrow gap (the channel); the agent must grasp the object on the left,
carry it through the gap, and release it on the goal slot to the right.
The gap is where naive cloned policies fail, which concentrates the
scripted human's interventions there.

All dynamics are pure functions over value states; randomness enters only
through the reset draw and (optionally) action noise, both driven by
explicitly passed PRNGs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np


class EpisodeOver(RuntimeError):
    """Raised when step() is called on a finished episode."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [lo, hi] per axis."""

    lo: tuple[float, float]
    hi: tuple[float, float]

    def contains(self, xy: tuple[float, float]) -> bool:
        return self.lo[0] <= xy[0] <= self.hi[0] and self.lo[1] <= xy[1] <= self.hi[1]

    def center(self) -> tuple[float, float]:
        return ((self.lo[0] + self.hi[0]) / 2.0, (self.lo[1] + self.hi[1]) / 2.0)


@dataclass(frozen=True)
class TaskConfig:
    task_id: str = "pick_insert"
    seed: int = 0
    horizon: int = 200
    max_step: float = 0.02
    agent_start: tuple[float, float] = (0.1, 0.5)
    object_init_region: Rect = Rect(lo=(0.15, 0.25), hi=(0.3, 0.75))
    goal_xy: tuple[float, float] = (0.8, 0.5)
    # The wall slab spans channel.lo[0]..channel.hi[0] in x; the rect itself
    # is the open gap (width 0.06 in y) the object must be carried through.
    channel: Rect = Rect(lo=(0.45, 0.47), hi=(0.6, 0.53))
    grasp_radius: float = 0.03
    insert_tolerance: float = 0.015
    action_noise_std: float = 0.0

    def __post_init__(self) -> None:
        if self.grasp_radius <= 0 or self.insert_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not self.object_init_region.hi[0] < self.channel.lo[0]:
            raise ValueError("object region must sit on the near side of the channel")
        if not self.channel.hi[0] < self.goal_xy[0]:
            raise ValueError("goal must sit on the far side of the channel")


@dataclass(frozen=True)
class EnvState:
    agent_xy: tuple[float, float]
    object_xy: tuple[float, float]
    carried: bool
    goal_xy: tuple[float, float]
    t: int


@dataclass(frozen=True)
class EnvAction:
    """Velocity command in [-1, 1]^2 plus a grip channel (>= 0 closes)."""

    dxdy: tuple[float, float]
    grip: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "dxdy", (_clip(self.dxdy[0], -1.0, 1.0), _clip(self.dxdy[1], -1.0, 1.0))
        )
        object.__setattr__(self, "grip", _clip(self.grip, -1.0, 1.0))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dxdy[0], self.dxdy[1], self.grip)


class StepResult(NamedTuple):
    state: EnvState
    reward: float
    done: bool
    success: bool


def _clip(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def in_wall(xy: tuple[float, float], config: TaskConfig) -> bool:
    """True when xy lies inside the wall slab (channel x-range, outside the gap)."""
    ch = config.channel
    return ch.lo[0] <= xy[0] <= ch.hi[0] and not (ch.lo[1] <= xy[1] <= ch.hi[1])


def in_exit_zone(xy: tuple[float, float], config: TaskConfig) -> bool:
    return xy[0] >= config.channel.hi[0]


# Substream index for per-episode action-noise draws (reset uses the bare
# [task seed, episode seed] stream).
NOISE_STREAM = 1


def noise_rng(config: TaskConfig, episode_seed: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, episode_seed, NOISE_STREAM])


def reset(config: TaskConfig, episode_seed: int) -> EnvState:
    """Start an episode: agent at fixed start, object uniform in its region."""
    rng = np.random.default_rng([config.seed, episode_seed])
    region = config.object_init_region
    ox = float(rng.uniform(region.lo[0], region.hi[0]))
    oy = float(rng.uniform(region.lo[1], region.hi[1]))
    return EnvState(
        agent_xy=config.agent_start,
        object_xy=(ox, oy),
        carried=False,
        goal_xy=config.goal_xy,
        t=0,
    )


def success_predicate(state: EnvState, config: TaskConfig) -> bool:
    """Inserted: object released on the goal slot, past the channel exit."""
    return (
        not state.carried
        and _dist(state.object_xy, state.goal_xy) <= config.insert_tolerance
        and in_exit_zone(state.object_xy, config)
    )


def step(
    state: EnvState,
    action: EnvAction,
    config: TaskConfig,
    rng: np.random.Generator | None = None,
) -> StepResult:
    """Advance one timestep. Movement is axis-decomposed so the agent slides
    along wall faces instead of sticking on diagonal contact."""
    if state.t >= config.horizon or success_predicate(state, config):
        raise EpisodeOver(f"episode already finished at t={state.t}")

    dx = config.max_step * action.dxdy[0]
    dy = config.max_step * action.dxdy[1]
    if config.action_noise_std > 0.0:
        if rng is None:
            raise ValueError("action noise enabled but no rng supplied")
        noise = rng.normal(0.0, config.action_noise_std, size=2)
        dx += float(noise[0])
        dy += float(noise[1])

    ax, ay = state.agent_xy
    nx = _clip(ax + dx, 0.0, 1.0)
    if in_wall((nx, ay), config):
        nx = ax
    ny = _clip(ay + dy, 0.0, 1.0)
    if in_wall((nx, ny), config):
        ny = ay
    agent = (nx, ny)

    carried = state.carried
    obj = state.object_xy
    if carried:
        obj = agent
    if action.grip >= 0.0 and not carried and _dist(agent, obj) <= config.grasp_radius:
        carried = True
        obj = agent
    elif action.grip < 0.0 and carried:
        carried = False
        obj = agent

    new_state = EnvState(
        agent_xy=agent, object_xy=obj, carried=carried, goal_xy=state.goal_xy, t=state.t + 1
    )
    success = success_predicate(new_state, config)
    done = success or new_state.t == config.horizon
    reward = 1.0 if success else 0.0
    return StepResult(new_state, reward, done, success)


def policy_features(state: EnvState) -> tuple[float, ...]:
    """Policy input: [agent, object, carried, goal - object] (7 reals)."""
    return (
        state.agent_xy[0],
        state.agent_xy[1],
        state.object_xy[0],
        state.object_xy[1],
        1.0 if state.carried else 0.0,
        state.goal_xy[0] - state.object_xy[0],
        state.goal_xy[1] - state.object_xy[1],
    )


STATE_DIM = 7
ACTION_DIM = 3

# Experiments run with action noise at 10% of the per-step reach, which
# keeps warmstart policies imperfect; tests default to the noise-free profile.
EXPERIMENT_NOISE_STD = 0.002


def with_noise(config: TaskConfig, std: float = EXPERIMENT_NOISE_STD) -> TaskConfig:
    return replace(config, action_noise_std=std)


def config_to_dict(config: TaskConfig) -> dict:
    return {
        "task_id": config.task_id,
        "seed": config.seed,
        "horizon": config.horizon,
        "max_step": config.max_step,
        "agent_start": list(config.agent_start),
        "object_init_region": {
            "lo": list(config.object_init_region.lo),
            "hi": list(config.object_init_region.hi),
        },
        "goal_xy": list(config.goal_xy),
        "channel": {"lo": list(config.channel.lo), "hi": list(config.channel.hi)},
        "grasp_radius": config.grasp_radius,
        "insert_tolerance": config.insert_tolerance,
        "action_noise_std": config.action_noise_std,
    }


def config_from_dict(doc: dict) -> TaskConfig:
    def rect(d: dict) -> Rect:
        return Rect(lo=tuple(d["lo"]), hi=tuple(d["hi"]))

    return TaskConfig(
        task_id=doc["task_id"],
        seed=int(doc["seed"]),
        horizon=int(doc["horizon"]),
        max_step=float(doc["max_step"]),
        agent_start=tuple(doc["agent_start"]),
        object_init_region=rect(doc["object_init_region"]),
        goal_xy=tuple(doc["goal_xy"]),
        channel=rect(doc["channel"]),
        grasp_radius=float(doc["grasp_radius"]),
        insert_tolerance=float(doc["insert_tolerance"]),
        action_noise_std=float(doc["action_noise_std"]),
    )


def load_task(path: str | Path) -> TaskConfig:
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_task(config: TaskConfig, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2) + "\n", encoding="utf-8")
