"""Scripted stand-in for the human operator.

Three pieces: an expert waypoint controller, a monitor that decides when
the robot needs help, and an arbiter that models human-gated takeover with
a fixed reaction delay. The arbiter never lets labels lie: samples are
intv exactly while the human holds control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ClassLabel, Sample, Trajectory
from .env2d import (
    EnvAction,
    EnvState,
    TaskConfig,
    noise_rng,
    policy_features,
    reset,
    step,
    success_predicate,
)

ENTRY_MARGIN = 0.05

# Substream for the scripted human's motor jitter.
JITTER_STREAM = 2

# Uniform half-width added to the expert's velocity command. Real operators
# do not reproduce exact proportional control; finite-width action
# conditionals also keep the mixture head's stds off their clamp floor,
# which the delta-exact controller would otherwise drive them to.
DEFAULT_ACTION_JITTER = 0.1


class DemoFailed(RuntimeError):
    """The expert could not finish an episode; the task config is broken."""


@dataclass(frozen=True)
class InterventionModel:
    """When the scripted human grabs control and when it lets go.

    The takeover alarm fires on any of: no net movement over the stall
    window, agent too far from the expert corridor, or the object dropped
    outside the channel. A persistent alarm turns into a takeover after
    reaction_delay_steps; control returns after release_hold_steps of
    consecutive clear monitor readings.
    """

    reaction_delay_steps: int = 15
    stall_window: int = 20
    stall_displacement: float = 0.01
    corridor_tolerance: float = 0.08
    release_hold_steps: int = 10
    action_jitter: float = DEFAULT_ACTION_JITTER
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.reaction_delay_steps < 0:
            raise ValueError("reaction_delay_steps must be >= 0")
        if self.release_hold_steps < 1:
            raise ValueError("release_hold_steps must be >= 1")


@dataclass(frozen=True)
class ControlOwner:
    """Who drives right now, plus alarm/release bookkeeping."""

    owner: str = "robot"  # "robot" | "human"
    pending_alarm_age: int | None = None
    clear_streak: int = 0


def channel_waypoints(config: TaskConfig) -> tuple[tuple[float, float], tuple[float, float]]:
    """Entrance and exit points just outside the channel gap, on its centerline."""
    cy = (config.channel.lo[1] + config.channel.hi[1]) / 2.0
    entrance = (config.channel.lo[0] - ENTRY_MARGIN, cy)
    exit_ = (config.channel.hi[0] + ENTRY_MARGIN, cy)
    return entrance, exit_


def expert_action(state: EnvState, config: TaskConfig) -> EnvAction:
    """Proportional control toward the current phase waypoint.

    Direction is preserved exactly: the desired step is divided by its
    max-norm when it exceeds one env step, so far targets produce a
    saturated command pointing straight at them.
    """
    if success_predicate(state, config):
        return EnvAction(dxdy=(0.0, 0.0), grip=-1.0)

    ax, ay = state.agent_xy
    entrance, exit_ = channel_waypoints(config)
    if not state.carried:
        target = state.object_xy
        near = _dist(state.agent_xy, state.object_xy) <= 2.0 * config.grasp_radius
        grip = 1.0 if near else -1.0
    else:
        grip = 1.0
        if ax < entrance[0] - 1e-12:
            target = entrance
        elif ax < exit_[0] - 1e-12:
            target = exit_
        elif _dist(state.agent_xy, state.goal_xy) > config.insert_tolerance * 0.5:
            target = state.goal_xy
        else:
            return EnvAction(dxdy=(0.0, 0.0), grip=-1.0)

    raw = ((target[0] - ax) / config.max_step, (target[1] - ay) / config.max_step)
    scale = max(1.0, abs(raw[0]), abs(raw[1]))
    return EnvAction(dxdy=(raw[0] / scale, raw[1] / scale), grip=grip)


def dithered(action: EnvAction, rng: np.random.Generator, scale: float) -> EnvAction:
    """Expert command with uniform motor jitter on the velocity channels."""
    if scale <= 0.0:
        return action
    jit = rng.uniform(-scale, scale, size=2)
    return EnvAction(
        dxdy=(action.dxdy[0] + float(jit[0]), action.dxdy[1] + float(jit[1])),
        grip=action.grip,
    )


def expert_corridor(initial: EnvState, config: TaskConfig) -> list[tuple[float, float]]:
    """Waypoint polyline the expert traverses for this episode's object draw."""
    entrance, exit_ = channel_waypoints(config)
    return [config.agent_start, initial.object_xy, entrance, exit_, initial.goal_xy]


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _point_segment_distance(
    p: tuple[float, float], a: tuple[float, float], b: tuple[float, float]
) -> float:
    vx, vy = b[0] - a[0], b[1] - a[1]
    wx, wy = p[0] - a[0], p[1] - a[1]
    vv = vx * vx + vy * vy
    if vv == 0.0:
        return math.hypot(wx, wy)
    u = max(0.0, min(1.0, (wx * vx + wy * vy) / vv))
    return math.hypot(wx - u * vx, wy - u * vy)


def corridor_distance(p: tuple[float, float], polyline: Sequence[tuple[float, float]]) -> float:
    return min(_point_segment_distance(p, polyline[i], polyline[i + 1]) for i in range(len(polyline) - 1))


def monitor(
    history: Sequence[EnvState],
    owner: ControlOwner,
    config: TaskConfig,
    model: InterventionModel,
) -> bool:
    """True when any takeover predicate fires on the current state.

    `history` is the episode's states so far, oldest first; the stall
    window pads by repeating the initial state when shorter than W. The
    predicates do not depend on `owner`; it is part of the signature so
    owner-aware policies can slot in.
    """
    del owner
    first = history[0]
    state = history[-1]

    if success_predicate(state, config):
        return False

    # Progress stall: needs a full window of real transitions before it can
    # fire, otherwise episode starts would alarm vacuously.
    w = model.stall_window
    anchor = history[max(0, len(history) - 1 - w)]
    if state.t >= w and _dist(state.agent_xy, anchor.agent_xy) < model.stall_displacement:
        return True

    # Off-corridor wandering, measured against this episode's expert route.
    polyline = expert_corridor(first, config)
    if corridor_distance(state.agent_xy, polyline) > model.corridor_tolerance:
        return True

    # Object put down somewhere it does not belong.
    moved = _dist(state.object_xy, first.object_xy) > 1e-9
    if not state.carried and moved and not config.channel.contains(state.object_xy):
        return True

    return False


def arbitrate(
    owner: ControlOwner,
    alarm: bool,
    state: EnvState,
    robot_action: EnvAction,
    model: InterventionModel,
    config: TaskConfig,
) -> tuple[ControlOwner, EnvAction, ClassLabel]:
    """One arbitration step of the human-gated team policy.

    A persistent alarm ages until it reaches the reaction delay, at which
    point the human takes over (that step is already human-controlled).
    The human keeps control until the monitor has been clear for
    release_hold_steps consecutive steps.
    """
    if owner.owner == "robot":
        if alarm:
            age = 0 if owner.pending_alarm_age is None else owner.pending_alarm_age + 1
            if age >= model.reaction_delay_steps:
                new_owner = ControlOwner(owner="human")
                return new_owner, expert_action(state, config), ClassLabel.INTV
            return ControlOwner(owner="robot", pending_alarm_age=age), robot_action, ClassLabel.ROBOT
        return ControlOwner(owner="robot"), robot_action, ClassLabel.ROBOT

    streak = 0 if alarm else owner.clear_streak + 1
    action = expert_action(state, config)
    if streak >= model.release_hold_steps:
        return ControlOwner(owner="robot"), action, ClassLabel.INTV
    return ControlOwner(owner="human", clear_streak=streak), action, ClassLabel.INTV


def generate_demo(
    config: TaskConfig, episode_seed: int, jitter: float = DEFAULT_ACTION_JITTER
) -> Trajectory:
    """Full expert rollout labeled demo; raises DemoFailed if it cannot finish."""
    state = reset(config, episode_seed)
    rng = noise_rng(config, episode_seed)
    jitter_rng = np.random.default_rng([config.seed, episode_seed, JITTER_STREAM])
    samples = []
    success = False
    while True:
        action = dithered(expert_action(state, config), jitter_rng, jitter)
        result = step(state, action, config, rng)
        samples.append(
            Sample(
                state=policy_features(state),
                action=action.as_tuple(),
                reward=result.reward,
                label=ClassLabel.DEMO,
                t=state.t,
            )
        )
        state = result.state
        if result.done:
            success = result.success
            break
    if not success:
        raise DemoFailed(
            f"expert did not finish within horizon={config.horizon} (episode_seed={episode_seed})"
        )
    return Trajectory(
        samples=tuple(samples), round=0, seed=episode_seed, success=True, source="scripted_oracle"
    )


class ScriptedIntervenor:
    """Drives arbitration during deployment rollouts using the scripted human."""

    def __init__(self, model: InterventionModel, config: TaskConfig):
        self.model = model
        self.config = config
        self._history: list[EnvState] = []
        self._owner = ControlOwner()
        self._jitter_rng = np.random.default_rng(model.rng_seed)

    @property
    def owner(self) -> str:
        return self._owner.owner

    def begin_episode(self, episode_id: int, state: EnvState) -> None:
        self._history = [state]
        self._owner = ControlOwner()
        self._jitter_rng = np.random.default_rng([self.model.rng_seed, episode_id])

    def decide(self, state: EnvState, robot_action: EnvAction) -> tuple[EnvAction, ClassLabel]:
        alarm = monitor(self._history, self._owner, self.config, self.model)
        self._owner, action, label = arbitrate(
            self._owner, alarm, state, robot_action, self.model, self.config
        )
        if label is ClassLabel.INTV:
            action = dithered(action, self._jitter_rng, self.model.action_jitter)
        return action, label

    def observe(self, state: EnvState, reward: float, done: bool, success: bool) -> None:
        del reward, done, success
        self._history.append(state)

    def end_episode(self, traj: Trajectory) -> None:
        del traj
