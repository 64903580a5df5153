"""Weighted behavioral cloning: Adam on the weighted NLL, plus evaluation.

Class weights are computed once per training run from the snapshot being
trained on, enter through the loss (zero-weight samples still occupy their
minibatch slots), and minibatches are drawn uniformly over samples. The
best checkpoint by periodic evaluation is what a round deploys.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import ClassLabel, ClassDistribution, Trajectory, class_distribution, Dataset
from .env2d import EnvAction, EnvState, TaskConfig, noise_rng, policy_features, reset, step
from .policy import GMMPolicy, PolicyArch, init_params, weighted_nll_and_grad
from .seeding import EVAL_STREAM, derive_seed
from .weighting import MissingClass, WeightTable, WeightingScheme, target_distribution, weight_table

log = logging.getLogger(__name__)

Actor = Callable[[EnvState], EnvAction]


class NonFiniteLoss(RuntimeError):
    """Training hit a NaN/inf loss; aborted with the offending batch logged."""


class InsufficientCheckpoints(ValueError):
    """Fewer evaluation points than the requested top-k."""


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    steps_per_epoch: int = 500
    epochs: int = 50
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    eval_interval_epochs: int = 5
    eval_episodes: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.batch_size, self.steps_per_epoch, self.eval_interval_epochs) < 1:
            raise ValueError("batch_size, steps_per_epoch, eval_interval_epochs must be >= 1")
        if self.epochs < 0 or self.eval_episodes < 1 or self.lr <= 0:
            raise ValueError("bad training config")


class Adam:
    """Plain Adam with bias correction, operating on the flat parameter vector."""

    def __init__(self, n_params: int, lr: float, beta1: float, beta2: float, eps: float):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class LogRow:
    epoch: int
    mean_loss: float
    eval_success: float | None
    wall_ms: float


@dataclass
class TrainResult:
    theta: np.ndarray
    log: list[LogRow]
    p: ClassDistribution | None
    p_star: ClassDistribution | None
    weights: WeightTable | None
    fallback_unweighted: bool = False


@dataclass(frozen=True)
class EvalReport:
    success_rate: float
    mean_episode_len: float


def flatten_trajectories(
    trajs: Sequence[Trajectory],
) -> tuple[np.ndarray, np.ndarray, list[ClassLabel]]:
    states, actions, labels = [], [], []
    for traj in trajs:
        for s in traj.samples:
            states.append(s.state)
            actions.append(s.action)
            labels.append(s.label)
    return np.asarray(states, dtype=np.float64), np.asarray(actions, dtype=np.float64), labels


def resolve_weights(
    trajs: Sequence[Trajectory], scheme: WeightingScheme, task_id: str = ""
) -> tuple[ClassDistribution, ClassDistribution, WeightTable, bool]:
    """Compute (P, P*, weight table, fell_back). A scheme that wants to boost
    an absent class (warmstart data has no interventions) degrades to
    unweighted with a warning, which is exactly plain BC."""
    p = class_distribution(Dataset(trajectories=tuple(trajs), task_id=task_id))
    try:
        p_star = target_distribution(p, scheme)
        return p, p_star, weight_table(p, p_star), False
    except MissingClass as err:
        log.warning("weighting scheme %s infeasible (%s); falling back to unweighted", scheme.kind, err)
        return p, p, weight_table(p, p), True


def rollout_episode(
    actor: Actor, config: TaskConfig, episode_seed: int, max_steps: int | None = None
) -> tuple[bool, int]:
    """Run one actor-controlled episode; returns (success, length)."""
    state = reset(config, episode_seed)
    rng = noise_rng(config, episode_seed)
    steps = 0
    horizon = config.horizon if max_steps is None else min(config.horizon, max_steps)
    while True:
        result = step(state, actor(state), config, rng)
        state = result.state
        steps += 1
        if result.done or steps >= horizon:
            return result.success, steps


@dataclass
class GMMActor:
    """Adapts the mixture policy to the environment's state/action types."""

    arch: PolicyArch
    theta: np.ndarray
    deterministic: bool = True
    rng: np.random.Generator | None = field(default=None, repr=False)

    def __call__(self, state: EnvState) -> EnvAction:
        a = GMMPolicy(self.arch, self.theta, self.deterministic, self.rng).act(
            np.asarray(policy_features(state))
        )
        return EnvAction(dxdy=(float(a[0]), float(a[1])), grip=float(a[2]))


def evaluate(actor: Actor, config: TaskConfig, n_episodes: int, seed: int) -> EvalReport:
    """Deterministic-action rollouts on episode seeds seed..seed+n-1."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    successes = 0
    lengths = []
    for k in range(n_episodes):
        ok, length = rollout_episode(actor, config, seed + k)
        successes += int(ok)
        lengths.append(length)
    return EvalReport(success_rate=successes / n_episodes, mean_episode_len=float(np.mean(lengths)))


def evaluate_params(
    theta: np.ndarray, arch: PolicyArch, config: TaskConfig, n_episodes: int, seed: int
) -> EvalReport:
    return evaluate(GMMActor(arch, theta, deterministic=True), config, n_episodes, seed)


def train(
    trajs: Sequence[Trajectory],
    scheme: WeightingScheme,
    arch: PolicyArch,
    cfg: TrainConfig,
    task: TaskConfig,
) -> TrainResult:
    """Minibatch weighted BC. Returns the best-eval checkpoint (ties go to
    the earliest); with no evaluations recorded, the final parameters."""
    states, actions, labels = flatten_trajectories(trajs)
    n = states.shape[0]
    if n == 0:
        raise ValueError("training needs a non-empty dataset")

    p, p_star, table, fallback = resolve_weights(trajs, scheme, task.task_id)
    sample_weights = np.asarray([table[c] for c in labels], dtype=np.float64)

    theta = init_params(arch, derive_seed(cfg.seed, 0))
    if cfg.epochs == 0:
        return TrainResult(theta, [], p, p_star, table, fallback)

    rng = np.random.default_rng(derive_seed(cfg.seed, 1))
    eval_seed = derive_seed(cfg.seed, EVAL_STREAM)
    opt = Adam(theta.size, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    rows: list[LogRow] = []
    best: tuple[float, np.ndarray] | None = None
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        total = 0.0
        for step_i in range(cfg.steps_per_epoch):
            idx = rng.integers(0, n, size=cfg.batch_size)
            loss, grad = weighted_nll_and_grad(
                theta, states[idx], actions[idx], sample_weights[idx], arch
            )
            if not np.isfinite(loss):
                log.error("non-finite loss at epoch %d step %d; batch indices %s", epoch, step_i, idx)
                raise NonFiniteLoss(f"loss={loss} at epoch {epoch} step {step_i}")
            theta = opt.step(theta, grad)
            total += loss
        mean_loss = total / cfg.steps_per_epoch

        eval_success = None
        if epoch % cfg.eval_interval_epochs == 0 or epoch == cfg.epochs:
            report = evaluate_params(theta, arch, task, cfg.eval_episodes, eval_seed)
            eval_success = report.success_rate
            if best is None or eval_success > best[0]:
                best = (eval_success, theta.copy())
        wall_ms = (time.perf_counter() - t0) * 1000.0
        rows.append(LogRow(epoch, mean_loss, eval_success, wall_ms))

    final = best[1] if best is not None else theta
    return TrainResult(final, rows, p, p_star, table, fallback)


def top_k_checkpoint_average(rows: Sequence[LogRow], k: int = 3) -> float:
    """Mean of the k highest evaluation success rates in a training log."""
    evals = [r.eval_success for r in rows if r.eval_success is not None]
    if len(evals) < k:
        raise InsufficientCheckpoints(f"need {k} eval points, have {len(evals)}")
    return float(np.mean(sorted(evals, reverse=True)[:k]))


def write_training_log(path: str | Path, rows: Sequence[LogRow]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "mean_loss", "eval_success", "wall_ms"])
        for r in rows:
            writer.writerow(
                [
                    r.epoch,
                    repr(r.mean_loss),
                    "" if r.eval_success is None else repr(r.eval_success),
                    f"{r.wall_ms:.3f}",
                ]
            )


def read_training_log(path: str | Path) -> list[LogRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            rows.append(
                LogRow(
                    epoch=int(rec["epoch"]),
                    mean_loss=float(rec["mean_loss"]),
                    eval_success=float(rec["eval_success"]) if rec["eval_success"] else None,
                    wall_ms=float(rec["wall_ms"]),
                )
            )
    return rows
