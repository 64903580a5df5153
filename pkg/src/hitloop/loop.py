"""The deployment-learning loop: warmstart, rounds, snapshots, records.

Round r collects the r-th deployment batch. The initial deployment (round
1) runs the warmstart policy; loop iteration i trains policy i+1 on a
frozen snapshot of the buffer while policy i collects round i+1. Because
the learner only ever sees the snapshot and every episode's seeds are
pre-assigned, parallel and sequential execution produce identical results.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .data import ClassLabel, Dataset, Sample, Trajectory, class_counts
from .env2d import EnvAction, EnvState, TaskConfig, noise_rng, policy_features, reset, step
from .env2d import config_from_dict as task_from_dict, config_to_dict as task_to_dict
from .labeling import LabelingConfig, relabel_preintv
from .memory import MemoryBuffer, intervention_count
from .metrics import ownership_timeline, workload_metrics, write_timeline_csv
from .oracle import InterventionModel, ScriptedIntervenor, generate_demo
from .policy import PolicyArch, save_checkpoint
from .seeding import (
    DEMO_STREAM,
    DEPLOY_ENV_STREAM,
    DEPLOY_POLICY_STREAM,
    EVAL_STREAM,
    EVICT_STREAM,
    TRAIN_STREAM,
    derive_seed,
)
from .trainer import (
    GMMActor,
    InsufficientCheckpoints,
    TrainConfig,
    TrainResult,
    evaluate_params,
    top_k_checkpoint_average,
    train,
    write_training_log,
)
from .trajlog import append_trajectory, read_trajectories, write_manifest
from .weighting import WeightingScheme

log = logging.getLogger(__name__)


class Intervenor(Protocol):
    """Supervises deployment rollouts: either the scripted oracle or a live
    teleoperation gateway. One instance drives all episodes of a run."""

    def begin_episode(self, episode_id: int, state: EnvState) -> None: ...

    def decide(self, state: EnvState, robot_action: EnvAction) -> tuple[EnvAction, ClassLabel]: ...

    def observe(self, state: EnvState, reward: float, done: bool, success: bool) -> None: ...

    def end_episode(self, traj: Trajectory) -> None: ...


@dataclass(frozen=True)
class RunConfig:
    task: TaskConfig = field(default_factory=TaskConfig)
    arch: PolicyArch = field(default_factory=PolicyArch)
    train: TrainConfig = field(default_factory=TrainConfig)
    weighting: WeightingScheme = field(default_factory=WeightingScheme)
    labeling: LabelingConfig = field(default_factory=LabelingConfig)
    oracle: InterventionModel = field(default_factory=InterventionModel)
    m_demos: int = 50
    rounds: int = 3
    buffer_capacity: int = 500
    memory_strategy: str = "FIFO"
    protect_demos: bool = True
    max_episodes_per_round: int = 60
    parallel: bool = True
    eval_episodes_round: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.m_demos < 1:
            raise ValueError("m_demos must be >= 1")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.max_episodes_per_round < 1 or self.buffer_capacity < 1:
            raise ValueError("bad run config")


@dataclass
class RoundRecord:
    round: int
    deployer_policy: int
    episodes: int
    total_samples: int
    intv_samples: int
    preintv_samples: int
    robot_samples: int
    success_rate: float
    intv_sample_ratio: float
    intv_frequency: float
    mean_intv_length: float
    quota: int
    quota_reached: bool
    quota_unreachable: bool
    buffer_size: int
    buffer_class_counts: dict[str, int]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    records: list[RoundRecord]
    policy_top3: dict[int, float | None]
    out_dir: Path


def deployment_episode(
    robot_actor: Callable[[EnvState], EnvAction],
    config: TaskConfig,
    episode_seed: int,
    intervenor: Intervenor,
    round_idx: int,
    episode_id: int,
    source: str,
) -> Trajectory:
    """One team-policy rollout: the robot proposes, the intervenor disposes."""
    state = reset(config, episode_seed)
    rng_env = noise_rng(config, episode_seed)
    intervenor.begin_episode(episode_id, state)
    samples = []
    while True:
        robot_action = robot_actor(state)
        action, label = intervenor.decide(state, robot_action)
        result = step(state, action, config, rng_env)
        samples.append(
            Sample(
                state=policy_features(state),
                action=action.as_tuple(),
                reward=result.reward,
                label=label,
                t=state.t,
            )
        )
        intervenor.observe(result.state, result.reward, result.done, result.success)
        state = result.state
        if result.done:
            break
    traj = Trajectory(
        samples=tuple(samples),
        round=round_idx,
        seed=episode_seed,
        success=result.success,
        source=source,
    )
    intervenor.end_episode(traj)
    return traj


class _RunWriter:
    """Owns the run directory layout and the (round, seed) -> file ref map."""

    def __init__(self, out_dir: Path, task_id: str):
        self.out_dir = Path(out_dir)
        self.task_id = task_id
        self.files: list[str] = []
        self.refs: dict[tuple[int, int], dict] = {}
        (self.out_dir / "rounds").mkdir(parents=True, exist_ok=True)
        (self.out_dir / "checkpoints").mkdir(exist_ok=True)
        (self.out_dir / "logs").mkdir(exist_ok=True)
        (self.out_dir / "snapshots").mkdir(exist_ok=True)

    def round_file(self, round_idx: int) -> str:
        name = f"rounds/round_{round_idx:03d}.jsonl"
        if name not in self.files:
            self.files.append(name)
        return name

    def write_traj(self, traj: Trajectory) -> None:
        name = self.round_file(traj.round)
        index = sum(1 for r in self.refs.values() if r["file"] == name)
        append_trajectory(self.out_dir / name, traj, self.task_id)
        self.refs[(traj.round, traj.seed)] = {"file": name, "index": index}

    def write_snapshot(self, dataset_idx: int, trajs: tuple[Trajectory, ...]) -> None:
        entries = []
        for t in trajs:
            ref = self.refs[(t.round, t.seed)]
            entries.append(
                {
                    "file": ref["file"],
                    "index": ref["index"],
                    "round": t.round,
                    "seed": t.seed,
                    "intv_samples": intervention_count(t),
                }
            )
        path = self.out_dir / "snapshots" / f"dataset_round_{dataset_idx}.json"
        path.write_text(json.dumps({"entries": entries}, indent=2) + "\n", encoding="utf-8")

    def finish(self) -> None:
        write_manifest(self.out_dir, self.files, self.task_id)


def load_snapshot(run_dir: str | Path, dataset_idx: int) -> list[Trajectory]:
    """Reload the exact buffer contents a given training round saw."""
    run_dir = Path(run_dir)
    doc = json.loads(
        (run_dir / "snapshots" / f"dataset_round_{dataset_idx}.json").read_text(encoding="utf-8")
    )
    cache: dict[str, list[Trajectory]] = {}
    out = []
    for entry in doc["entries"]:
        if entry["file"] not in cache:
            cache[entry["file"]], _ = read_trajectories(run_dir / entry["file"])
        out.append(cache[entry["file"]][entry["index"]])
    return out


def warmstart(
    cfg: RunConfig, buffer: MemoryBuffer, writer: _RunWriter | None = None
) -> TrainResult:
    """Collect the initial demonstrations and fit the warmstart policy with
    plain (unweighted) behavioral cloning."""
    for j in range(cfg.m_demos):
        demo = generate_demo(cfg.task, derive_seed(cfg.seed, DEMO_STREAM, j))
        buffer.insert(demo)
        if writer is not None:
            writer.write_traj(demo)
    train_cfg = replace(cfg.train, seed=derive_seed(cfg.seed, TRAIN_STREAM, 0))
    return train(
        buffer.snapshot(), WeightingScheme(kind="unweighted"), cfg.arch, train_cfg, cfg.task
    )


def intervention_quota(buffer: MemoryBuffer) -> int:
    demo_samples = sum(
        len(t) for t in buffer.trajectories if t.samples and t.samples[0].label is ClassLabel.DEMO
    )
    return max(1, math.ceil(demo_samples / 3))


def deploy_round(
    theta: np.ndarray,
    buffer: MemoryBuffer,
    cfg: RunConfig,
    intervenor: Intervenor,
    round_idx: int,
    deployer_policy: int,
    quota: int,
    writer: _RunWriter | None = None,
    source: str = "scripted_oracle",
) -> tuple[list[Trajectory], RoundRecord]:
    """Collect episodes under intervention supervision until the intv-sample
    quota or the episode cap; relabel and insert each finished trajectory."""
    new_trajs: list[Trajectory] = []
    intv_total = 0
    for k in range(cfg.max_episodes_per_round):
        ep_seed = derive_seed(cfg.seed, DEPLOY_ENV_STREAM, round_idx, k)
        policy_rng = np.random.default_rng(derive_seed(cfg.seed, DEPLOY_POLICY_STREAM, round_idx, k))
        actor = GMMActor(cfg.arch, theta, deterministic=False, rng=policy_rng)
        traj = deployment_episode(actor, cfg.task, ep_seed, intervenor, round_idx, ep_seed, source)
        traj = relabel_preintv(traj, cfg.labeling)
        buffer.insert(traj)
        if writer is not None:
            writer.write_traj(traj)
        new_trajs.append(traj)
        intv_total += intervention_count(traj)
        if intv_total >= quota:
            break

    quota_reached = intv_total >= quota
    quota_unreachable = (not quota_reached) and intv_total == 0
    if quota_unreachable:
        log.warning(
            "round %d hit the episode cap with zero interventions; monitor may be misconfigured",
            round_idx,
        )

    wm = workload_metrics(new_trajs)
    counts = class_counts(Dataset(tuple(new_trajs), cfg.task.task_id))
    report = evaluate_params(
        theta, cfg.arch, cfg.task, cfg.eval_episodes_round, derive_seed(cfg.seed, EVAL_STREAM, round_idx)
    )
    buffer_counts = class_counts(Dataset(buffer.snapshot(), cfg.task.task_id))
    record = RoundRecord(
        round=round_idx,
        deployer_policy=deployer_policy,
        episodes=len(new_trajs),
        total_samples=sum(len(t) for t in new_trajs),
        intv_samples=counts[ClassLabel.INTV],
        preintv_samples=counts[ClassLabel.PREINTV],
        robot_samples=counts[ClassLabel.ROBOT],
        success_rate=report.success_rate,
        intv_sample_ratio=wm.intv_sample_ratio,
        intv_frequency=wm.intv_frequency,
        mean_intv_length=wm.mean_intv_length,
        quota=quota,
        quota_reached=quota_reached,
        quota_unreachable=quota_unreachable,
        buffer_size=len(buffer),
        buffer_class_counts={c.value: n for c, n in buffer_counts.items()},
    )
    return new_trajs, record


def run(
    cfg: RunConfig,
    out_dir: str | Path,
    intervenor: Intervenor | None = None,
    source: str = "scripted_oracle",
) -> RunResult:
    """Execute warmstart plus the full deployment-learning loop."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(
        json.dumps(run_config_to_dict(cfg), indent=2) + "\n", encoding="utf-8"
    )
    writer = _RunWriter(out, cfg.task.task_id)
    if intervenor is None:
        intervenor = ScriptedIntervenor(cfg.oracle, cfg.task)

    buffer = MemoryBuffer(
        capacity=cfg.buffer_capacity,
        strategy=cfg.memory_strategy,
        rng_seed=derive_seed(cfg.seed, EVICT_STREAM),
        protect_demos=cfg.protect_demos,
    )

    results: dict[int, TrainResult] = {}
    results[1] = warmstart(cfg, buffer, writer)
    quota = intervention_quota(buffer)
    writer.write_snapshot(0, buffer.snapshot())
    _save_policy(out, 1, cfg.arch, results[1])

    records: list[RoundRecord] = []
    if cfg.rounds >= 1:
        _, rec = deploy_round(
            results[1].theta, buffer, cfg, intervenor, 1, 1, quota, writer, source
        )
        records.append(rec)

        for i in range(1, cfg.rounds + 1):
            snapshot = buffer.snapshot()
            writer.write_snapshot(i, snapshot)
            train_cfg = replace(cfg.train, seed=derive_seed(cfg.seed, TRAIN_STREAM, i))
            box: dict[str, object] = {}

            def learn() -> None:
                try:
                    box["result"] = train(snapshot, cfg.weighting, cfg.arch, train_cfg, cfg.task)
                except BaseException as err:  # propagated after join
                    box["error"] = err

            deployer = results[i].theta
            if cfg.parallel:
                worker = threading.Thread(target=learn, name=f"learning-round-{i}")
                worker.start()
                _, rec = deploy_round(
                    deployer, buffer, cfg, intervenor, i + 1, i, quota, writer, source
                )
                worker.join()
            else:
                learn()
                _, rec = deploy_round(
                    deployer, buffer, cfg, intervenor, i + 1, i, quota, writer, source
                )
            if "error" in box:
                raise RuntimeError(f"learning failed in round {i}") from box["error"]  # type: ignore[arg-type]
            results[i + 1] = box["result"]  # type: ignore[assignment]
            records.append(rec)
            _save_policy(out, i + 1, cfg.arch, results[i + 1])

    writer.finish()
    (out / "records.json").write_text(
        json.dumps([r.to_dict() for r in records], indent=2) + "\n", encoding="utf-8"
    )
    buffer.write_manifest(out / "buffer_manifest.json")

    timeline_rows = []
    for rec in records:
        trajs, _ = read_trajectories(out / f"rounds/round_{rec.round:03d}.jsonl")
        timeline_rows.extend(ownership_timeline(trajs, rec.round))
    write_timeline_csv(out / "timeline.csv", timeline_rows)

    top3: dict[int, float | None] = {}
    for idx, res in results.items():
        try:
            top3[idx] = top_k_checkpoint_average(res.log, 3)
        except InsufficientCheckpoints:
            top3[idx] = None
    (out / "summary.json").write_text(
        json.dumps(
            {
                "quota": quota,
                "m_demos": cfg.m_demos,
                "rounds": cfg.rounds,
                "policy_top3": {str(k): v for k, v in sorted(top3.items())},
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return RunResult(records=records, policy_top3=top3, out_dir=out)


def _save_policy(out: Path, idx: int, arch: PolicyArch, result: TrainResult) -> None:
    save_checkpoint(out / "checkpoints" / f"policy_{idx}.ckpt", arch, result.theta)
    write_training_log(out / "logs" / f"train_policy_{idx}.csv", result.log)


def run_config_to_dict(cfg: RunConfig) -> dict:
    return {
        "task": task_to_dict(cfg.task),
        "arch": cfg.arch.to_dict(),
        "train": {
            "batch_size": cfg.train.batch_size,
            "steps_per_epoch": cfg.train.steps_per_epoch,
            "epochs": cfg.train.epochs,
            "lr": cfg.train.lr,
            "beta1": cfg.train.beta1,
            "beta2": cfg.train.beta2,
            "eps": cfg.train.eps,
            "eval_interval_epochs": cfg.train.eval_interval_epochs,
            "eval_episodes": cfg.train.eval_episodes,
        },
        "weighting": {
            "kind": cfg.weighting.kind,
            "p_star_intv": cfg.weighting.p_star_intv,
            "p_star_preintv": cfg.weighting.p_star_preintv,
            "ablation_flags": sorted(cfg.weighting.ablation_flags),
        },
        "labeling": {"ell": cfg.labeling.ell},
        "oracle": {
            "reaction_delay_steps": cfg.oracle.reaction_delay_steps,
            "stall_window": cfg.oracle.stall_window,
            "stall_displacement": cfg.oracle.stall_displacement,
            "corridor_tolerance": cfg.oracle.corridor_tolerance,
            "release_hold_steps": cfg.oracle.release_hold_steps,
            "action_jitter": cfg.oracle.action_jitter,
            "rng_seed": cfg.oracle.rng_seed,
        },
        "run": {
            "m_demos": cfg.m_demos,
            "rounds": cfg.rounds,
            "buffer_capacity": cfg.buffer_capacity,
            "memory_strategy": cfg.memory_strategy,
            "protect_demos": cfg.protect_demos,
            "max_episodes_per_round": cfg.max_episodes_per_round,
            "parallel": cfg.parallel,
            "eval_episodes_round": cfg.eval_episodes_round,
            "seed": cfg.seed,
        },
    }


def run_config_from_dict(doc: dict) -> RunConfig:
    run_doc = doc.get("run", {})
    return RunConfig(
        task=task_from_dict(doc["task"]),
        arch=PolicyArch.from_dict(doc["arch"]),
        train=TrainConfig(**doc.get("train", {})),
        weighting=WeightingScheme(
            kind=doc["weighting"]["kind"],
            p_star_intv=doc["weighting"].get("p_star_intv", 0.5),
            p_star_preintv=doc["weighting"].get("p_star_preintv", 0.0),
            ablation_flags=frozenset(doc["weighting"].get("ablation_flags", [])),
        ),
        labeling=LabelingConfig(**doc.get("labeling", {})),
        oracle=InterventionModel(**doc.get("oracle", {})),
        **run_doc,
    )


def load_run_config(path: str | Path) -> RunConfig:
    return run_config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
