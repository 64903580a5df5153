"""Confirm junk robot samples cause the degradation: filter and retrain."""
import numpy as np
from pathlib import Path
from dataclasses import replace
from hitloop.loop import load_snapshot, load_run_config
from hitloop.data import ClassLabel, Sample, Trajectory
from hitloop.env2d import EnvState
from hitloop.oracle import expert_action
from hitloop.trainer import TrainConfig, train, top_k_checkpoint_average
from hitloop.weighting import WeightingScheme

run_dir = Path("/tmp/calib_loop/sirius_1")
cfg = load_run_config(run_dir / "config.json")
snap1 = load_snapshot(run_dir, 1)


def action_err(s: Sample) -> float:
    f = s.state
    state = EnvState(agent_xy=(f[0], f[1]), object_xy=(f[2], f[3]), carried=f[4] > 0.5,
                     goal_xy=(f[2] + f[5], f[3] + f[6]), t=s.t)
    exp = np.asarray(expert_action(state, cfg.task).as_tuple())
    return float(np.abs(np.asarray(s.action) - exp)[:2].mean())


def strip_junk(trajs, thresh=0.5):
    out = []
    for t in trajs:
        samples = []
        for s in t.samples:
            if s.label is ClassLabel.ROBOT and action_err(s) > thresh:
                s = replace(s, label=ClassLabel.PREINTV)  # null it via weight 0
            samples.append(replace(s, t=len(samples)))
        out.append(replace(t, samples=tuple(samples)))
    return out


clean = strip_junk(snap1)
tc = TrainConfig(epochs=80, lr=1e-3, batch_size=64, eval_episodes=25,
                 eval_interval_epochs=5, seed=777)
for name, trajs in [("snap1-junk-nulled sirius", clean)]:
    res = train(trajs, WeightingScheme(kind="sirius"), cfg.arch, tc, cfg.task)
    evals = [r.eval_success for r in res.log if r.eval_success is not None]
    print(f"{name}: best {max(evals):.2f} top3 {top_k_checkpoint_average(res.log,3):.2f} "
          f"evals {['%.2f' % e for e in evals]}", flush=True)
