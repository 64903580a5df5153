"""Measure deployment-data action quality against the expert, per class."""
import numpy as np
from pathlib import Path
from hitloop.loop import load_snapshot, load_run_config
from hitloop.data import ClassLabel
from hitloop.env2d import EnvState
from hitloop.oracle import expert_action

run_dir = Path("/tmp/calib_loop/sirius_1")
cfg = load_run_config(run_dir / "config.json")
snap1 = load_snapshot(run_dir, 1)
round1 = [t for t in snap1 if t.round == 1]

errs = {c: [] for c in ClassLabel}
for traj in round1:
    for s in traj.samples:
        f = s.state
        state = EnvState(
            agent_xy=(f[0], f[1]),
            object_xy=(f[2], f[3]),
            carried=f[4] > 0.5,
            goal_xy=(f[2] + f[5], f[3] + f[6]),
            t=s.t,
        )
        exp = np.asarray(expert_action(state, cfg.task).as_tuple())
        act = np.asarray(s.action)
        errs[s.label].append(np.abs(act - exp)[:2].mean())  # dxdy error only

for c, v in errs.items():
    if v:
        v = np.asarray(v)
        print(
            f"{c.value:8s} n={len(v):5d} mean_err={v.mean():.3f} median={np.median(v):.3f} "
            f"frac_err>0.5={(v > 0.5).mean():.3f}",
            flush=True,
        )
