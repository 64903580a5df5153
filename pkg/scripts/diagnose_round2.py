"""Dissect round-2 training: which data/scheme combination degrades."""
import numpy as np
from pathlib import Path
from hitloop.loop import load_snapshot, load_run_config
from hitloop.trainer import TrainConfig, train, top_k_checkpoint_average
from hitloop.weighting import WeightingScheme
from hitloop.data import ClassLabel, Dataset, class_counts

run_dir = Path("/tmp/calib_loop/sirius_1")
cfg = load_run_config(run_dir / "config.json")
snap1 = load_snapshot(run_dir, 1)
demos = [t for t in snap1 if t.round == 0]
print("snapshot1:", len(snap1), "trajs; counts:",
      {c.value: n for c, n in class_counts(Dataset(tuple(snap1), "t")).items()}, flush=True)

tc = TrainConfig(epochs=80, lr=1e-3, batch_size=64, eval_episodes=25,
                 eval_interval_epochs=5, seed=777)
for name, trajs, scheme in [
    ("demos-only unweighted", demos, WeightingScheme(kind="unweighted")),
    ("snap1 sirius", snap1, WeightingScheme(kind="sirius")),
    ("snap1 unweighted", snap1, WeightingScheme(kind="unweighted")),
    ("snap1 iwr", snap1, WeightingScheme(kind="iwr")),
]:
    res = train(trajs, scheme, cfg.arch, tc, cfg.task)
    evals = [r.eval_success for r in res.log if r.eval_success is not None]
    print(f"{name:24s} best {max(evals):.2f} top3 {top_k_checkpoint_average(res.log,3):.2f} "
          f"evals {['%.2f'%e for e in evals[-8:]]}", flush=True)
