"""Warmstart quality sweep (jittered expert)."""
import numpy as np

from hitloop.env2d import TaskConfig, with_noise
from hitloop.oracle import generate_demo
from hitloop.policy import PolicyArch
from hitloop.trainer import TrainConfig, train, top_k_checkpoint_average
from hitloop.weighting import WeightingScheme

cfg = with_noise(TaskConfig())
demos = [generate_demo(cfg, 1000 + j) for j in range(50)]
print("demo mean len:", np.mean([len(d) for d in demos]), flush=True)
arch = PolicyArch()

for epochs in (50, 80):
    bests, top3s, tails = [], [], []
    for seed in (1, 2, 3, 4, 5):
        tc = TrainConfig(epochs=epochs, eval_episodes=25, seed=seed, lr=1e-3, batch_size=64)
        res = train(demos, WeightingScheme(kind="unweighted"), arch, tc, cfg)
        evals = [r.eval_success for r in res.log if r.eval_success is not None]
        bests.append(max(evals))
        top3s.append(top_k_checkpoint_average(res.log, 3))
        tails.append(evals[-3:])
    print(
        f"epochs={epochs}: bests {[f'{b:.2f}' for b in bests]} mean {np.mean(bests):.2f} "
        f"top3 mean {np.mean(top3s):.2f} tails {tails}",
        flush=True,
    )
