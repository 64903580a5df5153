"""Full-loop calibration: one run per scheme per seed, printed compactly."""
import json
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from hitloop.env2d import TaskConfig, with_noise
from hitloop.loop import RunConfig, load_snapshot, run
from hitloop.policy import PolicyArch
from hitloop.trainer import TrainConfig, top_k_checkpoint_average, train
from hitloop.weighting import WeightingScheme

OUT = Path("/tmp/calib_loop")


def desk_config(seed: int, kind: str) -> RunConfig:
    return RunConfig(
        task=with_noise(TaskConfig()),
        train=TrainConfig(epochs=80, lr=1e-3, batch_size=64, eval_episodes=25,
                          eval_interval_epochs=5),
        weighting=WeightingScheme(kind=kind),
        max_episodes_per_round=150,
        seed=seed,
    )


def main() -> None:
    seeds = [int(s) for s in sys.argv[1].split(",")] if len(sys.argv) > 1 else [1, 2]
    shutil.rmtree(OUT, ignore_errors=True)
    for seed in seeds:
        for kind in ("sirius", "iwr"):
            cfg = desk_config(seed, kind)
            t0 = time.time()
            result = run(cfg, OUT / f"{kind}_{seed}")
            dt = time.time() - t0
            ratios = [f"{r.intv_sample_ratio:.3f}" for r in result.records]
            evals = [f"{r.success_rate:.2f}" for r in result.records]
            top3 = {k: (f"{v:.2f}" if v is not None else "-") for k, v in result.policy_top3.items()}
            quota = [f"{r.intv_samples}/{r.quota}|{r.episodes}ep" for r in result.records]
            print(f"[{kind} seed={seed}] {dt:.0f}s top3={top3} deploy_eval={evals} "
                  f"ratio={ratios} quota={quota}", flush=True)

        # unweighted BC retrained offline on the final snapshot of the run
        # that used the default scheme
        cfg = desk_config(seed, "sirius")
        snap = load_snapshot(OUT / f"sirius_{seed}", cfg.rounds)
        tr = train(snap, WeightingScheme(kind="unweighted"),
                   cfg.arch, TrainConfig(epochs=80, lr=1e-3, batch_size=64, eval_episodes=25,
                                         eval_interval_epochs=5,
                                         seed=seed + 90000), cfg.task)
        print(f"[unweighted-on-sirius-data seed={seed}] top3={top_k_checkpoint_average(tr.log, 3):.2f}",
              flush=True)


if __name__ == "__main__":
    main()
