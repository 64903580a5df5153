"""Isolate the round-2 collapse: data composition x weighting matrix."""
import numpy as np
from pathlib import Path
from dataclasses import replace
from hitloop.loop import load_snapshot, load_run_config
from hitloop.data import ClassLabel
from hitloop.trainer import TrainConfig, train, top_k_checkpoint_average
from hitloop.weighting import WeightingScheme

run_dir = Path("/tmp/calib_loop/sirius_1")
cfg = load_run_config(run_dir / "config.json")
snap1 = load_snapshot(run_dir, 1)
demos = [t for t in snap1 if t.round == 0]
round1 = [t for t in snap1 if t.round == 1]


def filter_labels(trajs, keep):
    out = []
    for t in trajs:
        samples = [s for s in t.samples if s.label in keep]
        if not samples:
            continue
        samples = [replace(s, t=i) for i, s in enumerate(samples)]
        out.append(replace(t, samples=tuple(samples)))
    return out


intv_only = filter_labels(round1, {ClassLabel.INTV})
tc = TrainConfig(epochs=60, lr=1e-3, batch_size=64, eval_episodes=25,
                 eval_interval_epochs=5, seed=777)

cases = [
    ("demos+intv unweighted", demos + intv_only, "unweighted"),
    ("demos+round1 sirius p*=0.25",
     demos + round1, "sirius"),
]
for name, trajs, kind in cases:
    scheme = WeightingScheme(kind=kind) if kind != "sirius" else WeightingScheme(kind="sirius", p_star_intv=0.25)
    res = train(trajs, scheme, cfg.arch, tc, cfg.task)
    evals = [r.eval_success for r in res.log if r.eval_success is not None]
    print(f"{name:32s} best {max(evals):.2f} evals {['%.2f' % e for e in evals]}", flush=True)
