"""Check sigma collapse / gradient spikes during round-2 training."""
import numpy as np
from pathlib import Path
from hitloop.loop import load_snapshot, load_run_config
from hitloop.policy import _forward, _log_softmax, param_count, init_params
from hitloop.trainer import TrainConfig, Adam, flatten_trajectories, resolve_weights
from hitloop.policy import weighted_nll_and_grad
from hitloop.weighting import WeightingScheme
from hitloop.seeding import derive_seed

run_dir = Path("/tmp/calib_loop/sirius_1")
cfg = load_run_config(run_dir / "config.json")
snap1 = load_snapshot(run_dir, 1)

states, actions, labels = flatten_trajectories(snap1)
n = len(states)
p, p_star, table, fb = resolve_weights(snap1, WeightingScheme(kind="sirius"))
w = np.asarray([table[c] for c in labels])
print("weights:", {c.value: round(table[c], 3) for c in table.w}, flush=True)

arch = cfg.arch
theta = init_params(arch, derive_seed(777, 0))
rng = np.random.default_rng(derive_seed(777, 1))
opt = Adam(theta.size, 1e-3, 0.9, 0.999, 1e-8)

for epoch in range(1, 41):
    losses = []
    gmax = 0.0
    for _ in range(500):
        idx = rng.integers(0, n, size=64)
        loss, grad = weighted_nll_and_grad(theta, states[idx], actions[idx], w[idx], arch)
        gmax = max(gmax, float(np.abs(grad).max()))
        theta = opt.step(theta, grad)
        losses.append(loss)
    if epoch % 5 == 0 or epoch <= 3:
        fwd = _forward(theta, states[:2000], arch)
        probs = np.exp(_log_softmax(fwd.logits))
        top = probs.argmax(axis=1)
        sig = np.exp(fwd.log_stds[np.arange(len(top)), top])
        print(f"ep {epoch:3d} loss mean {np.mean(losses):8.3f} max {np.max(losses):9.2f} "
              f"gradmax {gmax:10.1f} top-sigma med {np.median(sig):.4f} "
              f"min {sig.min():.4f} frac@floor {(sig < 0.0068).mean():.3f}", flush=True)
