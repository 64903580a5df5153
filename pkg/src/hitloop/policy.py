"""Gaussian-mixture policy: MLP trunk, mixture head, exact gradients.

The policy maps a state vector through a tanh MLP to K mode logits, K
diagonal Gaussian means and K log-stds over the action space. Parameters
live in one flat float64 vector so checkpoints, gradient checks and the
optimizer all address the same layout. Everything is plain numpy with a
hand-written backward pass; batch reductions are single vectorized sums,
which keeps results bit-reproducible run to run.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PolicyArch:
    input_dim: int = 7
    hidden: tuple[int, ...] = (64, 64)
    n_modes: int = 5
    action_dim: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        dims = (self.input_dim, *self.hidden, self.n_modes, self.action_dim)
        if any(d < 1 for d in dims):
            raise ValueError(f"all dimensions must be >= 1: {self}")

    @property
    def head_dim(self) -> int:
        return self.n_modes * (1 + 2 * self.action_dim)

    def layer_shapes(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden, self.head_dim]
        return [(sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "n_modes": self.n_modes,
            "action_dim": self.action_dim,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicyArch":
        return cls(
            input_dim=int(doc["input_dim"]),
            hidden=tuple(doc["hidden"]),
            n_modes=int(doc["n_modes"]),
            action_dim=int(doc["action_dim"]),
        )


def param_count(arch: PolicyArch) -> int:
    return sum(o * i + o for o, i in arch.layer_shapes())


def init_params(arch: PolicyArch, seed: int) -> np.ndarray:
    """Scaled-uniform fan-in weights, zero biases; the log-std head rows are
    zeroed with bias -1 so every state starts with log-std -1 exactly."""
    rng = np.random.default_rng(seed)
    chunks = []
    for out_dim, in_dim in arch.layer_shapes():
        bound = 1.0 / np.sqrt(in_dim)
        chunks.append(rng.uniform(-bound, bound, size=(out_dim, in_dim)).ravel())
        chunks.append(np.zeros(out_dim))
    theta = np.concatenate(chunks)

    k, a = arch.n_modes, arch.action_dim
    w_last, b_last = _layer_slices(arch)[-1]
    log_std_rows = slice(k + k * a, arch.head_dim)
    theta[w_last].reshape(arch.head_dim, arch.layer_shapes()[-1][1])[log_std_rows, :] = 0.0
    theta[b_last][log_std_rows] = -1.0
    return theta


def _layer_slices(arch: PolicyArch) -> list[tuple[slice, slice]]:
    slices = []
    offset = 0
    for out_dim, in_dim in arch.layer_shapes():
        w = slice(offset, offset + out_dim * in_dim)
        offset += out_dim * in_dim
        b = slice(offset, offset + out_dim)
        offset += out_dim
        slices.append((w, b))
    return slices


def _unpack(theta: np.ndarray, arch: PolicyArch) -> list[tuple[np.ndarray, np.ndarray]]:
    layers = []
    for (w_sl, b_sl), (out_dim, in_dim) in zip(_layer_slices(arch), arch.layer_shapes()):
        layers.append((theta[w_sl].reshape(out_dim, in_dim), theta[b_sl]))
    return layers


@dataclass
class _Forward:
    activations: list[np.ndarray]  # H0..H_last (pre-head)
    logits: np.ndarray  # (B, K)
    means: np.ndarray  # (B, K, A)
    log_stds_raw: np.ndarray  # (B, K, A), before clamping
    log_stds: np.ndarray  # (B, K, A)


def _forward(theta: np.ndarray, states: np.ndarray, arch: PolicyArch) -> _Forward:
    layers = _unpack(theta, arch)
    h = np.atleast_2d(np.asarray(states, dtype=np.float64))
    activations = [h]
    for w, b in layers[:-1]:
        h = np.tanh(h @ w.T + b)
        activations.append(h)
    w, b = layers[-1]
    out = h @ w.T + b
    k, a = arch.n_modes, arch.action_dim
    logits = out[:, :k]
    means = out[:, k : k + k * a].reshape(-1, k, a)
    log_stds_raw = out[:, k + k * a :].reshape(-1, k, a)
    log_stds = np.clip(log_stds_raw, LOG_STD_MIN, LOG_STD_MAX)
    return _Forward(activations, logits, means, log_stds_raw, log_stds)


def _log_softmax(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=-1, keepdims=True)
    return x - m - np.log(np.exp(x - m).sum(axis=-1, keepdims=True))


def _mixture_log_prob(fwd: _Forward, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (log-probs (B,), responsibilities (B, K))."""
    actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
    z = (actions[:, None, :] - fwd.means) / np.exp(fwd.log_stds)
    comp = (-0.5 * _LOG_2PI - fwd.log_stds - 0.5 * z * z).sum(axis=2)  # (B, K)
    joint = _log_softmax(fwd.logits) + comp
    m = joint.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(joint - m).sum(axis=1))
    resp = np.exp(joint - lse[:, None])
    return lse, resp


def log_prob(theta: np.ndarray, state: np.ndarray, action: np.ndarray, arch: PolicyArch) -> float:
    fwd = _forward(theta, state, arch)
    lp, _ = _mixture_log_prob(fwd, action)
    return float(lp[0])


def batch_log_prob(
    theta: np.ndarray, states: np.ndarray, actions: np.ndarray, arch: PolicyArch
) -> np.ndarray:
    fwd = _forward(theta, states, arch)
    lp, _ = _mixture_log_prob(fwd, actions)
    return lp


def sample_action(
    theta: np.ndarray,
    state: np.ndarray,
    arch: PolicyArch,
    rng: np.random.Generator | None = None,
    deterministic: bool = False,
) -> np.ndarray:
    """Draw an action (mode then diagonal normal), clamped to [-1, 1].

    With deterministic=True returns the highest-weight mode's mean, which
    is what evaluation rollouts use.
    """
    fwd = _forward(theta, np.asarray(state, dtype=np.float64)[None, :], arch)
    logits = fwd.logits[0]
    if deterministic:
        k = int(np.argmax(logits))
        return np.clip(fwd.means[0, k], -1.0, 1.0)
    if rng is None:
        raise ValueError("stochastic sampling needs an rng")
    probs = np.exp(_log_softmax(logits))
    k = int(rng.choice(arch.n_modes, p=probs))
    draw = fwd.means[0, k] + np.exp(fwd.log_stds[0, k]) * rng.standard_normal(arch.action_dim)
    return np.clip(draw, -1.0, 1.0)


def weighted_nll_and_grad(
    theta: np.ndarray,
    states: np.ndarray,
    actions: np.ndarray,
    weights: np.ndarray,
    arch: PolicyArch,
) -> tuple[float, np.ndarray]:
    """Loss -(1/b) sum_i w_i log pi(a_i | s_i) and its exact gradient.

    The log-std clamp contributes zero gradient where it saturates, matching
    the piecewise-constant clip. All reductions are fixed-order numpy sums.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    b = states.shape[0]
    if b == 0:
        raise ValueError("batch must be non-empty")
    if np.any(weights < 0.0):
        raise ValueError("weights must be non-negative")

    fwd = _forward(theta, states, arch)
    lp, resp = _mixture_log_prob(fwd, actions)
    loss = float(-(weights * lp).sum() / b)

    # d loss / d lp_i = -w_i / b; push through the mixture head.
    coef = (-weights / b)[:, None]
    stds = np.exp(fwd.log_stds)
    z = (actions[:, None, :] - fwd.means) / stds

    d_logits = coef * (resp - np.exp(_log_softmax(fwd.logits)))
    d_means = coef[:, :, None] * resp[:, :, None] * z / stds
    d_log_stds = coef[:, :, None] * resp[:, :, None] * (z * z - 1.0)
    unclamped = (fwd.log_stds_raw > LOG_STD_MIN) & (fwd.log_stds_raw < LOG_STD_MAX)
    d_log_stds = np.where(unclamped, d_log_stds, 0.0)

    d_out = np.concatenate(
        [d_logits, d_means.reshape(b, -1), d_log_stds.reshape(b, -1)], axis=1
    )

    layers = _unpack(theta, arch)
    grad = np.zeros_like(theta)
    slices = _layer_slices(arch)

    d_h = d_out
    for idx in range(len(layers) - 1, -1, -1):
        w, _ = layers[idx]
        h_in = fwd.activations[idx]
        w_sl, b_sl = slices[idx]
        grad[w_sl] = (d_h.T @ h_in).ravel()
        grad[b_sl] = d_h.sum(axis=0)
        if idx > 0:
            d_h = (d_h @ w) * (1.0 - fwd.activations[idx] ** 2)
    return loss, grad


def save_checkpoint(path: str | Path, arch: PolicyArch, theta: np.ndarray) -> None:
    """Flat binary: 8-byte LE header length, arch JSON, float64 LE parameters."""
    header = json.dumps(arch.to_dict(), sort_keys=True).encode("utf-8")
    payload = struct.pack("<Q", len(header)) + header + np.asarray(theta, dtype="<f8").tobytes()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(payload)


def load_checkpoint(path: str | Path) -> tuple[PolicyArch, np.ndarray]:
    blob = Path(path).read_bytes()
    (n,) = struct.unpack("<Q", blob[:8])
    arch = PolicyArch.from_dict(json.loads(blob[8 : 8 + n].decode("utf-8")))
    theta = np.frombuffer(blob[8 + n :], dtype="<f8").astype(np.float64)
    if theta.size != param_count(arch):
        raise ValueError(f"checkpoint holds {theta.size} params, arch wants {param_count(arch)}")
    return arch, theta


@dataclass
class GMMPolicy:
    """Parameter bundle with the rollout-facing act() interface."""

    arch: PolicyArch
    theta: np.ndarray
    deterministic: bool = False
    rng: np.random.Generator | None = field(default=None, repr=False)

    def act(self, features: np.ndarray) -> np.ndarray:
        return sample_action(
            self.theta, features, self.arch, rng=self.rng, deterministic=self.deterministic
        )
