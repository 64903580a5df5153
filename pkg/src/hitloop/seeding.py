"""Deterministic seed derivation for every stochastic component.

Each consumer gets a seed derived from the run's master seed plus a stream
tag and indices, so work can be pre-assigned (episode k of round r always
sees the same seed) and parallel/sequential execution orders cannot change
any draw.
"""

from __future__ import annotations

import numpy as np

# Stream tags; values are part of the reproducibility contract.
DEMO_STREAM = 1
DEPLOY_ENV_STREAM = 2
DEPLOY_POLICY_STREAM = 3
TRAIN_STREAM = 4
EVAL_STREAM = 5
EVICT_STREAM = 6


def derive_seed(*parts: int) -> int:
    seq = np.random.SeedSequence([int(p) for p in parts])
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> 1)
