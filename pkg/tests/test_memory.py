from __future__ import annotations

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hitloop.data import ClassLabel, Sample, Trajectory
from hitloop.memory import STRATEGIES, CapacityInfeasible, MemoryBuffer, intervention_count

R, I, D = ClassLabel.ROBOT, ClassLabel.INTV, ClassLabel.DEMO


def traj(n_intv: int, n_robot: int = 1, seed: int = 0, demo: bool = False) -> Trajectory:
    if demo:
        labels = [D] * max(1, n_robot)
    else:
        labels = [I] * n_intv + [R] * n_robot
    samples = tuple(
        Sample(state=(0.0,), action=(0.0,), reward=0.0, label=lab, t=i)
        for i, lab in enumerate(labels)
    )
    return Trajectory(samples=samples, round=0 if demo else 1, seed=seed, success=True)


def fill(strategy, trajs, capacity, protect_demos=False, rng_seed=0):
    buf = MemoryBuffer(capacity, strategy, rng_seed=rng_seed, protect_demos=protect_demos)
    for t in trajs:
        buf.insert(t)
    return buf


class TestInterventionCount:
    def test_mixed(self):
        t = traj(0)
        labels = [R, R, I, I, R, I]
        samples = tuple(
            Sample(state=(0.0,), action=(0.0,), reward=0.0, label=lab, t=i)
            for i, lab in enumerate(labels)
        )
        t = Trajectory(samples=samples, round=1, seed=0, success=True)
        assert intervention_count(t) == 3

    def test_demo_zero(self):
        assert intervention_count(traj(0, demo=True)) == 0

    def test_all_intv(self):
        assert intervention_count(traj(7, n_robot=0)) == 7


class TestStrategies:
    def test_fifo_keeps_newest(self):
        trajs = [traj(0, seed=i) for i in range(3)]
        buf = fill("FIFO", trajs, capacity=2)
        assert [t.seed for t in buf.trajectories] == [1, 2]

    def test_filo_keeps_oldest(self):
        trajs = [traj(0, seed=i) for i in range(3)]
        buf = fill("FILO", trajs, capacity=2)
        assert [t.seed for t in buf.trajectories] == [0, 1]

    def test_no_eviction_below_capacity(self):
        trajs = [traj(0, seed=i) for i in range(3)]
        for strategy in STRATEGIES:
            buf = fill(strategy, trajs, capacity=3)
            assert [t.seed for t in buf.trajectories] == [0, 1, 2]

    def test_lfi_keeps_most_intervened(self):
        trajs = [traj(3, seed=0), traj(0, seed=1), traj(1, seed=2)]
        buf = fill("LFI", trajs, capacity=2)
        assert sorted(intervention_count(t) for t in buf.trajectories) == [1, 3]

    def test_mfi_keeps_least_intervened(self):
        trajs = [traj(3, seed=0), traj(0, seed=1), traj(1, seed=2)]
        buf = fill("MFI", trajs, capacity=2)
        assert sorted(intervention_count(t) for t in buf.trajectories) == [0, 1]

    def test_uniform_deterministic_under_seed(self):
        trajs = [traj(i % 4, seed=i) for i in range(10)]
        kept1 = [t.seed for t in fill("Uniform", trajs, 5, rng_seed=33).trajectories]
        kept2 = [t.seed for t in fill("Uniform", trajs, 5, rng_seed=33).trajectories]
        assert kept1 == kept2

    def test_lfi_tie_breaks_evict_older_first(self):
        trajs = [traj(1, seed=0), traj(1, seed=1), traj(1, seed=2)]
        buf = fill("LFI", trajs, capacity=2)
        assert [t.seed for t in buf.trajectories] == [1, 2]


class TestDemoProtection:
    def test_demos_never_evicted(self):
        trajs = [traj(0, demo=True, seed=i) for i in range(2)]
        trajs += [traj(i, seed=10 + i) for i in range(4)]
        buf = fill("FIFO", trajs, capacity=3, protect_demos=True)
        kept = buf.trajectories
        assert sum(1 for t in kept if t.samples[0].label is D) == 2
        assert len(kept) == 3

    def test_capacity_infeasible_when_demos_fill_buffer(self):
        buf = MemoryBuffer(2, "FIFO", protect_demos=True)
        buf.insert(traj(0, demo=True, seed=0))
        buf.insert(traj(0, demo=True, seed=1))
        with pytest.raises(CapacityInfeasible):
            buf.insert(traj(0, demo=True, seed=2))

    def test_unprotected_demos_evictable(self):
        trajs = [traj(0, demo=True, seed=i) for i in range(3)]
        buf = fill("FIFO", trajs, capacity=2, protect_demos=False)
        assert len(buf) == 2


def total_retained_intv(strategy, trajs, capacity, rng_seed=0):
    buf = fill(strategy, trajs, capacity, rng_seed=rng_seed)
    return sum(intervention_count(t) for t in buf.trajectories)


class TestLFIDominance:
    def test_exhaustive_small_instances(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            n = int(rng.integers(2, 9))
            cap = int(rng.integers(1, n))
            trajs = [traj(int(rng.integers(0, 6)), seed=i) for i in range(n)]
            lfi = total_retained_intv("LFI", trajs, cap)
            for other in STRATEGIES:
                assert lfi >= total_retained_intv(other, trajs, cap, rng_seed=trial), (
                    f"trial {trial}: LFI {lfi} < {other}"
                )

    def test_lfi_retains_exact_top_k(self):
        counts = [5, 0, 3, 3, 1, 4]
        trajs = [traj(c, seed=i) for i, c in enumerate(counts)]
        buf = fill("LFI", trajs, capacity=3)
        assert sorted(intervention_count(t) for t in buf.trajectories) == [3, 4, 5]


@given(
    st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=1, max_size=40),
    st.integers(min_value=1, max_value=10),
    st.sampled_from(STRATEGIES),
)
@settings(max_examples=150, deadline=None)
def test_capacity_never_exceeded(entries, capacity, strategy):
    buf = MemoryBuffer(capacity, strategy, rng_seed=1, protect_demos=False)
    for i, (n_intv, demo) in enumerate(entries):
        buf.insert(traj(n_intv, seed=i, demo=demo))
        assert len(buf) <= capacity


class TestManifest:
    def test_manifest_contents(self, tmp_path):
        trajs = [traj(2, seed=0), traj(0, seed=1)]
        buf = fill("LFI", trajs, capacity=5)
        buf.write_manifest(tmp_path / "buffer.json")
        doc = json.loads((tmp_path / "buffer.json").read_text())
        assert doc["strategy"] == "LFI"
        assert [e["intv_samples"] for e in doc["entries"]] == [2, 0]
        assert [e["seed"] for e in doc["entries"]] == [0, 1]
