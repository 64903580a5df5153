from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from hitloop.data import ClassLabel, Sample, Trajectory
from hitloop.labeling import LabelingConfig, relabel_preintv

R, I, P = ClassLabel.ROBOT, ClassLabel.INTV, ClassLabel.PREINTV


def traj_from_labels(labels):
    samples = tuple(
        Sample(state=(float(i),), action=(0.0,), reward=0.0, label=lab, t=i)
        for i, lab in enumerate(labels)
    )
    return Trajectory(samples=samples, round=1, seed=0, success=True)


def brute_force_relabel(labels, ell):
    """Per-index oracle: a robot sample becomes preintv iff an intervention
    run starts within the next ell positions."""
    starts = [
        i for i, lab in enumerate(labels) if lab is I and (i == 0 or labels[i - 1] is not I)
    ]
    out = list(labels)
    for i, lab in enumerate(labels):
        if lab is R and any(i < s <= i + ell for s in starts):
            out[i] = P
    return out


def test_single_segment_window():
    labels = [R] * 40 + [I] * 15 + [R] * 5
    out = relabel_preintv(traj_from_labels(labels), LabelingConfig(ell=15)).labels()
    assert out[25:40] == [P] * 15
    assert out[:25] == [R] * 25
    assert out[40:55] == [I] * 15
    assert out[55:] == [R] * 5


def test_window_clips_at_episode_start():
    labels = [R] * 5 + [I] * 4 + [R] * 2
    out = relabel_preintv(traj_from_labels(labels), LabelingConfig(ell=15)).labels()
    assert out[:5] == [P] * 5
    assert out[5:9] == [I] * 4


def test_two_close_segments_never_overwrite_intv():
    labels = [R] * 20 + [I] * 5 + [R] * 5 + [I] * 10
    out = relabel_preintv(traj_from_labels(labels), LabelingConfig(ell=15)).labels()
    expected = brute_force_relabel(labels, 15)
    assert out == expected
    assert out[5:20] == [P] * 15
    assert out[20:25] == [I] * 5
    assert out[25:30] == [P] * 5
    assert out[30:40] == [I] * 10


def test_ell_zero_is_identity():
    labels = [R] * 3 + [I] * 2 + [R]
    traj = traj_from_labels(labels)
    assert relabel_preintv(traj, LabelingConfig(ell=0)) == traj


label_lists = st.lists(st.sampled_from([R, I]), min_size=1, max_size=100)
ells = st.integers(min_value=0, max_value=30)


@given(label_lists, ells)
@settings(max_examples=150, deadline=None)
def test_matches_brute_force_oracle(labels, ell):
    out = relabel_preintv(traj_from_labels(labels), LabelingConfig(ell=ell)).labels()
    assert out == brute_force_relabel(labels, ell)


@given(label_lists, ells)
@settings(max_examples=100, deadline=None)
def test_idempotent(labels, ell):
    cfg = LabelingConfig(ell=ell)
    once = relabel_preintv(traj_from_labels(labels), cfg)
    twice = relabel_preintv(once, cfg)
    assert once == twice


@given(label_lists, ells)
@settings(max_examples=100, deadline=None)
def test_conserves_states_and_actions(labels, ell):
    traj = traj_from_labels(labels)
    out = relabel_preintv(traj, LabelingConfig(ell=ell))
    assert [(s.state, s.action, s.t) for s in out.samples] == [
        (s.state, s.action, s.t) for s in traj.samples
    ]


@given(label_lists, ells)
@settings(max_examples=100, deadline=None)
def test_count_bound(labels, ell):
    traj = traj_from_labels(labels)
    out = relabel_preintv(traj, LabelingConfig(ell=ell))
    segments = sum(
        1 for i, lab in enumerate(labels) if lab is I and (i == 0 or labels[i - 1] is not I)
    )
    n_pre = sum(1 for s in out.samples if s.label is P)
    assert n_pre <= ell * segments


@given(label_lists, st.integers(min_value=0, max_value=20), st.integers(min_value=0, max_value=20))
@settings(max_examples=100, deadline=None)
def test_monotone_in_ell(labels, e1, e2):
    lo, hi = sorted((e1, e2))
    traj = traj_from_labels(labels)
    small = relabel_preintv(traj, LabelingConfig(ell=lo))
    big = relabel_preintv(traj, LabelingConfig(ell=hi))
    small_idx = {i for i, s in enumerate(small.samples) if s.label is P}
    big_idx = {i for i, s in enumerate(big.samples) if s.label is P}
    assert small_idx <= big_idx
