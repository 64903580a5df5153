from __future__ import annotations

import math

import numpy as np
import pytest

from hitloop.data import ClassLabel, intervention_segments
from hitloop.env2d import EnvAction, EnvState, TaskConfig, reset, step
from hitloop.oracle import (
    ControlOwner,
    DemoFailed,
    InterventionModel,
    ScriptedIntervenor,
    arbitrate,
    channel_waypoints,
    corridor_distance,
    expert_action,
    generate_demo,
    monitor,
)

CFG = TaskConfig()
MODEL = InterventionModel()


def carried_state(xy, t=0):
    return EnvState(agent_xy=xy, object_xy=xy, carried=True, goal_xy=CFG.goal_xy, t=t)


class TestExpertAction:
    def test_release_at_slot(self):
        state = carried_state(CFG.goal_xy, t=30)
        a = expert_action(state, CFG)
        assert a.grip == -1.0
        assert a.dxdy == (0.0, 0.0)

    def test_far_target_saturates_along_direction(self):
        state = EnvState(agent_xy=(0.1, 0.5), object_xy=(0.3, 0.6), carried=False,
                         goal_xy=CFG.goal_xy, t=0)
        a = expert_action(state, CFG)
        d = (state.object_xy[0] - 0.1, state.object_xy[1] - 0.5)
        norm = max(abs(d[0]), abs(d[1]))
        expected = (d[0] / norm, d[1] / norm)
        assert a.dxdy[0] == pytest.approx(expected[0], abs=1e-9)
        assert a.dxdy[1] == pytest.approx(expected[1], abs=1e-9)
        assert max(abs(c) for c in a.dxdy) == pytest.approx(1.0, abs=1e-12)

    def test_closed_loop_success_100_seeds(self):
        for seed in range(100):
            traj = generate_demo(CFG, seed)
            assert traj.success

    def test_carried_heads_to_entrance(self):
        state = carried_state((0.3, 0.6), t=10)
        a = expert_action(state, CFG)
        entrance, _ = channel_waypoints(CFG)
        assert a.dxdy[0] > 0
        assert a.dxdy[1] < 0  # entrance is below-right of (0.3, 0.6)
        assert a.grip == 1.0


class TestMonitor:
    def test_stall_fires_after_window(self):
        state = reset(CFG, 3)
        history = [state]
        for t in range(1, MODEL.stall_window + 2):
            history.append(
                EnvState(agent_xy=state.agent_xy, object_xy=state.object_xy,
                         carried=False, goal_xy=state.goal_xy, t=t)
            )
        assert monitor(history, ControlOwner(), CFG, MODEL)

    def test_no_stall_before_window_elapsed(self):
        state = reset(CFG, 3)
        history = [state] * 5  # padded repetition, t still 0
        assert not monitor(history, ControlOwner(), CFG, MODEL)

    def test_expert_rollout_never_alarms(self):
        for seed in (0, 7, 99):
            state = reset(CFG, seed)
            history = [state]
            while True:
                assert not monitor(history, ControlOwner(), CFG, MODEL), f"seed {seed}"
                result = step(state, expert_action(state, CFG), CFG)
                state = result.state
                history.append(state)
                if result.done:
                    break

    def test_off_corridor_alarms(self):
        start = reset(CFG, 3)
        wanderer = EnvState(agent_xy=(0.2, 0.95), object_xy=start.object_xy,
                            carried=False, goal_xy=start.goal_xy, t=5)
        assert monitor([start, wanderer], ControlOwner(), CFG, MODEL)

    def test_dropped_object_outside_channel_alarms(self):
        start = reset(CFG, 3)
        dropped = EnvState(agent_xy=(0.4, 0.5), object_xy=(0.4, 0.5), carried=False,
                           goal_xy=start.goal_xy, t=9)
        assert monitor([start, dropped], ControlOwner(), CFG, MODEL)

    def test_corridor_distance_on_vertex_is_zero(self):
        poly = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]
        assert corridor_distance((1.0, 0.0), poly) == 0.0
        assert corridor_distance((0.5, 0.3), poly) == pytest.approx(0.3)


class TestArbitrate:
    def robot_action(self):
        return EnvAction(dxdy=(0.1, 0.0), grip=-1.0)

    def test_persistent_alarm_takeover_after_delay(self):
        state = reset(CFG, 1)
        owner = ControlOwner()
        labels = []
        for t in range(MODEL.reaction_delay_steps + 1):
            owner, action, label = arbitrate(owner, True, state, self.robot_action(), MODEL, CFG)
            labels.append(label)
        assert labels[: MODEL.reaction_delay_steps] == [ClassLabel.ROBOT] * MODEL.reaction_delay_steps
        assert labels[MODEL.reaction_delay_steps] is ClassLabel.INTV
        assert owner.owner == "human"

    def test_zero_delay_takes_over_immediately(self):
        model = InterventionModel(reaction_delay_steps=0)
        owner, _, label = arbitrate(ControlOwner(), True, reset(CFG, 1), self.robot_action(), model, CFG)
        assert label is ClassLabel.INTV
        assert owner.owner == "human"

    def test_alarm_clearing_resets_pending(self):
        state = reset(CFG, 1)
        owner = ControlOwner()
        for _ in range(10):
            owner, _, _ = arbitrate(owner, True, state, self.robot_action(), MODEL, CFG)
        assert owner.pending_alarm_age == 9
        owner, _, label = arbitrate(owner, False, state, self.robot_action(), MODEL, CFG)
        assert owner.pending_alarm_age is None
        assert label is ClassLabel.ROBOT

    def test_release_after_hold(self):
        state = reset(CFG, 1)
        owner = ControlOwner(owner="human")
        labels = []
        for _ in range(MODEL.release_hold_steps):
            owner, _, label = arbitrate(owner, False, state, self.robot_action(), MODEL, CFG)
            labels.append(label)
        assert all(l is ClassLabel.INTV for l in labels)
        assert owner.owner == "robot"

    def test_alarm_during_human_resets_release_streak(self):
        state = reset(CFG, 1)
        owner = ControlOwner(owner="human", clear_streak=7)
        owner, _, _ = arbitrate(owner, True, state, self.robot_action(), MODEL, CFG)
        assert owner.owner == "human"
        assert owner.clear_streak == 0

    def test_label_soundness(self):
        # Whatever the alarm sequence, robot-owned steps are labeled robot
        # and human-owned steps intv.
        rng = np.random.default_rng(5)
        state = reset(CFG, 1)
        owner = ControlOwner()
        for _ in range(500):
            before = owner.owner
            owner, _, label = arbitrate(owner, bool(rng.integers(2)), state, self.robot_action(), MODEL, CFG)
            if label is ClassLabel.INTV:
                assert before == "human" or owner.owner == "human"
            else:
                assert before == "robot"


class TestGenerateDemo:
    def test_deterministic(self):
        assert generate_demo(CFG, 11) == generate_demo(CFG, 11)

    def test_all_demo_labels_and_success(self):
        traj = generate_demo(CFG, 4)
        assert traj.success
        assert all(s.label is ClassLabel.DEMO for s in traj.samples)
        assert traj.round == 0

    def test_impossible_horizon_fails(self):
        with pytest.raises(DemoFailed):
            generate_demo(TaskConfig(horizon=1), 0)


class TestScriptedIntervenorSegments:
    def test_reaction_delay_exactness_and_maximal_runs(self):
        # Force a stall: robot proposes zero actions; first alarm comes when
        # the stall window elapses, takeover reaction_delay steps later.
        intervenor = ScriptedIntervenor(MODEL, CFG)
        state = reset(CFG, 21)
        intervenor.begin_episode(0, state)
        labels = []
        first_alarm = None
        t = 0
        while t < 80:
            robot_action = EnvAction(dxdy=(0.0, 0.0), grip=-1.0)
            if first_alarm is None and monitor(intervenor._history, ControlOwner(), CFG, MODEL):
                first_alarm = t
            action, label = intervenor.decide(state, robot_action)
            result = step(state, action, CFG)
            labels.append(label)
            intervenor.observe(result.state, result.reward, result.done, result.success)
            state = result.state
            t += 1
            if result.done:
                break
        first_intv = labels.index(ClassLabel.INTV)
        assert first_alarm == MODEL.stall_window
        assert first_intv - first_alarm == MODEL.reaction_delay_steps
