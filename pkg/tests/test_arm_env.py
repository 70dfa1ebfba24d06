from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from arm_env import (
    SEQUENTIAL_REACH,
    ArmState,
    TaskSpec,
    episode_horizon,
    eval_reward,
    forward_kinematics,
    goal_frame_rotation,
    make_scenario,
    observe,
    reach_task,
    reset,
    rollout,
    step,
    wrap_angle,
)
from config import SCENARIOS
from errors import InvalidActionError, ScenarioError


def state(angles, velocities, goal=(0.1, 0.1), goal_index=0):
    return ArmState(np.asarray(angles, float), np.asarray(velocities, float), np.asarray(goal, float), goal_index)


@pytest.mark.parametrize('angles, expected', [
    ((0.0, 0.0), (0.2, 0.0)),
    ((np.pi / 2, 0.0), (0.0, 0.2)),
    ((0.0, np.pi / 2), (0.1, 0.1)),
])
def test_forward_kinematics(two_link, angles, expected):
    assert_allclose(forward_kinematics(angles, two_link), expected, atol=1e-12)


def test_reset_is_deterministic_and_starts_at_first_goal(two_link):
    task = reach_task(90)
    a = reset(task, two_link, 7)
    b = reset(task, two_link, 7)
    assert_allclose(a.angles, b.angles)
    assert np.array_equal(a.goal, np.asarray(task.goals[0]))
    assert a.goal_index == 0
    assert_allclose(a.velocities, 0.0)


def test_reset_angles_are_centred(two_link):
    task = reach_task(0)
    angles = np.array([reset(task, two_link, seed).angles for seed in range(5000)])
    assert np.all(np.abs(angles.mean(axis=0)) < 0.1)


def test_zero_torque_at_rest_keeps_state(two_link):
    s = state((0.3, -0.2), (0.0, 0.0))
    nxt = step(s, np.zeros(2), two_link).state
    assert_allclose(nxt.angles, s.angles)
    assert_allclose(nxt.velocities, s.velocities)


def test_damping_decays_velocity(two_link):
    config = replace(two_link, damping=1.0)
    nxt = step(state((0.0, 0.0), (1.0, 0.0)), np.zeros(2), config).state
    assert nxt.velocities[0] == pytest.approx(0.95)


def test_doubled_damping_slows_faster():
    expert, agent, _, _ = make_scenario('d-r2r')
    s = state((0.0, 0.0), (1.0, -1.0))
    fast = step(s, np.zeros(2), agent).state.velocities
    slow = step(s, np.zeros(2), expert).state.velocities
    assert np.all(np.abs(slow) < np.abs(fast))


def test_angles_stay_wrapped(two_link, rng):
    s = state((3.1, -3.1), (0.0, 0.0))
    for _ in range(200):
        s = step(s, rng.uniform(-1, 1, size=2), two_link).state
        assert np.all(s.angles > -np.pi) and np.all(s.angles <= np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)


def test_invalid_actions_are_rejected(two_link):
    s = state((0.0, 0.0), (0.0, 0.0))
    with pytest.raises(InvalidActionError):
        step(s, np.zeros(3), two_link)
    with pytest.raises(InvalidActionError):
        step(s, np.array([np.nan, 0.0]), two_link)


def test_observe_without_offset_is_verbatim(two_link):
    s = state((0.1, 0.2), (0.3, 0.4), goal=(0.05, -0.1))
    assert_allclose(observe(s, two_link), [0.1, 0.2, 0.3, 0.4, 0.05, -0.1])


def test_observe_with_half_turn_offset():
    expert, _, _, _ = make_scenario('v-r2r')
    obs = observe(state((0.0, 0.0), (0.0, 0.0), goal=(0.1, 0.1)), expert)
    assert obs[0] == pytest.approx(np.pi)
    assert_allclose(obs[4:], [-0.1, -0.1], atol=1e-15)


def test_half_turn_observation_is_an_involution():
    expert, _, _, _ = make_scenario('v-r2r')
    s = state((0.4, -0.3), (0.0, 0.0), goal=(0.12, -0.05))
    once = observe(s, expert)
    twice = observe(state(once[:2], once[2:4], once[4:]), expert)
    assert_allclose(twice[:2], s.angles, atol=1e-12)
    assert_allclose(twice[4:], s.goal, atol=1e-12)


def test_reach_reward_zero_at_goal(two_link):
    s = state((0.0, 0.0), (0.0, 0.0), goal=(0.2, 0.0))
    assert eval_reward(s, np.zeros(2), two_link) == pytest.approx(0.0, abs=1e-12)


def test_sequential_rewards(two_link):
    task = TaskSpec(SEQUENTIAL_REACH, ((0.1, 0.0), (0.0, 0.1)), 'seq')
    s = state((0.0, 0.0), (0.0, 0.0))
    assert eval_reward(s, np.zeros(2), two_link, task, reached_goal=True) == 100.0
    assert eval_reward(s, np.zeros(2), two_link, task, reached_goal=False) == -1.0


def test_sequential_task_advances_goal(two_link):
    task = TaskSpec(SEQUENTIAL_REACH, ((0.2, 0.0), (0.0, 0.2)), 'seq')
    s = state((0.0, 0.0), (0.0, 0.0), goal=task.goals[0])
    result = step(s, np.zeros(2), two_link, task)
    assert result.reached_goal and not result.finished
    assert result.goal_index == 1
    assert_allclose(result.state.goal, (0.0, 0.2))


def test_sequential_horizon_scales_with_vertices():
    _, agent, _, inference = make_scenario('v-r2w')
    assert episode_horizon(inference[0], agent) == max(agent.max_steps, 50 * len(inference[0].goals))
    assert episode_horizon(reach_task(0), agent) == agent.max_steps


def test_rollout_stops_at_goal(two_link):
    task = reach_task(0, radius=0.2)
    episode = rollout(lambda s, o: np.zeros(2), task, two_link, seed=0)
    assert len(episode.observations) == len(episode.actions) + 1
    assert len(episode.actions) <= two_link.max_steps


def test_scenarios():
    m_expert, m_agent, _, _ = make_scenario('m-r2r')
    assert m_expert.state_dim == 8
    assert m_agent.state_dim == 6
    s_expert, s_agent, _, _ = make_scenario('self')
    assert s_expert == s_agent
    d_expert, d_agent, _, _ = make_scenario('d-r2r')
    assert d_expert.damping == 2.0 * d_agent.damping


@pytest.mark.parametrize('name', SCENARIOS)
def test_inference_goals_are_far_from_proxy_goals(name):
    scenario = make_scenario(name)
    for inference in scenario.inference_tasks:
        for goal in inference.goals:
            for proxy in scenario.proxy_tasks:
                assert np.linalg.norm(np.subtract(goal, proxy.goals[0])) >= 0.13 or inference.kind == SEQUENTIAL_REACH


def test_unknown_scenario():
    with pytest.raises(ScenarioError, match='unknown scenario'):
        make_scenario('r2d2')


def test_goal_frame_rotation():
    expert, agent, _, _ = make_scenario('v-r2r')
    assert goal_frame_rotation(expert, agent) == pytest.approx(-np.pi)
    expert, agent, _, _ = make_scenario('m-r2r')
    assert goal_frame_rotation(expert, agent) == 0.0


def test_proxy_task_subset():
    scenario = make_scenario('v-r2r').with_proxy_tasks(2)
    assert len(scenario.proxy_tasks) == 2
    with pytest.raises(ScenarioError):
        make_scenario('v-r2r').with_proxy_tasks(5)
