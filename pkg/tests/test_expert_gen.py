import numpy as np
import pytest
from numpy.testing import assert_allclose

from arm_env import ArmState, forward_kinematics, make_scenario, reach_task
from errors import ExpertValidationError, UnreachableGoalError
from expert_gen import (
    DemoRequest,
    PdExpert,
    agent_inference_demos,
    expert_action,
    generate_demos,
    generate_scenario_corpora,
    inverse_kinematics,
    random_action,
    validate_expert,
)


def at_rest(angles, goal):
    return ArmState(np.asarray(angles, float), np.zeros(len(angles)), np.asarray(goal, float))


def test_two_link_ik_known_poses(two_link):
    assert_allclose(inverse_kinematics((0.2, 0.0), two_link), (0.0, 0.0), atol=1e-7)
    assert_allclose(inverse_kinematics((0.0, 0.2), two_link), (np.pi / 2, 0.0), atol=1e-7)


@pytest.mark.parametrize('goal', [(0.1, 0.05), (-0.12, 0.08), (0.0, -0.18), (-0.15, -0.02)])
def test_three_link_ik_round_trip(goal):
    expert = make_scenario('m-r2r').expert_config
    angles = inverse_kinematics(goal, expert)
    assert np.linalg.norm(forward_kinematics(angles, expert) - np.asarray(goal)) < 1e-3


def test_ik_rejects_unreachable_goal(two_link):
    with pytest.raises(UnreachableGoalError):
        inverse_kinematics((0.5, 0.0), two_link)


def test_expert_action_zero_at_target(two_link):
    goal = (0.1, 0.12)
    target = inverse_kinematics(goal, two_link)
    assert_allclose(expert_action(at_rest(target, goal), PdExpert(), two_link), 0.0, atol=1e-12)


def test_expert_action_pushes_back(two_link):
    goal = (0.1, 0.12)
    target = inverse_kinematics(goal, two_link)
    displaced = target + np.array([0.05, 0.0])
    torque = expert_action(at_rest(displaced, goal), PdExpert(), two_link)
    assert torque[0] < 0.0


def test_expert_action_saturates(two_link):
    goal = (0.1, 0.12)
    displaced = inverse_kinematics(goal, two_link) + np.array([2.5, 0.0])
    torque = expert_action(at_rest(displaced, goal), PdExpert(), two_link)
    assert abs(torque[0]) == two_link.torque_limit


def test_random_action_within_limits(two_link, rng):
    actions = np.array([random_action(two_link, rng) for _ in range(500)])
    assert np.all(np.abs(actions) <= two_link.torque_limit)


def test_pd_gains_must_be_positive():
    with pytest.raises(ValueError):
        PdExpert(kp=0.0)


def test_expert_is_validated(two_link):
    assert validate_expert(PdExpert(), reach_task(90), two_link) >= 0.95


def test_weak_expert_fails_validation(two_link):
    with pytest.raises(ExpertValidationError):
        validate_expert(PdExpert(kp=1e-3, kd=1e-3), reach_task(90), two_link)


def test_generate_demos_counts_and_termination(two_link):
    trajs = generate_demos(DemoRequest('A', reach_task(0), 30, seed=3), two_link)
    assert len(trajs) == 30
    for traj in trajs:
        tip = forward_kinematics(traj.states[-1, :2], two_link)
        reached = np.linalg.norm(tip - traj.states[-1, 4:]) < two_link.goal_radius
        assert reached or traj.length == two_link.max_steps + 1
        assert traj.actions is None
    lengths = [t.length for t in trajs]
    assert max(lengths) / min(lengths) >= 1.2


def test_generate_demos_is_deterministic_and_records_actions(two_link):
    request = DemoRequest('A', reach_task(180), 5, record_actions=True, seed=11)
    first = generate_demos(request, two_link)
    second = generate_demos(request, two_link, workers=3)
    assert first == second
    assert all(t.actions.shape == (t.length - 1, 2) for t in first)


def test_viewpoint_demos_store_rotated_observations():
    scenario = make_scenario('v-r2r')
    trajs = generate_demos(DemoRequest('E', scenario.proxy_tasks[0], 3, seed=0), scenario.expert_config)
    goal = np.asarray(scenario.proxy_tasks[0].goals[0])
    for traj in trajs:
        assert_allclose(traj.states[0, 4:], -goal, atol=1e-12)


def test_scenario_corpora_layout():
    scenario = make_scenario('m-r2r').with_proxy_tasks(2)
    corpora = generate_scenario_corpora(scenario, demos_per_proxy_task=3, inference_demo_count=2, seed=0)
    assert len(corpora) == 2 * 2 + len(scenario.inference_tasks)
    assert all(len(v) == 3 for k, v in corpora.items() if k.startswith('proxy_'))
    assert all(len(v) == 2 for k, v in corpora.items() if k.startswith('inference_'))
    assert all(t.actions is None for trajs in corpora.values() for t in trajs)
    assert corpora[f"proxy_E_{scenario.proxy_tasks[0].task_id}"][0].state_dim == 8
    assert corpora[f"proxy_A_{scenario.proxy_tasks[0].task_id}"][0].state_dim == 6


def test_agent_inference_demos_carry_actions():
    scenario = make_scenario('self')
    trajs = agent_inference_demos(scenario, count=2, seed=0)
    assert len(trajs) == 2 * len(scenario.inference_tasks)
    assert all(t.domain == 'A' and t.actions is not None for t in trajs)
