import numpy as np
import pytest
from numpy.testing import assert_allclose

from arm_env import make_scenario, reach_task
from conftest import make_trajectory
from errors import DimensionError, UntrainedModelError
from expert_gen import DemoRequest, generate_demos
from numcore import Mlp, build_mlp
from temporal_pos import (
    PositionEstimator,
    estimator_digests,
    latent_pos_loss,
    load_estimator,
    pos_consistency_loss,
    position_labels,
    reached_goal,
    save_estimator,
    spearman_vs_time,
    train_position_estimator,
)
from traj_data import fit_normalizer


def constant_estimator(value, dim=4, domain='E'):
    net = Mlp([dim, 1], ['identity'], [np.zeros((dim, 1))], [np.array([float(value)])])
    return PositionEstimator(net, domain, 't', trained=True)


def linear_estimator(weights, domain='E'):
    weights = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
    net = Mlp([weights.shape[0], 1], ['identity'], [weights], [np.zeros(1)])
    return PositionEstimator(net, domain, 't', trained=True)


@pytest.fixture(scope='module')
def reach_demos():
    config = make_scenario('self').agent_config
    return config, generate_demos(DemoRequest('A', reach_task(90), 40, seed=5), config)


# ---- labels ----

def test_labels_examples():
    assert_allclose(position_labels(make_trajectory(length=3), 0.9), [0.81, 0.9, 1.0])
    assert_allclose(position_labels(make_trajectory(length=4), 0.5), [0.125, 0.25, 0.5, 1.0])


def test_labels_are_increasing_and_end_at_one():
    labels = position_labels(make_trajectory(length=40), 0.95)
    assert labels[-1] == 1.0
    assert np.all(np.diff(labels) > 0)


def test_labels_reject_bad_gamma():
    with pytest.raises(ValueError):
        position_labels(make_trajectory(length=3), 1.0)


# ---- estimator training ----

def test_expert_demos_reach_their_goal(reach_demos):
    config, demos = reach_demos
    assert all(reached_goal(t, config) for t in demos)


def test_training_marks_estimator_and_persists(tmp_path, reach_demos):
    config, demos = reach_demos
    norm = fit_normalizer(demos, config.goal_dims)
    estimator = train_position_estimator(demos, 'A', 'reach_090', norm, config, steps=50, batch_size=32, seed=0)
    assert estimator.trained
    assert np.isfinite(estimator.train_mse) and np.isfinite(estimator.heldout_mse)

    path = str(tmp_path / 'pos.json')
    save_estimator(estimator, path)
    loaded = load_estimator(path, norm.nongoal_dim)
    states = norm.apply_nongoal(demos[0].states)
    assert_allclose(loaded.predict(states), estimator.predict(states))
    assert loaded.task_id == 'reach_090' and loaded.gamma_pos == estimator.gamma_pos


def test_training_is_deterministic(reach_demos):
    config, demos = reach_demos
    norm = fit_normalizer(demos, config.goal_dims)
    a = train_position_estimator(demos[:12], 'A', 't', norm, config, steps=20, batch_size=16, seed=3)
    b = train_position_estimator(demos[:12], 'A', 't', norm, config, steps=20, batch_size=16, seed=3)
    assert estimator_digests([a]) == estimator_digests([b])


def test_non_reaching_trajectories_are_excluded(two_link):
    stuck = [make_trajectory(domain='A', length=6, state_dim=6, offset=0.3) for _ in range(3)]
    norm = fit_normalizer(stuck, two_link.goal_dims)
    with pytest.raises(DimensionError, match='no goal-reaching'):
        train_position_estimator(stuck, 'A', 't', norm, two_link, steps=5)


def test_untrained_estimator_refuses_to_predict(rng):
    estimator = PositionEstimator(build_mlp([4, 8, 1], rng), 'E', 't')
    with pytest.raises(UntrainedModelError):
        estimator.predict(np.zeros((2, 4)))


# ---- position consistency ----

def test_equal_constant_estimators_give_zero_loss(rng):
    p = constant_estimator(0.7)
    s = rng.normal(size=(8, 4))
    result = pos_consistency_loss(p, constant_estimator(0.7, domain='A'), s, s, s, s)
    assert result.value == 0.0


def test_constants_zero_and_one_give_two(rng):
    s = rng.normal(size=(8, 4))
    result = pos_consistency_loss(constant_estimator(0.0), constant_estimator(1.0, domain='A'), s, s, s, s)
    assert result.value == pytest.approx(2.0)
    assert result.expert_to_agent == pytest.approx(1.0)
    assert result.agent_to_expert == pytest.approx(1.0)
    assert_allclose(result.grad_mapped_e, 0.0)


def test_identity_map_with_shared_estimator_is_consistent(rng):
    p = linear_estimator(rng.normal(size=4))
    s = rng.normal(size=(16, 4))
    assert pos_consistency_loss(p, p, s, s, s, s).value == pytest.approx(0.0, abs=1e-24)


def test_position_gradient_matches_finite_differences(rng):
    p_e = linear_estimator(rng.normal(size=4))
    p_a = linear_estimator(rng.normal(size=4), domain='A')
    s_e, s_a = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
    mapped = rng.normal(size=(5, 4))
    result = pos_consistency_loss(p_e, p_a, s_e, mapped, s_a, s_a)
    h = 1e-6
    bumped = mapped.copy()
    bumped[2, 1] += h
    plus = pos_consistency_loss(p_e, p_a, s_e, bumped, s_a, s_a).value
    bumped[2, 1] -= 2 * h
    minus = pos_consistency_loss(p_e, p_a, s_e, bumped, s_a, s_a).value
    assert result.grad_mapped_e[2, 1] == pytest.approx((plus - minus) / (2 * h), rel=1e-5)


def test_position_loss_leaves_estimators_frozen(rng):
    p_e = linear_estimator(rng.normal(size=4))
    p_a = linear_estimator(rng.normal(size=4), domain='A')
    before = estimator_digests([p_e, p_a])
    s = rng.normal(size=(6, 4))
    pos_consistency_loss(p_e, p_a, s, s + 1.0, s, s - 1.0)
    assert estimator_digests([p_e, p_a]) == before


# ---- latent position ----

def test_mean_predictor_loss_is_target_variance(rng):
    target = linear_estimator(rng.normal(size=4))
    states = rng.normal(size=(50, 4))
    values = target.predict(states)
    latent = rng.normal(size=(50, 3))
    p_z = Mlp([3, 1], ['identity'], [np.zeros((3, 1))], [np.array([values.mean()])])
    result = latent_pos_loss(p_z, target, latent, states)
    assert result.value == pytest.approx(np.var(values))


def test_latent_gradient_flows_to_latent_and_predictor_only(rng):
    target = linear_estimator(rng.normal(size=4))
    before = estimator_digests([target])
    p_z = build_mlp([3, 6, 1], rng, hidden_activation='tanh')
    states, latent = rng.normal(size=(7, 4)), rng.normal(size=(7, 3))
    result = latent_pos_loss(p_z, target, latent, states)
    assert estimator_digests([target]) == before
    assert result.grad_latent.shape == latent.shape
    h = 1e-6
    bumped = latent.copy()
    bumped[0, 0] += h
    plus = latent_pos_loss(p_z, target, bumped, states).value
    bumped[0, 0] -= 2 * h
    minus = latent_pos_loss(p_z, target, bumped, states).value
    assert result.grad_latent[0, 0] == pytest.approx((plus - minus) / (2 * h), rel=1e-5)


def test_latent_loss_needs_states(rng):
    with pytest.raises(DimensionError):
        latent_pos_loss(build_mlp([3, 1], rng), linear_estimator(np.ones(4)), np.zeros((0, 3)), np.zeros((0, 4)))


@pytest.mark.slow
def test_estimator_quality_on_reach_demos(two_link):
    demos = generate_demos(DemoRequest('A', reach_task(0), 200, seed=1), two_link)
    norm = fit_normalizer(demos, two_link.goal_dims)
    estimator = train_position_estimator(demos, 'A', 'reach_000', norm, two_link, seed=0)
    assert estimator.heldout_mse < 0.01
    long_demo = max(demos, key=lambda t: t.length)
    assert spearman_vs_time(estimator, long_demo, norm) >= 0.9
