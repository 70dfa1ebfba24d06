import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import kstest

from arm_env import ArmState, make_scenario, observe, reach_task, reset, step
from bco import (
    ReferenceReturns,
    RandomPolicy,
    ScriptedPolicy,
    behavioral_cloning,
    collect_random,
    evaluate_policy,
    label_actions,
    load_inverse_model,
    load_policy,
    normalized_score,
    reference_returns,
    run_bco,
    save_inverse_model,
    save_policy,
    train_inverse_model,
)
from bco.inverse_model import InverseDynamicsModel
from config import EXPLORATION_STEPS
from conftest import make_trajectory
from errors import DimensionError, EvaluationReferenceError, UntrainedModelError
from expert_gen import DemoRequest, PdExpert, generate_demos
from numcore import build_mlp
from traj_data import fit_normalizer, strip_actions


@pytest.fixture(scope='module')
def exploration():
    config = make_scenario('self').agent_config
    return config, collect_random(config, 1200, seed=2)


@pytest.fixture(scope='module')
def inverse_model(exploration):
    config, expl = exploration
    return train_inverse_model(expl, config.torque_limit, epochs=2, seed=0)


def constant_action_demos(count=5, length=20):
    return [make_trajectory(domain='A', length=length, with_actions=True, offset=0.1 * k) for k in range(count)]


# ---- exploration ----

def test_exploration_has_requested_size(exploration):
    config, expl = exploration
    assert len(expl) == 1200
    assert expl.states.shape == (1200, config.state_dim)
    assert np.all(np.abs(expl.actions) <= config.torque_limit)


def test_exploration_triplets_follow_the_simulator(exploration):
    config, expl = exploration
    for i in range(0, len(expl), 97):
        obs = expl.states[i]
        arm = ArmState(obs[:2].copy(), obs[2:4].copy(), obs[4:].copy())
        assert_allclose(observe(step(arm, expl.actions[i], config).state, config), expl.next_states[i], atol=1e-12)


def test_exploration_is_seeded(two_link):
    a = collect_random(two_link, 50, seed=9)
    b = collect_random(two_link, 50, seed=9)
    assert_allclose(a.states, b.states)
    assert_allclose(a.actions, b.actions)


def test_exploration_needs_steps(two_link):
    with pytest.raises(ValueError):
        collect_random(two_link, 0, seed=0)


def test_exploration_torques_are_uniform(two_link):
    expl = collect_random(two_link, 100_000, seed=11)
    limit = two_link.torque_limit
    for d in range(two_link.action_dim):
        assert kstest(expl.actions[:, d], 'uniform', args=(-limit, 2 * limit)).statistic <= 0.02


# ---- inverse dynamics ----

def test_inverse_model_needs_enough_triplets(two_link):
    with pytest.raises(DimensionError, match='at least 1000'):
        train_inverse_model(collect_random(two_link, 200, seed=0), two_link.torque_limit, epochs=1)


def test_inverse_model_is_deterministic(exploration, inverse_model):
    config, expl = exploration
    again = train_inverse_model(expl, config.torque_limit, epochs=2, seed=0)
    assert again.net.digest() == inverse_model.net.digest()
    assert np.isfinite(inverse_model.heldout_mse)


def test_labels_have_one_action_per_transition(exploration, inverse_model):
    config, _ = exploration
    demos = generate_demos(DemoRequest('A', reach_task(90), 3, seed=1), config)
    labeled = label_actions(inverse_model, demos)
    for source, traj in zip(demos, labeled):
        assert traj.actions.shape == (source.length - 1, config.action_dim)
        assert np.all(np.abs(traj.actions) <= config.torque_limit)
        assert_allclose(traj.states, source.states)


def test_labeling_checks_state_width(inverse_model):
    with pytest.raises(DimensionError):
        label_actions(inverse_model, [make_trajectory(domain='A', state_dim=8)])


def test_untrained_inverse_model_refuses(rng, two_link):
    norm = fit_normalizer([make_trajectory()], goal_dims=())
    idm = InverseDynamicsModel(build_mlp([12, 4, 2], rng), norm, two_link.torque_limit)
    with pytest.raises(UntrainedModelError):
        idm.predict(np.zeros((1, 6)), np.zeros((1, 6)))


def test_inverse_model_file_round_trip(tmp_path, exploration, inverse_model):
    _, expl = exploration
    path = str(tmp_path / 'idm.json')
    save_inverse_model(inverse_model, path)
    loaded = load_inverse_model(path)
    assert_allclose(loaded.predict(expl.states[:20], expl.next_states[:20]),
                    inverse_model.predict(expl.states[:20], expl.next_states[:20]))
    assert loaded.heldout_mse == pytest.approx(inverse_model.heldout_mse)


@pytest.mark.slow
def test_inverse_model_recovers_torques_on_the_damped_chain(exploration):
    config, _ = exploration
    model = train_inverse_model(collect_random(config, EXPLORATION_STEPS, seed=0), config.torque_limit, seed=0)
    heldout = collect_random(config, 5000, seed=99)
    predicted = model.predict(heldout.states, heldout.next_states)
    assert np.all(np.sqrt(np.mean((predicted - heldout.actions) ** 2, axis=0)) < 0.05)

    rng = np.random.default_rng(3)
    state = reset(reach_task(45), config, 7)
    for _ in range(20):
        action = rng.uniform(-config.torque_limit, config.torque_limit, size=config.action_dim)
        following = step(state, action, config).state
        guess = model.predict(observe(state, config)[None, :], observe(following, config)[None, :])[0]
        assert np.max(np.abs(guess - action)) < 0.1
        state = following


# ---- behavioral cloning ----

def test_cloning_a_constant_action_recovers_it():
    demos = constant_action_demos()
    policy = behavioral_cloning(demos, torque_limit=1.0, epochs=50, batch_size=32, seed=0)
    assert len(policy.train_losses) == 50
    assert policy.train_losses[-1] < policy.train_losses[0]
    for traj in demos:
        assert np.max(np.abs(policy.act_batch(traj.states[:-1]) - 0.25)) <= 0.01


def test_cloning_is_deterministic():
    a = behavioral_cloning(constant_action_demos(), torque_limit=1.0, epochs=5, seed=3)
    b = behavioral_cloning(constant_action_demos(), torque_limit=1.0, epochs=5, seed=3)
    assert a.net.digest() == b.net.digest()
    assert a.train_losses == b.train_losses


def test_cloning_needs_labeled_data():
    with pytest.raises(DimensionError):
        behavioral_cloning([], torque_limit=1.0)
    with pytest.raises(DimensionError):
        behavioral_cloning(strip_actions(constant_action_demos()), torque_limit=1.0)


def test_policy_file_round_trip(tmp_path):
    policy = behavioral_cloning(constant_action_demos(), torque_limit=1.0, epochs=3, seed=1)
    path = str(tmp_path / 'policy.json')
    save_policy(policy, path)
    loaded = load_policy(path)
    states = constant_action_demos()[2].states
    assert_allclose(loaded.act_batch(states), policy.act_batch(states))
    assert loaded.train_losses == policy.train_losses


def test_untrained_policy_refuses():
    policy = behavioral_cloning(constant_action_demos(), torque_limit=1.0, epochs=1)
    policy.trained = False
    with pytest.raises(UntrainedModelError):
        policy.act(np.zeros(6))


def test_run_bco_labels_then_clones(inverse_model, exploration):
    config, _ = exploration
    demos = generate_demos(DemoRequest('A', reach_task(0), 3, seed=4), config)
    labeled, policy = run_bco(demos, inverse_model, epochs=2, seed=0)
    assert all(t.actions is not None for t in labeled)
    assert policy.trained and policy.torque_limit == config.torque_limit


# ---- evaluation ----

@pytest.fixture(scope='module')
def references(exploration):
    config, _ = exploration
    tasks = [reach_task(0), reach_task(90)]
    return config, tasks, reference_returns(config, tasks, episodes=2, seed=5)


def test_scripted_expert_scores_exactly_one(references):
    config, tasks, reference = references
    result = evaluate_policy(ScriptedPolicy(PdExpert(), config), config, tasks, reference, episodes=2, seed=5)
    assert result.normalized == 1.0
    assert all(row['normalized'] == 1.0 for row in result.per_task.values())


def test_random_policy_scores_exactly_zero(references):
    config, tasks, reference = references
    result = evaluate_policy(RandomPolicy(config), config, tasks, reference, episodes=2, seed=5)
    assert result.normalized == 0.0
    assert result.mean_return == pytest.approx(reference.random)


def test_reference_must_separate_expert_and_random():
    with pytest.raises(EvaluationReferenceError):
        ReferenceReturns(expert=-5.0, random=-3.0)
    with pytest.raises(EvaluationReferenceError):
        normalized_score(1.0, 2.0, 2.0)


def test_normalized_score_is_clamped():
    assert normalized_score(0.5, 1.0, 0.0) == pytest.approx(0.5)
    assert normalized_score(10.0, 1.0, 0.0) == 1.5
    assert normalized_score(-10.0, 1.0, 0.0) == -0.5
