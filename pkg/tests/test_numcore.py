import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DimensionError, GradientGraphError
from numcore import (
    Adam,
    AdamState,
    Gradients,
    Mlp,
    adam_step,
    bce,
    bce_grad,
    build_mlp,
    finite_difference_check,
    load_metadata,
    load_mlp,
    lsq_adv_losses,
    mlp_backward,
    mlp_forward,
    mse,
    mse_grad,
    save_mlp,
    spectral_normalize,
)


def linear_net(weight, bias=None, activation='identity'):
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.zeros(weight.shape[1]) if bias is None else np.asarray(bias, dtype=np.float64)
    return Mlp([weight.shape[0], weight.shape[1]], [activation], [weight], [bias])


# ---- forward ----

def test_identity_layer_passes_input_through():
    net = linear_net(np.eye(2))
    assert_allclose(net([[1.0, 2.0]]), [[1.0, 2.0]])


def test_relu_layer_clips_negatives():
    net = linear_net(np.eye(2), activation='relu')
    assert_allclose(net([[-1.0, 3.0]]), [[0.0, 3.0]])


def test_two_layer_net_matches_hand_computation():
    w0 = np.array([[1.0, -1.0], [2.0, 0.5]])
    b0 = np.array([0.5, 0.0])
    w1 = np.array([[1.0], [3.0]])
    b1 = np.array([-1.0])
    net = Mlp([2, 2, 1], ['relu', 'identity'], [w0, w1], [b0, b1])
    x = np.array([[1.0, 1.0]])
    hidden = np.maximum(x @ w0 + b0, 0.0)  # [3.5, 0.0]
    assert_allclose(net(x), hidden @ w1 + b1)
    assert net(x)[0, 0] == pytest.approx(2.5)


def test_forward_rejects_wrong_width():
    with pytest.raises(DimensionError, match='columns'):
        linear_net(np.eye(2))([[1.0, 2.0, 3.0]])


def test_forward_rejects_non_finite_input():
    with pytest.raises(DimensionError, match='non-finite'):
        linear_net(np.eye(2))([[np.nan, 1.0]])


# ---- backward ----

def test_sum_loss_weight_gradient_is_column_sums():
    net = linear_net(np.eye(3))
    x = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    out, trace = mlp_forward(net, x)
    grads, grad_input = mlp_backward(net, trace, np.ones_like(out))
    # dL/dW[i, j] = sum_b x[b, i]
    assert_allclose(grads.weights[0], np.repeat(x.sum(axis=0)[:, None], 3, axis=1))
    assert_allclose(grads.biases[0], [2.0, 2.0, 2.0])
    assert_allclose(grad_input, np.ones((2, 3)))


def test_zero_loss_gives_zero_gradients(rng):
    net = build_mlp([3, 4, 2], rng)
    out, trace = mlp_forward(net, rng.normal(size=(5, 3)))
    grads, _ = mlp_backward(net, trace, 0.0 * out)
    assert grads.max_abs() == 0.0


def _squared_loss(x, target):
    def loss_fn(net):
        out, trace = mlp_forward(net, x)
        diff = out - target
        grads, _ = mlp_backward(net, trace, 2.0 * diff / diff.size)
        return float(np.mean(diff ** 2)), grads
    return loss_fn


# hidden activation, output activation, spectral norm, scalar head
NETWORK_ROLES = {
    'state-map': ('leaky_relu', 'identity', False, False),
    'discriminator': ('leaky_relu', 'identity', True, True),
    'latent-classifier': ('leaky_relu', 'sigmoid', True, True),
    'position-estimator': ('leaky_relu', 'identity', False, True),
    'inverse-model': ('leaky_relu', 'identity', False, False),
    'policy': ('leaky_relu', 'tanh', False, False),
    'tanh-hidden': ('tanh', 'identity', False, False),
}


def _inputs_away_from_kinks(net, rng, rows=3, margin=1e-3):
    """A batch whose piecewise-linear pre-activations all sit ``margin`` away from zero."""
    for _ in range(200):
        x = rng.normal(size=(rows, net.input_dim))
        _, trace = mlp_forward(net, x)
        kinked = [z for z, act in zip(trace.pre_activations, net.activations) if act in ('relu', 'leaky_relu')]
        if all(np.min(np.abs(z)) > margin for z in kinked):
            return x
    raise AssertionError('no batch clear of the activation kinks')


def random_role_net(role, seed):
    hidden, output, spectral, scalar = NETWORK_ROLES[role]
    rng = np.random.default_rng(seed)
    depth = int(rng.integers(1, 4))
    dims = [int(rng.integers(1, 9))] + [int(w) for w in rng.integers(2, 13, size=depth)]
    dims.append(1 if scalar else int(rng.integers(1, 5)))
    return build_mlp(dims, rng, hidden_activation=hidden, output_activation=output, spectral_norm=spectral), rng


@pytest.mark.parametrize('seed', range(15))
@pytest.mark.parametrize('role', sorted(NETWORK_ROLES))
def test_gradients_match_finite_differences(role, seed):
    net, rng = random_role_net(role, 100 * seed + sorted(NETWORK_ROLES).index(role))
    x = _inputs_away_from_kinks(net, rng)
    loss_fn = _squared_loss(x, rng.normal(size=(x.shape[0], net.output_dim)))
    assert finite_difference_check(net, loss_fn) < 1e-4


def test_backward_rejects_foreign_trace(rng):
    a = build_mlp([2, 2], rng)
    b = build_mlp([2, 2], rng)
    out, trace = mlp_forward(a, np.ones((1, 2)))
    with pytest.raises(GradientGraphError, match='different network'):
        mlp_backward(b, trace, out)


def test_backward_without_forward_is_rejected(rng):
    with pytest.raises(GradientGraphError):
        mlp_backward(build_mlp([2, 2], rng), None, np.ones((1, 2)))


def test_forward_does_not_move_spectral_vectors(rng):
    net = build_mlp([3, 3, 1], rng, spectral_norm=True)
    before = [u.copy() for u in net.sn_vectors]
    net(rng.normal(size=(4, 3)))
    for u, v in zip(before, net.sn_vectors):
        assert_allclose(u, v)


# ---- Adam ----

def test_first_adam_step_moves_by_learning_rate():
    state = AdamState.for_params([np.zeros(1)], lr=1e-3)
    (w,) = adam_step([np.zeros(1)], [np.ones(1)], state)
    assert w[0] == pytest.approx(-9.99999e-4, rel=1e-5)
    assert state.step == 1


def test_zero_gradient_leaves_params_unchanged():
    params = [np.array([1.0, -2.0])]
    state = AdamState.for_params(params, lr=1e-3)
    assert_allclose(adam_step(params, [np.zeros(2)], state)[0], params[0])


def test_repeated_steps_keep_descending():
    state = AdamState.for_params([np.zeros(1)], lr=1e-3)
    (w1,) = adam_step([np.zeros(1)], [np.ones(1)], state)
    (w2,) = adam_step([w1], [np.ones(1)], state)
    assert w2[0] < w1[0]


def test_adam_shape_mismatch():
    state = AdamState.for_params([np.zeros(2)])
    with pytest.raises(DimensionError):
        adam_step([np.zeros(2)], [np.zeros(3)], state)


def test_adam_wrapper_updates_network(rng):
    net = build_mlp([2, 1], rng)
    before = net.digest()
    Adam(net, lr=1e-2).step(Gradients([np.ones((2, 1))], [np.ones(1)]))
    assert net.digest() != before


# ---- spectral normalization ----

def test_spectral_normalize_diagonal():
    w_sn, _ = spectral_normalize(np.diag([3.0, 1.0]), np.array([1.0, 1.0]), n_iters=20)
    assert_allclose(w_sn, np.diag([1.0, 1.0 / 3.0]), atol=1e-8)


def test_spectral_normalize_identity():
    w_sn, _ = spectral_normalize(np.eye(3), np.array([1.0, 0.0, 0.0]))
    assert_allclose(w_sn, np.eye(3))


def test_spectral_normalize_random_matrix_has_unit_norm(rng):
    w = rng.normal(size=(4, 4))
    w_sn, _ = spectral_normalize(w, rng.normal(size=4), n_iters=50)
    assert np.linalg.svd(w_sn, compute_uv=False)[0] == pytest.approx(1.0, abs=1e-3)


def test_spectral_normalize_requires_nonzero_vector():
    with pytest.raises(ValueError):
        spectral_normalize(np.eye(2), np.zeros(2))


# ---- losses ----

def test_lsq_losses_at_fixed_point():
    assert lsq_adv_losses([1.0], [0.0]) == (0.0, 1.0)


def test_lsq_losses_at_half():
    disc, gen = lsq_adv_losses([0.5], [0.5])
    assert disc == pytest.approx(0.5)
    assert gen == pytest.approx(0.25)


def test_lsq_losses_mixed_batch():
    disc, gen = lsq_adv_losses([1.0, 0.0], [0.5, -1.0])
    assert disc == pytest.approx(0.5 + 0.625)
    assert gen == pytest.approx((0.25 + 4.0) / 2)


def test_mse_examples():
    assert mse([[1.0, 2.0]], [[1.0, 2.0]]) == 0.0
    assert mse([[0.0, 0.0]], [[3.0, 4.0]]) == pytest.approx(25.0)


def test_mse_grad_matches_definition():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.zeros((2, 2))
    assert_allclose(mse_grad(a, b), a)


def test_mse_shape_mismatch():
    with pytest.raises(DimensionError):
        mse(np.zeros((2, 2)), np.zeros((2, 3)))


def test_bce_examples():
    assert bce([[0.5]], [[1.0]]) == pytest.approx(np.log(2.0))
    assert bce([[0.5]], [[0.0]]) == pytest.approx(np.log(2.0))
    assert bce([[1.0 - 1e-12]], [[1.0]]) < 1e-6
    assert bce([[0.9]], [[0.0]]) == pytest.approx(-np.log(0.1))


def test_bce_grad_zero_where_clamped():
    g = bce_grad([[0.0], [0.5]], [[1.0], [1.0]])
    assert g[0, 0] == 0.0
    assert g[1, 0] == pytest.approx(-1.0)


# ---- checkpoints ----

def test_checkpoint_preserves_outputs_and_metadata(tmp_path, rng):
    net = build_mlp([3, 4, 2], rng, spectral_norm=True)
    path = str(tmp_path / 'net.json')
    save_mlp(net, path, {'role': 'test'})
    loaded = load_mlp(path, expect_dims=[3, 4, 2])
    x = rng.normal(size=(5, 3))
    assert_allclose(loaded(x), net(x))
    assert loaded.digest() == net.digest()
    assert load_metadata(path)['role'] == 'test'


def test_checkpoint_dimension_check(tmp_path, rng):
    path = str(tmp_path / 'net.json')
    save_mlp(build_mlp([3, 2], rng), path)
    with pytest.raises(DimensionError):
        load_mlp(path, expect_dims=[4, 2])
