"""
Feedforward networks with exact reverse-mode gradients.

A network is a chain of dense layers ``y = act(x @ W + b)``. A forward pass
returns a ``ForwardTrace`` holding everything the backward pass needs, so one
network can be applied several times inside a loss (e.g. to s^t and s^{t+1})
and each application is differentiated independently. ``mlp_backward`` also
returns the gradient with respect to the network input, which is how losses
chain through frozen networks such as discriminators and position estimators.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from errors import DimensionError, GradientGraphError, NonFiniteError
from utils import array_digest

logger = logging.getLogger(__name__)

Matrix = np.ndarray

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid", "identity")
LEAKY_SLOPE = 0.2
SN_EPS = 1e-12


def as_matrix(batch, name: str = "batch") -> Matrix:
    """Validate and convert to a finite 2-D float64 array."""
    array = np.asarray(batch, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return array


# ------------------------------------------------------------
# ---------------------- Activations -------------------------
# ------------------------------------------------------------

def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "leaky_relu":
        return np.where(z > 0.0, z, LEAKY_SLOPE * z)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "leaky_relu":
        return np.where(z > 0.0, 1.0, LEAKY_SLOPE)
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


# ------------------------------------------------------------
# ---------------------- Spectral normalization --------------
# ------------------------------------------------------------

def _l2_normalize(v: np.ndarray) -> np.ndarray:
    return v / (np.linalg.norm(v) + SN_EPS)


def spectral_normalize(w: Matrix, u: np.ndarray, n_iters: int = 1) -> Tuple[Matrix, np.ndarray]:
    """
    Divide ``w`` by its top singular value estimated with power iteration.

    Args:
        w: weight matrix (fan_in x fan_out)
        u: left power-iteration vector (length fan_in), reused across calls
        n_iters: number of power iterations (>= 1)

    Returns:
        (normalized matrix, updated u)
    """
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    w = np.asarray(w, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64).copy()
    if u.shape != (w.shape[0],):
        raise DimensionError(f"power-iteration vector has shape {u.shape}, expected ({w.shape[0]},)")
    if not np.any(u):
        raise ValueError("power-iteration vector must be nonzero")
    for _ in range(n_iters):
        v = _l2_normalize(w.T @ u)
        candidate = _l2_normalize(w @ v)
        if not np.any(candidate):
            # zero matrix: keep the previous direction
            break
        u = candidate
    sigma = float(np.linalg.norm(w.T @ u))
    return w / max(sigma, SN_EPS), u


# ------------------------------------------------------------
# ---------------------- Network and gradients ---------------
# ------------------------------------------------------------

@dataclass
class Mlp:
    """
    Dense feedforward network.

    ``activations[i]`` is applied after layer ``i``. When ``spectral_norm`` is
    set every weight carries a persistent power-iteration vector in
    ``sn_vectors``; ``refresh_spectral`` advances it, forward never mutates it.
    """
    layer_dims: List[int]
    activations: List[str]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    spectral_norm: bool = False
    sn_vectors: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        n_layers = len(self.layer_dims) - 1
        if n_layers < 1:
            raise DimensionError("an Mlp needs at least one layer")
        if len(self.activations) != n_layers or len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise DimensionError("activations, weights and biases must have one entry per layer")
        for i in range(n_layers):
            expected = (self.layer_dims[i], self.layer_dims[i + 1])
            if self.weights[i].shape != expected:
                raise DimensionError(f"weight {i} has shape {self.weights[i].shape}, expected {expected}")
            if self.biases[i].shape != (self.layer_dims[i + 1],):
                raise DimensionError(f"bias {i} has shape {self.biases[i].shape}")
            if self.activations[i] not in ACTIVATIONS:
                raise ValueError(f"unknown activation {self.activations[i]!r}")
        if self.spectral_norm:
            if len(self.sn_vectors) != n_layers:
                raise DimensionError("spectral_norm requires one power-iteration vector per weight")
            for i, u in enumerate(self.sn_vectors):
                if u.shape != (self.layer_dims[i],):
                    raise DimensionError(f"power-iteration vector {i} has shape {u.shape}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1

    def params(self) -> List[np.ndarray]:
        """Parameters in the order W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        if len(params) != 2 * self.num_layers:
            raise DimensionError("parameter list length does not match the network")
        for i in range(self.num_layers):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise DimensionError(f"parameter shapes for layer {i} do not match")
            self.weights[i] = np.asarray(w, dtype=np.float64)
            self.biases[i] = np.asarray(b, dtype=np.float64)

    def refresh_spectral(self, n_iters: int = 1) -> None:
        """Advance every persistent power-iteration vector by ``n_iters`` steps."""
        if not self.spectral_norm:
            return
        for i, w in enumerate(self.weights):
            _, self.sn_vectors[i] = spectral_normalize(w, self.sn_vectors[i], n_iters)

    def effective_weights(self) -> List[np.ndarray]:
        return [_effective_weight(self, i)[0] for i in range(self.num_layers)]

    def copy(self) -> "Mlp":
        return Mlp(
            layer_dims=list(self.layer_dims),
            activations=list(self.activations),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            spectral_norm=self.spectral_norm,
            sn_vectors=[u.copy() for u in self.sn_vectors],
        )

    def digest(self) -> str:
        return array_digest(*self.params(), *self.sn_vectors)

    def __call__(self, batch) -> Matrix:
        output, _ = mlp_forward(self, batch)
        return output


@dataclass
class Gradients:
    """Per-parameter gradients mirroring an Mlp's weights and biases."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @classmethod
    def zeros_like(cls, net: Mlp) -> "Gradients":
        return cls(
            weights=[np.zeros_like(w) for w in net.weights],
            biases=[np.zeros_like(b) for b in net.biases],
        )

    def add(self, other: "Gradients", scale: float = 1.0) -> "Gradients":
        if len(other.weights) != len(self.weights):
            raise DimensionError("gradient layer counts differ")
        for i in range(len(self.weights)):
            self.weights[i] = self.weights[i] + scale * other.weights[i]
            self.biases[i] = self.biases[i] + scale * other.biases[i]
        return self

    def params(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(p))) if p.size else 0.0 for p in self.params())

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])


@dataclass
class ForwardTrace:
    """Everything recorded by one forward pass of one network."""
    net_id: int
    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    outputs: List[np.ndarray]
    eff_weights: List[np.ndarray]
    sn_terms: List[Optional[Tuple[np.ndarray, np.ndarray, float]]]


def _effective_weight(net: Mlp, i: int) -> Tuple[np.ndarray, Optional[Tuple[np.ndarray, np.ndarray, float]]]:
    w = net.weights[i]
    if not net.spectral_norm:
        return w, None
    u = net.sn_vectors[i]
    wtu = w.T @ u
    sigma = max(float(np.linalg.norm(wtu)), SN_EPS)
    v = wtu / sigma
    return w / sigma, (u, v, sigma)


def build_mlp(
    layer_dims: Sequence[int],
    rng: np.random.Generator,
    hidden_activation: str = "leaky_relu",
    output_activation: str = "identity",
    spectral_norm: bool = False,
) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    dims = [int(d) for d in layer_dims]
    if any(d < 1 for d in dims):
        raise DimensionError(f"layer dims must be positive, got {dims}")
    weights, biases, vectors = [], [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
        if spectral_norm:
            vectors.append(_l2_normalize(rng.normal(size=fan_in)))
    activations = [hidden_activation] * (len(dims) - 2) + [output_activation]
    return Mlp(dims, activations, weights, biases, spectral_norm, vectors)


# ------------------------------------------------------------
# ---------------------- Forward / backward ------------------
# ------------------------------------------------------------

def mlp_forward(net: Mlp, batch) -> Tuple[Matrix, ForwardTrace]:
    """
    Run the network on a B x in batch.

    Returns:
        (B x out output, trace for ``mlp_backward``)
    """
    x = as_matrix(batch)
    if x.shape[1] != net.input_dim:
        raise DimensionError(f"batch has {x.shape[1]} columns, network expects {net.input_dim}")
    trace = ForwardTrace(id(net), [], [], [], [], [])
    for i in range(net.num_layers):
        w, sn = _effective_weight(net, i)
        z = x @ w + net.biases[i]
        a = _activate(net.activations[i], z)
        trace.inputs.append(x)
        trace.pre_activations.append(z)
        trace.outputs.append(a)
        trace.eff_weights.append(w)
        trace.sn_terms.append(sn)
        x = a
    return x, trace


def mlp_backward(net: Mlp, trace: Optional[ForwardTrace], grad_output) -> Tuple[Gradients, Matrix]:
    """
    Reverse-mode gradients for one recorded forward pass.

    Args:
        net: the network the trace was recorded on
        trace: result of ``mlp_forward`` on ``net``
        grad_output: dLoss/dOutput, same shape as the forward output

    Returns:
        (parameter gradients, dLoss/dInput)
    """
    if trace is None or not trace.outputs:
        raise GradientGraphError("backward called without a recorded forward pass")
    if trace.net_id != id(net):
        raise GradientGraphError("trace was recorded on a different network")
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != trace.outputs[-1].shape:
        raise DimensionError(f"grad_output shape {g.shape} does not match output {trace.outputs[-1].shape}")

    grads = Gradients.zeros_like(net)
    for i in reversed(range(net.num_layers)):
        dz = g * _activation_grad(net.activations[i], trace.pre_activations[i], trace.outputs[i])
        d_eff = trace.inputs[i].T @ dz
        grads.biases[i] = dz.sum(axis=0)
        g = dz @ trace.eff_weights[i].T
        sn = trace.sn_terms[i]
        if sn is None:
            grads.weights[i] = d_eff
        else:
            # W_eff = W / sigma with sigma = ||W^T u||, d sigma / dW = u v^T
            u, v, sigma = sn
            grads.weights[i] = (d_eff - np.sum(d_eff * trace.eff_weights[i]) * np.outer(u, v)) / sigma
    return grads, g


def finite_difference_check(
    net: Mlp,
    loss_fn: Callable[[Mlp], Tuple[float, Gradients]],
    h: float = 1e-5,
) -> float:
    """
    Compare analytic gradients with central differences over every parameter.

    Returns the norm-wise relative error ||a - n|| / (||a|| + ||n||).
    """
    _, analytic = loss_fn(net)
    numeric = []
    for p in net.params():
        flat = p.reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + h
            plus, _ = loss_fn(net)
            flat[k] = original - h
            minus, _ = loss_fn(net)
            flat[k] = original
            numeric.append((plus - minus) / (2.0 * h))
    a = analytic.flat()
    n = np.asarray(numeric)
    denom = np.linalg.norm(a) + np.linalg.norm(n)
    if denom < 1e-300:
        return 0.0
    return float(np.linalg.norm(a - n) / denom)
