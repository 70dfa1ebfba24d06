"""
Loss primitives and their gradients with respect to the loss inputs.

Every ``*_grad`` function returns dLoss/dInput with the same shape as the input,
ready to be fed to ``mlp_backward``.
"""

from typing import Tuple

import numpy as np

from errors import DimensionError

BCE_CLAMP = 1e-7


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2 or a.shape[0] == 0:
        raise DimensionError(f"expected a non-empty 2-D batch, got shape {a.shape}")


def mse(a, b) -> float:
    """Batch mean of the squared L2 distance between rows."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    return float(np.mean(np.sum((a - b) ** 2, axis=1)))


def mse_grad(a, b) -> np.ndarray:
    """d mse(a, b) / d a. The gradient w.r.t. b is its negation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    return 2.0 * (a - b) / a.shape[0]


def bce(pred_prob, label) -> float:
    p = np.clip(np.asarray(pred_prob, dtype=np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = np.asarray(label, dtype=np.float64)
    _check_pair(p, y)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def bce_grad(pred_prob, label) -> np.ndarray:
    """Gradient w.r.t. the (unclamped) probabilities; zero where the clamp is active."""
    raw = np.asarray(pred_prob, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    _check_pair(raw, y)
    p = np.clip(raw, BCE_CLAMP, 1.0 - BCE_CLAMP)
    active = (raw > BCE_CLAMP) & (raw < 1.0 - BCE_CLAMP)
    g = (-y / p + (1.0 - y) / (1.0 - p)) / raw.size
    return np.where(active, g, 0.0)


def lsq_adv_losses(d_real, d_fake) -> Tuple[float, float]:
    """
    Least-squares adversarial losses on raw discriminator outputs.

    Returns:
        (disc_loss, gen_loss) with disc_loss = mean((d_real-1)^2) + mean(d_fake^2)
        and gen_loss = mean((d_fake-1)^2)
    """
    d_real = np.asarray(d_real, dtype=np.float64)
    d_fake = np.asarray(d_fake, dtype=np.float64)
    if d_real.size == 0 or d_fake.size == 0:
        raise DimensionError("adversarial losses need non-empty batches")
    disc_loss = float(np.mean((d_real - 1.0) ** 2) + np.mean(d_fake ** 2))
    gen_loss = float(np.mean((d_fake - 1.0) ** 2))
    return disc_loss, gen_loss


def lsq_disc_grads(d_real, d_fake) -> Tuple[np.ndarray, np.ndarray]:
    d_real = np.asarray(d_real, dtype=np.float64)
    d_fake = np.asarray(d_fake, dtype=np.float64)
    return 2.0 * (d_real - 1.0) / d_real.size, 2.0 * d_fake / d_fake.size


def lsq_gen_grad(d_fake) -> np.ndarray:
    d_fake = np.asarray(d_fake, dtype=np.float64)
    return 2.0 * (d_fake - 1.0) / d_fake.size
