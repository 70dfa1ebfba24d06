"""
Minimal differentiable-computation core: dense networks, exact reverse-mode
gradients, spectral normalization, Adam, and the loss primitives.
"""

from .mlp import (
    ACTIVATIONS,
    ForwardTrace,
    Gradients,
    Matrix,
    Mlp,
    as_matrix,
    build_mlp,
    finite_difference_check,
    mlp_backward,
    mlp_forward,
    spectral_normalize,
)
from .optim import Adam, AdamState, adam_step
from .losses import bce, bce_grad, lsq_adv_losses, lsq_disc_grads, lsq_gen_grad, mse, mse_grad
from .checkpoint import load_metadata, load_mlp, mlp_from_dict, mlp_to_dict, save_mlp

__all__ = [
    'ACTIVATIONS',
    'ForwardTrace',
    'Gradients',
    'Matrix',
    'Mlp',
    'as_matrix',
    'build_mlp',
    'finite_difference_check',
    'mlp_backward',
    'mlp_forward',
    'spectral_normalize',
    'Adam',
    'AdamState',
    'adam_step',
    'bce',
    'bce_grad',
    'lsq_adv_losses',
    'lsq_disc_grads',
    'lsq_gen_grad',
    'mse',
    'mse_grad',
    'load_metadata',
    'load_mlp',
    'mlp_from_dict',
    'mlp_to_dict',
    'save_mlp',
]
