"""
Cross-domain state correspondence: maps, adversaries, losses, training and transfer.
"""

from .networks import (
    DiscriminatorSet,
    StateMapPair,
    TaskDiscriminators,
    build_discriminators,
    build_latent_predictor,
    build_state_maps,
)
from .losses import (
    A_TO_E,
    E_TO_A,
    ChainTrace,
    GradBook,
    LossBreakdown,
    adv_loss_terms,
    backward_chain,
    cycle_loss,
    forward_chain,
    inference_cycle_loss,
    latent_consistency_loss,
    latent_position_term,
    mi_loss,
    position_term,
    total_objective,
    weighted_terms,
    weighted_total,
)
from .trainer import (
    INFERENCE_ROW,
    METRIC_COLUMNS,
    AlignmentEstimators,
    AlignmentResult,
    AlignmentTrainer,
    metrics_row,
    train_alignment,
)
from .transfer import end_effector_recovery, mapping_identity_error, transfer_demos, transfer_states
from .checkpoint import ALIGNMENT_MANIFEST, load_alignment, load_alignment_manifest, save_alignment

__all__ = [
    'DiscriminatorSet',
    'StateMapPair',
    'TaskDiscriminators',
    'build_discriminators',
    'build_latent_predictor',
    'build_state_maps',
    'A_TO_E',
    'E_TO_A',
    'ChainTrace',
    'GradBook',
    'LossBreakdown',
    'adv_loss_terms',
    'backward_chain',
    'cycle_loss',
    'forward_chain',
    'inference_cycle_loss',
    'latent_consistency_loss',
    'latent_position_term',
    'mi_loss',
    'position_term',
    'total_objective',
    'weighted_terms',
    'weighted_total',
    'INFERENCE_ROW',
    'METRIC_COLUMNS',
    'AlignmentEstimators',
    'AlignmentResult',
    'AlignmentTrainer',
    'metrics_row',
    'train_alignment',
    'end_effector_recovery',
    'mapping_identity_error',
    'transfer_demos',
    'transfer_states',
    'ALIGNMENT_MANIFEST',
    'load_alignment',
    'load_alignment_manifest',
    'save_alignment',
]
