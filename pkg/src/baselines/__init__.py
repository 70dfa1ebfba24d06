"""
Comparison methods: the CCA baseline and the ablation / sweep runners.
"""

from config import CYCLEGAN_FLAGS, AblationFlags
from .cca import CcaModel, cca_brute_force, cca_fit, cca_transfer, cca_transfer_states, pair_unaligned
from .ablation import (
    ABLATION_CONFIGS,
    RESULT_COLUMNS,
    SWEEP_KINDS,
    ScoreSummary,
    aggregate,
    cyclegan_baseline,
    run_ablation,
    run_ablation_table,
    summarize,
    sweep,
    write_results,
)

__all__ = [
    'CYCLEGAN_FLAGS',
    'AblationFlags',
    'CcaModel',
    'cca_brute_force',
    'cca_fit',
    'cca_transfer',
    'cca_transfer_states',
    'pair_unaligned',
    'ABLATION_CONFIGS',
    'RESULT_COLUMNS',
    'SWEEP_KINDS',
    'ScoreSummary',
    'aggregate',
    'cyclegan_baseline',
    'run_ablation',
    'run_ablation_table',
    'summarize',
    'sweep',
    'write_results',
]
