"""
Trajectory corpora: serialization, normalization and transition sampling.
"""

from .corpus import (
    DOMAINS,
    Trajectory,
    group_by_task,
    load_corpus,
    save_corpus,
    nongoal_states,
    stack_states,
    strip_actions,
)
from .normalizer import Normalizer, fit_normalizer
from .sampling import ProxyDataset, TransitionBatch, TransitionIndex, build_proxy_dataset, sample_transitions

__all__ = [
    'DOMAINS',
    'Trajectory',
    'group_by_task',
    'load_corpus',
    'save_corpus',
    'nongoal_states',
    'stack_states',
    'strip_actions',
    'Normalizer',
    'fit_normalizer',
    'ProxyDataset',
    'TransitionBatch',
    'TransitionIndex',
    'build_proxy_dataset',
    'sample_transitions',
]
