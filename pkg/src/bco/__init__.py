"""
Behavioral cloning from observation: exploration, inverse dynamics, cloning, evaluation.
"""

from .exploration import ExplorationSet, collect_random
from .inverse_model import (
    InverseDynamicsModel,
    label_actions,
    load_inverse_model,
    save_inverse_model,
    train_inverse_model,
)
from .policy import Policy, RandomPolicy, ScriptedPolicy, behavioral_cloning, load_policy, save_policy
from .evaluate import (
    EvalResult,
    ReferenceReturns,
    evaluate_policy,
    normalized_score,
    reference_returns,
    run_bco,
    task_returns,
)

__all__ = [
    'ExplorationSet',
    'collect_random',
    'InverseDynamicsModel',
    'label_actions',
    'load_inverse_model',
    'save_inverse_model',
    'train_inverse_model',
    'Policy',
    'RandomPolicy',
    'ScriptedPolicy',
    'behavioral_cloning',
    'load_policy',
    'save_policy',
    'EvalResult',
    'ReferenceReturns',
    'evaluate_policy',
    'normalized_score',
    'reference_returns',
    'run_bco',
    'task_returns',
]
