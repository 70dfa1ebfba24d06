"""Policy evaluation against scripted-expert and random reference returns."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from arm_env import ArmConfig, TaskSpec, rollout
from config import BC_BATCH, BC_EPOCHS, EVAL_EPISODES, NORMALIZED_SCORE_BOUNDS, SUPERVISED_LR
from errors import EvaluationReferenceError
from expert_gen import PdExpert
from traj_data import Trajectory
from utils import derive_seed, run_parallel
from .inverse_model import InverseDynamicsModel, label_actions
from .policy import Policy, RandomPolicy, ScriptedPolicy, behavioral_cloning

logger = logging.getLogger(__name__)


@dataclass
class ReferenceReturns:
    expert: float
    random: float
    per_task: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.expert <= self.random:
            raise EvaluationReferenceError(
                f"expert return {self.expert:.3f} does not exceed random return {self.random:.3f}"
            )


@dataclass
class EvalResult:
    mean_return: float
    normalized: float
    per_task: Dict[str, Dict[str, float]]


def normalized_score(value: float, expert: float, random: float) -> float:
    if expert <= random:
        raise EvaluationReferenceError(f"expert return {expert:.3f} does not exceed random return {random:.3f}")
    low, high = NORMALIZED_SCORE_BOUNDS
    return float(np.clip((value - random) / (expert - random), low, high))


def _episode_returns(policy, config: ArmConfig, task: TaskSpec, episodes: int, seed: int, workers: int) -> List[float]:
    def run(i: int) -> float:
        episode_seed = derive_seed(seed, "eval", task.task_id, i)
        return rollout(policy.episode_fn(episode_seed), task, config, episode_seed).total_return
    return run_parallel(run, list(range(episodes)), workers)


def task_returns(policy, config: ArmConfig, tasks: Sequence[TaskSpec], episodes: int, seed: int,
                 workers: int = 1) -> Dict[str, float]:
    """Mean return per task over seeded episodes; the same seeds for every policy."""
    return {t.task_id: float(np.mean(_episode_returns(policy, config, t, episodes, seed, workers))) for t in tasks}


def reference_returns(
    agent_config: ArmConfig,
    tasks: Sequence[TaskSpec],
    episodes: int = EVAL_EPISODES,
    seed: int = 0,
    expert: PdExpert = PdExpert(),
    workers: int = 1,
) -> ReferenceReturns:
    """Scripted agent-domain expert and uniform random policy on identical episode seeds."""
    expert_returns = task_returns(ScriptedPolicy(expert, agent_config), agent_config, tasks, episodes, seed, workers)
    random_returns = task_returns(RandomPolicy(agent_config), agent_config, tasks, episodes, seed, workers)
    reference = ReferenceReturns(
        expert=float(np.mean(list(expert_returns.values()))),
        random=float(np.mean(list(random_returns.values()))),
        per_task={k: (expert_returns[k], random_returns[k]) for k in expert_returns},
    )
    logger.info(f"Reference returns: expert {reference.expert:.3f}, random {reference.random:.3f}")
    return reference


def evaluate_policy(
    policy,
    config: ArmConfig,
    tasks: Sequence[TaskSpec],
    reference: ReferenceReturns,
    episodes: int = EVAL_EPISODES,
    seed: int = 0,
    workers: int = 1,
) -> EvalResult:
    returns = task_returns(policy, config, tasks, episodes, seed, workers)
    mean_return = float(np.mean(list(returns.values())))
    per_task = {}
    for task_id, value in returns.items():
        expert, random = reference.per_task[task_id]
        per_task[task_id] = {"mean_return": value, "normalized": normalized_score(value, expert, random)}
    result = EvalResult(mean_return, normalized_score(mean_return, reference.expert, reference.random), per_task)
    logger.info(f"Evaluation: mean return {result.mean_return:.3f}, normalized {result.normalized:.3f}")
    return result


def run_bco(
    demos: Sequence[Trajectory],
    idm: InverseDynamicsModel,
    epochs: int = BC_EPOCHS,
    lr: float = SUPERVISED_LR,
    batch_size: int = BC_BATCH,
    seed: int = 0,
    progress: bool = False,
) -> Tuple[List[Trajectory], Policy]:
    """Label state-only agent-frame demos with the inverse model, then clone them."""
    labeled = label_actions(idm, demos)
    policy = behavioral_cloning(labeled, idm.torque_limit, epochs, lr, batch_size, seed, progress)
    return labeled, policy
