"""
Scripted PD experts and batch demonstration generation.

The expert resolves the current goal to joint angles with inverse kinematics
and drives the arm there with a clamped PD law on the true (un-rotated) state.
Demonstrations store what the arm *observes*, so viewpoint offsets are already
baked into the saved states.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from arm_env import ArmConfig, ArmState, Scenario, TaskSpec, clamp_action, forward_kinematics, jacobian, rollout, wrap_angle
from config import EXPERT_MIN_SUCCESS, PD_KD, PD_KP
from errors import ExpertValidationError, UnreachableGoalError
from traj_data import Trajectory
from utils import derive_seed, run_parallel

logger = logging.getLogger(__name__)

IK_TOLERANCE = 1e-3
IK_MAX_ITERS = 500
IK_DAMPING = 1e-2
# applied once when the iteration stalls at a stretched-out (singular) pose
IK_ELBOW_NUDGE = 0.5
REACH_SLACK = 1e-12


@dataclass(frozen=True)
class PdExpert:
    kp: float = PD_KP
    kd: float = PD_KD

    def __post_init__(self):
        if self.kp <= 0 or self.kd <= 0:
            raise ValueError("PD gains must be positive")

    def policy(self, config: ArmConfig):
        """Policy callable for ``arm_env.rollout``."""
        def act(state: ArmState, _observation: np.ndarray) -> np.ndarray:
            return expert_action(state, self, config)
        return act


@dataclass(frozen=True)
class DemoRequest:
    domain: str
    task: TaskSpec
    num_trajectories: int
    record_actions: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.num_trajectories < 1:
            raise ValueError("num_trajectories must be >= 1")


# ------------------------------------------------------------
# ---------------------- Inverse kinematics ------------------
# ------------------------------------------------------------

def _two_link_ik(x: float, y: float, l1: float, l2: float) -> Tuple[float, float]:
    c = (x * x + y * y - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    q2 = float(np.arccos(np.clip(c, -1.0, 1.0)))
    q1 = float(np.arctan2(y, x) - np.arctan2(l2 * np.sin(q2), l1 + l2 * np.cos(q2)))
    return float(wrap_angle(q1)), float(wrap_angle(q2))


def _iterative_ik(goal: np.ndarray, config: ArmConfig) -> np.ndarray:
    angles = np.zeros(config.num_links)
    nudged = False
    for _ in range(IK_MAX_ITERS):
        error = goal - forward_kinematics(angles, config)
        if np.linalg.norm(error) < IK_TOLERANCE:
            return wrap_angle(angles)
        J = jacobian(angles, config)
        # damped least squares: J^T (J J^T + d^2 I)^-1 e
        delta = J.T @ np.linalg.solve(J @ J.T + IK_DAMPING ** 2 * np.eye(2), error)
        if np.linalg.norm(delta) < 1e-9:
            if nudged:
                break
            angles[1:] += IK_ELBOW_NUDGE
            nudged = True
            continue
        angles = angles + delta
    error = float(np.linalg.norm(goal - forward_kinematics(angles, config)))
    if error >= IK_TOLERANCE:
        raise UnreachableGoalError(f"inverse kinematics did not converge (residual {error:.2e})")
    return wrap_angle(angles)


@lru_cache(maxsize=256)
def _cached_ik(goal: Tuple[float, float], config: ArmConfig) -> Tuple[float, ...]:
    x, y = goal
    if np.hypot(x, y) > config.reach + REACH_SLACK:
        raise UnreachableGoalError(f"goal ({x:.3f}, {y:.3f}) is outside the arm's reach {config.reach:.3f}")
    if config.num_links == 1:
        return (float(np.arctan2(y, x)),)
    if config.num_links == 2:
        return _two_link_ik(x, y, *config.link_lengths)
    return tuple(float(a) for a in _iterative_ik(np.array([x, y]), config))


def inverse_kinematics(goal: Sequence[float], config: ArmConfig) -> np.ndarray:
    """
    Joint angles placing the end effector on ``goal``.

    Two links use the closed-form elbow-down branch; longer chains iterate a
    damped Jacobian step from the zero pose.
    """
    return np.array(_cached_ik((float(goal[0]), float(goal[1])), config))


def expert_action(state: ArmState, expert: PdExpert, config: ArmConfig) -> np.ndarray:
    target = inverse_kinematics(state.goal, config)
    torque = expert.kp * wrap_angle(target - state.angles) - expert.kd * state.velocities
    return clamp_action(torque, config)


def random_action(config: ArmConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-config.torque_limit, config.torque_limit, size=config.action_dim)


# ------------------------------------------------------------
# ---------------------- Demonstrations ----------------------
# ------------------------------------------------------------

def _episode_seed(request: DemoRequest, index: int) -> int:
    return derive_seed(request.seed, request.domain, request.task.task_id, index)


def validate_expert(
    expert: PdExpert,
    task: TaskSpec,
    config: ArmConfig,
    episodes: int = 20,
    seed: int = 0,
) -> float:
    """Success rate of the expert over seeded episodes. Raises below the required rate."""
    successes = sum(
        rollout(expert.policy(config), task, config, derive_seed(seed, "validate", task.task_id, i)).success
        for i in range(episodes)
    )
    rate = successes / episodes
    if rate < EXPERT_MIN_SUCCESS:
        raise ExpertValidationError(
            f"expert reaches task {task.task_id} in {rate:.0%} of episodes (need {EXPERT_MIN_SUCCESS:.0%})"
        )
    return rate


def generate_demos(
    request: DemoRequest,
    config: ArmConfig,
    expert: Optional[PdExpert] = None,
    workers: int = 1,
) -> List[Trajectory]:
    """
    Roll out the expert ``num_trajectories`` times, one derived seed per episode.

    Raises ExpertValidationError when fewer than 95% of the episodes reach the goal.
    """
    expert = expert or PdExpert()
    policy = expert.policy(config)

    def run(index: int):
        return rollout(policy, request.task, config, _episode_seed(request, index))

    episodes = run_parallel(run, list(range(request.num_trajectories)), workers)
    rate = sum(e.success for e in episodes) / len(episodes)
    if rate < EXPERT_MIN_SUCCESS:
        raise ExpertValidationError(
            f"expert reaches task {request.task.task_id} in {rate:.1%} of episodes "
            f"(need {EXPERT_MIN_SUCCESS:.0%})"
        )

    trajs = [
        Trajectory(
            domain=request.domain,
            task_id=request.task.task_id,
            states=np.vstack(e.observations),
            actions=np.vstack(e.actions) if request.record_actions else None,
        )
        for e in episodes
    ]
    lengths = [t.length for t in trajs]
    logger.info(
        f"Generated {len(trajs)} {request.domain} demos for {request.task.task_id} "
        f"(success {rate:.1%}, lengths {min(lengths)}-{max(lengths)})"
    )
    return trajs


def generate_scenario_corpora(
    scenario: Scenario,
    demos_per_proxy_task: int,
    inference_demo_count: int,
    seed: int,
    workers: int = 1,
) -> Dict[str, List[Trajectory]]:
    """
    All corpora of a scenario keyed by ``<split>_<domain>_<task_id>``.

    Proxy tasks get both domains; inference tasks get state-only expert demos.
    """
    expert = PdExpert(scenario.kp, scenario.kd)
    corpora: Dict[str, List[Trajectory]] = {}
    for task in scenario.proxy_tasks:
        for domain, config in (("E", scenario.expert_config), ("A", scenario.agent_config)):
            request = DemoRequest(domain, task, demos_per_proxy_task, record_actions=False,
                                  seed=derive_seed(seed, "proxy"))
            corpora[f"proxy_{domain}_{task.task_id}"] = generate_demos(request, config, expert, workers)
    for task in scenario.inference_tasks:
        request = DemoRequest("E", task, inference_demo_count, record_actions=False,
                              seed=derive_seed(seed, "inference"))
        corpora[f"inference_E_{task.task_id}"] = generate_demos(request, scenario.expert_config, expert, workers)
    return corpora


def agent_inference_demos(
    scenario: Scenario,
    count: int,
    seed: int,
    workers: int = 1,
) -> List[Trajectory]:
    """Genuine agent-domain demos of the inference tasks, with actions (self-demo baseline)."""
    expert = PdExpert(scenario.kp, scenario.kd)
    trajs: List[Trajectory] = []
    for task in scenario.inference_tasks:
        request = DemoRequest("A", task, count, record_actions=True, seed=derive_seed(seed, "self-demo"))
        trajs.extend(generate_demos(request, scenario.agent_config, expert, workers))
    return trajs
