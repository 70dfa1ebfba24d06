"""
Deterministic planar k-link arm.

Unit-inertia joints with viscous damping, integrated with semi-implicit Euler.
Observations follow the reacher layout (angles, velocities, goal_x, goal_y);
a viewpoint offset rotates the first joint angle and the goal in the observation
only, never in the dynamics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from config import (
    ARM_BASE_DAMPING,
    ARM_DT,
    ARM_GOAL_RADIUS,
    ARM_MAX_STEPS,
    ARM_TORQUE_LIMIT,
)
from errors import DimensionError, InvalidActionError, ScenarioError
from utils import make_rng

logger = logging.getLogger(__name__)

REACH = "reach"
SEQUENTIAL_REACH = "sequential_reach"
VERTEX_REWARD = 100.0
STEP_PENALTY = -1.0
CONTROL_COST = 0.01
STEPS_PER_VERTEX = 50


def wrap_angle(angle):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=np.float64), 2.0 * np.pi)


def rotate_2d(point: Sequence[float], angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    # exact signs for multiples of pi/2
    c = 0.0 if abs(c) < 1e-15 else c
    s = 0.0 if abs(s) < 1e-15 else s
    x, y = float(point[0]), float(point[1])
    return np.array([c * x - s * y, s * x + c * y])


@dataclass(frozen=True)
class TaskSpec:
    """A reach target or a sequence of vertices to reach in order."""
    kind: str
    goals: Tuple[Tuple[float, float], ...]
    task_id: str

    def __post_init__(self):
        if self.kind == REACH and len(self.goals) != 1:
            raise ScenarioError(f"reach task {self.task_id} must have exactly one goal")
        if self.kind == SEQUENTIAL_REACH and len(self.goals) < 2:
            raise ScenarioError(f"sequential task {self.task_id} needs at least two goals")
        if self.kind not in (REACH, SEQUENTIAL_REACH):
            raise ScenarioError(f"unknown task kind {self.kind!r}")


@dataclass(frozen=True)
class ArmConfig:
    num_links: int
    link_lengths: Tuple[float, ...]
    damping: float = ARM_BASE_DAMPING
    torque_limit: float = ARM_TORQUE_LIMIT
    dt: float = ARM_DT
    viewpoint_offset: float = 0.0
    max_steps: int = ARM_MAX_STEPS
    goal_radius: float = ARM_GOAL_RADIUS

    def __post_init__(self):
        if self.num_links < 1:
            raise ScenarioError("an arm needs at least one link")
        if len(self.link_lengths) != self.num_links:
            raise DimensionError(f"{self.num_links} links but {len(self.link_lengths)} lengths")
        if sum(self.link_lengths) <= 0:
            raise ScenarioError("total link length must be positive")
        if self.goal_radius >= sum(self.link_lengths):
            raise ScenarioError("goal_radius must be smaller than the arm's reach")
        if self.damping < 0 or self.torque_limit <= 0 or self.dt <= 0:
            raise ScenarioError("damping must be >= 0, torque_limit and dt > 0")

    @property
    def reach(self) -> float:
        return float(sum(self.link_lengths))

    @property
    def state_dim(self) -> int:
        return 2 * self.num_links + 2

    @property
    def nongoal_dim(self) -> int:
        return 2 * self.num_links

    @property
    def goal_dims(self) -> Tuple[int, int]:
        return (2 * self.num_links, 2 * self.num_links + 1)

    @property
    def action_dim(self) -> int:
        return self.num_links

    def to_dict(self) -> dict:
        return {
            "num_links": self.num_links,
            "link_lengths": list(self.link_lengths),
            "damping": self.damping,
            "torque_limit": self.torque_limit,
            "dt": self.dt,
            "viewpoint_offset": self.viewpoint_offset,
            "max_steps": self.max_steps,
            "goal_radius": self.goal_radius,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArmConfig":
        return cls(**{**data, "link_lengths": tuple(data["link_lengths"])})


@dataclass(frozen=True)
class ArmState:
    angles: np.ndarray
    velocities: np.ndarray
    goal: np.ndarray
    goal_index: int = 0


@dataclass(frozen=True)
class StepResult:
    state: ArmState
    reached_goal: bool
    goal_index: int
    finished: bool


def forward_kinematics(angles: Sequence[float], config: ArmConfig) -> np.ndarray:
    """End-effector (x, y) of the cumulative-angle planar chain."""
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (config.num_links,):
        raise DimensionError(f"expected {config.num_links} joint angles, got shape {angles.shape}")
    phi = np.cumsum(angles)
    lengths = np.asarray(config.link_lengths)
    return np.array([np.sum(lengths * np.cos(phi)), np.sum(lengths * np.sin(phi))])


def jacobian(angles: Sequence[float], config: ArmConfig) -> np.ndarray:
    """2 x k Jacobian of the end-effector position."""
    phi = np.cumsum(np.asarray(angles, dtype=np.float64))
    lengths = np.asarray(config.link_lengths)
    sx = lengths * np.sin(phi)
    cx = lengths * np.cos(phi)
    # column i sums the links at and beyond joint i
    return np.vstack([-np.cumsum(sx[::-1])[::-1], np.cumsum(cx[::-1])[::-1]])


def reset(task: TaskSpec, config: ArmConfig, rng_seed: int) -> ArmState:
    rng = make_rng(rng_seed)
    angles = wrap_angle(rng.uniform(-np.pi, np.pi, size=config.num_links))
    return ArmState(
        angles=angles,
        velocities=np.zeros(config.num_links),
        goal=np.asarray(task.goals[0], dtype=np.float64),
        goal_index=0,
    )


def clamp_action(action, config: ArmConfig) -> np.ndarray:
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape != (config.num_links,):
        raise InvalidActionError(f"expected {config.num_links} torques, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise InvalidActionError("action contains non-finite torques")
    return np.clip(a, -config.torque_limit, config.torque_limit)


def step(state: ArmState, action, config: ArmConfig, task: Optional[TaskSpec] = None) -> StepResult:
    """
    Advance one time step.

    For sequential reach tasks the goal moves to the next vertex when the
    current one is reached; the episode finishes on the last vertex.
    """
    tau = clamp_action(action, config)
    velocities = state.velocities + config.dt * (tau - config.damping * state.velocities)
    angles = wrap_angle(state.angles + config.dt * velocities)

    ee = forward_kinematics(angles, config)
    reached = bool(np.linalg.norm(ee - state.goal) < config.goal_radius)
    goal, goal_index = state.goal, state.goal_index
    finished = reached
    if reached and task is not None and task.kind == SEQUENTIAL_REACH:
        if goal_index < len(task.goals) - 1:
            goal_index += 1
            goal = np.asarray(task.goals[goal_index], dtype=np.float64)
            finished = False
    return StepResult(
        state=ArmState(angles=angles, velocities=velocities, goal=goal, goal_index=goal_index),
        reached_goal=reached,
        goal_index=goal_index,
        finished=finished,
    )


def observe(state: ArmState, config: ArmConfig) -> np.ndarray:
    """Observation vector (angles, velocities, goal) as seen from the arm's viewpoint."""
    angles = np.array(state.angles, dtype=np.float64)
    goal = np.array(state.goal, dtype=np.float64)
    if config.viewpoint_offset != 0.0:
        angles[0] = wrap_angle(angles[0] + config.viewpoint_offset)
        goal = rotate_2d(goal, config.viewpoint_offset)
    return np.concatenate([angles, state.velocities, goal])


def eval_reward(
    state: ArmState,
    action,
    config: ArmConfig,
    task: Optional[TaskSpec] = None,
    reached_goal: bool = False,
) -> float:
    """
    Evaluation-only reward of a transition ending in ``state``.

    Reach: negative end-effector distance minus a small control cost.
    Sequential reach: +100 when a vertex is reached this step, -1 otherwise.
    """
    if task is not None and task.kind == SEQUENTIAL_REACH:
        return VERTEX_REWARD if reached_goal else STEP_PENALTY
    tau = clamp_action(action, config)
    distance = float(np.linalg.norm(forward_kinematics(state.angles, config) - state.goal))
    return -distance - CONTROL_COST * float(tau @ tau)


@dataclass
class Episode:
    """One rollout: observations s^0..s^T, actions a^0..a^{T-1}, rewards."""
    observations: List[np.ndarray] = field(default_factory=list)
    actions: List[np.ndarray] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    success: bool = False

    @property
    def total_return(self) -> float:
        return float(sum(self.rewards))


PolicyFn = Callable[[ArmState, np.ndarray], np.ndarray]


def episode_horizon(task: TaskSpec, config: ArmConfig) -> int:
    """Action budget of one episode: ``max_steps`` for reach, 50 per vertex for sequential reach."""
    if task.kind == SEQUENTIAL_REACH:
        return max(config.max_steps, STEPS_PER_VERTEX * len(task.goals))
    return config.max_steps


def rollout(policy_fn: PolicyFn, task: TaskSpec, config: ArmConfig, seed: int) -> Episode:
    """
    Run one episode of at most ``episode_horizon(task, config)`` actions.

    ``policy_fn`` receives the true state and the observation; scripted experts
    read the former, learned policies only the latter.
    """
    state = reset(task, config, seed)
    episode = Episode(observations=[observe(state, config)])
    for _ in range(episode_horizon(task, config)):
        action = clamp_action(policy_fn(state, episode.observations[-1]), config)
        result = step(state, action, config, task)
        state = result.state
        episode.actions.append(action)
        episode.rewards.append(eval_reward(state, action, config, task, result.reached_goal))
        episode.observations.append(observe(state, config))
        if result.finished:
            episode.success = True
            break
    return episode


def with_damping(config: ArmConfig, damping: float) -> ArmConfig:
    return replace(config, damping=damping)
