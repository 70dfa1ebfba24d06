"""Carrying expert demonstrations into the agent domain with a trained psi."""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from arm_env import ArmConfig, forward_kinematics, rotate_2d
from errors import DimensionError
from traj_data import Normalizer, Trajectory
from .networks import StateMapPair

logger = logging.getLogger(__name__)


def _goal_columns(norm: Normalizer) -> List[int]:
    return list(norm.goal_dims)


def transfer_states(
    maps: StateMapPair,
    states: np.ndarray,
    expert_norm: Normalizer,
    agent_norm: Normalizer,
    goal_rotation: float = 0.0,
) -> np.ndarray:
    """
    Expert observations -> agent observations.

    Non-goal dims go through normalize (expert) -> psi -> denormalize (agent);
    goal dims are copied, rotated into the agent frame when the viewpoints differ.
    """
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2 or states.shape[1] != expert_norm.state_dim:
        raise DimensionError(f"expected expert states with {expert_norm.state_dim} dims, got shape {states.shape}")
    if maps.expert_dim != expert_norm.nongoal_dim or maps.agent_dim != agent_norm.nongoal_dim:
        raise DimensionError("state maps were trained for different state dimensions")

    out = np.empty((states.shape[0], agent_norm.state_dim))
    out[:, agent_norm.nongoal_index] = agent_norm.unapply_nongoal(maps.psi(expert_norm.apply_nongoal(states)))
    goals = states[:, _goal_columns(expert_norm)]
    if goal_rotation != 0.0:
        goals = np.vstack([rotate_2d(g, goal_rotation) for g in goals])
    out[:, _goal_columns(agent_norm)] = goals
    return out


def transfer_demos(
    maps: StateMapPair,
    demos: Sequence[Trajectory],
    expert_norm: Normalizer,
    agent_norm: Normalizer,
    goal_rotation: float = 0.0,
) -> List[Trajectory]:
    """Translate state-only expert trajectories; lengths and task ids are preserved."""
    transferred = [
        Trajectory("A", t.task_id, transfer_states(maps, t.states, expert_norm, agent_norm, goal_rotation))
        for t in demos
    ]
    logger.info(f"Transferred {len(transferred)} trajectories to the agent domain")
    return transferred


def mapping_identity_error(maps: StateMapPair, normalized_states: np.ndarray) -> float:
    """Mean per-dim |psi(s) - s| in normalized units (only meaningful for equal dims)."""
    if maps.expert_dim != maps.agent_dim:
        raise DimensionError("identity error needs equal expert and agent dimensions")
    return float(np.mean(np.abs(maps.psi(normalized_states) - normalized_states)))


def end_effector_recovery(
    maps: StateMapPair,
    expert_states: np.ndarray,
    expert_norm: Normalizer,
    agent_norm: Normalizer,
    expert_config: ArmConfig,
    agent_config: ArmConfig,
    goal_rotation: float = 0.0,
    tolerance: float = 0.05,
) -> Tuple[float, float]:
    """
    How well psi preserves the end-effector position.

    The reference is the expert's observed end effector rotated into the agent
    frame; the candidate is the end effector of the transferred agent angles.

    Returns:
        (fraction of states within ``tolerance``, median error)
    """
    mapped = transfer_states(maps, expert_states, expert_norm, agent_norm, goal_rotation)
    errors = []
    for raw, agent in zip(expert_states, mapped):
        reference = rotate_2d(forward_kinematics(raw[:expert_config.num_links], expert_config), goal_rotation)
        candidate = forward_kinematics(agent[:agent_config.num_links], agent_config)
        errors.append(float(np.linalg.norm(candidate - reference)))
    errors = np.asarray(errors)
    return float(np.mean(errors < tolerance)), float(np.median(errors))
