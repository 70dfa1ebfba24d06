"""
Canonical correlation baseline.

Expert and agent non-goal states are paired row by row after independent
shuffles (the data is unpaired, so any pairing is arbitrary), projected to a
shared space of dimension min(d_E, d_A), and carried back to the agent side
with the pseudo-inverse of the agent projection.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from arm_env import rotate_2d
from errors import DimensionError
from traj_data import Trajectory

logger = logging.getLogger(__name__)

RIDGE = 1e-6


@dataclass
class CcaModel:
    mean_e: np.ndarray
    mean_a: np.ndarray
    proj_e: np.ndarray
    proj_a: np.ndarray
    correlations: np.ndarray
    back_a: np.ndarray

    @property
    def shared_dim(self) -> int:
        return int(self.correlations.size)


def _inverse_sqrt(cov: np.ndarray) -> np.ndarray:
    evals, evecs = la.eigh(cov)
    if not np.all(np.isfinite(evals)) or evals.min() <= 0.0:
        raise DimensionError("covariance is rank-deficient even after the ridge")
    return evecs @ np.diag(1.0 / np.sqrt(evals)) @ evecs.T


def _covariances(x: np.ndarray, y: np.ndarray, ridge: float):
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    n = x.shape[0]
    cxx = xc.T @ xc / (n - 1) + ridge * np.eye(x.shape[1])
    cyy = yc.T @ yc / (n - 1) + ridge * np.eye(y.shape[1])
    cxy = xc.T @ yc / (n - 1)
    return cxx, cyy, cxy


def pair_unaligned(
    states_e: np.ndarray,
    states_a: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """Independent shuffles, truncated to the shorter set."""
    n = min(states_e.shape[0], states_a.shape[0])
    return states_e[rng.permutation(states_e.shape[0])[:n]], states_a[rng.permutation(states_a.shape[0])[:n]]


def cca_fit(
    states_e: np.ndarray,
    states_a: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    ridge: float = RIDGE,
) -> CcaModel:
    """
    Classical CCA via the SVD of the whitened cross-covariance.

    With ``rng`` the rows are shuffled and paired; without it they are taken
    as already paired.
    """
    x = np.asarray(states_e, dtype=np.float64)
    y = np.asarray(states_a, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] < 2 or y.shape[0] < 2:
        raise DimensionError("CCA needs two non-empty 2-D state matrices")
    if rng is not None:
        x, y = pair_unaligned(x, y, rng)
    elif x.shape[0] != y.shape[0]:
        raise DimensionError("paired CCA needs equal row counts")

    cxx, cyy, cxy = _covariances(x, y, ridge)
    wx = _inverse_sqrt(cxx)
    wy = _inverse_sqrt(cyy)
    u, s, vt = la.svd(wx @ cxy @ wy)
    d = min(x.shape[1], y.shape[1])
    proj_e = wx @ u[:, :d]
    proj_a = wy @ vt[:d].T
    model = CcaModel(
        mean_e=x.mean(axis=0),
        mean_a=y.mean(axis=0),
        proj_e=proj_e,
        proj_a=proj_a,
        correlations=np.clip(s[:d], 0.0, 1.0),
        back_a=la.pinv(proj_a),
    )
    logger.info(f"CCA fit on {x.shape[0]} pairs: top correlation {model.correlations[0]:.3f}")
    return model


def cca_transfer_states(model: CcaModel, states_e: np.ndarray) -> np.ndarray:
    """Expert non-goal states -> agent non-goal states."""
    states_e = np.asarray(states_e, dtype=np.float64)
    if states_e.ndim != 2 or states_e.shape[1] != model.mean_e.size:
        raise DimensionError(f"expected {model.mean_e.size} expert dims, got shape {states_e.shape}")
    return (states_e - model.mean_e) @ model.proj_e @ model.back_a + model.mean_a


def cca_transfer(
    model: CcaModel,
    demos: Sequence[Trajectory],
    expert_goal_dims: Sequence[int],
    agent_goal_dims: Sequence[int],
    goal_rotation: float = 0.0,
) -> List[Trajectory]:
    """Full observations through CCA; goal dims copied (rotated into the agent frame if needed)."""
    out = []
    for traj in demos:
        keep = np.setdiff1d(np.arange(traj.state_dim), expert_goal_dims)
        mapped = cca_transfer_states(model, traj.states[:, keep])
        goals = traj.states[:, list(expert_goal_dims)]
        if goal_rotation != 0.0:
            goals = np.vstack([rotate_2d(g, goal_rotation) for g in goals])
        states = np.empty((traj.length, mapped.shape[1] + len(agent_goal_dims)))
        agent_keep = np.setdiff1d(np.arange(states.shape[1]), agent_goal_dims)
        states[:, agent_keep] = mapped
        states[:, list(agent_goal_dims)] = goals
        out.append(Trajectory("A", traj.task_id, states))
    return out


def cca_brute_force(
    states_e: np.ndarray,
    states_a: np.ndarray,
    ridge: float = RIDGE,
) -> np.ndarray:
    """
    Canonical correlations from the symmetric generalized eigenproblem
    [[0, Cxy], [Cyx, 0]] w = rho [[Cxx, 0], [0, Cyy]] w on paired rows.
    """
    x = np.asarray(states_e, dtype=np.float64)
    y = np.asarray(states_a, dtype=np.float64)
    cxx, cyy, cxy = _covariances(x, y, ridge)
    p, q = x.shape[1], y.shape[1]
    lhs = np.zeros((p + q, p + q))
    lhs[:p, p:] = cxy
    lhs[p:, :p] = cxy.T
    rhs = np.zeros((p + q, p + q))
    rhs[:p, :p] = cxx
    rhs[p:, p:] = cyy
    rho = la.eigh(lhs, rhs, eigvals_only=True)
    return np.clip(np.sort(rho)[::-1][:min(p, q)], 0.0, 1.0)
