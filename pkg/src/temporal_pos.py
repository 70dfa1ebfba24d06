"""
Temporal position labels and estimators.

A state's temporal position is how close it sits to the end of its
trajectory: ``gamma ** (H - t)`` for the t-th of H states, so the terminal
goal state is worth exactly 1. Estimators regress this label from normalized
non-goal states. Once trained they are frozen: the alignment losses
differentiate *through* them but never update them.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import spearmanr
from tqdm import tqdm

from arm_env import ArmConfig, forward_kinematics
from config import GAMMA_POS, POSITION_BATCH, POSITION_HIDDEN, POSITION_STEPS, SUPERVISED_LR
from errors import DimensionError, UntrainedModelError
from numcore import Adam, Mlp, build_mlp, load_metadata, load_mlp, mlp_backward, mlp_forward, mse, save_mlp
from traj_data import Normalizer, Trajectory
from utils import make_rng

logger = logging.getLogger(__name__)

HELDOUT_FRACTION = 0.1


def position_labels(traj: Trajectory, gamma_pos: float = GAMMA_POS) -> np.ndarray:
    """labels[t] = gamma * labels[t + 1], terminal label exactly 1."""
    if not 0.0 < gamma_pos < 1.0:
        raise ValueError(f"gamma_pos must lie in (0, 1), got {gamma_pos}")
    labels = np.empty(traj.length)
    labels[-1] = 1.0
    for t in range(traj.length - 2, -1, -1):
        labels[t] = gamma_pos * labels[t + 1]
    return labels


def reached_goal(traj: Trajectory, config: ArmConfig) -> bool:
    """
    Whether the trajectory's final observation sits on its goal.

    Viewpoint offsets rotate the first angle and the goal alike, so the
    distance read from observations equals the true one.
    """
    final = traj.states[-1]
    k = config.num_links
    tip = forward_kinematics(final[:k], config)
    return bool(np.linalg.norm(tip - final[config.goal_dims[0]:config.goal_dims[1] + 1]) < config.goal_radius)


@dataclass
class PositionEstimator:
    net: Mlp
    domain: str
    task_id: str
    gamma_pos: float = GAMMA_POS
    trained: bool = False
    train_mse: float = float("nan")
    heldout_mse: float = float("nan")

    def require_trained(self) -> None:
        if not self.trained:
            raise UntrainedModelError(f"position estimator {self.domain}/{self.task_id} has not been trained")

    def predict(self, normalized_states) -> np.ndarray:
        """Temporal position of each row (normalized non-goal states)."""
        self.require_trained()
        return self.net(normalized_states)[:, 0]

    def metadata(self) -> Dict:
        return {
            "domain": self.domain,
            "task_id": self.task_id,
            "gamma_pos": self.gamma_pos,
            "train_mse": self.train_mse,
            "heldout_mse": self.heldout_mse,
        }


def _labeled_rows(trajs: Sequence[Trajectory], normalizer: Normalizer, gamma_pos: float):
    states = np.vstack([normalizer.apply_nongoal(t.states) for t in trajs])
    labels = np.concatenate([position_labels(t, gamma_pos) for t in trajs])
    return states, labels.reshape(-1, 1)


def train_position_estimator(
    trajs: Sequence[Trajectory],
    domain: str,
    task_id: str,
    normalizer: Normalizer,
    config: ArmConfig,
    gamma_pos: float = GAMMA_POS,
    steps: int = POSITION_STEPS,
    batch_size: int = POSITION_BATCH,
    lr: float = SUPERVISED_LR,
    seed: int = 0,
    progress: bool = False,
) -> PositionEstimator:
    """
    Fit an estimator by squared-error regression onto ``position_labels``.

    Trajectories that stop at the step limit without reaching the goal are
    left out, since their last state is not a goal state.
    """
    reaching = [t for t in trajs if reached_goal(t, config)]
    if len(reaching) < len(trajs):
        logger.warning(f"Excluding {len(trajs) - len(reaching)} non-reaching trajectories from {domain}/{task_id}")
    if not reaching:
        raise DimensionError(f"no goal-reaching trajectories for {domain}/{task_id}")

    rng = make_rng(seed)
    order = rng.permutation(len(reaching))
    n_heldout = int(len(reaching) * HELDOUT_FRACTION) if len(reaching) >= 10 else 0
    heldout = [reaching[i] for i in order[:n_heldout]]
    train = [reaching[i] for i in order[n_heldout:]]

    x, y = _labeled_rows(train, normalizer, gamma_pos)
    net = build_mlp([x.shape[1], *POSITION_HIDDEN, 1], rng)
    optimizer = Adam(net, lr=lr)
    for _ in tqdm(range(steps), desc=f"position {domain}/{task_id}", disable=None if progress else True):
        rows = rng.integers(0, x.shape[0], size=batch_size)
        pred, trace = mlp_forward(net, x[rows])
        grads, _ = mlp_backward(net, trace, 2.0 * (pred - y[rows]) / batch_size)
        optimizer.step(grads)

    estimator = PositionEstimator(net, domain, task_id, gamma_pos, trained=True)
    estimator.train_mse = mse(net(x), y)
    if heldout:
        hx, hy = _labeled_rows(heldout, normalizer, gamma_pos)
        estimator.heldout_mse = mse(net(hx), hy)
    logger.info(
        f"Position estimator {domain}/{task_id}: train MSE {estimator.train_mse:.5f}, "
        f"held-out MSE {estimator.heldout_mse:.5f} ({len(train)} trajectories)"
    )
    return estimator


# ------------------------------------------------------------
# ---------------------- Losses ------------------------------
# ------------------------------------------------------------

@dataclass
class PositionLoss:
    """Position-consistency value with gradients w.r.t. the mapped batches only."""
    value: float
    expert_to_agent: float
    agent_to_expert: float
    grad_mapped_e: np.ndarray
    grad_mapped_a: np.ndarray


def _frozen_mismatch(estimator: PositionEstimator, mapped: np.ndarray, target: np.ndarray):
    pred, trace = mlp_forward(estimator.net, mapped)
    diff = pred[:, 0] - target
    value = float(np.mean(diff ** 2))
    # parameter gradients are discarded: estimators stay frozen
    _, grad_input = mlp_backward(estimator.net, trace, (2.0 * diff / diff.size).reshape(-1, 1))
    return value, grad_input


def pos_consistency_loss(
    p_e: PositionEstimator,
    p_a: PositionEstimator,
    states_e: np.ndarray,
    mapped_e: np.ndarray,
    states_a: np.ndarray,
    mapped_a: np.ndarray,
) -> PositionLoss:
    """
    ||P_A(psi(s_E)) - P_E(s_E)||^2 + ||P_E(phi(s_A)) - P_A(s_A)||^2, each a batch mean.

    ``mapped_e`` is psi(states_e) and ``mapped_a`` is phi(states_a), all in
    normalized non-goal coordinates.
    """
    p_e.require_trained()
    p_a.require_trained()
    e_to_a, grad_e = _frozen_mismatch(p_a, mapped_e, p_e.predict(states_e))
    a_to_e, grad_a = _frozen_mismatch(p_e, mapped_a, p_a.predict(states_a))
    return PositionLoss(e_to_a + a_to_e, e_to_a, a_to_e, grad_e, grad_a)


@dataclass
class LatentPositionLoss:
    value: float
    grad_latent: np.ndarray
    pz_grads: object


def latent_pos_loss(
    p_z: Mlp,
    p_e_t: PositionEstimator,
    latent: np.ndarray,
    states_e: np.ndarray,
) -> LatentPositionLoss:
    """
    ||P_z(Enc_E(s_E)) - P_E^T(s_E)||^2 over inference-task expert states.

    ``latent`` is Enc_E(states_e). The target is frozen; gradients flow into
    the latent (and from there into Enc_E) and into P_z.
    """
    p_e_t.require_trained()
    if states_e.shape[0] == 0:
        raise DimensionError("latent position loss needs inference-task expert states")
    target = p_e_t.predict(states_e)
    pred, trace = mlp_forward(p_z, latent)
    diff = pred[:, 0] - target
    grads, grad_latent = mlp_backward(p_z, trace, (2.0 * diff / diff.size).reshape(-1, 1))
    return LatentPositionLoss(float(np.mean(diff ** 2)), grad_latent, grads)


# ------------------------------------------------------------
# ---------------------- Persistence / diagnostics -----------
# ------------------------------------------------------------

def save_estimator(estimator: PositionEstimator, path: str) -> None:
    estimator.require_trained()
    save_mlp(estimator.net, path, estimator.metadata())


def load_estimator(path: str, input_dim: Optional[int] = None) -> PositionEstimator:
    expect = None if input_dim is None else [input_dim, *POSITION_HIDDEN, 1]
    net = load_mlp(path, expect)
    meta = load_metadata(path)
    return PositionEstimator(
        net=net,
        domain=meta["domain"],
        task_id=meta["task_id"],
        gamma_pos=float(meta["gamma_pos"]),
        trained=True,
        train_mse=float(meta.get("train_mse", float("nan"))),
        heldout_mse=float(meta.get("heldout_mse", float("nan"))),
    )


def spearman_vs_time(estimator: PositionEstimator, traj: Trajectory, normalizer: Normalizer) -> float:
    """Rank correlation between predicted position and time index along one trajectory."""
    predictions = estimator.predict(normalizer.apply_nongoal(traj.states))
    return float(spearmanr(predictions, np.arange(traj.length))[0])


def estimator_digests(estimators: Sequence[PositionEstimator]) -> List[str]:
    return [e.net.digest() for e in estimators]
