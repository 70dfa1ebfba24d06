"""Inverse dynamics model: (s, s') -> a, trained on agent exploration only."""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from tqdm import tqdm

from config import IDM_EPOCHS, IDM_HIDDEN, SUPERVISED_LR
from errors import DimensionError, UntrainedModelError
from numcore import Adam, Mlp, build_mlp, load_metadata, load_mlp, mlp_backward, mlp_forward, mse, save_mlp
from traj_data import Normalizer, Trajectory, fit_normalizer
from utils import make_rng
from .exploration import ExplorationSet

logger = logging.getLogger(__name__)

MIN_EXPLORATION = 1000
BATCH_SIZE = 128
HELDOUT_FRACTION = 0.1


@dataclass
class InverseDynamicsModel:
    net: Mlp
    normalizer: Normalizer
    torque_limit: float
    trained: bool = False
    heldout_mse: float = float("nan")

    @property
    def state_dim(self) -> int:
        return self.normalizer.state_dim

    def _inputs(self, states: np.ndarray, next_states: np.ndarray) -> np.ndarray:
        return np.hstack([self.normalizer.apply(states), self.normalizer.apply(next_states)])

    def predict(self, states, next_states) -> np.ndarray:
        if not self.trained:
            raise UntrainedModelError("inverse dynamics model has not been trained")
        states = np.asarray(states, dtype=np.float64)
        next_states = np.asarray(next_states, dtype=np.float64)
        if states.shape != next_states.shape or states.ndim != 2 or states.shape[1] != self.state_dim:
            raise DimensionError(f"expected two (B, {self.state_dim}) arrays, got {states.shape} and {next_states.shape}")
        return np.clip(self.net(self._inputs(states, next_states)), -self.torque_limit, self.torque_limit)


def train_inverse_model(
    expl: ExplorationSet,
    torque_limit: float,
    epochs: int = IDM_EPOCHS,
    lr: float = SUPERVISED_LR,
    seed: int = 0,
    batch_size: int = BATCH_SIZE,
    progress: bool = False,
) -> InverseDynamicsModel:
    if len(expl) < MIN_EXPLORATION:
        raise DimensionError(f"inverse model needs at least {MIN_EXPLORATION} triplets, got {len(expl)}")
    rng = make_rng(seed)
    order = rng.permutation(len(expl))
    n_heldout = int(len(expl) * HELDOUT_FRACTION)
    heldout, train = order[:n_heldout], order[n_heldout:]

    normalizer = fit_normalizer([Trajectory("A", "explore", expl.states[train])], goal_dims=())
    model = InverseDynamicsModel(
        net=build_mlp([2 * expl.states.shape[1], *IDM_HIDDEN, expl.actions.shape[1]], rng),
        normalizer=normalizer,
        torque_limit=torque_limit,
    )
    x = model._inputs(expl.states, expl.next_states)
    y = expl.actions
    optimizer = Adam(model.net, lr=lr)
    for _ in tqdm(range(epochs), desc="inverse model", disable=None if progress else True):
        shuffled = rng.permutation(train)
        for start in range(0, shuffled.size, batch_size):
            rows = shuffled[start:start + batch_size]
            pred, trace = mlp_forward(model.net, x[rows])
            grads, _ = mlp_backward(model.net, trace, 2.0 * (pred - y[rows]) / rows.size)
            optimizer.step(grads)

    model.trained = True
    model.heldout_mse = mse(model.net(x[heldout]), y[heldout])
    logger.info(f"Inverse model: held-out action MSE {model.heldout_mse:.5f} on {heldout.size} triplets")
    return model


def label_actions(idm: InverseDynamicsModel, trajs: Sequence[Trajectory]) -> List[Trajectory]:
    """actions[t] = idm(s^t, s^{t+1}) for every consecutive pair."""
    labeled = []
    for traj in trajs:
        if traj.state_dim != idm.state_dim:
            raise DimensionError(f"trajectory has {traj.state_dim} dims, inverse model expects {idm.state_dim}")
        actions = idm.predict(traj.states[:-1], traj.states[1:])
        labeled.append(Trajectory(traj.domain, traj.task_id, traj.states.copy(), actions))
    return labeled


def save_inverse_model(idm: InverseDynamicsModel, path: str) -> None:
    save_mlp(idm.net, path, {
        "kind": "inverse_dynamics",
        "normalizer": idm.normalizer.to_dict(),
        "torque_limit": idm.torque_limit,
        "heldout_mse": idm.heldout_mse,
    })


def load_inverse_model(path: str) -> InverseDynamicsModel:
    meta = load_metadata(path)
    return InverseDynamicsModel(
        net=load_mlp(path),
        normalizer=Normalizer.from_dict(meta["normalizer"]),
        torque_limit=float(meta["torque_limit"]),
        trained=True,
        heldout_mse=float(meta.get("heldout_mse", float("nan"))),
    )
