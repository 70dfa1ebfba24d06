"""Observation -> torque policies sharing one episode interface."""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from tqdm import tqdm

from arm_env import ArmConfig, ArmState
from config import BC_BATCH, BC_EPOCHS, POLICY_HIDDEN, SUPERVISED_LR
from errors import DimensionError, UntrainedModelError
from expert_gen import PdExpert, random_action
from numcore import Adam, Mlp, build_mlp, load_metadata, load_mlp, mlp_backward, mlp_forward, mse, save_mlp
from traj_data import Normalizer, Trajectory, fit_normalizer
from utils import make_rng

logger = logging.getLogger(__name__)


@dataclass
class Policy:
    """Cloned policy; the tanh head is scaled to the torque limit."""
    net: Mlp
    normalizer: Normalizer
    torque_limit: float
    trained: bool = False
    train_losses: List[float] = field(default_factory=list)

    def act_batch(self, observations) -> np.ndarray:
        if not self.trained:
            raise UntrainedModelError("policy has not been trained")
        return self.torque_limit * self.net(self.normalizer.apply(observations))

    def act(self, observation) -> np.ndarray:
        return self.act_batch(np.asarray(observation, dtype=np.float64).reshape(1, -1))[0]

    def episode_fn(self, seed: int):
        def fn(_state: ArmState, observation: np.ndarray) -> np.ndarray:
            return self.act(observation)
        return fn


@dataclass
class RandomPolicy:
    config: ArmConfig

    def episode_fn(self, seed: int):
        rng = make_rng(seed)

        def fn(_state: ArmState, _observation: np.ndarray) -> np.ndarray:
            return random_action(self.config, rng)
        return fn


@dataclass
class ScriptedPolicy:
    """The PD expert acting in a given arm (reads the true state)."""
    expert: PdExpert
    config: ArmConfig

    def episode_fn(self, seed: int):
        return self.expert.policy(self.config)


def behavioral_cloning(
    labeled_trajs: Sequence[Trajectory],
    torque_limit: float,
    epochs: int = BC_EPOCHS,
    lr: float = SUPERVISED_LR,
    batch_size: int = BC_BATCH,
    seed: int = 0,
    progress: bool = False,
) -> Policy:
    """Regress actions on observations (mse), one loss entry per epoch."""
    if not labeled_trajs:
        raise DimensionError("behavioral cloning needs at least one labeled trajectory")
    if any(t.actions is None for t in labeled_trajs):
        raise DimensionError("behavioral cloning needs action-labeled trajectories")
    x = np.vstack([t.states[:-1] for t in labeled_trajs])
    y = np.vstack([t.actions for t in labeled_trajs])

    rng = make_rng(seed)
    normalizer = fit_normalizer(labeled_trajs, goal_dims=())
    policy = Policy(
        net=build_mlp([x.shape[1], *POLICY_HIDDEN, y.shape[1]], rng, output_activation="tanh"),
        normalizer=normalizer,
        torque_limit=torque_limit,
    )
    xn = normalizer.apply(x)
    optimizer = Adam(policy.net, lr=lr)
    for _ in tqdm(range(epochs), desc="behavioral cloning", disable=None if progress else True):
        order = rng.permutation(x.shape[0])
        for start in range(0, order.size, batch_size):
            rows = order[start:start + batch_size]
            out, trace = mlp_forward(policy.net, xn[rows])
            grad = 2.0 * (torque_limit * out - y[rows]) / rows.size * torque_limit
            grads, _ = mlp_backward(policy.net, trace, grad)
            optimizer.step(grads)
        policy.train_losses.append(mse(torque_limit * policy.net(xn), y))

    policy.trained = True
    logger.info(f"Behavioral cloning: final training loss {policy.train_losses[-1]:.5f} on {x.shape[0]} pairs")
    return policy


def save_policy(policy: Policy, path: str) -> None:
    save_mlp(policy.net, path, {
        "kind": "policy",
        "normalizer": policy.normalizer.to_dict(),
        "torque_limit": policy.torque_limit,
        "train_losses": policy.train_losses,
    })


def load_policy(path: str) -> Policy:
    meta = load_metadata(path)
    return Policy(
        net=load_mlp(path),
        normalizer=Normalizer.from_dict(meta["normalizer"]),
        torque_limit=float(meta["torque_limit"]),
        trained=True,
        train_losses=list(meta.get("train_losses", [])),
    )
