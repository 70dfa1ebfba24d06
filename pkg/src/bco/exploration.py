"""Random-exploration triplets (s, a, s') collected in the agent domain."""

import logging
from dataclasses import dataclass

import numpy as np

from arm_env import REACH, ArmConfig, TaskSpec, observe, reset, step
from errors import DimensionError
from utils import derive_seed, make_rng

logger = logging.getLogger(__name__)

EXPLORATION_GOAL_RADII = (0.05, 0.9)


@dataclass
class ExplorationSet:
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray

    def __post_init__(self):
        if not (self.states.shape[0] == self.actions.shape[0] == self.next_states.shape[0]):
            raise DimensionError("exploration arrays must have one row per triplet")

    def __len__(self) -> int:
        return int(self.states.shape[0])


def _random_goal_task(config: ArmConfig, rng: np.random.Generator) -> TaskSpec:
    low, high = EXPLORATION_GOAL_RADII
    radius = rng.uniform(low, high) * config.reach
    angle = rng.uniform(-np.pi, np.pi)
    return TaskSpec(REACH, ((float(radius * np.cos(angle)), float(radius * np.sin(angle))),), "explore")


def collect_random(config: ArmConfig, num_steps: int, seed: int) -> ExplorationSet:
    """
    Uniform random torques until ``num_steps`` triplets are gathered.

    Episodes restart on goal reach or after ``max_steps``; goals are drawn at
    random and only fill the observation layout.
    """
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    rng = make_rng(derive_seed(seed, "explore"))
    states = np.empty((num_steps, config.state_dim))
    actions = np.empty((num_steps, config.action_dim))
    next_states = np.empty((num_steps, config.state_dim))

    count, episode = 0, 0
    while count < num_steps:
        task = _random_goal_task(config, rng)
        state = reset(task, config, derive_seed(seed, "explore", episode))
        for _ in range(config.max_steps):
            action = rng.uniform(-config.torque_limit, config.torque_limit, size=config.action_dim)
            result = step(state, action, config, task)
            states[count] = observe(state, config)
            actions[count] = action
            next_states[count] = observe(result.state, config)
            count += 1
            state = result.state
            if result.finished or count == num_steps:
                break
        episode += 1
    logger.info(f"Collected {num_steps} exploration triplets over {episode} episodes")
    return ExplorationSet(states, actions, next_states)
