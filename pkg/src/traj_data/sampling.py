"""Minibatches of consecutive state pairs (s^t, s^{t+1})."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import DimensionError
from .corpus import Trajectory, group_by_task


@dataclass
class TransitionBatch:
    current: np.ndarray
    following: np.ndarray
    domain: str
    task_index: int


class TransitionIndex:
    """
    All consecutive pairs of a trajectory set, stacked once.

    ``pairs[i]`` is the row of s^t; s^{t+1} is the next row, and both always
    come from the same trajectory.
    """

    def __init__(self, trajs: Sequence[Trajectory], states: Optional[np.ndarray] = None):
        usable = [t for t in trajs if t.length >= 2]
        if not usable:
            raise DimensionError("no trajectory with at least two states")
        self.num_trajectories = len(usable)
        self.states = np.vstack([t.states for t in usable]) if states is None else states
        starts, offset = [], 0
        for t in usable:
            starts.append(np.arange(offset, offset + t.length - 1))
            offset += t.length
        self.pairs = np.concatenate(starts)

    @property
    def num_pairs(self) -> int:
        return int(self.pairs.size)

    def map_states(self, fn: Callable[[np.ndarray], np.ndarray]) -> "TransitionIndex":
        """Same pairing over transformed rows (e.g. normalized non-goal states)."""
        mapped = object.__new__(TransitionIndex)
        mapped.num_trajectories = self.num_trajectories
        mapped.states = fn(self.states)
        mapped.pairs = self.pairs
        return mapped

    def sample(self, batch_size: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        rows = self.pairs[rng.integers(0, self.pairs.size, size=batch_size)]
        return self.states[rows], self.states[rows + 1]

    def sample_states(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        return self.states[rng.integers(0, self.states.shape[0], size=batch_size)]


@dataclass
class ProxyDataset:
    """Unpaired expert and agent trajectory sets per proxy task."""
    task_ids: List[str]
    expert: Dict[str, List[Trajectory]]
    agent: Dict[str, List[Trajectory]]
    _index: Dict[Tuple[int, str], TransitionIndex] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for task_id in self.task_ids:
            if not self.expert.get(task_id) or not self.agent.get(task_id):
                raise DimensionError(f"proxy task {task_id} needs trajectories in both domains")

    @property
    def num_tasks(self) -> int:
        return len(self.task_ids)

    def trajectories(self, task_index: int, domain: str) -> List[Trajectory]:
        task_id = self.task_ids[task_index]
        return self.expert[task_id] if domain == "E" else self.agent[task_id]

    def all_trajectories(self, domain: str) -> List[Trajectory]:
        return [t for j in range(self.num_tasks) for t in self.trajectories(j, domain)]

    def transitions(self, task_index: int, domain: str) -> TransitionIndex:
        key = (task_index, domain)
        if key not in self._index:
            self._index[key] = TransitionIndex(self.trajectories(task_index, domain))
        return self._index[key]


def build_proxy_dataset(
    expert_trajs: Sequence[Trajectory],
    agent_trajs: Sequence[Trajectory],
    task_ids: Optional[Sequence[str]] = None,
) -> ProxyDataset:
    expert = group_by_task(expert_trajs)
    agent = group_by_task(agent_trajs)
    ids = list(task_ids) if task_ids is not None else sorted(set(expert) & set(agent))
    return ProxyDataset(ids, {k: expert.get(k, []) for k in ids}, {k: agent.get(k, []) for k in ids})


def sample_transitions(
    dataset: ProxyDataset,
    task_index: int,
    domain: str,
    batch_size: int,
    rng: np.random.Generator,
) -> TransitionBatch:
    """Uniform draw with replacement over every consecutive pair of one task/domain."""
    if not 0 <= task_index < dataset.num_tasks:
        raise DimensionError(f"task index {task_index} out of range")
    current, following = dataset.transitions(task_index, domain).sample(batch_size, rng)
    return TransitionBatch(current, following, domain, task_index)
