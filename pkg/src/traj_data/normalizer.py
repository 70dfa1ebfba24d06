"""Per-domain standardization of the non-goal state dimensions."""

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from errors import DimensionError
from .corpus import Trajectory, stack_states

STD_FLOOR = 1e-6


@dataclass
class Normalizer:
    """
    Mean/std over the non-goal dimensions. Goal dimensions pass through unscaled
    (their mean is stored as 0 and std as 1).
    """
    mean: np.ndarray
    std: np.ndarray
    goal_dims: Tuple[int, ...]

    @property
    def state_dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def nongoal_index(self) -> np.ndarray:
        mask = np.ones(self.state_dim, dtype=bool)
        mask[list(self.goal_dims)] = False
        return np.flatnonzero(mask)

    @property
    def nongoal_dim(self) -> int:
        return int(self.nongoal_index.size)

    def _check(self, states: np.ndarray, cols: int) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        if states.ndim != 2 or states.shape[1] != cols:
            raise DimensionError(f"expected {cols} columns, got shape {states.shape}")
        return states

    def apply(self, states) -> np.ndarray:
        return (self._check(states, self.state_dim) - self.mean) / self.std

    def unapply(self, states) -> np.ndarray:
        return self._check(states, self.state_dim) * self.std + self.mean

    def apply_nongoal(self, states) -> np.ndarray:
        """Full raw states -> normalized non-goal columns."""
        idx = self.nongoal_index
        return (self._check(states, self.state_dim)[:, idx] - self.mean[idx]) / self.std[idx]

    def unapply_nongoal(self, normalized) -> np.ndarray:
        """Normalized non-goal columns -> raw non-goal columns."""
        idx = self.nongoal_index
        return self._check(normalized, idx.size) * self.std[idx] + self.mean[idx]

    def to_dict(self) -> Dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "goal_dims": list(self.goal_dims)}

    @classmethod
    def from_dict(cls, data: Dict) -> "Normalizer":
        return cls(np.asarray(data["mean"], dtype=np.float64),
                   np.asarray(data["std"], dtype=np.float64),
                   tuple(int(d) for d in data["goal_dims"]))


def fit_normalizer(trajs: Sequence[Trajectory], goal_dims: Sequence[int]) -> Normalizer:
    states = stack_states(trajs)
    mean = states.mean(axis=0)
    std = np.maximum(states.std(axis=0), STD_FLOOR)
    goal = list(goal_dims)
    mean[goal] = 0.0
    std[goal] = 1.0
    return Normalizer(mean, std, tuple(int(d) for d in goal_dims))
