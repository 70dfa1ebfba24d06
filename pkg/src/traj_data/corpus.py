"""
Trajectory model and the JSON-Lines corpus format.

One trajectory per line::

    {"domain": "E", "task_id": "reach_000", "states": [[...], ...], "actions": [[...], ...]}

Numbers are written with 17 significant digits, so loading a saved corpus gives
back exactly the same float64 values. ``actions`` is omitted entirely for
state-only trajectories.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from errors import CorpusFormatError, DimensionError
from utils import file_manager

logger = logging.getLogger(__name__)

DOMAINS = ("E", "A")


@dataclass(eq=False)
class Trajectory:
    domain: str
    task_id: str
    states: np.ndarray
    actions: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise CorpusFormatError(f"unknown domain {self.domain!r}")
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim != 2:
            raise DimensionError("states must form a 2-D array (ragged state vectors?)")
        if self.states.shape[0] < 2:
            raise DimensionError(f"trajectory needs at least 2 states, got {self.states.shape[0]}")
        if not np.all(np.isfinite(self.states)):
            raise DimensionError("trajectory states contain non-finite values")
        if self.actions is not None:
            self.actions = np.asarray(self.actions, dtype=np.float64)
            if self.actions.ndim != 2 or self.actions.shape[0] != self.states.shape[0] - 1:
                raise DimensionError("actions must have one row per transition")

    @property
    def length(self) -> int:
        return int(self.states.shape[0])

    @property
    def state_dim(self) -> int:
        return int(self.states.shape[1])

    def without_actions(self) -> "Trajectory":
        return Trajectory(self.domain, self.task_id, self.states.copy(), None)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        if (self.domain, self.task_id) != (other.domain, other.task_id):
            return False
        if self.states.shape != other.states.shape or not np.array_equal(self.states, other.states):
            return False
        if (self.actions is None) != (other.actions is None):
            return False
        return self.actions is None or np.array_equal(self.actions, other.actions)


def _format_rows(rows: np.ndarray) -> str:
    return "[" + ",".join("[" + ",".join(f"{v:.17g}" for v in row) + "]" for row in rows) + "]"


def trajectory_to_line(traj: Trajectory) -> str:
    parts = [
        f'"domain": {json.dumps(traj.domain)}',
        f'"task_id": {json.dumps(traj.task_id)}',
        f'"states": {_format_rows(traj.states)}',
    ]
    if traj.actions is not None:
        parts.append(f'"actions": {_format_rows(traj.actions)}')
    return "{" + ", ".join(parts) + "}"


def trajectory_from_line(line: str, line_number: int) -> Trajectory:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusFormatError(f"malformed JSON ({e.msg})", line_number) from e
    if not isinstance(doc, dict):
        raise CorpusFormatError("expected a JSON object", line_number)
    missing = [key for key in ("domain", "task_id", "states") if key not in doc]
    if missing:
        raise CorpusFormatError(f"missing fields {missing}", line_number)
    states = doc["states"]
    if not states or len({len(row) for row in states}) != 1:
        raise CorpusFormatError("state vectors have inconsistent dimensions", line_number)
    actions = doc.get("actions")
    if actions is not None and len({len(row) for row in actions}) > 1:
        raise CorpusFormatError("action vectors have inconsistent dimensions", line_number)
    try:
        return Trajectory(
            domain=doc["domain"],
            task_id=str(doc["task_id"]),
            states=np.array(states, dtype=np.float64),
            actions=None if actions is None else np.array(actions, dtype=np.float64),
        )
    except (DimensionError, CorpusFormatError, ValueError) as e:
        raise CorpusFormatError(str(e), line_number) from e


def save_corpus(trajs: Iterable[Trajectory], path: str) -> None:
    file_manager.save_jsonl((trajectory_to_line(t) for t in trajs), path)


def load_corpus(path: str) -> List[Trajectory]:
    trajs: List[Trajectory] = []
    for line_number, line in file_manager.iter_jsonl(path):
        traj = trajectory_from_line(line, line_number)
        if trajs and traj.state_dim != trajs[0].state_dim:
            raise CorpusFormatError(
                f"state dimension {traj.state_dim} differs from earlier trajectories ({trajs[0].state_dim})",
                line_number,
            )
        trajs.append(traj)
    logger.info(f"Loaded {len(trajs)} trajectories from {path}")
    return trajs


def strip_actions(trajs: Iterable[Trajectory]) -> List[Trajectory]:
    return [t.without_actions() for t in trajs]


def group_by_task(trajs: Iterable[Trajectory]) -> Dict[str, List[Trajectory]]:
    grouped: Dict[str, List[Trajectory]] = defaultdict(list)
    for traj in trajs:
        grouped[traj.task_id].append(traj)
    return dict(grouped)


def stack_states(trajs: Sequence[Trajectory]) -> np.ndarray:
    if not trajs:
        raise DimensionError("no trajectories to stack")
    return np.vstack([t.states for t in trajs])


def nongoal_states(trajs: Sequence[Trajectory], goal_dims: Sequence[int]) -> np.ndarray:
    """Stacked states with the goal columns dropped."""
    states = stack_states(trajs)
    keep = np.setdiff1d(np.arange(states.shape[1]), list(goal_dims))
    return states[:, keep]
