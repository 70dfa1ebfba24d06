"""
Cross-domain scenarios: which arm the expert and the agent use, and which
goals make up the proxy and inference tasks.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from config import (
    ARM_BASE_DAMPING,
    ARM_LINK_LENGTH,
    LETTER_C_ARC_DEG,
    LETTER_C_RADIUS,
    LETTER_C_VERTICES,
    PD_KD,
    PD_KP,
    PROXY_GOAL_RADIUS,
    SCENARIOS,
)
from errors import ScenarioError
from .arm import REACH, SEQUENTIAL_REACH, ArmConfig, TaskSpec, with_damping

PROXY_ANGLES_DEG = (0, 90, 180, 270)
INFERENCE_ANGLES_DEG = (45, 135, 225, 315)


@dataclass(frozen=True)
class Scenario:
    name: str
    expert_config: ArmConfig
    agent_config: ArmConfig
    proxy_tasks: Tuple[TaskSpec, ...]
    inference_tasks: Tuple[TaskSpec, ...]
    kp: float = PD_KP
    kd: float = PD_KD

    def __iter__(self):
        # unpacks as (expert_config, agent_config, proxy_tasks, inference_tasks)
        return iter((self.expert_config, self.agent_config, self.proxy_tasks, self.inference_tasks))

    def with_proxy_tasks(self, count: int) -> "Scenario":
        if not 1 <= count <= len(self.proxy_tasks):
            raise ScenarioError(f"scenario {self.name} has {len(self.proxy_tasks)} proxy tasks, asked for {count}")
        return Scenario(self.name, self.expert_config, self.agent_config,
                        self.proxy_tasks[:count], self.inference_tasks, self.kp, self.kd)


def reach_task(angle_deg: float, radius: float = PROXY_GOAL_RADIUS) -> TaskSpec:
    theta = np.deg2rad(angle_deg)
    goal = (float(radius * np.cos(theta)), float(radius * np.sin(theta)))
    return TaskSpec(kind=REACH, goals=(goal,), task_id=f"reach_{int(angle_deg):03d}")


def letter_c_task(
    radius: float = LETTER_C_RADIUS,
    arc_deg: float = LETTER_C_ARC_DEG,
    vertices: int = LETTER_C_VERTICES,
) -> TaskSpec:
    """Vertices on an arc centred on 180 degrees, opening to the right, traced counter-clockwise."""
    start = 180.0 - arc_deg / 2.0
    angles = np.deg2rad(np.linspace(start, start + arc_deg, vertices))
    goals = tuple((float(radius * np.cos(a)), float(radius * np.sin(a))) for a in angles)
    return TaskSpec(kind=SEQUENTIAL_REACH, goals=goals, task_id="letter_c")


def two_link_config(**overrides) -> ArmConfig:
    return ArmConfig(num_links=2, link_lengths=(ARM_LINK_LENGTH, ARM_LINK_LENGTH), **overrides)


def three_link_config(**overrides) -> ArmConfig:
    # same total reach as the two-link arm
    length = 2.0 * ARM_LINK_LENGTH / 3.0
    return ArmConfig(num_links=3, link_lengths=(length, length, length), **overrides)


def make_scenario(name: str) -> Scenario:
    if name not in SCENARIOS:
        raise ScenarioError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")

    agent = two_link_config()
    if name in ("v-r2r", "v-r2w"):
        expert = two_link_config(viewpoint_offset=float(np.pi))
    elif name == "d-r2r":
        expert = with_damping(agent, 2.0 * ARM_BASE_DAMPING)
    elif name == "m-r2r":
        expert = three_link_config()
    else:
        expert = agent

    proxy = tuple(reach_task(a) for a in PROXY_ANGLES_DEG)
    if name == "v-r2w":
        inference = (letter_c_task(),)
    else:
        inference = tuple(reach_task(a) for a in INFERENCE_ANGLES_DEG)
    return Scenario(name, expert, agent, proxy, inference)


def goal_frame_rotation(expert_config: ArmConfig, agent_config: ArmConfig) -> float:
    """Rotation carrying an observed expert-frame goal into the agent's frame."""
    return agent_config.viewpoint_offset - expert_config.viewpoint_offset
