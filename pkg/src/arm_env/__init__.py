"""
Planar k-link arm environments and the cross-domain scenarios built on them.
"""

from .arm import (
    REACH,
    SEQUENTIAL_REACH,
    ArmConfig,
    ArmState,
    Episode,
    StepResult,
    TaskSpec,
    clamp_action,
    episode_horizon,
    eval_reward,
    forward_kinematics,
    jacobian,
    observe,
    reset,
    rollout,
    rotate_2d,
    step,
    wrap_angle,
)
from .scenarios import (
    INFERENCE_ANGLES_DEG,
    PROXY_ANGLES_DEG,
    Scenario,
    goal_frame_rotation,
    letter_c_task,
    make_scenario,
    reach_task,
)

__all__ = [
    'REACH',
    'SEQUENTIAL_REACH',
    'ArmConfig',
    'ArmState',
    'Episode',
    'StepResult',
    'TaskSpec',
    'clamp_action',
    'episode_horizon',
    'eval_reward',
    'forward_kinematics',
    'jacobian',
    'observe',
    'reset',
    'rollout',
    'rotate_2d',
    'step',
    'wrap_angle',
    'INFERENCE_ANGLES_DEG',
    'PROXY_ANGLES_DEG',
    'Scenario',
    'goal_frame_rotation',
    'letter_c_task',
    'make_scenario',
    'reach_task',
]
