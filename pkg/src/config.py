from dataclasses import dataclass, replace
import argparse
import json
import os
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

# Constants
OUTPUT_BASE_DIR = 'out'
GEN_DEMOS_DIR = 'gen-demos'
TRAIN_POSITIONS_DIR = 'train-positions'
TRAIN_ALIGN_DIR = 'train-align'
TRANSFER_DIR = 'transfer'
TRAIN_BCO_DIR = 'train-bco'
EVAL_DIR = 'eval'
ABLATION_DIR = 'ablation'
BASELINES_DIR = 'baselines'
SWEEP_DIR = 'sweep'
MANIFEST_FILENAME = 'manifest.json'
NORMALIZERS_FILENAME = 'normalizers.json'
METRICS_FILENAME = 'metrics.csv'
EVAL_REPORT_FILENAME = 'report.json'
CORPUS_EXTENSION = '.jsonl'
SOFTWARE_VERSION = '0.1.0'

SCENARIOS = ('v-r2r', 'v-r2w', 'd-r2r', 'm-r2r', 'self')

# Optimizer
DEFAULT_LR = 1e-4
SUPERVISED_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
SN_TRAIN_ITERS = 1

# Architectures (hidden layer sizes)
MAP_HIDDEN = (128, 64)
DISC_HIDDEN = (128, 128)
POSITION_HIDDEN = (200, 128)
LATENT_POSITION_HIDDEN = (64, 64)
IDM_HIDDEN = (100, 100)
POLICY_HIDDEN = (64, 64)
LATENT_DIM = 8

# Planar arm
ARM_DT = 0.05
ARM_TORQUE_LIMIT = 1.0
ARM_MAX_STEPS = 100
ARM_GOAL_RADIUS = 0.02
ARM_BASE_DAMPING = 0.5
ARM_LINK_LENGTH = 0.1
PROXY_GOAL_RADIUS = 0.18
LETTER_C_RADIUS = 0.15
LETTER_C_ARC_DEG = 240.0
LETTER_C_VERTICES = 6

# Scripted expert
PD_KP = 5.0
PD_KD = 2.0
EXPERT_MIN_SUCCESS = 0.95

# Dataset sizes and training schedules
DEMOS_PER_PROXY_TASK = 200
INFERENCE_DEMO_COUNT = 64
GAMMA_POS = 0.95
POSITION_STEPS = 2000
POSITION_BATCH = 128
LAMBDAS = (2.0, 1.0, 1.0, 1.0, 1.0)
ALIGN_BATCH = 128
INNER_STEPS = 50
OUTER_ITERATIONS = 300
EXPLORATION_STEPS = 50_000
IDM_EPOCHS = 50
BC_EPOCHS = 200
BC_BATCH = 128
EVAL_EPISODES = 50
NORMALIZED_SCORE_BOUNDS = (-0.5, 1.5)


@dataclass
class AlignHyperparams:
    """Weights and schedule of the alignment objective."""
    lambda1: float = LAMBDAS[0]
    lambda2: float = LAMBDAS[1]
    lambda3: float = LAMBDAS[2]
    lambda4: float = LAMBDAS[3]
    lambda5: float = LAMBDAS[4]
    lr: float = DEFAULT_LR
    batch_size: int = ALIGN_BATCH
    inner_steps: int = INNER_STEPS
    outer_iterations: int = OUTER_ITERATIONS
    latent_dim: int = LATENT_DIM
    # dropped together with lambda3 when temporal preservation is ablated
    pos_inf_enabled: bool = True

    def __post_init__(self):
        for name in ('lambda1', 'lambda2', 'lambda3', 'lambda4', 'lambda5'):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ('batch_size', 'inner_steps', 'outer_iterations', 'latent_dim'):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class AblationFlags:
    """Which alignment components to switch off."""
    disable_inference_adaptation: bool = False
    disable_mi: bool = False
    disable_temporal: bool = False

    @property
    def name(self) -> str:
        if self == CYCLEGAN_FLAGS:
            return 'cyclegan'
        parts = [label for flag, label in (
            (self.disable_inference_adaptation, 'no-adaptation'),
            (self.disable_mi, 'no-mi'),
            (self.disable_temporal, 'no-temporal'),
        ) if flag]
        return '+'.join(parts) or 'full'

    def apply(self, hp: AlignHyperparams) -> AlignHyperparams:
        changes: Dict[str, Any] = {}
        if self.disable_inference_adaptation:
            changes['lambda5'] = 0.0
        if self.disable_mi:
            changes['lambda4'] = 0.0
        if self.disable_temporal:
            changes['lambda3'] = 0.0
            changes['pos_inf_enabled'] = False
        return replace(hp, **changes)


CYCLEGAN_FLAGS = AblationFlags(True, True, True)


class RunConfig(BaseModel):
    """Configuration of one pipeline run. Every field has a command-line flag."""
    model_config = ConfigDict(extra='forbid')

    scenario: str = 'self'
    seed: int = Field(default=0, ge=0)
    output_dir: str = OUTPUT_BASE_DIR
    demos_per_proxy_task: int = Field(default=DEMOS_PER_PROXY_TASK, ge=1)
    inference_demo_count: int = Field(default=INFERENCE_DEMO_COUNT, ge=1)
    num_proxy_tasks: int = Field(default=4, ge=1, le=4)
    gamma_pos: float = Field(default=GAMMA_POS, gt=0.0, lt=1.0)
    position_steps: int = Field(default=POSITION_STEPS, ge=1)
    position_batch: int = Field(default=POSITION_BATCH, ge=1)
    supervised_lr: float = Field(default=SUPERVISED_LR, gt=0.0)
    lambda1: float = Field(default=LAMBDAS[0], ge=0.0)
    lambda2: float = Field(default=LAMBDAS[1], ge=0.0)
    lambda3: float = Field(default=LAMBDAS[2], ge=0.0)
    lambda4: float = Field(default=LAMBDAS[3], ge=0.0)
    lambda5: float = Field(default=LAMBDAS[4], ge=0.0)
    lr: float = Field(default=DEFAULT_LR, gt=0.0)
    batch_size: int = Field(default=ALIGN_BATCH, ge=1)
    inner_steps: int = Field(default=INNER_STEPS, ge=1)
    outer_iterations: int = Field(default=OUTER_ITERATIONS, ge=1)
    latent_dim: int = Field(default=LATENT_DIM, ge=1)
    exploration_steps: int = Field(default=EXPLORATION_STEPS, ge=1000)
    idm_epochs: int = Field(default=IDM_EPOCHS, ge=1)
    bc_epochs: int = Field(default=BC_EPOCHS, ge=1)
    bc_batch: int = Field(default=BC_BATCH, ge=1)
    eval_episodes: int = Field(default=EVAL_EPISODES, ge=1)
    num_seeds: int = Field(default=1, ge=1)
    workers: int = Field(default=1, ge=1)
    progress: bool = True
    disable_inference_adaptation: bool = False
    disable_mi: bool = False
    disable_temporal: bool = False

    @field_validator('scenario')
    @classmethod
    def _known_scenario(cls, value: str) -> str:
        if value not in SCENARIOS:
            raise ValueError(f"unknown scenario {value!r}; expected one of {', '.join(SCENARIOS)}")
        return value

    def align_hyperparams(self) -> AlignHyperparams:
        return AlignHyperparams(
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            lambda3=self.lambda3,
            lambda4=self.lambda4,
            lambda5=self.lambda5,
            lr=self.lr,
            batch_size=self.batch_size,
            inner_steps=self.inner_steps,
            outer_iterations=self.outer_iterations,
            latent_dim=self.latent_dim,
        )

    def ablation_flags(self) -> AblationFlags:
        return AblationFlags(
            disable_inference_adaptation=self.disable_inference_adaptation,
            disable_mi=self.disable_mi,
            disable_temporal=self.disable_temporal,
        )

    def stage_dir(self, stage: str) -> str:
        return os.path.join(self.output_dir, stage)

    def seeds(self) -> list[int]:
        return [self.seed + k for k in range(self.num_seeds)]

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> 'RunConfig':
        """Create configuration from defaults, an optional JSON file, then flags."""
        data: Dict[str, Any] = {}
        config_path: Optional[str] = getattr(args, 'config', None)
        if config_path:
            with open(config_path, 'r') as f:
                data.update(json.load(f))
        for name in cls.model_fields:
            value = getattr(args, name, None)
            if value is not None:
                data[name] = value
        return cls(**data)


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """Add one flag per RunConfig field (``--outer-iterations`` for outer_iterations)."""
    parser.add_argument('--config', type=str, default=None, help='JSON file with RunConfig fields')
    for name, info in RunConfig.model_fields.items():
        flags = [f"--{name.replace('_', '-')}"]
        if name == 'output_dir':
            flags.append('--out')
        if info.annotation is bool:
            parser.add_argument(*flags, dest=name, action=argparse.BooleanOptionalAction, default=None)
        else:
            parser.add_argument(*flags, dest=name, type=info.annotation, default=None,
                                help=f"default: {info.default}")
