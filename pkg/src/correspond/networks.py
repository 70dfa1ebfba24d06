"""
State maps and per-task adversaries.

psi = Dec_E . Enc_E carries expert non-goal states to the agent; phi =
Dec_A . Enc_A goes the other way. Both factor through one latent space Z.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from config import DISC_HIDDEN, LATENT_POSITION_HIDDEN, MAP_HIDDEN
from errors import DimensionError
from numcore import Mlp, build_mlp

Chain = List[Tuple[str, Mlp]]


@dataclass
class StateMapPair:
    enc_e: Mlp
    dec_e: Mlp
    enc_a: Mlp
    dec_a: Mlp

    def __post_init__(self):
        if self.enc_e.output_dim != self.enc_a.output_dim:
            raise DimensionError("both encoders must share the latent dimension")
        if self.dec_e.input_dim != self.enc_e.output_dim or self.dec_a.input_dim != self.enc_a.output_dim:
            raise DimensionError("decoders must read the latent space")
        if self.dec_e.output_dim != self.enc_a.input_dim or self.dec_a.output_dim != self.enc_e.input_dim:
            raise DimensionError("decoder outputs must match the opposite domain's state dimension")

    @property
    def latent_dim(self) -> int:
        return self.enc_e.output_dim

    @property
    def expert_dim(self) -> int:
        return self.enc_e.input_dim

    @property
    def agent_dim(self) -> int:
        return self.enc_a.input_dim

    def networks(self) -> Dict[str, Mlp]:
        return {"enc_e": self.enc_e, "dec_e": self.dec_e, "enc_a": self.enc_a, "dec_a": self.dec_a}

    def psi_chain(self) -> Chain:
        return [("enc_e", self.enc_e), ("dec_e", self.dec_e)]

    def phi_chain(self) -> Chain:
        return [("enc_a", self.enc_a), ("dec_a", self.dec_a)]

    def psi(self, states) -> np.ndarray:
        return self.dec_e(self.enc_e(states))

    def phi(self, states) -> np.ndarray:
        return self.dec_a(self.enc_a(states))

    def digests(self) -> Dict[str, str]:
        return {name: net.digest() for name, net in self.networks().items()}


@dataclass
class TaskDiscriminators:
    """D_A^j, D_E^j over concatenated (s, s') and the latent domain classifier q^j over (z, z')."""
    task_index: int
    d_a: Mlp
    d_e: Mlp
    q: Mlp

    def networks(self) -> Dict[str, Mlp]:
        return {"d_a": self.d_a, "d_e": self.d_e, "q": self.q}


@dataclass
class DiscriminatorSet:
    task_ids: List[str]
    tasks: List[TaskDiscriminators] = field(default_factory=list)

    def __getitem__(self, task_index: int) -> TaskDiscriminators:
        return self.tasks[task_index]

    def __len__(self) -> int:
        return len(self.tasks)


def build_state_maps(expert_dim: int, agent_dim: int, latent_dim: int, rng: np.random.Generator) -> StateMapPair:
    return StateMapPair(
        enc_e=build_mlp([expert_dim, *MAP_HIDDEN, latent_dim], rng),
        dec_e=build_mlp([latent_dim, *MAP_HIDDEN, agent_dim], rng),
        enc_a=build_mlp([agent_dim, *MAP_HIDDEN, latent_dim], rng),
        dec_a=build_mlp([latent_dim, *MAP_HIDDEN, expert_dim], rng),
    )


def build_discriminators(
    task_ids: Sequence[str],
    expert_dim: int,
    agent_dim: int,
    latent_dim: int,
    rng: np.random.Generator,
) -> DiscriminatorSet:
    discs = DiscriminatorSet(list(task_ids))
    for j in range(len(task_ids)):
        discs.tasks.append(TaskDiscriminators(
            task_index=j,
            d_a=build_mlp([2 * agent_dim, *DISC_HIDDEN, 1], rng, spectral_norm=True),
            d_e=build_mlp([2 * expert_dim, *DISC_HIDDEN, 1], rng, spectral_norm=True),
            q=build_mlp([2 * latent_dim, *DISC_HIDDEN, 1], rng, output_activation="sigmoid", spectral_norm=True),
        ))
    return discs


def build_latent_predictor(latent_dim: int, rng: np.random.Generator) -> Mlp:
    """P_z: latent state -> temporal position on an inference task."""
    return build_mlp([latent_dim, *LATENT_POSITION_HIDDEN, 1], rng)
