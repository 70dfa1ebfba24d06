"""
Alignment loss terms and their gradients.

Each term takes an optional ``GradBook`` and a ``weight``. When a book is
given, ``weight * dTerm/dParams`` is accumulated for every trainable network
the term touches; frozen networks are still differentiated through so the
gradient reaches the trainable ones behind them. All states are normalized
non-goal states.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config import AlignHyperparams
from errors import DimensionError
from numcore import (
    ForwardTrace,
    Gradients,
    Mlp,
    bce,
    bce_grad,
    lsq_adv_losses,
    lsq_disc_grads,
    lsq_gen_grad,
    mlp_backward,
    mlp_forward,
    mse,
    mse_grad,
)
from temporal_pos import PositionEstimator, latent_pos_loss, pos_consistency_loss
from traj_data import TransitionBatch
from .networks import Chain, StateMapPair, TaskDiscriminators

E_TO_A = "E->A"
A_TO_E = "A->E"
EXPERT_LABEL = 1.0
AGENT_LABEL = 0.0


# ------------------------------------------------------------
# ---------------------- Gradient bookkeeping ----------------
# ------------------------------------------------------------

class GradBook:
    """Per-network gradient accumulator; networks outside ``trainable`` are dropped."""

    def __init__(self, nets: Dict[str, Mlp], trainable: Iterable[str]):
        self.nets = nets
        self.trainable = set(trainable)
        unknown = self.trainable - set(nets)
        if unknown:
            raise KeyError(f"unknown trainable networks: {sorted(unknown)}")
        self.grads: Dict[str, Gradients] = {name: Gradients.zeros_like(nets[name]) for name in self.trainable}

    def add(self, name: str, grads: Gradients, scale: float = 1.0) -> None:
        if name in self.trainable:
            self.grads[name].add(grads, scale)

    def get(self, name: str) -> Gradients:
        return self.grads[name]

    def is_trainable(self, name: str) -> bool:
        return name in self.trainable


@dataclass
class ChainTrace:
    steps: List[Tuple[str, Mlp, ForwardTrace]]


def forward_chain(chain: Chain, batch) -> Tuple[np.ndarray, ChainTrace]:
    x = batch
    steps = []
    for name, net in chain:
        x, trace = mlp_forward(net, x)
        steps.append((name, net, trace))
    return x, ChainTrace(steps)


def backward_chain(book: Optional[GradBook], chain_trace: ChainTrace, grad_output: np.ndarray) -> np.ndarray:
    """Backpropagate through a recorded chain; returns the gradient w.r.t. its input."""
    g = grad_output
    for name, net, trace in reversed(chain_trace.steps):
        grads, g = mlp_backward(net, trace, g)
        if book is not None:
            book.add(name, grads)
    return g


def _wants_grad(book: Optional[GradBook], weight: float) -> bool:
    return book is not None and weight != 0.0


# ------------------------------------------------------------
# ---------------------- Adversarial -------------------------
# ------------------------------------------------------------

def adv_loss_terms(
    maps: StateMapPair,
    discs: TaskDiscriminators,
    batch_e: TransitionBatch,
    batch_a: TransitionBatch,
    direction: str,
    disc_book: Optional[GradBook] = None,
    gen_book: Optional[GradBook] = None,
    gen_weight: float = 1.0,
) -> Tuple[float, float]:
    """
    Least-squares adversarial losses for one direction of one proxy task.

    E->A: psi-mapped expert transitions are the fakes for D_A^j, agent
    transitions are real. A->E mirrors it through phi and D_E^j.

    Returns:
        (disc_loss, gen_loss)
    """
    if not batch_e.task_index == batch_a.task_index == discs.task_index:
        raise DimensionError(
            f"task mismatch: batches {batch_e.task_index}/{batch_a.task_index}, discriminators {discs.task_index}"
        )
    if direction == E_TO_A:
        source, target, chain, disc, disc_name = batch_e, batch_a, maps.psi_chain(), discs.d_a, "d_a"
    elif direction == A_TO_E:
        source, target, chain, disc, disc_name = batch_a, batch_e, maps.phi_chain(), discs.d_e, "d_e"
    else:
        raise ValueError(f"unknown direction {direction!r}")

    mapped_t, trace_t = forward_chain(chain, source.current)
    mapped_t1, trace_t1 = forward_chain(chain, source.following)
    fake = np.hstack([mapped_t, mapped_t1])
    real = np.hstack([target.current, target.following])

    d_real, real_trace = mlp_forward(disc, real)
    d_fake, fake_trace = mlp_forward(disc, fake)
    disc_loss, gen_loss = lsq_adv_losses(d_real, d_fake)

    if disc_book is not None:
        g_real, g_fake = lsq_disc_grads(d_real, d_fake)
        disc_book.add(disc_name, mlp_backward(disc, real_trace, g_real)[0])
        disc_book.add(disc_name, mlp_backward(disc, fake_trace, g_fake)[0])

    if _wants_grad(gen_book, gen_weight):
        # discriminator parameters stay untouched on the generator side
        _, g_input = mlp_backward(disc, fake_trace, gen_weight * lsq_gen_grad(d_fake))
        half = mapped_t.shape[1]
        backward_chain(gen_book, trace_t, g_input[:, :half])
        backward_chain(gen_book, trace_t1, g_input[:, half:])
    return disc_loss, gen_loss


# ------------------------------------------------------------
# ---------------------- Consistency -------------------------
# ------------------------------------------------------------

def _round_trip(
    chain: Chain,
    states: np.ndarray,
    book: Optional[GradBook],
    weight: float,
) -> float:
    out, trace = forward_chain(chain, states)
    value = mse(out, states)
    if _wants_grad(book, weight):
        backward_chain(book, trace, weight * mse_grad(out, states))
    return value


def cycle_loss(
    maps: StateMapPair,
    states_e: np.ndarray,
    states_a: np.ndarray,
    book: Optional[GradBook] = None,
    weight: float = 1.0,
) -> float:
    """mse(phi(psi(s_E)), s_E) + mse(psi(phi(s_A)), s_A)."""
    expert_cycle = maps.psi_chain() + maps.phi_chain()
    agent_cycle = maps.phi_chain() + maps.psi_chain()
    return _round_trip(expert_cycle, states_e, book, weight) + _round_trip(agent_cycle, states_a, book, weight)


def inference_cycle_loss(
    maps: StateMapPair,
    states_e: np.ndarray,
    book: Optional[GradBook] = None,
    weight: float = 1.0,
) -> float:
    """Expert-side cycle term on inference-task states."""
    return _round_trip(maps.psi_chain() + maps.phi_chain(), states_e, book, weight)


def _latent_match(
    mapped_chain: Chain,
    direct_chain: Chain,
    states: np.ndarray,
    book: Optional[GradBook],
    weight: float,
) -> float:
    mapped, mapped_trace = forward_chain(mapped_chain, states)
    direct, direct_trace = forward_chain(direct_chain, states)
    value = mse(mapped, direct)
    if _wants_grad(book, weight):
        g = weight * mse_grad(mapped, direct)
        backward_chain(book, mapped_trace, g)
        backward_chain(book, direct_trace, -g)
    return value


def latent_consistency_loss(
    maps: StateMapPair,
    states_e: np.ndarray,
    states_a: np.ndarray,
    book: Optional[GradBook] = None,
    weight: float = 1.0,
) -> float:
    """||Enc_A(psi(s_E)) - Enc_E(s_E)||^2 + ||Enc_E(phi(s_A)) - Enc_A(s_A)||^2."""
    expert_term = _latent_match(
        maps.psi_chain() + [("enc_a", maps.enc_a)], [("enc_e", maps.enc_e)], states_e, book, weight
    )
    agent_term = _latent_match(
        maps.phi_chain() + [("enc_e", maps.enc_e)], [("enc_a", maps.enc_a)], states_a, book, weight
    )
    return expert_term + agent_term


# ------------------------------------------------------------
# ---------------------- Domain confusion --------------------
# ------------------------------------------------------------

def _domain_term(
    q: Mlp,
    encoder: Tuple[str, Mlp],
    batch: TransitionBatch,
    label: float,
    q_book: Optional[GradBook],
    gen_book: Optional[GradBook],
    gen_weight: float,
) -> float:
    z_t, trace_t = forward_chain([encoder], batch.current)
    z_t1, trace_t1 = forward_chain([encoder], batch.following)
    prob, q_trace = mlp_forward(q, np.hstack([z_t, z_t1]))
    labels = np.full_like(prob, label)
    value = bce(prob, labels)
    # the domain term enters the objective halved (mean over two domains)
    g = 0.5 * bce_grad(prob, labels)
    if q_book is not None:
        q_book.add("q", mlp_backward(q, q_trace, g)[0])
    if _wants_grad(gen_book, gen_weight):
        _, g_latent = mlp_backward(q, q_trace, gen_weight * g)
        latent_dim = z_t.shape[1]
        backward_chain(gen_book, trace_t, g_latent[:, :latent_dim])
        backward_chain(gen_book, trace_t1, g_latent[:, latent_dim:])
    return value


def mi_loss(
    maps: StateMapPair,
    discs: TaskDiscriminators,
    batch_e: TransitionBatch,
    batch_a: TransitionBatch,
    q_book: Optional[GradBook] = None,
    gen_book: Optional[GradBook] = None,
    gen_weight: float = 1.0,
) -> float:
    """
    Mean over both domains of bce(q^j(z^t, z^{t+1}), label), expert = 1, agent = 0.

    q^j minimizes this value; the encoders maximize it, so the trainer passes a
    negative ``gen_weight``.
    """
    expert_term = _domain_term(discs.q, ("enc_e", maps.enc_e), batch_e, EXPERT_LABEL, q_book, gen_book, gen_weight)
    agent_term = _domain_term(discs.q, ("enc_a", maps.enc_a), batch_a, AGENT_LABEL, q_book, gen_book, gen_weight)
    return 0.5 * (expert_term + agent_term)


# ------------------------------------------------------------
# ---------------------- Temporal position -------------------
# ------------------------------------------------------------

def position_term(
    maps: StateMapPair,
    p_e: PositionEstimator,
    p_a: PositionEstimator,
    states_e: np.ndarray,
    states_a: np.ndarray,
    book: Optional[GradBook] = None,
    weight: float = 1.0,
) -> float:
    mapped_e, trace_e = forward_chain(maps.psi_chain(), states_e)
    mapped_a, trace_a = forward_chain(maps.phi_chain(), states_a)
    loss = pos_consistency_loss(p_e, p_a, states_e, mapped_e, states_a, mapped_a)
    if _wants_grad(book, weight):
        backward_chain(book, trace_e, weight * loss.grad_mapped_e)
        backward_chain(book, trace_a, weight * loss.grad_mapped_a)
    return loss.value


def latent_position_term(
    maps: StateMapPair,
    p_z: Mlp,
    p_e_t: PositionEstimator,
    states_e: np.ndarray,
    book: Optional[GradBook] = None,
    weight: float = 1.0,
    pz_book: Optional[GradBook] = None,
) -> float:
    latent, trace = forward_chain([("enc_e", maps.enc_e)], states_e)
    loss = latent_pos_loss(p_z, p_e_t, latent, states_e)
    if pz_book is not None:
        pz_book.add("p_z", loss.pz_grads)
    if _wants_grad(book, weight):
        backward_chain(book, trace, weight * loss.grad_latent)
    return loss.value


# ------------------------------------------------------------
# ---------------------- Combined objective ------------------
# ------------------------------------------------------------

@dataclass
class LossBreakdown:
    adv_a: float = 0.0
    adv_e: float = 0.0
    cyc: float = 0.0
    z: float = 0.0
    mi: float = 0.0
    pos: float = 0.0
    cyc_inf: float = 0.0
    pos_inf: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def mean(cls, rows: Sequence["LossBreakdown"]) -> "LossBreakdown":
        if not rows:
            return cls()
        return cls(**{f.name: float(np.mean([getattr(r, f.name) for r in rows])) for f in fields(cls)})


def weighted_terms(terms: LossBreakdown, hp: AlignHyperparams) -> Dict[str, float]:
    """Signed, weighted contribution of every term."""
    return {
        "adv_a": hp.lambda1 * terms.adv_a,
        "adv_e": hp.lambda1 * terms.adv_e,
        "cyc": hp.lambda2 * terms.cyc,
        "z": hp.lambda2 * terms.z,
        "pos": hp.lambda3 * terms.pos,
        "mi": -hp.lambda4 * terms.mi,
        "cyc_inf": hp.lambda5 * terms.cyc_inf,
        "pos_inf": hp.lambda5 * terms.pos_inf if hp.pos_inf_enabled else 0.0,
    }


def weighted_total(terms: LossBreakdown, hp: AlignHyperparams) -> float:
    return float(sum(weighted_terms(terms, hp).values()))


def total_objective(
    task_terms: Sequence[LossBreakdown],
    hp: AlignHyperparams,
    cyc_inf: float = 0.0,
    pos_inf: float = 0.0,
) -> Tuple[float, Dict[str, float]]:
    """
    Generator-side objective summed over proxy tasks plus the inference terms.

    Returns:
        (scalar, signed weighted breakdown whose values sum to the scalar)
    """
    breakdown = {name: 0.0 for name in weighted_terms(LossBreakdown(), hp)}
    for terms in task_terms:
        task_only = LossBreakdown(**{**terms.as_dict(), "cyc_inf": 0.0, "pos_inf": 0.0})
        for name, value in weighted_terms(task_only, hp).items():
            breakdown[name] += value
    inference = weighted_terms(LossBreakdown(cyc_inf=cyc_inf, pos_inf=pos_inf), hp)
    breakdown["cyc_inf"] += inference["cyc_inf"]
    breakdown["pos_inf"] += inference["pos_inf"]
    return float(sum(breakdown.values())), breakdown
