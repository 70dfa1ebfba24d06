"""
Alignment training loop.

Every outer iteration visits the proxy tasks in order. For each task it runs
``inner_steps`` minibatch rounds of discriminator update, latent classifier
update, then one generator update of the four map networks. An
inference-adaptation phase follows, updating P_z and then the maps on the
inference-task terms. Adversaries and generators never share an update.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config import SN_TRAIN_ITERS, AlignHyperparams
from errors import EstimatorMismatchError, NonFiniteError, TrainingDivergedError, UntrainedModelError
from numcore import Adam, Mlp
from temporal_pos import PositionEstimator
from traj_data import Normalizer, ProxyDataset, Trajectory, TransitionBatch, TransitionIndex
from utils import derive_seed, make_rng
from .losses import (
    A_TO_E,
    E_TO_A,
    GradBook,
    LossBreakdown,
    adv_loss_terms,
    cycle_loss,
    inference_cycle_loss,
    latent_consistency_loss,
    latent_position_term,
    mi_loss,
    position_term,
    weighted_total,
)
from .networks import DiscriminatorSet, StateMapPair, build_discriminators, build_latent_predictor, build_state_maps

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ("iter", "task", "L_adv_A", "L_adv_E", "L_cyc", "L_z", "L_MI", "L_pos", "L_cyc_inf", "L_pos_inf", "total")
INFERENCE_ROW = "inference"
MAP_NAMES = ("enc_e", "dec_e", "enc_a", "dec_a")


@dataclass
class AlignmentEstimators:
    """Frozen position estimators: proxy ones keyed by (domain, task_id), inference ones by task_id."""
    proxy: Dict[Tuple[str, str], PositionEstimator] = field(default_factory=dict)
    inference: Dict[str, PositionEstimator] = field(default_factory=dict)

    def all(self) -> List[PositionEstimator]:
        return list(self.proxy.values()) + list(self.inference.values())


@dataclass
class AlignmentResult:
    maps: StateMapPair
    discs: DiscriminatorSet
    latent_predictors: Dict[str, Mlp]
    metrics: List[Dict] = field(default_factory=list)


def metrics_row(iteration: int, task: str, terms: LossBreakdown, hp: AlignHyperparams) -> Dict:
    return {
        "iter": iteration,
        "task": task,
        "L_adv_A": terms.adv_a,
        "L_adv_E": terms.adv_e,
        "L_cyc": terms.cyc,
        "L_z": terms.z,
        "L_MI": terms.mi,
        "L_pos": terms.pos,
        "L_cyc_inf": terms.cyc_inf,
        "L_pos_inf": terms.pos_inf,
        "total": weighted_total(terms, hp),
    }


class AlignmentTrainer:
    """Owns every mutable parameter of one alignment run."""

    def __init__(
        self,
        dataset: ProxyDataset,
        inference_demos: Dict[str, Sequence[Trajectory]],
        hp: AlignHyperparams,
        estimators: AlignmentEstimators,
        expert_norm: Normalizer,
        agent_norm: Normalizer,
        seed: int = 0,
    ):
        self.dataset = dataset
        self.hp = hp
        self.estimators = estimators
        self.rng = make_rng(derive_seed(seed, "align", "sampling"))
        self._check_estimators(inference_demos)

        self.proxy_index: Dict[Tuple[int, str], TransitionIndex] = {}
        for j in range(dataset.num_tasks):
            self.proxy_index[(j, "E")] = dataset.transitions(j, "E").map_states(expert_norm.apply_nongoal)
            self.proxy_index[(j, "A")] = dataset.transitions(j, "A").map_states(agent_norm.apply_nongoal)
        self.inference_ids = sorted(k for k, v in inference_demos.items() if v)
        self.inference_index = {
            task_id: TransitionIndex(inference_demos[task_id]).map_states(expert_norm.apply_nongoal)
            for task_id in self.inference_ids
        }

        init_rng = make_rng(derive_seed(seed, "align", "init"))
        self.maps = build_state_maps(expert_norm.nongoal_dim, agent_norm.nongoal_dim, hp.latent_dim, init_rng)
        self.discs = build_discriminators(
            dataset.task_ids, expert_norm.nongoal_dim, agent_norm.nongoal_dim, hp.latent_dim, init_rng
        )
        self.latent_predictors = {task_id: build_latent_predictor(hp.latent_dim, init_rng) for task_id in self.inference_ids}

        self.map_opts = {name: Adam(net, hp.lr) for name, net in self.maps.networks().items()}
        self.disc_opts = [{name: Adam(net, hp.lr) for name, net in d.networks().items()} for d in self.discs.tasks]
        self.pz_opts = {task_id: Adam(net, hp.lr) for task_id, net in self.latent_predictors.items()}
        self.metrics: List[Dict] = []
        self.iteration = 0
        self.task = ""

    def _check_estimators(self, inference_demos: Dict[str, Sequence[Trajectory]]) -> None:
        if self.hp.lambda3 > 0:
            for task_id in self.dataset.task_ids:
                for domain in ("E", "A"):
                    if (domain, task_id) not in self.estimators.proxy:
                        raise UntrainedModelError(f"missing position estimator for {domain}/{task_id}")
        if self.hp.lambda5 > 0 and self.hp.pos_inf_enabled:
            for task_id, demos in inference_demos.items():
                if demos and task_id not in self.estimators.inference:
                    raise UntrainedModelError(f"missing inference position estimator for {task_id}")

    # ---- sampling ----

    def _batch(self, j: int, domain: str) -> TransitionBatch:
        current, following = self.proxy_index[(j, domain)].sample(self.hp.batch_size, self.rng)
        return TransitionBatch(current, following, domain, j)

    # ---- divergence ----

    @contextmanager
    def _watch(self, term: str) -> Iterator[None]:
        """Turn a NaN reaching any network inside ``term`` into a divergence report."""
        try:
            yield
        except NonFiniteError as exc:
            raise TrainingDivergedError(term, self.iteration, self.task) from exc

    def _finite(self, term: str, value: float) -> float:
        if not np.isfinite(value):
            raise TrainingDivergedError(term, self.iteration, self.task)
        return value

    # ---- updates ----

    def _apply(self, book: GradBook, optimizers: Dict[str, Adam], refresh: bool = False) -> None:
        for name in book.trainable:
            optimizers[name].step(book.get(name))
            if refresh:
                optimizers[name].net.refresh_spectral(SN_TRAIN_ITERS)

    def discriminator_step(self, j: int, batch_e: TransitionBatch, batch_a: TransitionBatch) -> None:
        if self.hp.lambda1 == 0:
            return
        discs = self.discs[j]
        book = GradBook(discs.networks(), ("d_a", "d_e"))
        for term, direction in (("adv_a", E_TO_A), ("adv_e", A_TO_E)):
            with self._watch(term):
                disc_loss, _ = adv_loss_terms(self.maps, discs, batch_e, batch_a, direction, disc_book=book)
            self._finite(term, disc_loss)
        self._apply(book, self.disc_opts[j], refresh=True)

    def classifier_step(self, j: int, batch_e: TransitionBatch, batch_a: TransitionBatch) -> None:
        if self.hp.lambda4 == 0:
            return
        discs = self.discs[j]
        book = GradBook(discs.networks(), ("q",))
        with self._watch("mi"):
            self._finite("mi", mi_loss(self.maps, discs, batch_e, batch_a, q_book=book))
        self._apply(book, self.disc_opts[j], refresh=True)

    def generator_step(self, j: int, batch_e: TransitionBatch, batch_a: TransitionBatch) -> LossBreakdown:
        hp = self.hp
        discs = self.discs[j]
        nets = {**self.maps.networks(), **discs.networks()}
        book = GradBook(nets, MAP_NAMES)
        terms = LossBreakdown()
        if hp.lambda1 > 0:
            for term, direction in (("adv_a", E_TO_A), ("adv_e", A_TO_E)):
                with self._watch(term):
                    _, gen_loss = adv_loss_terms(
                        self.maps, discs, batch_e, batch_a, direction, gen_book=book, gen_weight=hp.lambda1
                    )
                setattr(terms, term, self._finite(term, gen_loss))
        if hp.lambda2 > 0:
            with self._watch("cyc"):
                terms.cyc = self._finite("cyc", cycle_loss(self.maps, batch_e.current, batch_a.current, book, hp.lambda2))
            with self._watch("z"):
                terms.z = self._finite(
                    "z", latent_consistency_loss(self.maps, batch_e.current, batch_a.current, book, hp.lambda2)
                )
        if hp.lambda3 > 0:
            task_id = self.dataset.task_ids[j]
            with self._watch("pos"):
                value = position_term(
                    self.maps,
                    self.estimators.proxy[("E", task_id)],
                    self.estimators.proxy[("A", task_id)],
                    batch_e.current,
                    batch_a.current,
                    book,
                    hp.lambda3,
                )
            terms.pos = self._finite("pos", value)
        if hp.lambda4 > 0:
            with self._watch("mi"):
                terms.mi = self._finite("mi", mi_loss(self.maps, discs, batch_e, batch_a, gen_book=book, gen_weight=-hp.lambda4))
        self._apply(book, self.map_opts)
        return terms

    def inference_adaptation_step(self, task_id: str) -> LossBreakdown:
        """One P_z update followed by one map update on the inference-task terms."""
        hp = self.hp
        terms = LossBreakdown()
        states = self.inference_index[task_id].sample_states(hp.batch_size, self.rng)
        p_z = self.latent_predictors[task_id]
        use_pos = hp.pos_inf_enabled and task_id in self.estimators.inference
        if use_pos:
            pz_book = GradBook({"p_z": p_z}, ("p_z",))
            with self._watch("pos_inf"):
                value = latent_position_term(self.maps, p_z, self.estimators.inference[task_id], states, pz_book=pz_book)
            self._finite("pos_inf", value)
            self.pz_opts[task_id].step(pz_book.get("p_z"))

        book = GradBook(self.maps.networks(), MAP_NAMES)
        with self._watch("cyc_inf"):
            terms.cyc_inf = self._finite("cyc_inf", inference_cycle_loss(self.maps, states, book, hp.lambda5))
        if use_pos:
            with self._watch("pos_inf"):
                value = latent_position_term(self.maps, p_z, self.estimators.inference[task_id], states, book, hp.lambda5)
            terms.pos_inf = self._finite("pos_inf", value)
        self._apply(book, self.map_opts)
        return terms

    # ---- loop ----

    def run_iteration(self, iteration: int) -> None:
        hp = self.hp
        self.iteration = iteration
        for j, task_id in enumerate(self.dataset.task_ids):
            self.task = task_id
            rows = []
            for _ in range(hp.inner_steps):
                batch_e = self._batch(j, "E")
                batch_a = self._batch(j, "A")
                self.discriminator_step(j, batch_e, batch_a)
                self.classifier_step(j, batch_e, batch_a)
                rows.append(self.generator_step(j, batch_e, batch_a))
            self.metrics.append(metrics_row(iteration, task_id, LossBreakdown.mean(rows), hp))

        if hp.lambda5 > 0 and self.inference_ids:
            rows = []
            for step in range(hp.inner_steps):
                self.task = self.inference_ids[step % len(self.inference_ids)]
                rows.append(self.inference_adaptation_step(self.task))
            self.metrics.append(metrics_row(iteration, INFERENCE_ROW, LossBreakdown.mean(rows), hp))

    def train(self, progress: bool = False) -> AlignmentResult:
        frozen = [e.net.digest() for e in self.estimators.all()]
        for iteration in tqdm(range(self.hp.outer_iterations), desc="align", disable=None if progress else True):
            self.run_iteration(iteration)
            if iteration % 10 == 0 or iteration == self.hp.outer_iterations - 1:
                last = self.metrics[-1]
                logger.info(f"Alignment iteration {iteration}: {last['task']} total {last['total']:.4f}")
        if frozen != [e.net.digest() for e in self.estimators.all()]:
            raise EstimatorMismatchError("position estimators changed during alignment training")
        return AlignmentResult(self.maps, self.discs, self.latent_predictors, self.metrics)


def train_alignment(
    dataset: ProxyDataset,
    inference_demos: Dict[str, Sequence[Trajectory]],
    hp: AlignHyperparams,
    estimators: AlignmentEstimators,
    expert_norm: Normalizer,
    agent_norm: Normalizer,
    seed: int = 0,
    progress: bool = False,
) -> AlignmentResult:
    """
    Learn psi/phi from unpaired proxy-task transitions. Deterministic given ``seed``.

    Raises TrainingDivergedError naming the first non-finite term.
    """
    trainer = AlignmentTrainer(dataset, inference_demos, hp, estimators, expert_norm, agent_norm, seed)
    logger.info(
        f"Training alignment on {dataset.num_tasks} proxy tasks and {len(trainer.inference_ids)} inference tasks "
        f"({hp.outer_iterations} iterations x {hp.inner_steps} steps)"
    )
    return trainer.train(progress)
