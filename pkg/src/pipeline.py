"""
Stage orchestration.

Each stage reads only the artifacts of earlier stages, owns exactly one
directory under ``output_dir`` (cleared when the stage starts) and records
its inputs and outputs, with hashes, in ``manifest.json``.
"""

import logging
import os
import shutil
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import logfire
import numpy as np

from arm_env import Scenario, goal_frame_rotation, make_scenario
from baselines import (
    CYCLEGAN_FLAGS,
    AblationFlags,
    cca_fit,
    cca_transfer,
    run_ablation_table,
    sweep,
    write_results,
)
from bco import (
    ReferenceReturns,
    collect_random,
    evaluate_policy,
    load_inverse_model,
    load_policy,
    reference_returns,
    run_bco,
    save_inverse_model,
    save_policy,
    train_inverse_model,
)
from config import (
    ABLATION_DIR,
    BASELINES_DIR,
    CORPUS_EXTENSION,
    EVAL_DIR,
    EVAL_REPORT_FILENAME,
    GEN_DEMOS_DIR,
    MANIFEST_FILENAME,
    METRICS_FILENAME,
    NORMALIZERS_FILENAME,
    SWEEP_DIR,
    TRAIN_ALIGN_DIR,
    TRAIN_BCO_DIR,
    TRAIN_POSITIONS_DIR,
    TRANSFER_DIR,
    RunConfig,
)
from correspond import (
    ALIGNMENT_MANIFEST,
    METRIC_COLUMNS,
    AlignmentEstimators,
    end_effector_recovery,
    load_alignment,
    mapping_identity_error,
    save_alignment,
    train_alignment,
    transfer_demos,
)
from errors import StageOrderError
from expert_gen import PdExpert, agent_inference_demos, generate_scenario_corpora
from models import AblationRow, ArtifactRecord, EvalReport, Manifest, StageRecord, TaskScore
from temporal_pos import load_estimator, save_estimator, train_position_estimator
from traj_data import (
    Normalizer,
    Trajectory,
    build_proxy_dataset,
    fit_normalizer,
    load_corpus,
    nongoal_states,
    save_corpus,
    strip_actions,
)
from utils import derive_seed, file_manager, make_rng

logger = logging.getLogger(__name__)

DIAGNOSTICS_FILENAME = 'diagnostics.json'
POSITION_REPORT_FILENAME = 'position_report.json'
BCO_REPORT_FILENAME = 'bco.json'
INVERSE_MODEL_FILENAME = 'inverse_model.json'
POLICY_FILENAME = 'policy.json'
RESULTS_CSV = 'results.csv'
SUMMARY_JSON = 'summary.json'
BASELINE_NAMES = ('cca', 'self-demo', 'cyclegan')


def _now() -> datetime:
    return datetime.now(timezone.utc)


def corpus_name(split: str, domain: str, task_id: str) -> str:
    return f"{split}_{domain}_{task_id}{CORPUS_EXTENSION}"


def estimator_name(domain: str, task_id: str) -> str:
    # domain "T" marks an inference-task expert estimator
    return f"pos_{domain}_{task_id}.json"


class PipelineRunner:
    """Runs the stages of one scenario/seed into ``config.output_dir``."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.scenario: Scenario = make_scenario(config.scenario).with_proxy_tasks(config.num_proxy_tasks)
        self.current_stage: Optional[str] = None
        self._inputs: List[str] = []
        self._outputs: List[str] = []

    # ---- artifact discipline ----

    def path(self, stage: str, name: str) -> str:
        return os.path.join(self.config.stage_dir(stage), name)

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.config.output_dir, MANIFEST_FILENAME)

    def _load_manifest(self) -> Manifest:
        data = file_manager.load_json(self.manifest_path)
        if data is None:
            return Manifest(config=self.config.model_dump())
        manifest = Manifest.model_validate(data)
        manifest.config = self.config.model_dump()
        return manifest

    def require(self, paths: Sequence[str]) -> None:
        missing = [p for p in paths if not os.path.exists(p)]
        if missing:
            raise StageOrderError(self.current_stage or "?", missing)
        self._inputs.extend(paths)

    def output(self, path: str) -> str:
        self._outputs.append(path)
        return path

    @contextmanager
    def stage(self, name: str) -> Iterator[str]:
        """Clear and own ``output_dir/<name>``; record the stage in the manifest on success."""
        self.current_stage = name
        self._inputs, self._outputs = [], []
        directory = self.config.stage_dir(name)
        started = _now()
        with logfire.span("stage {stage}", stage=name, scenario=self.config.scenario, seed=self.config.seed):
            logger.info(f"Starting stage {name} ({self.config.scenario}, seed {self.config.seed})")
            if os.path.isdir(directory):
                shutil.rmtree(directory)
            file_manager.ensure_directory(directory)
            try:
                yield directory
            except Exception as e:
                logger.error(f"Stage {name} failed: {str(e)}")
                raise
            manifest = self._load_manifest()
            manifest.record(StageRecord(
                stage=name,
                started_at=started,
                completed_at=_now(),
                inputs=[ArtifactRecord(path=p, sha256=file_manager.sha256_file(p)) for p in sorted(set(self._inputs))],
                outputs=[ArtifactRecord(path=p, sha256=file_manager.sha256_file(p)) for p in sorted(set(self._outputs))],
            ))
            file_manager.save_json(manifest.model_dump(mode='json'), self.manifest_path)
            logger.info(f"Finished stage {name}: {len(set(self._outputs))} artifacts")

    # ---- shared loaders ----

    def _proxy_corpus_paths(self) -> List[Tuple[str, str, str]]:
        return [
            (domain, task.task_id, self.path(GEN_DEMOS_DIR, corpus_name("proxy", domain, task.task_id)))
            for task in self.scenario.proxy_tasks
            for domain in ("E", "A")
        ]

    def _inference_corpus_paths(self) -> Dict[str, str]:
        return {
            task.task_id: self.path(GEN_DEMOS_DIR, corpus_name("inference", "E", task.task_id))
            for task in self.scenario.inference_tasks
        }

    def _load_proxy(self) -> Tuple[List[Trajectory], List[Trajectory]]:
        paths = self._proxy_corpus_paths()
        self.require([p for _, _, p in paths])
        expert, agent = [], []
        for domain, _, path in paths:
            # alignment never sees expert actions
            (expert if domain == "E" else agent).extend(strip_actions(load_corpus(path)))
        return expert, agent

    def _load_inference(self) -> Dict[str, List[Trajectory]]:
        paths = self._inference_corpus_paths()
        self.require(list(paths.values()))
        return {task_id: strip_actions(load_corpus(path)) for task_id, path in paths.items()}

    def _load_normalizers(self) -> Tuple[Normalizer, Normalizer]:
        path = self.path(TRAIN_POSITIONS_DIR, NORMALIZERS_FILENAME)
        self.require([path])
        data = file_manager.load_json(path)
        return Normalizer.from_dict(data["E"]), Normalizer.from_dict(data["A"])

    def _load_transferred(self) -> List[Trajectory]:
        paths = [self.path(TRANSFER_DIR, corpus_name("transferred", "A", t.task_id)) for t in self.scenario.inference_tasks]
        self.require(paths)
        return [traj for p in paths for traj in load_corpus(p)]

    def _seed(self, *names) -> int:
        return derive_seed(self.config.seed, *names)

    @property
    def goal_rotation(self) -> float:
        return goal_frame_rotation(self.scenario.expert_config, self.scenario.agent_config)

    # ---- stages ----

    def cmd_gen_demos(self) -> Dict[str, str]:
        cfg = self.config
        with self.stage(GEN_DEMOS_DIR):
            corpora = generate_scenario_corpora(
                self.scenario, cfg.demos_per_proxy_task, cfg.inference_demo_count, self._seed(GEN_DEMOS_DIR), cfg.workers
            )
            paths = {}
            for key, trajs in corpora.items():
                paths[key] = self.output(self.path(GEN_DEMOS_DIR, f"{key}{CORPUS_EXTENSION}"))
                save_corpus(trajs, paths[key])
        return paths

    def cmd_train_positions(self) -> Dict[str, float]:
        cfg = self.config
        expert_cfg, agent_cfg = self.scenario.expert_config, self.scenario.agent_config
        with self.stage(TRAIN_POSITIONS_DIR):
            expert, agent = self._load_proxy()
            inference = self._load_inference()
            norms = {
                "E": fit_normalizer(expert, expert_cfg.goal_dims),
                "A": fit_normalizer(agent, agent_cfg.goal_dims),
            }
            file_manager.save_json(
                {domain: n.to_dict() for domain, n in norms.items()},
                self.output(self.path(TRAIN_POSITIONS_DIR, NORMALIZERS_FILENAME)),
            )

            jobs = []
            for domain, trajs, arm in (("E", expert, expert_cfg), ("A", agent, agent_cfg)):
                for task in self.scenario.proxy_tasks:
                    task_trajs = [t for t in trajs if t.task_id == task.task_id]
                    jobs.append((domain, domain, task.task_id, task_trajs, norms[domain], arm))
            for task_id, trajs in inference.items():
                jobs.append(("T", "E", task_id, trajs, norms["E"], expert_cfg))

            report = {}
            for tag, domain, task_id, trajs, norm, arm in jobs:
                estimator = train_position_estimator(
                    trajs, domain, task_id, norm, arm,
                    gamma_pos=cfg.gamma_pos,
                    steps=cfg.position_steps,
                    batch_size=cfg.position_batch,
                    lr=cfg.supervised_lr,
                    seed=self._seed(TRAIN_POSITIONS_DIR, tag, task_id),
                    progress=cfg.progress,
                )
                save_estimator(estimator, self.output(self.path(TRAIN_POSITIONS_DIR, estimator_name(tag, task_id))))
                report[f"{tag}/{task_id}"] = estimator.heldout_mse
            file_manager.save_json(report, self.output(self.path(TRAIN_POSITIONS_DIR, POSITION_REPORT_FILENAME)))
        return report

    def _load_estimators(self, expert_norm: Normalizer, agent_norm: Normalizer) -> AlignmentEstimators:
        estimators = AlignmentEstimators()
        for task in self.scenario.proxy_tasks:
            for domain, norm in (("E", expert_norm), ("A", agent_norm)):
                path = self.path(TRAIN_POSITIONS_DIR, estimator_name(domain, task.task_id))
                self.require([path])
                estimators.proxy[(domain, task.task_id)] = load_estimator(path, norm.nongoal_dim)
        for task in self.scenario.inference_tasks:
            path = self.path(TRAIN_POSITIONS_DIR, estimator_name("T", task.task_id))
            self.require([path])
            estimators.inference[task.task_id] = load_estimator(path, expert_norm.nongoal_dim)
        return estimators

    def cmd_train_align(self) -> Dict[str, Optional[float]]:
        cfg = self.config
        hp = cfg.ablation_flags().apply(cfg.align_hyperparams())
        with self.stage(TRAIN_ALIGN_DIR) as directory:
            expert, agent = self._load_proxy()
            inference = self._load_inference()
            expert_norm, agent_norm = self._load_normalizers()
            estimators = self._load_estimators(expert_norm, agent_norm)
            dataset = build_proxy_dataset(expert, agent, [t.task_id for t in self.scenario.proxy_tasks])

            result = train_alignment(
                dataset, inference, hp, estimators, expert_norm, agent_norm,
                seed=self._seed(TRAIN_ALIGN_DIR), progress=cfg.progress,
            )
            for path in save_alignment(result, directory, hp, cfg.scenario, expert_norm, agent_norm, cfg.seed).values():
                self.output(path)
            self.output(os.path.join(directory, ALIGNMENT_MANIFEST))
            file_manager.save_csv(result.metrics, METRIC_COLUMNS, self.output(os.path.join(directory, METRICS_FILENAME)))

            diagnostics = self._alignment_diagnostics(result.maps, agent, inference, expert_norm, agent_norm)
            file_manager.save_json(diagnostics, self.output(os.path.join(directory, DIAGNOSTICS_FILENAME)))
        return diagnostics

    def _alignment_diagnostics(self, maps, agent, inference, expert_norm, agent_norm) -> Dict[str, Optional[float]]:
        diagnostics: Dict[str, Optional[float]] = {"identity_error": None, "ee_recovery": None, "ee_median_error": None}
        if self.config.scenario == "self":
            states = np.vstack([t.states for t in agent])
            diagnostics["identity_error"] = mapping_identity_error(maps, agent_norm.apply_nongoal(states))
        expert_states = np.vstack([t.states for trajs in inference.values() for t in trajs])
        fraction, median = end_effector_recovery(
            maps, expert_states, expert_norm, agent_norm,
            self.scenario.expert_config, self.scenario.agent_config, self.goal_rotation,
        )
        diagnostics["ee_recovery"] = fraction
        diagnostics["ee_median_error"] = median
        return diagnostics

    def cmd_transfer(self) -> List[str]:
        with self.stage(TRANSFER_DIR):
            directory = self.config.stage_dir(TRAIN_ALIGN_DIR)
            self.require([os.path.join(directory, ALIGNMENT_MANIFEST)])
            maps = load_alignment(directory).maps
            expert_norm, agent_norm = self._load_normalizers()
            inference = self._load_inference()
            paths = []
            for task_id, demos in inference.items():
                transferred = transfer_demos(maps, demos, expert_norm, agent_norm, self.goal_rotation)
                path = self.output(self.path(TRANSFER_DIR, corpus_name("transferred", "A", task_id)))
                save_corpus(transferred, path)
                # reload to validate what downstream stages will read
                load_corpus(path)
                paths.append(path)
        return paths

    def _train_inverse_model(self):
        cfg = self.config
        expl = collect_random(self.scenario.agent_config, cfg.exploration_steps, self._seed(TRAIN_BCO_DIR, "explore"))
        return train_inverse_model(
            expl,
            self.scenario.agent_config.torque_limit,
            epochs=cfg.idm_epochs,
            lr=cfg.supervised_lr,
            seed=self._seed(TRAIN_BCO_DIR, "idm"),
            progress=cfg.progress,
        )

    def cmd_train_bco(self) -> Dict[str, float]:
        cfg = self.config
        with self.stage(TRAIN_BCO_DIR):
            demos = self._load_transferred()
            idm = self._train_inverse_model()
            save_inverse_model(idm, self.output(self.path(TRAIN_BCO_DIR, INVERSE_MODEL_FILENAME)))
            _, policy = run_bco(
                demos, idm, cfg.bc_epochs, cfg.supervised_lr, cfg.bc_batch,
                seed=self._seed(TRAIN_BCO_DIR, "bc"), progress=cfg.progress,
            )
            save_policy(policy, self.output(self.path(TRAIN_BCO_DIR, POLICY_FILENAME)))
            report = {"idm_heldout_mse": idm.heldout_mse, "bc_final_loss": policy.train_losses[-1]}
            file_manager.save_json(report, self.output(self.path(TRAIN_BCO_DIR, BCO_REPORT_FILENAME)))
        return report

    def references(self) -> ReferenceReturns:
        cfg = self.config
        return reference_returns(
            self.scenario.agent_config,
            self.scenario.inference_tasks,
            cfg.eval_episodes,
            self._seed(EVAL_DIR),
            PdExpert(self.scenario.kp, self.scenario.kd),
            cfg.workers,
        )

    def evaluate(self, policy, reference: ReferenceReturns, method: str,
                 diagnostics: Optional[Dict[str, Optional[float]]] = None) -> EvalReport:
        cfg = self.config
        result = evaluate_policy(
            policy, self.scenario.agent_config, self.scenario.inference_tasks, reference,
            cfg.eval_episodes, self._seed(EVAL_DIR), cfg.workers,
        )
        return EvalReport(
            scenario=cfg.scenario,
            seed=cfg.seed,
            method=method,
            mean_return=result.mean_return,
            normalized=result.normalized,
            reference_expert=reference.expert,
            reference_random=reference.random,
            per_task={k: TaskScore(**v) for k, v in result.per_task.items()},
            diagnostics=diagnostics or {},
        )

    def cmd_eval(self) -> EvalReport:
        with self.stage(EVAL_DIR):
            policy_path = self.path(TRAIN_BCO_DIR, POLICY_FILENAME)
            self.require([policy_path])
            policy = load_policy(policy_path)
            diagnostics_path = self.path(TRAIN_ALIGN_DIR, DIAGNOSTICS_FILENAME)
            diagnostics = file_manager.load_json(diagnostics_path) or {}
            report = self.evaluate(policy, self.references(), self.config.ablation_flags().name, diagnostics)
            file_manager.save_json(report.model_dump(mode='json'), self.output(self.path(EVAL_DIR, EVAL_REPORT_FILENAME)))
        logger.info(f"Normalized score: {report.normalized:.3f}")
        return report

    def run_stages(self) -> EvalReport:
        self.cmd_gen_demos()
        self.cmd_train_positions()
        self.cmd_train_align()
        self.cmd_transfer()
        self.cmd_train_bco()
        return self.cmd_eval()

    # ---- comparisons ----

    def nested(self, subdir: str, **overrides) -> "PipelineRunner":
        """A separate run (own stage dirs and manifest) below ``subdir``."""
        update = {"output_dir": os.path.join(self.config.output_dir, subdir), **overrides}
        return PipelineRunner(self.config.model_copy(update=update))

    def _flags_run(self, parent: str, flags: AblationFlags, seed: int) -> float:
        runner = self.nested(
            os.path.join(parent, f"{flags.name}-seed{seed}"),
            seed=seed,
            disable_inference_adaptation=flags.disable_inference_adaptation,
            disable_mi=flags.disable_mi,
            disable_temporal=flags.disable_temporal,
        )
        return runner.run_stages().normalized

    def cmd_ablation(self) -> List[Dict]:
        cfg = self.config
        with self.stage(ABLATION_DIR) as directory:
            rows = run_ablation_table(
                cfg.scenario, cfg.seeds(), lambda flags, seed: self._flags_run(ABLATION_DIR, flags, seed)
            )
            write_results(rows, self.output(os.path.join(directory, RESULTS_CSV)),
                          self.output(os.path.join(directory, SUMMARY_JSON)))
        return rows

    def _cca_score(self, idm, reference: ReferenceReturns, seed: int) -> float:
        expert, agent = self._load_proxy()
        inference = self._load_inference()
        expert_cfg, agent_cfg = self.scenario.expert_config, self.scenario.agent_config
        x = nongoal_states(expert, expert_cfg.goal_dims)
        y = nongoal_states(agent, agent_cfg.goal_dims)
        model = cca_fit(x, y, rng=make_rng(derive_seed(seed, BASELINES_DIR, "cca")))
        demos = [
            traj
            for trajs in inference.values()
            for traj in cca_transfer(model, trajs, expert_cfg.goal_dims, agent_cfg.goal_dims, self.goal_rotation)
        ]
        _, policy = run_bco(demos, idm, self.config.bc_epochs, self.config.supervised_lr, self.config.bc_batch,
                            seed=derive_seed(seed, BASELINES_DIR, "cca-bc"))
        return self.evaluate(policy, reference, "cca").normalized

    def _self_demo_score(self, idm, reference: ReferenceReturns, seed: int) -> float:
        demos = strip_actions(agent_inference_demos(
            self.scenario, self.config.inference_demo_count, derive_seed(seed, BASELINES_DIR, "self-demo"),
            self.config.workers,
        ))
        _, policy = run_bco(demos, idm, self.config.bc_epochs, self.config.supervised_lr, self.config.bc_batch,
                            seed=derive_seed(seed, BASELINES_DIR, "self-demo-bc"))
        return self.evaluate(policy, reference, "self-demo").normalized

    def cmd_baselines(self, names: Sequence[str]) -> List[Dict]:
        """Comparison rows next to the main run's own score. Needs a completed main run."""
        cfg = self.config
        with self.stage(BASELINES_DIR) as directory:
            idm_path = self.path(TRAIN_BCO_DIR, INVERSE_MODEL_FILENAME)
            report_path = self.path(EVAL_DIR, EVAL_REPORT_FILENAME)
            self.require([idm_path, report_path])
            idm = load_inverse_model(idm_path)
            main_report = EvalReport.model_validate(file_manager.load_json(report_path))
            reference = self.references()

            rows = [AblationRow(scenario=cfg.scenario, method=main_report.method, seed=cfg.seed,
                                normalized_score=main_report.normalized).model_dump()]
            for name in names:
                if name == "cca":
                    score = self._cca_score(idm, reference, cfg.seed)
                elif name == "self-demo":
                    score = self._self_demo_score(idm, reference, cfg.seed)
                elif name == "cyclegan":
                    score = self._flags_run(BASELINES_DIR, CYCLEGAN_FLAGS, cfg.seed)
                else:
                    raise ValueError(f"unknown baseline {name!r}; expected one of {', '.join(BASELINE_NAMES)}")
                rows.append(AblationRow(scenario=cfg.scenario, method=name, seed=cfg.seed, normalized_score=score).model_dump())
                logger.info(f"Baseline {name}: normalized score {score:.3f}")
            write_results(rows, self.output(os.path.join(directory, RESULTS_CSV)),
                          self.output(os.path.join(directory, SUMMARY_JSON)))
        return rows

    def cmd_sweep(self, kind: str, values: Sequence[int]) -> List[Dict]:
        field = {"demos": "inference_demo_count", "proxy-tasks": "num_proxy_tasks"}.get(kind)

        def run(value: int, seed: int) -> float:
            runner = self.nested(os.path.join(SWEEP_DIR, f"{kind}-{value}-seed{seed}"), seed=seed, **{field: value})
            return runner.run_stages().normalized

        with self.stage(SWEEP_DIR) as directory:
            rows = sweep(kind, values, self.config.seeds(), run)
            file_manager.save_csv(rows, ("kind", "value", "seed", "normalized_score"),
                                  self.output(os.path.join(directory, RESULTS_CSV)))
        return rows

    def cmd_run_all(self, ablation: bool = False, baselines: Sequence[str] = ()) -> EvalReport:
        """All stages in order into a fresh output directory."""
        if os.path.isdir(self.config.output_dir):
            shutil.rmtree(self.config.output_dir)
        report = self.run_stages()
        if baselines:
            self.cmd_baselines(baselines)
        if ablation:
            self.cmd_ablation()
        return report
