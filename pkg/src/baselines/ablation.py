"""Ablation and sweep bookkeeping around a pipeline run function."""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np

from config import CYCLEGAN_FLAGS, AblationFlags
from models import AblationRow
from utils import file_manager

logger = logging.getLogger(__name__)

ABLATION_CONFIGS = (
    AblationFlags(),
    AblationFlags(disable_inference_adaptation=True),
    AblationFlags(disable_mi=True),
    AblationFlags(disable_temporal=True),
)
RESULT_COLUMNS = ("scenario", "method", "seed", "normalized_score")
SWEEP_KINDS = ("demos", "proxy-tasks")

# run_fn(flags, seed) -> normalized score
RunFn = Callable[[AblationFlags, int], float]


@dataclass
class ScoreSummary:
    method: str
    mean: float
    std: float
    scores: List[float]

    def to_dict(self) -> Dict:
        return {"method": self.method, "mean": self.mean, "std": self.std, "scores": self.scores}


def summarize(method: str, scores: Sequence[float]) -> ScoreSummary:
    values = [float(s) for s in scores]
    return ScoreSummary(method, float(np.mean(values)), float(np.std(values)), values)


def run_ablation(scenario: str, flags: AblationFlags, seeds: Sequence[int], run_fn: RunFn) -> List[Dict]:
    """One result row per seed for one flag configuration."""
    rows = []
    for seed in seeds:
        score = run_fn(flags, seed)
        if not np.isfinite(score):
            raise ValueError(f"ablation {flags.name} produced a non-finite score for seed {seed}")
        rows.append(AblationRow(scenario=scenario, method=flags.name, seed=seed, normalized_score=score).model_dump())
        logger.info(f"Ablation {flags.name} seed {seed}: normalized score {score:.3f}")
    return rows


def run_ablation_table(scenario: str, seeds: Sequence[int], run_fn: RunFn) -> List[Dict]:
    """The full method and the three single-component ablations."""
    rows: List[Dict] = []
    for flags in ABLATION_CONFIGS:
        rows.extend(run_ablation(scenario, flags, seeds, run_fn))
    return rows


def cyclegan_baseline(scenario: str, seeds: Sequence[int], run_fn: RunFn) -> List[Dict]:
    return run_ablation(scenario, CYCLEGAN_FLAGS, seeds, run_fn)


def aggregate(rows: Sequence[Dict]) -> Dict[str, Dict]:
    """mean +- std of the normalized score per method, in first-seen order."""
    methods: Dict[str, List[float]] = {}
    for row in rows:
        methods.setdefault(row["method"], []).append(float(row["normalized_score"]))
    return {method: summarize(method, scores).to_dict() for method, scores in methods.items()}


def write_results(rows: Sequence[Dict], csv_path: str, json_path: str) -> None:
    file_manager.save_csv(rows, RESULT_COLUMNS, csv_path)
    file_manager.save_json(aggregate(rows), json_path)


def sweep(kind: str, values: Sequence[int], seeds: Sequence[int], run_fn: Callable[[int, int], float]) -> List[Dict]:
    """
    Normalized score as a function of the inference demo count or the number of proxy tasks.

    ``run_fn(value, seed)`` runs the pipeline with that setting.
    """
    if kind not in SWEEP_KINDS:
        raise ValueError(f"unknown sweep kind {kind!r}; expected one of {', '.join(SWEEP_KINDS)}")
    rows = []
    for value in values:
        for seed in seeds:
            score = run_fn(value, seed)
            rows.append({"kind": kind, "value": value, "seed": seed, "normalized_score": score})
            logger.info(f"Sweep {kind}={value} seed {seed}: normalized score {score:.3f}")
    return rows
