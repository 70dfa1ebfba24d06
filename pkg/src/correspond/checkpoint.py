"""
Alignment checkpoint directory: one model file per network plus ``alignment.json``.
"""

import logging
import os
from dataclasses import asdict
from typing import Any, Dict, Optional

from config import AlignHyperparams
from errors import StageOrderError
from numcore import load_mlp, save_mlp
from traj_data import Normalizer
from utils import file_manager
from .networks import DiscriminatorSet, StateMapPair, TaskDiscriminators
from .trainer import AlignmentResult

logger = logging.getLogger(__name__)

ALIGNMENT_MANIFEST = "alignment.json"


def _model_path(directory: str, name: str) -> str:
    return os.path.join(directory, f"{name}.json")


def save_alignment(
    result: AlignmentResult,
    directory: str,
    hp: AlignHyperparams,
    scenario: str,
    expert_norm: Normalizer,
    agent_norm: Normalizer,
    seed: int,
) -> Dict[str, str]:
    """Write every network and the manifest. Returns {name: path} of the model files."""
    file_manager.ensure_directory(directory)
    paths: Dict[str, str] = {}
    for name, net in result.maps.networks().items():
        paths[name] = _model_path(directory, name)
        save_mlp(net, paths[name], {"role": name})
    for task_id, discs in zip(result.discs.task_ids, result.discs.tasks):
        for name, net in discs.networks().items():
            key = f"{name}_{task_id}"
            paths[key] = _model_path(directory, key)
            save_mlp(net, paths[key], {"role": name, "task_id": task_id})
    for task_id, net in result.latent_predictors.items():
        key = f"p_z_{task_id}"
        paths[key] = _model_path(directory, key)
        save_mlp(net, paths[key], {"role": "p_z", "task_id": task_id})

    manifest = {
        "scenario": scenario,
        "seed": seed,
        "hyperparams": asdict(hp),
        "proxy_task_ids": list(result.discs.task_ids),
        "inference_task_ids": sorted(result.latent_predictors),
        "normalizers": {"E": expert_norm.to_dict(), "A": agent_norm.to_dict()},
        "models": {name: os.path.basename(path) for name, path in paths.items()},
    }
    file_manager.save_json(manifest, os.path.join(directory, ALIGNMENT_MANIFEST))
    logger.info(f"Saved alignment checkpoint with {len(paths)} networks to {directory}")
    return paths


def load_alignment(directory: str, with_adversaries: bool = False) -> AlignmentResult:
    manifest: Optional[Dict[str, Any]] = file_manager.load_json(os.path.join(directory, ALIGNMENT_MANIFEST))
    if manifest is None:
        raise StageOrderError("load-alignment", [os.path.join(directory, ALIGNMENT_MANIFEST)])
    maps = StateMapPair(*(load_mlp(_model_path(directory, name)) for name in ("enc_e", "dec_e", "enc_a", "dec_a")))
    discs = DiscriminatorSet(list(manifest["proxy_task_ids"]))
    if with_adversaries:
        for j, task_id in enumerate(discs.task_ids):
            discs.tasks.append(TaskDiscriminators(
                task_index=j,
                d_a=load_mlp(_model_path(directory, f"d_a_{task_id}")),
                d_e=load_mlp(_model_path(directory, f"d_e_{task_id}")),
                q=load_mlp(_model_path(directory, f"q_{task_id}")),
            ))
    predictors = {
        task_id: load_mlp(_model_path(directory, f"p_z_{task_id}")) for task_id in manifest["inference_task_ids"]
    }
    return AlignmentResult(maps, discs, predictors)


def load_alignment_manifest(directory: str) -> Dict[str, Any]:
    manifest = file_manager.load_json(os.path.join(directory, ALIGNMENT_MANIFEST))
    if manifest is None:
        raise StageOrderError("load-alignment", [os.path.join(directory, ALIGNMENT_MANIFEST)])
    return manifest
