"""
Model checkpoint format: one JSON document per network.

Parameters are stored as base64 of little-endian float64 bytes, so a
save/load round trip is bit-exact and reruns produce identical files.
"""

import base64
from typing import Any, Dict, Optional, Sequence

import numpy as np

from errors import DimensionError
from utils import file_manager
from .mlp import Mlp

FORMAT_NAME = "xdio-mlp"
FORMAT_VERSION = 1


def encode_array(array: np.ndarray) -> Dict[str, Any]:
    data = np.ascontiguousarray(array, dtype="<f8")
    return {"shape": list(data.shape), "data": base64.b64encode(data.tobytes()).decode("ascii")}


def decode_array(blob: Dict[str, Any]) -> np.ndarray:
    raw = base64.b64decode(blob["data"])
    array = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    shape = tuple(blob["shape"])
    if int(np.prod(shape)) != array.size:
        raise DimensionError(f"stored array of {array.size} values cannot take shape {shape}")
    return array.reshape(shape)


def mlp_to_dict(net: Mlp, metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "layer_dims": list(net.layer_dims),
        "activations": list(net.activations),
        "spectral_norm": net.spectral_norm,
        "weights": [encode_array(w) for w in net.weights],
        "biases": [encode_array(b) for b in net.biases],
        "sn_vectors": [encode_array(u) for u in net.sn_vectors],
        "metadata": metadata or {},
    }


def mlp_from_dict(doc: Dict[str, Any], expect_dims: Optional[Sequence[int]] = None) -> Mlp:
    if doc.get("format") != FORMAT_NAME:
        raise DimensionError(f"not an {FORMAT_NAME} document")
    layer_dims = [int(d) for d in doc["layer_dims"]]
    if expect_dims is not None and list(expect_dims) != layer_dims:
        raise DimensionError(f"checkpoint has layer dims {layer_dims}, expected {list(expect_dims)}")
    # Mlp.__post_init__ rejects any parameter whose shape disagrees with layer_dims
    return Mlp(
        layer_dims=layer_dims,
        activations=list(doc["activations"]),
        weights=[decode_array(w) for w in doc["weights"]],
        biases=[decode_array(b) for b in doc["biases"]],
        spectral_norm=bool(doc["spectral_norm"]),
        sn_vectors=[decode_array(u) for u in doc.get("sn_vectors", [])],
    )


def save_mlp(net: Mlp, path: str, metadata: Optional[Dict[str, Any]] = None) -> None:
    file_manager.save_json(mlp_to_dict(net, metadata), path)


def load_mlp(path: str, expect_dims: Optional[Sequence[int]] = None) -> Mlp:
    doc = file_manager.load_json(path)
    if doc is None:
        raise FileNotFoundError(f"model checkpoint not found: {path}")
    return mlp_from_dict(doc, expect_dims)


def load_metadata(path: str) -> Dict[str, Any]:
    doc = file_manager.load_json(path)
    if doc is None:
        raise FileNotFoundError(f"model checkpoint not found: {path}")
    return dict(doc.get("metadata", {}))
