"""JSON encoding of results: matrices as row-major nested lists of ``[re, im]`` pairs."""
from __future__ import annotations

import json

import numpy as np


def encode(value):
    """Convert numpy scalars/arrays (real or complex) and containers to JSON-ready data."""
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            pairs = np.stack([value.real, value.imag], axis=-1)
            return pairs.tolist()
        return value.tolist()
    return value


def decode_matrix(data) -> np.ndarray:
    """Inverse of :func:`encode` for a complex matrix."""
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation)."""
    return json.dumps(encode(obj), indent=2, sort_keys=True) + "\n"
