"""Lossless JSON encoding of float64 arrays (hex-float payload)."""

import numpy as np


def encode_array(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {
        "shape": list(arr.shape),
        "hex": [float(v).hex() for v in arr.ravel()],
    }


def decode_array(data: dict) -> np.ndarray:
    shape = tuple(int(s) for s in data["shape"])
    values = np.array([float.fromhex(h) for h in data["hex"]], dtype=np.float64)
    expected = int(np.prod(shape)) if shape else 1
    if values.size != expected:
        raise ValueError(f"array payload has {values.size} values, shape {shape} needs {expected}")
    return values.reshape(shape)
