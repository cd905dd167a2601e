"""Dense float64 containers and the exact matrix-vector product.

Matrices and vectors are plain numpy arrays. ``as_matrix``/``as_vector``
validate shape and finiteness and hand back read-only float64 copies, so a
weight array can be shared between worker threads without being mutated.
"""

import numpy as np
from numba import njit


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def as_matrix(data, rows: int = None, cols: int = None) -> np.ndarray:
    """Validate and freeze a 2-D float64 array.

    Args:
        data: Nested sequence or array. A flat sequence is accepted when
            ``rows`` and ``cols`` are given (row-major order).
        rows: Expected row count, optional.
        cols: Expected column count, optional.

    Returns:
        Read-only float64 array of shape (rows, cols).
    """
    arr = np.array(data, dtype=np.float64)
    if arr.ndim == 1 and rows is not None and cols is not None:
        if arr.size != rows * cols:
            raise ValueError(
                f"matrix data length {arr.size} does not equal rows*cols = {rows * cols}"
            )
        arr = arr.reshape(rows, cols)
    if arr.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise ValueError(f"expected {cols} cols, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return _frozen(arr)


def as_vector(data, length: int = None) -> np.ndarray:
    """Validate and freeze a 1-D float64 array."""
    arr = np.array(data, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"vector must be 1-D, got shape {arr.shape}")
    if length is not None and arr.size != length:
        raise ValueError(f"expected vector of length {length}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector entries must be finite")
    return _frozen(arr)


@njit(cache=True, nogil=True)
def _matvec_kernel(w, x):
    rows, cols = w.shape
    out = np.zeros(rows)
    for i in range(rows):
        acc = 0.0
        for j in range(cols):
            acc += w[i, j] * x[j]
        out[i] = acc
    return out


def matvec(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact dense product ``W @ x`` with a fixed left-to-right accumulation.

    Raises:
        ValueError: if ``W.cols != len(x)``.
    """
    if w.ndim != 2 or x.ndim != 1:
        raise ValueError(f"matvec expects 2-D W and 1-D x, got {w.shape} and {x.shape}")
    if w.shape[1] != x.shape[0]:
        raise ValueError(
            f"dimension mismatch: W has {w.shape[1]} cols but x has length {x.shape[0]}"
        )
    return _matvec_kernel(
        np.ascontiguousarray(w, dtype=np.float64),
        np.ascontiguousarray(x, dtype=np.float64),
    )


def identity(n: int) -> np.ndarray:
    return as_matrix(np.eye(n))


def zeros(rows: int, cols: int) -> np.ndarray:
    return as_matrix(np.zeros((rows, cols)))
