"""Closed-form helpers for stacks of 2x2 symmetric matrices.

All functions accept arrays of shape (..., 2, 2) and vectorize over the
leading axes, avoiding per-block np.linalg calls in the hot paths.
"""

from __future__ import annotations

import numpy as np


def det2(blocks: np.ndarray) -> np.ndarray:
    b = np.asarray(blocks)
    return b[..., 0, 0] * b[..., 1, 1] - b[..., 0, 1] * b[..., 1, 0]


def inv2(blocks: np.ndarray) -> np.ndarray:
    b = np.asarray(blocks, dtype=float)
    d = det2(b)
    out = np.empty_like(b)
    out[..., 0, 0] = b[..., 1, 1]
    out[..., 1, 1] = b[..., 0, 0]
    out[..., 0, 1] = -b[..., 0, 1]
    out[..., 1, 0] = -b[..., 1, 0]
    return out / d[..., None, None]


def matvec2(blocks: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """(..., 2, 2) @ (..., 2) -> (..., 2)."""
    return np.einsum("...ij,...j->...i", blocks, vecs)


def quad2(blocks: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """v' B v for each block/vector pair."""
    return np.einsum("...i,...ij,...j->...", vecs, blocks, vecs)


def sym2(blocks: np.ndarray) -> np.ndarray:
    b = np.asarray(blocks, dtype=float)
    return 0.5 * (b + np.swapaxes(b, -1, -2))


def iso2(values, like_shape=()) -> np.ndarray:
    """Stack of isotropic blocks v * I for scalar array v."""
    v = np.asarray(values, dtype=float)
    out = np.zeros(v.shape + (2, 2))
    out[..., 0, 0] = v
    out[..., 1, 1] = v
    return out
