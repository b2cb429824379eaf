"""Dense real matrices, multi-channel bundles and their forward passes.

Real matrices and vectors are plain ``float64`` numpy arrays. All reductions
accumulate in a caller-visible, fixed column order so results are
byte-reproducible and restructured evaluation can match dense evaluation
exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


def as_real_matrix(w, name: str = "matrix") -> np.ndarray:
    """Validate and return ``w`` as a finite 2-D float64 array."""
    arr = np.asarray(w, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_real_vector(x, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def matvec(w: np.ndarray, x: np.ndarray, order: Sequence[int] | None = None) -> np.ndarray:
    """Matrix-vector product with a fixed accumulation order.

    Each output component is ``((0 + w[i,c0]*x[c0]) + w[i,c1]*x[c1]) + ...``
    where ``c0, c1, ...`` is ``order`` (ascending column index by default).
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.ndim != 2 or x.ndim != 1 or w.shape[1] != x.shape[0]:
        raise ValueError(f"cannot apply {w.shape} matrix to vector of length {x.shape}")
    y = np.zeros(w.shape[0], dtype=np.float64)
    cols = range(w.shape[1]) if order is None else order
    for j in cols:
        y += w[:, j] * x[j]
    return y


def _relu(v: np.ndarray) -> np.ndarray:
    return np.maximum(v, 0.0)


NONLINEARITIES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda v: v,
    "relu": _relu,
    "tanh": np.tanh,
}


def get_nonlinearity(sigma: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return NONLINEARITIES[sigma]
    except KeyError:
        raise ValueError(f"unknown nonlinearity {sigma!r}; known: {sorted(NONLINEARITIES)}") from None


@dataclass
class ChannelBundle:
    """``k/2`` pairs of ``n x n`` channel matrices ``(w1[g], w2[g])``.

    The edge ``(i, j)`` owns the length-``k`` sequence
    ``w1[0][i,j], ..., w1[k/2-1][i,j], w2[0][i,j], ..., w2[k/2-1][i,j]``.
    """

    w1: list[np.ndarray]
    w2: list[np.ndarray]

    def __post_init__(self):
        if len(self.w1) == 0 or len(self.w1) != len(self.w2):
            raise ValueError("w1 and w2 must hold the same, non-zero number of channels")
        self.w1 = [as_real_matrix(m, "w1 channel") for m in self.w1]
        self.w2 = [as_real_matrix(m, "w2 channel") for m in self.w2]
        n = self.w1[0].shape[0]
        for m in self.w1 + self.w2:
            if m.shape != (n, n):
                raise ValueError(f"channel matrix has shape {m.shape}, expected ({n}, {n})")

    @property
    def n(self) -> int:
        return self.w1[0].shape[0]

    @property
    def k(self) -> int:
        return 2 * len(self.w1)

    @property
    def channels(self) -> list[np.ndarray]:
        return self.w1 + self.w2

    def sequences(self) -> np.ndarray:
        """Array of shape ``(n, n, k)`` holding each edge's parameter sequence."""
        return np.stack(self.channels, axis=-1)

    def norms(self) -> np.ndarray:
        seq = self.sequences()
        return np.sqrt(np.sum(seq * seq, axis=-1))

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "ChannelBundle":
        return ChannelBundle([fn(m) for m in self.w1], [fn(m) for m in self.w2])

    def copy(self) -> "ChannelBundle":
        return self.map(np.copy)


def channel_forward(
    b: ChannelBundle, x: np.ndarray, sigma: str = "identity", order: Sequence[int] | None = None
) -> np.ndarray:
    """``sum_g w2[g] @ sigma(w1[g] @ x)``, channels accumulated in ascending ``g``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (b.n,):
        raise ValueError(f"input has length {x.shape}, bundle expects {b.n}")
    act = get_nonlinearity(sigma)
    y = np.zeros(b.n, dtype=np.float64)
    for w1, w2 in zip(b.w1, b.w2):
        h = act(matvec(w1, x, order))
        y = y + matvec(w2, h, order)
    return y
