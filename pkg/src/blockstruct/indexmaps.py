"""Permutations, projections and embeddings as index tables.

None of these ever become dense matrices; applying one is a gather or a
scatter. Internally indices are 0-based; files and tables use 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boolmat import BoolMatrix


def _index_array(values, n: int | None, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64).ravel()
    if n is not None and arr.size and (arr.min() < 0 or arr.max() >= n):
        raise ValueError(f"{name} index out of range 0..{n - 1}")
    if np.unique(arr).size != arr.size:
        raise ValueError(f"{name} indices must be distinct")
    return arr


class Permutation:
    """Bijection in value-table form: new position ``o`` takes old index ``src[o]``."""

    __slots__ = ("src",)

    def __init__(self, target_to_source):
        src = _index_array(target_to_source, None, "permutation")
        if src.size and (src.min() != 0 or src.max() != src.size - 1):
            raise ValueError("permutation must be a bijection on 0..n-1")
        self.src = src

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @classmethod
    def from_one_based(cls, values) -> "Permutation":
        return cls(np.asarray(values, dtype=np.int64) - 1)

    @property
    def n(self) -> int:
        return self.src.size

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.src)
        inv[self.src] = np.arange(self.n)
        return Permutation(inv)

    def compose(self, other: "Permutation") -> "Permutation":
        """Permutation equal to applying ``other`` first, then ``self``."""
        if other.n != self.n:
            raise ValueError("size mismatch")
        return Permutation(other.src[self.src])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Permutation) and np.array_equal(self.src, other.src)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Permutation({(self.src + 1).tolist()})"

    def apply_vector(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[0] != self.n:
            raise ValueError(f"vector length {x.shape[0]} does not match permutation size {self.n}")
        return x[self.src]

    def apply_matrix(self, m):
        """``P M P^T``: ``out[i, j] = m[src[i], src[j]]``."""
        if isinstance(m, BoolMatrix):
            return BoolMatrix.from_dense(self.apply_matrix(m.to_dense()))
        m = np.asarray(m)
        if m.shape != (self.n, self.n):
            raise ValueError(f"matrix shape {m.shape} does not match permutation size {self.n}")
        return m[np.ix_(self.src, self.src)]


def apply_permutation(p: Permutation, m):
    return p.apply_matrix(m)


@dataclass
class Projection:
    """Selects ``select[0..k-1]`` out of an ambient vector of length ``n``."""

    n: int
    select: np.ndarray

    def __post_init__(self):
        self.select = _index_array(self.select, self.n, "projection")

    @property
    def k(self) -> int:
        return self.select.size

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.select]

    def columns(self, a: np.ndarray) -> np.ndarray:
        """``A pi^T``: extract the selected columns."""
        return np.asarray(a)[:, self.select]


@dataclass
class Embedding:
    """Places a length-``k`` vector at positions ``place`` of an ambient vector."""

    n: int
    place: np.ndarray

    def __post_init__(self):
        self.place = _index_array(self.place, self.n, "embedding")

    @property
    def k(self) -> int:
        return self.place.size

    def embed(self, y: np.ndarray, out: np.ndarray) -> np.ndarray:
        out[self.place] = y
        return out

    def rows(self, a: np.ndarray) -> np.ndarray:
        """``gamma^-1 A``: pull back the embedded rows."""
        return np.asarray(a)[self.place]
