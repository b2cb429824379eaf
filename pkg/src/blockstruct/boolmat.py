"""Bit-packed Boolean matrices and the Boolean-algebra kernels built on them.

Rows are packed 64 columns per ``uint64`` word, little-endian bit order: column
``j`` of a row lives in word ``j // 64`` at bit ``j % 64``.
"""
from __future__ import annotations

import math

import numpy as np

WORD = 64
_WORD_DTYPE = np.dtype("<u8")


def _n_words(n_cols: int) -> int:
    return max(1, (n_cols + WORD - 1) // WORD)


class BoolMatrix:
    """Boolean matrix with bit-packed rows.

    Most callers only need square matrices; rectangular shapes exist for the
    condensation compression matrix.
    """

    __slots__ = ("n_rows", "n_cols", "words")

    def __init__(self, n_rows: int, n_cols: int | None = None, words: np.ndarray | None = None):
        if n_cols is None:
            n_cols = n_rows
        if n_rows < 0 or n_cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        shape = (self.n_rows, _n_words(self.n_cols))
        if words is None:
            self.words = np.zeros(shape, dtype=_WORD_DTYPE)
        else:
            words = np.ascontiguousarray(words, dtype=_WORD_DTYPE)
            if words.shape != shape:
                raise ValueError(f"packed words have shape {words.shape}, expected {shape}")
            self.words = words

    # construction -----------------------------------------------------

    @classmethod
    def from_dense(cls, dense) -> "BoolMatrix":
        arr = np.asarray(dense)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        n_rows, n_cols = arr.shape
        bits = arr.astype(bool)
        n_words = _n_words(n_cols)
        padded = np.zeros((n_rows, n_words * WORD), dtype=bool)
        padded[:, :n_cols] = bits
        packed = np.packbits(padded, axis=1, bitorder="little")
        words = packed.view(_WORD_DTYPE).reshape(n_rows, n_words)
        return cls(n_rows, n_cols, words.copy())

    @classmethod
    def identity(cls, n: int) -> "BoolMatrix":
        m = cls(n)
        idx = np.arange(n)
        m.words[idx, idx // WORD] = np.left_shift(np.uint64(1), (idx % WORD).astype(np.uint64))
        return m

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int | None = None) -> "BoolMatrix":
        return cls(n_rows, n_cols)

    # access -----------------------------------------------------------

    @property
    def n(self) -> int:
        if self.n_rows != self.n_cols:
            raise ValueError(f"matrix is {self.n_rows}x{self.n_cols}, not square")
        return self.n_rows

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def is_square(self) -> bool:
        return self.n_rows == self.n_cols

    def to_dense(self) -> np.ndarray:
        if self.n_rows == 0:
            return np.zeros((0, self.n_cols), dtype=bool)
        as_bytes = self.words.view(np.uint8).reshape(self.n_rows, -1)
        bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
        return bits[:, : self.n_cols].astype(bool)

    def __getitem__(self, ij: tuple[int, int]) -> bool:
        i, j = ij
        return bool((int(self.words[i, j // WORD]) >> (j % WORD)) & 1)

    def __setitem__(self, ij: tuple[int, int], value: bool) -> None:
        i, j = ij
        bit = np.uint64(1) << np.uint64(j % WORD)
        if value:
            self.words[i, j // WORD] |= bit
        else:
            self.words[i, j // WORD] &= ~bit

    def row_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.to_dense_row(i))

    def to_dense_row(self, i: int) -> np.ndarray:
        bits = np.unpackbits(self.words[i].view(np.uint8), bitorder="little")
        return bits[: self.n_cols].astype(bool)

    def count(self) -> int:
        return int(np.unpackbits(self.words.view(np.uint8)).sum())

    def copy(self) -> "BoolMatrix":
        return BoolMatrix(self.n_rows, self.n_cols, self.words.copy())

    # elementwise algebra ---------------------------------------------

    def _check_same_shape(self, other: "BoolMatrix") -> None:
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch: {self.shape} vs {other.shape}")

    def __and__(self, other: "BoolMatrix") -> "BoolMatrix":
        self._check_same_shape(other)
        return BoolMatrix(self.n_rows, self.n_cols, self.words & other.words)

    def __or__(self, other: "BoolMatrix") -> "BoolMatrix":
        self._check_same_shape(other)
        return BoolMatrix(self.n_rows, self.n_cols, self.words | other.words)

    def __invert__(self) -> "BoolMatrix":
        out = BoolMatrix(self.n_rows, self.n_cols, ~self.words)
        out._clear_padding()
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BoolMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.words, other.words))

    def __le__(self, other: "BoolMatrix") -> bool:
        self._check_same_shape(other)
        return not bool(np.any(self.words & ~other.words))

    __hash__ = None  # mutable

    def __repr__(self) -> str:
        return f"BoolMatrix({self.n_rows}x{self.n_cols}, nnz={self.count()})"

    def _clear_padding(self) -> None:
        tail = self.n_cols % WORD
        if tail and self.n_rows:
            self.words[:, -1] &= np.uint64((1 << tail) - 1)
        if self.n_cols == 0:
            self.words[:] = 0

    @property
    def T(self) -> "BoolMatrix":
        return BoolMatrix.from_dense(self.to_dense().T)

    def diagonal(self) -> np.ndarray:
        return np.array([self[i, i] for i in range(min(self.shape))], dtype=bool)


def boolean_product(a: BoolMatrix, b: BoolMatrix) -> BoolMatrix:
    """Return ``c`` with ``c_ij = OR_k (a_ik AND b_kj)``.

    Row-broadcast formulation: every set bit ``a_ik`` ORs row ``k`` of ``b``
    into row ``i`` of ``c``. Bits of ``a`` are consumed eight at a time through
    a 256-entry table of pre-ORed rows of ``b``, so each table lookup services
    a whole column of ``a`` bytes in one vectorised step.
    """
    if a.n_cols != b.n_rows:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    out = np.zeros((a.n_rows, b.words.shape[1]), dtype=_WORD_DTYPE)
    if a.n_rows == 0 or b.n_rows == 0:
        return BoolMatrix(a.n_rows, b.n_cols, out)
    a_bytes = a.words.view(np.uint8).reshape(a.n_rows, -1)
    n_words = b.words.shape[1]
    table = np.zeros((256, n_words), dtype=_WORD_DTYPE)
    for byte in range((b.n_rows + 7) // 8):
        column = a_bytes[:, byte]
        if not column.any():
            continue
        table[:] = 0
        base = 8 * byte
        for t in range(min(8, b.n_rows - base)):
            lo = 1 << t
            table[lo : 2 * lo] = table[:lo] | b.words[base + t]
        out |= table[column]
    return BoolMatrix(a.n_rows, b.n_cols, out)


def closure_rounds(n: int) -> int:
    """Number of squarings needed to close an order-``n`` matrix."""
    return math.ceil(math.log2(max(n - 1, 1)))


def star_closure(m: BoolMatrix, early_exit: bool = True) -> BoolMatrix:
    """Reflexive-transitive closure by repeated squaring of ``M OR I``.

    Performs ``ceil(log2(n - 1))`` squarings; with ``early_exit`` the loop stops
    at the first fixed point, which cannot change the result.
    """
    n = m.n
    acc = m | BoolMatrix.identity(n)
    for _ in range(closure_rounds(n)):
        nxt = boolean_product(acc, acc)
        if early_exit and nxt == acc:
            break
        acc = nxt
    return acc


def mutual_reachability(mstar: BoolMatrix) -> BoolMatrix:
    """``B = M* AND (M*)^T``, the equivalence relation of mutual reachability."""
    return mstar & mstar.T
