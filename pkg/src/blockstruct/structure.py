"""Structural permutation of an annealed parameter matrix.

Pipeline: predicate adjacency -> closure -> mutual reachability -> SCC labels
-> condensation graph -> layers -> weak components -> isolation flags -> node
table and permutation. Edge convention: ``m[i, j] = 1`` is an edge from node
``j`` into node ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annealing import AnnealedSystem
from .boolmat import BoolMatrix, boolean_product, mutual_reachability, star_closure
from .linalg import ChannelBundle
from .indexmaps import Permutation, apply_permutation  # noqa: F401  (re-exported)


class CycleError(RuntimeError):
    """The condensation graph unexpectedly contains a cycle."""


@dataclass(frozen=True)
class StructuralPredicate:
    kind: str = "abs-threshold"
    epsilon: float = 0.0

    KINDS = ("abs-threshold", "channel-norm-threshold", "classification-based")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown predicate kind {self.kind!r}")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")


TABLE_HEADER = ("V_TAG", "S_TAG", "G_TAG", "L_TAG", "I_TAG", "V_NewTAG")


@dataclass
class NodeAttributeTable:
    """Per-node tags, stored by original node (0-based array position).

    Tag values are 1-based, as printed in the table.
    """

    s_tag: np.ndarray
    g_tag: np.ndarray
    l_tag: np.ndarray
    i_tag: np.ndarray
    v_new: np.ndarray

    @property
    def n(self) -> int:
        return self.s_tag.shape[0]

    @property
    def v_tag(self) -> np.ndarray:
        return np.arange(1, self.n + 1)

    def rows(self) -> list[tuple[int, ...]]:
        """Table rows ordered by new index."""
        order = np.argsort(self.v_new, kind="stable")
        cols = (self.v_tag, self.s_tag, self.g_tag, self.l_tag, self.i_tag, self.v_new)
        return [tuple(int(c[i]) for c in cols) for i in order]


@dataclass
class CondensationResult:
    k: int
    r_c: BoolMatrix
    m_c: BoolMatrix


@dataclass
class Analysis:
    table: NodeAttributeTable
    condensation: CondensationResult
    permutation: Permutation
    adjacency: BoolMatrix


def p_adjacency(weights, pred: StructuralPredicate = StructuralPredicate()) -> BoolMatrix:
    """Boolean adjacency of the edges satisfying ``pred``."""
    if pred.kind == "classification-based":
        if not isinstance(weights, AnnealedSystem):
            raise ValueError("classification-based predicate needs an AnnealedSystem")
        return BoolMatrix.from_dense(weights.kept)
    if isinstance(weights, AnnealedSystem):
        weights = weights.weights
    if pred.kind == "channel-norm-threshold":
        if not isinstance(weights, ChannelBundle):
            raise ValueError("channel-norm predicate needs a ChannelBundle")
        return BoolMatrix.from_dense(weights.norms() > pred.epsilon)
    if isinstance(weights, ChannelBundle):
        raise ValueError("abs-threshold predicate needs a scalar matrix")
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weights must be a square matrix")
    return BoolMatrix.from_dense(np.abs(w) > pred.epsilon)


def _min_scan(relation: BoolMatrix) -> np.ndarray:
    """Label classes of an equivalence matrix by repeatedly taking the min unlabelled node."""
    n = relation.n_rows
    labels = np.zeros(n, dtype=np.int64)
    dense = relation.to_dense()
    current = 1
    for i in range(n):
        if labels[i]:
            continue
        if not dense[i, i]:
            raise ValueError(f"relation is not reflexive at node {i + 1}")
        members = dense[i] & (labels == 0)
        labels[members] = current
        current += 1
    return labels


def scc_labels(b: BoolMatrix) -> np.ndarray:
    """SCC index per node from a mutual-reachability matrix (1-based labels)."""
    return _min_scan(b)


def compression_matrix(s_tag: np.ndarray) -> BoolMatrix:
    k = int(s_tag.max())
    n = s_tag.shape[0]
    dense = np.zeros((k, n), dtype=bool)
    dense[s_tag - 1, np.arange(n)] = True
    return BoolMatrix.from_dense(dense)


def condensation(m: BoolMatrix, s_tag: np.ndarray) -> CondensationResult:
    """``M_C = (R M R^T) AND NOT I`` with ``R`` the class-indicator rows."""
    s_tag = np.asarray(s_tag, dtype=np.int64)
    r_c = compression_matrix(s_tag)
    k = r_c.n_rows
    m_c = boolean_product(boolean_product(r_c, m), r_c.T) & ~BoolMatrix.identity(k)
    return CondensationResult(k, r_c, m_c)


def layer_peel(m_c: BoolMatrix) -> np.ndarray:
    """Layer index per SCC by repeatedly peeling zero in-degree nodes.

    In-degree is read from rows (``m_c[i, j]``: edge ``j -> i``), restricted to
    the not-yet-processed SCCs by masking.
    """
    k = m_c.n
    layers = np.zeros(k, dtype=np.int64)
    remaining = np.ones(k, dtype=bool)
    mask = BoolMatrix.from_dense(remaining[None, :])
    layer = 1
    while remaining.any():
        # Y(i) = OR_j (M_C AND Mask)(i, j)
        live_in = np.any(m_c.words & mask.words[0], axis=1)
        sources = remaining & ~live_in
        if not sources.any():
            raise CycleError("condensation graph has a cycle among unprocessed SCCs")
        layers[sources] = layer
        remaining &= ~sources
        mask = BoolMatrix.from_dense(remaining[None, :])
        layer += 1
    return layers


def wcc_labels(m_c: BoolMatrix) -> np.ndarray:
    """Weak-component index per SCC via the closure of ``M_C OR M_C^T``."""
    b_c = m_c | m_c.T
    return _min_scan(star_closure(b_c))


def build_table_and_permutation(
    s_tag, g_tag, l_tag, i_tag, isolated_last: bool = False
) -> tuple[NodeAttributeTable, Permutation]:
    """Stable sort by ``(G, I, L, S, V)`` (``(I, G, L, S, V)`` when ``isolated_last``)."""
    s_tag, g_tag, l_tag, i_tag = (np.asarray(a, dtype=np.int64) for a in (s_tag, g_tag, l_tag, i_tag))
    n = s_tag.shape[0]
    v = np.arange(n)
    keys = (g_tag, i_tag, l_tag, s_tag, v)
    if isolated_last:
        keys = (i_tag, g_tag, l_tag, s_tag, v)
    # lexsort treats the last key as primary
    order = np.lexsort(tuple(reversed(keys)))
    v_new = np.empty(n, dtype=np.int64)
    v_new[order] = np.arange(1, n + 1)
    table = NodeAttributeTable(s_tag, g_tag, l_tag, i_tag, v_new)
    return table, Permutation(order)


def analyze(weights, pred: StructuralPredicate = StructuralPredicate(), isolated_last: bool = False) -> Analysis:
    """Run the full structural analysis on a weight matrix, bundle or adjacency."""
    m = weights if isinstance(weights, BoolMatrix) else p_adjacency(weights, pred)
    n = m.n
    s_tag = scc_labels(mutual_reachability(star_closure(m)))
    k = int(s_tag.max())
    if k == 1:
        ones = np.ones(n, dtype=np.int64)
        # a lone node is its own single-node weak component
        isolated = ones if n == 1 else np.zeros(n, dtype=np.int64)
        table, perm = build_table_and_permutation(s_tag, ones, ones, isolated, isolated_last)
        cond = CondensationResult(1, compression_matrix(s_tag), BoolMatrix(1))
        return Analysis(table, cond, perm, m)

    cond = condensation(m, s_tag)
    scc_layer = layer_peel(cond.m_c)
    scc_group = wcc_labels(cond.m_c)
    l_tag = scc_layer[s_tag - 1]
    g_tag = scc_group[s_tag - 1]
    group_sizes = np.bincount(g_tag)
    i_tag = (group_sizes[g_tag] == 1).astype(np.int64)
    table, perm = build_table_and_permutation(s_tag, g_tag, l_tag, i_tag, isolated_last)
    return Analysis(table, cond, perm, m)
