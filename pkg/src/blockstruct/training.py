"""Local gradient-update simulation and the co-occurrence block structure.

Each training step only touches the submatrix indexed by the states the
sample activates. States activated together are coupled; the transitive
closure of that coupling partitions the state space, and parameters between
different classes are never updated.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .boolmat import BoolMatrix
from .linalg import as_real_matrix, as_real_vector


@dataclass
class ActivationTrace:
    """Activated state sets, one per step, as sorted 0-based index lists."""

    n: int
    steps: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        cleaned = []
        for step in self.steps:
            idx = sorted(set(int(i) for i in step))
            if idx and (idx[0] < 0 or idx[-1] >= self.n):
                raise ValueError(f"activated index out of range 0..{self.n - 1}: {step}")
            cleaned.append(idx)
        self.steps = cleaned


@dataclass
class CoOccurrence:
    n: int
    relation: BoolMatrix


@dataclass
class CouplingPartition:
    n: int
    class_of: np.ndarray  # 1-based class label per node
    classes: list[list[int]]  # 0-based members, ascending

    @property
    def k(self) -> int:
        return len(self.classes)


def local_update_step(w: np.ndarray, x: np.ndarray, g_y: np.ndarray, eta: float) -> np.ndarray:
    """``W - eta * (M AND g_y x^T)`` with the mask ``M = S x S``, ``S = supp(x)``."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    w = as_real_matrix(w, "w")
    x = as_real_vector(x, "x")
    g_y = as_real_vector(g_y, "g_y")
    n = w.shape[0]
    if w.shape != (n, n) or x.shape != (n,) or g_y.shape != (n,):
        raise ValueError("w must be square and x, g_y must match its order")
    out = w.copy()
    active = np.flatnonzero(x)
    if active.size:
        block = np.ix_(active, active)
        out[block] = w[block] - eta * np.outer(g_y[active], x[active])
    return out


def build_co_occurrence(trace: ActivationTrace) -> CoOccurrence:
    dense = np.eye(trace.n, dtype=bool)
    for step in trace.steps:
        if step:
            idx = np.asarray(step)
            dense[np.ix_(idx, idx)] = True
    return CoOccurrence(trace.n, BoolMatrix.from_dense(dense))


def _components(adjacency: np.ndarray, nodes: list[int] | None = None) -> list[list[int]]:
    """Connected components by BFS, scanned from the smallest unvisited node."""
    n = adjacency.shape[0]
    allowed = np.zeros(n, dtype=bool)
    allowed[list(range(n)) if nodes is None else nodes] = True
    seen = np.zeros(n, dtype=bool)
    out = []
    for start in np.flatnonzero(allowed):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        members = []
        while queue:
            v = queue.popleft()
            members.append(int(v))
            for u in np.flatnonzero(adjacency[v] & allowed & ~seen):
                seen[u] = True
                queue.append(u)
        out.append(sorted(members))
    return out


def coupling_partition(o: CoOccurrence) -> CouplingPartition:
    """Connected components of the co-occurrence graph, labelled by minimum member."""
    classes = _components(o.relation.to_dense())
    class_of = np.zeros(o.n, dtype=np.int64)
    for label, members in enumerate(classes, start=1):
        class_of[members] = label
    return CouplingPartition(o.n, class_of, classes)


@dataclass
class InvarianceReport:
    violations: list[tuple[int, int]]

    @property
    def holds(self) -> bool:
        return not self.violations


def verify_block_invariance(w0: np.ndarray, w_final: np.ndarray, part: CouplingPartition) -> InvarianceReport:
    """List cross-class entries ``(i, j)`` (0-based) whose bits changed."""
    w0 = np.asarray(w0, dtype=np.float64)
    w_final = np.asarray(w_final, dtype=np.float64)
    if w0.shape != w_final.shape or w0.shape != (part.n, part.n):
        raise ValueError("matrices and partition disagree on n")
    cross = part.class_of[:, None] != part.class_of[None, :]
    changed = w0.view(np.uint64) != w_final.view(np.uint64)
    rows, cols = np.nonzero(cross & changed)
    return InvarianceReport([(int(i), int(j)) for i, j in zip(rows, cols)])


@dataclass
class MinimalityReport:
    disconnected: list[int]  # 1-based labels of classes that split

    @property
    def holds(self) -> bool:
        return not self.disconnected


def verify_block_minimality(o: CoOccurrence, part: CouplingPartition) -> MinimalityReport:
    """Check each class induces a connected co-occurrence subgraph."""
    dense = o.relation.to_dense()
    bad = [label for label, members in enumerate(part.classes, start=1)
           if len(_components(dense, members)) != 1]
    return MinimalityReport(bad)


@dataclass
class PlantedSystem:
    w0: np.ndarray
    w_final: np.ndarray
    trace: ActivationTrace
    groups: list[list[int]]


def generate_planted_system(
    n: int,
    k_blocks: int,
    steps: int,
    eta: float = 1.0,
    seed: int = 0,
    init_sigma: float = 0.1,
    p_active: float = 0.5,
    bridge_prob: float = 0.0,
) -> PlantedSystem:
    """Simulate local-update training over a hidden partition of the states.

    States are shuffled and split into ``k_blocks`` near-equal groups. Each
    step picks a group, activates each member with probability ``p_active``
    (at least one), draws a Gaussian input and output gradient on that
    support, and applies :func:`local_update_step`. With probability
    ``bridge_prob`` a step instead activates members of two groups at once,
    which couples them.
    """
    if n < 1 or not 1 <= k_blocks <= n:
        raise ValueError(f"need 1 <= k_blocks <= n, got n={n}, k_blocks={k_blocks}")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if not 0.0 < p_active <= 1.0 or not 0.0 <= bridge_prob <= 1.0:
        raise ValueError("p_active must lie in (0, 1] and bridge_prob in [0, 1]")
    if not eta > 0 or not init_sigma > 0:
        raise ValueError("eta and init_sigma must be positive")
    rng = np.random.default_rng(seed)
    w0 = rng.normal(0.0, init_sigma, size=(n, n))
    order = rng.permutation(n)
    groups = [sorted(int(i) for i in chunk) for chunk in np.array_split(order, k_blocks)]

    w = w0.copy()
    trace = ActivationTrace(n)
    for _ in range(steps):
        if k_blocks > 1 and rng.random() < bridge_prob:
            pair = rng.choice(k_blocks, size=2, replace=False)
            pool = np.concatenate([groups[pair[0]], groups[pair[1]]])
        else:
            pool = np.asarray(groups[rng.integers(k_blocks)])
        pick = pool[rng.random(pool.size) < p_active]
        if pick.size == 0:
            pick = pool[[rng.integers(pool.size)]]
        x = np.zeros(n)
        g = np.zeros(n)
        x[pick] = rng.normal(size=pick.size)
        g[pick] = rng.normal(size=pick.size)
        # exact zeros would silently shrink the activated set
        x[pick] = np.where(x[pick] == 0.0, 1.0, x[pick])
        w = local_update_step(w, x, g, eta)
        trace.steps.append(sorted(int(i) for i in pick))
    return PlantedSystem(w0, w, trace, groups)
