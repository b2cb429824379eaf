"""The 18-node reference graph and its expected node table."""
from __future__ import annotations

import numpy as np

# row node -> source nodes with an edge into it (1-based)
IN_EDGES = {
    1: [3], 2: [1], 3: [2], 4: [5], 5: [3, 4], 6: [7],
    7: [6, 13], 8: [16], 9: [], 10: [2, 4, 18], 11: [17], 12: [13],
    13: [12, 14], 14: [15], 15: [14], 16: [8], 17: [5, 11], 18: [10],
}

# (V, S, G, L, I, VNew), ordered by VNew
EXPECTED_TABLE = [
    (1, 1, 1, 1, 0, 1), (2, 1, 1, 1, 0, 2), (3, 1, 1, 1, 0, 3),
    (4, 2, 1, 2, 0, 4), (5, 2, 1, 2, 0, 5), (10, 6, 1, 3, 0, 6),
    (18, 6, 1, 3, 0, 7), (11, 7, 1, 3, 0, 8), (17, 7, 1, 3, 0, 9),
    (14, 9, 2, 1, 0, 10), (15, 9, 2, 1, 0, 11), (12, 8, 2, 2, 0, 12),
    (13, 8, 2, 2, 0, 13), (6, 3, 2, 3, 0, 14), (7, 3, 2, 3, 0, 15),
    (8, 4, 3, 1, 0, 16), (16, 4, 3, 1, 0, 17), (9, 5, 4, 1, 1, 18),
]


def adjacency() -> np.ndarray:
    """Dense 0/1 float matrix of the reference graph."""
    a = np.zeros((18, 18))
    for i, srcs in IN_EDGES.items():
        for j in srcs:
            a[i - 1, j - 1] = 1.0
    return a
