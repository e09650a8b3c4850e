"""Minimum-cost and thresholded assignment over affinity matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite

PAD_COST = 1e6


@dataclass(frozen=True)
class Assignment:
    matched: tuple
    unmatched_rows: frozenset
    unmatched_cols: frozenset
    shape: tuple

    @property
    def matrix(self):
        """Binary assignment matrix H."""
        H = np.zeros(self.shape, dtype=int)
        for i, j in self.matched:
            H[i, j] = 1
        return H

    def total(self, matrix):
        return float(sum(matrix[i][j] for i, j in self.matched))


def _solve(cost):
    """Shortest augmenting path with row/column potentials, O(n^2 m) for n rows <= m columns.

    Rows are inserted in index order and ties between candidate columns are
    resolved toward the lowest column index, so the result is deterministic.
    Returns ``col_of_row``.
    """
    n, m = len(cost), len(cost[0])
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    row_of_col = [0] * (m + 1)  # 1-based; 0 means free
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        row_of_col[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            delta = inf
            j1 = 0
            row = cost[i0 - 1]
            ui0 = u[i0]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[row_of_col[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if row_of_col[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
    col_of_row = [-1] * n
    for j in range(1, m + 1):
        if row_of_col[j]:
            col_of_row[row_of_col[j] - 1] = j - 1
    return col_of_row


def hungarian(cost):
    """Minimum total cost matching of cardinality min(M, N).

    A rectangular matrix behaves as if padded to square with constant
    ``PAD_COST`` rows or columns: constant padding never changes the optimum,
    so the solver runs on the matrix (transposed to have rows <= columns)
    without materializing it.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError(f"cost must be 2-D, got shape {cost.shape}")
    m, n = cost.shape
    if not np.all(np.isfinite(cost)):
        raise NonFinite("cost matrix contains NaN or infinite entries")
    if m == 0 or n == 0:
        return Assignment((), frozenset(range(m)), frozenset(range(n)), (m, n))
    if m <= n:
        col_of_row = _solve(cost.tolist())
        matched = tuple((i, c) for i, c in enumerate(col_of_row))
    else:
        row_of_col = _solve(cost.T.tolist())
        matched = tuple(sorted((r, j) for j, r in enumerate(row_of_col)))
    rows = {i for i, _ in matched}
    cols = {j for _, j in matched}
    return Assignment(
        matched,
        frozenset(set(range(m)) - rows),
        frozenset(set(range(n)) - cols),
        (m, n),
    )


def assign_with_threshold(similarity, delta):
    """One-to-one assignment maximizing total similarity, keeping only pairs above ``delta``."""
    similarity = np.asarray(similarity, dtype=float)
    full = hungarian(1.0 - similarity)
    keep = tuple((i, j) for i, j in full.matched if similarity[i, j] > delta)
    m, n = similarity.shape
    rows = {i for i, _ in keep}
    cols = {j for _, j in keep}
    return Assignment(keep, frozenset(set(range(m)) - rows), frozenset(set(range(n)) - cols), (m, n))


def one_to_many_assign(similarity, delta, cap=None):
    """Pair every row with its best column when that similarity exceeds ``delta``.

    A column may serve several rows. With ``cap`` set, a column keeps only its
    ``cap`` most similar rows (ties toward the lower row index).
    """
    similarity = np.asarray(similarity, dtype=float)
    if similarity.size == 0:
        return []
    best = np.argmax(similarity, axis=1)  # first maximum -> lowest column on ties
    pairs = [(i, int(j)) for i, j in enumerate(best) if similarity[i, j] > delta]
    if cap is not None:
        kept = []
        for j in sorted({c for _, c in pairs}):
            rows = sorted((i for i, c in pairs if c == j), key=lambda i: (-similarity[i, j], i))
            kept.extend((i, j) for i in rows[:cap])
        pairs = sorted(kept)
    return pairs
