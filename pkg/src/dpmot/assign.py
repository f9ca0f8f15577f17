"""Minimum-cost linear assignment on rectangular matrices.

The solver is the shortest-augmenting-path form of Kuhn-Munkres with dual
potentials, O(n^2 m) for ``n <= m``; wide matrices are handled natively and
tall ones by transposition, so no padding is needed. Rows are inserted in
index order and the first column attaining a minimum is taken, which makes
the result a deterministic function of the input bytes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import kernels
from .assoc import SENTINEL


@dataclass
class Assignment:
    matches: List[Tuple[int, int, float]] = field(default_factory=list)
    unmatched_tracks: List[int] = field(default_factory=list)
    unmatched_dets: List[int] = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        total = 0.0
        for _, _, c in self.matches:
            total += c
        return total


def linear_assignment(cost) -> np.ndarray:
    """Optimal ``(row, col)`` pairs covering ``min(n_rows, n_cols)`` entries, sorted by row."""
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    if n == 0 or m == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if n <= m:
        cols = kernels.hungarian(np.ascontiguousarray(cost))
        rows = np.arange(n)
    else:
        rows_t = kernels.hungarian(np.ascontiguousarray(cost.T))
        order = np.argsort(rows_t)
        rows = rows_t[order]
        cols = np.arange(m)[order]
    return np.stack([rows, cols], axis=1).astype(np.int64)


def solve(cost, sentinel: float = SENTINEL) -> Assignment:
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-d matrix")
    n, m = cost.shape
    pairs = linear_assignment(cost)
    out = Assignment()
    used_r = np.zeros(n, dtype=bool)
    used_c = np.zeros(m, dtype=bool)
    for r, c in pairs:
        value = float(cost[r, c])
        if value >= sentinel:
            continue
        out.matches.append((int(r), int(c), value))
        used_r[r] = True
        used_c[c] = True
    out.unmatched_tracks = [int(i) for i in np.nonzero(~used_r)[0]]
    out.unmatched_dets = [int(j) for j in np.nonzero(~used_c)[0]]
    return out
