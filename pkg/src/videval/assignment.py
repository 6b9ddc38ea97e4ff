"""Bipartite matching helpers shared by instance and box alignment."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment


def max_weight_matching(weights: np.ndarray, eligible: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-weight one-to-one matching restricted to eligible pairs.

    ``weights`` must be positive wherever ``eligible`` is true. Returns
    ``(row, col)`` pairs sorted by row.
    """
    weights = np.asarray(weights, dtype=float)
    eligible = np.asarray(eligible, dtype=bool)
    if weights.size == 0 or not eligible.any():
        return []
    if np.any(weights[eligible] <= 0):
        raise ValueError("eligible weights must be positive")
    profit = np.where(eligible, weights, 0.0)
    rows, cols = linear_sum_assignment(profit, maximize=True)
    return sorted((int(r), int(c)) for r, c in zip(rows, cols) if eligible[r, c])


def greedy_cover(adjacency: Sequence[Sequence[int]], order: Sequence[int], n_left: int) -> list[bool]:
    """Visit right-side vertices in ``order`` and keep each one that can be
    added to a matching covering every vertex kept so far.

    The kept set is the greedy basis of the transversal matroid, so for every
    prefix of ``order`` the number of kept vertices equals the maximum
    matching size restricted to that prefix. Returns a flag per right vertex.
    """
    match_left = [-1] * n_left
    kept = [False] * len(adjacency)

    def augment(v: int, seen: list[bool]) -> bool:
        for u in adjacency[v]:
            if seen[u]:
                continue
            seen[u] = True
            if match_left[u] == -1 or augment(match_left[u], seen):
                match_left[u] = v
                return True
        return False

    for v in order:
        if augment(v, [False] * n_left):
            kept[v] = True
    return kept
