"""Quadrature rules on the reference simplex in barycentric coordinates.

Weights are normalized to sum to one (multiply by the cell volume).
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def degree2_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n + 1 interior points, equal positive weights, exact for degree <= 2."""
    beta = (n + 2 - math.sqrt(n + 2)) / ((n + 1) * (n + 2))
    alpha = 1 - n * beta
    points = np.full((n + 1, n + 1), beta)
    np.fill_diagonal(points, alpha)
    return points, np.full(n + 1, 1.0 / (n + 1))


def _compositions(total: int, parts: int):
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for c in cut:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 1 - prev - 1)
        yield out


@lru_cache(maxsize=None)
def grundmann_moeller(n: int, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Grundmann-Moeller rule of degree 2s + 1 (some weights are negative)."""
    d = 2 * s + 1
    points, weights = [], []
    for i in range(s + 1):
        w = (-1) ** i * 2.0 ** (-2 * s) * (d + n - 2 * i) ** d / (math.factorial(i) * math.factorial(d + n - i))
        for beta in _compositions(s - i, n + 1):
            points.append([(2 * b + 1) / (d + n - 2 * i) for b in beta])
            weights.append(w)
    weights = np.array(weights)
    return np.array(points), weights / weights.sum()


def monomial_integral(n: int, alpha) -> float:
    """Exact volume-normalized integral of prod lambda_j^alpha_j over an n-simplex."""
    alpha = list(alpha)
    num = math.factorial(n) * math.prod(math.factorial(a) for a in alpha)
    return num / math.factorial(n + sum(alpha))
