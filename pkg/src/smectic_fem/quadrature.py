"""Quadrature rules on the reference triangle {(0,0), (1,0), (0,1)} and on [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 20


@dataclass(frozen=True)
class QuadratureRule:
    degree: int
    points: np.ndarray  # (P, 2) cartesian reference coordinates
    weights: np.ndarray  # (P,), summing to 1/2

    def __len__(self) -> int:
        return len(self.weights)


def _from_orbits(orbits: list[tuple[tuple[float, float, float], float]]):
    pts, wts = [], []
    for (l0, l1, l2), w in orbits:
        perms = {(l0, l1, l2), (l1, l2, l0), (l2, l0, l1), (l0, l2, l1), (l2, l1, l0), (l1, l0, l2)}
        for b in sorted(perms):
            pts.append((b[1], b[2]))
            wts.append(0.5 * w)
    return np.array(pts), np.array(wts)


def _symmetric_rules() -> dict[int, tuple[np.ndarray, np.ndarray]]:
    r15 = np.sqrt(15.0)
    a1, b1 = (6 - r15) / 21, (9 + 2 * r15) / 21
    a2, b2 = (6 + r15) / 21, (9 - 2 * r15) / 21
    return {
        1: _from_orbits([((1 / 3, 1 / 3, 1 / 3), 1.0)]),
        2: _from_orbits([((2 / 3, 1 / 6, 1 / 6), 1 / 3)]),
        5: _from_orbits([
            ((1 / 3, 1 / 3, 1 / 3), 9 / 40),
            ((b1, a1, a1), (155 - r15) / 1200),
            ((b2, a2, a2), (155 + r15) / 1200),
        ]),
    }


def _collapsed(degree: int) -> tuple[np.ndarray, np.ndarray]:
    # Duffy collapse: x = s (1 - t), y = t, Jacobian (1 - t).
    m = (degree + 2) // 2
    s, ws = roots_legendre(m)
    t, wt = roots_jacobi(m, 1.0, 0.0)
    s, ws = 0.5 * (s + 1), 0.5 * ws
    t, wt = 0.5 * (t + 1), 0.25 * wt
    S, Tt = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    pts = np.column_stack([(S * (1 - Tt)).ravel(), Tt.ravel()])
    return pts, W.ravel()


@lru_cache(maxsize=None)
def triangle_quadrature(degree: int) -> QuadratureRule:
    """Smallest implemented rule exact for polynomials of total degree ``degree``."""
    degree = int(degree)
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"triangle quadrature supports degrees 0..{MAX_DEGREE}, got {degree}")
    degree = max(degree, 1)
    candidates = [_collapsed(degree)]
    for d, rule in _symmetric_rules().items():
        if d >= degree:
            candidates.append(rule)
    pts, wts = min(candidates, key=lambda r: len(r[1]))
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(degree=degree, points=pts, weights=wts)


@lru_cache(maxsize=None)
def interval_quadrature(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0, 1], exact to ``degree``."""
    m = max(1, (int(degree) + 2) // 2)
    x, w = roots_legendre(m)
    return 0.5 * (x + 1), 0.5 * w


def monomial_integral(a: int, b: int) -> float:
    """Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!."""
    from math import factorial

    return factorial(a) * factorial(b) / factorial(a + b + 2)
