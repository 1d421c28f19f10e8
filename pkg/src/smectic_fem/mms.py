"""Manufactured solutions, the coefficient tensor, forcing and boundary data."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import comb
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

Partial = Callable[[np.ndarray, int, int], np.ndarray]


@dataclass(frozen=True)
class TensorField:
    """Symmetric 2x2 coefficient field with the derivatives the forcing needs.

    ``div(x)[..., i] = sum_j d_j T_ij`` and ``divdiv(x) = sum_ij d_i d_j T_ij``.
    """

    value: Callable[[np.ndarray], np.ndarray]
    div: Callable[[np.ndarray], np.ndarray]
    divdiv: Callable[[np.ndarray], np.ndarray]
    mu1: float
    mu2: float


def director_tensor(nu) -> TensorField:
    """Constant ``T = nu (x) nu`` for a unit director ``nu``."""
    nu = np.asarray(nu, dtype=float)
    T = np.outer(nu, nu)

    def value(x):
        return np.broadcast_to(T, np.shape(x)[:-1] + (2, 2))

    def div(x):
        return np.zeros(np.shape(x)[:-1] + (2,))

    def divdiv(x):
        return np.zeros(np.shape(x)[:-1])

    return TensorField(value, div, divdiv, mu1=float(np.sum(T * T)), mu2=0.0)


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact solution ``u`` given through its mixed partials ``d^i_x d^j_y u``."""

    name: str
    partial: Partial = field(repr=False)
    tensor: TensorField = field(repr=False)
    B: float
    q: float
    m: float
    params: dict = field(default_factory=dict)

    def derivative(self, x: np.ndarray, order: int) -> np.ndarray:
        """Full symmetric derivative tensor of the given order at points ``x``."""
        x = np.asarray(x, dtype=float)
        if order == 0:
            return self.partial(x, 0, 0)
        out = np.empty(x.shape[:-1] + (2,) * order)
        cache = {}
        for idx in product((0, 1), repeat=order):
            j = sum(idx)
            if j not in cache:
                cache[j] = self.partial(x, order - j, j)
            out[(...,) + idx] = cache[j]
        return out

    def value(self, x):
        return self.derivative(x, 0)

    def gradient(self, x):
        return self.derivative(x, 1)

    def hessian(self, x):
        return self.derivative(x, 2)

    def with_params(self, **kw) -> "ManufacturedSolution":
        from dataclasses import replace

        return replace(self, **kw)


def _check_director(nu) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (2,) or abs(np.hypot(*nu) - 1.0) > 1e-14:
        raise ValueError(f"director must be a unit 2-vector, got {nu.tolist()}")
    return nu


def parse_director(text: str) -> np.ndarray:
    """Parse ``"3/5,4/5"`` into a unit vector (rationals, checked for unit length)."""
    parts = [Fraction(p.strip()) for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"director needs two components, got {text!r}")
    if parts[0] ** 2 + parts[1] ** 2 != 1:
        raise ValueError(f"director {text!r} is not a unit vector")
    return _check_director([float(p) for p in parts])


def _sin_derivative(theta: np.ndarray, r: int) -> np.ndarray:
    r %= 4
    return (np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t))[r](theta)


def plane_wave(q: float, nu=(0.6, 0.8), B: float = 1.0, m: float = 10.0) -> ManufacturedSolution:
    """``u = sin(q nu . x)`` with ``T = nu (x) nu``."""
    nu = _check_director(nu)
    q = float(q)

    def partial(x, i, j):
        theta = q * (x[..., 0] * nu[0] + x[..., 1] * nu[1])
        return q ** (i + j) * nu[0] ** i * nu[1] ** j * _sin_derivative(theta, i + j)

    return ManufacturedSolution("planewave", partial, director_tensor(nu), float(B), q, float(m),
                                {"nu": nu.tolist()})


def bump_polynomial(q: float = 40.0, nu=(0.6, 0.8), B: float = 1.0, m: float = 10.0) -> ManufacturedSolution:
    """``u = 100 sin(2 pi x + 3 pi y) (x y (1-x) (1-y))^3``; ``q`` enters only the operator."""
    nu = _check_director(nu)
    a, b = 2 * np.pi, 3 * np.pi
    g = P.polypow([0.0, 1.0, -1.0], 3)  # (t (1 - t))^3
    gder = [g]
    for _ in range(4):
        gder.append(P.polyder(gder[-1]))

    def gd(t, r):
        return P.polyval(t, gder[r]) if r < len(gder) else P.polyval(t, P.polyder(g, r))

    def partial(x, i, j):
        X, Y = x[..., 0], x[..., 1]
        theta = a * X + b * Y
        out = np.zeros(np.shape(X))
        for i1 in range(i + 1):
            for j1 in range(j + 1):
                s = a**i1 * b**j1 * _sin_derivative(theta, i1 + j1)
                out = out + comb(i, i1) * comb(j, j1) * s * gd(X, i - i1) * gd(Y, j - j1)
        return 100.0 * out

    return ManufacturedSolution("bump", partial, director_tensor(nu), float(B), float(q), float(m),
                                {"nu": nu.tolist()})


def zero_solution(q: float = 40.0, nu=(0.6, 0.8), B: float = 1.0, m: float = 10.0) -> ManufacturedSolution:
    nu = _check_director(nu)
    return ManufacturedSolution("zero", lambda x, i, j: np.zeros(np.shape(x)[:-1]),
                                director_tensor(nu), float(B), float(q), float(m), {"nu": nu.tolist()})


def polynomial_solution(coeffs: dict[tuple[int, int], float], q: float = 10.0, nu=(0.6, 0.8),
                        B: float = 1.0, m: float = 10.0) -> ManufacturedSolution:
    """``u = sum c_ab x^a y^b``; reproduced exactly by spaces containing its degree."""
    nu = _check_director(nu)
    items = [((int(a), int(b)), float(c)) for (a, b), c in coeffs.items()]

    def partial(x, i, j):
        out = np.zeros(np.shape(x)[:-1])
        for (a, b), c in items:
            if a < i or b < j:
                continue
            fa = np.prod(np.arange(a - i + 1, a + 1)) if i else 1
            fb = np.prod(np.arange(b - j + 1, b + 1)) if j else 1
            out = out + c * fa * fb * x[..., 0] ** (a - i) * x[..., 1] ** (b - j)
        return out

    return ManufacturedSolution("polynomial", partial, director_tensor(nu), float(B), float(q),
                                float(m), {"nu": nu.tolist(), "coeffs": {f"{a},{b}": c for (a, b), c in items}})


# ---------------------------------------------------------------------------
# Derived quantities of the strong form


def hessian_flux(ms: ManufacturedSolution, x: np.ndarray) -> np.ndarray:
    """``M = grad grad u + q^2 T u``, shape ``(..., 2, 2)``."""
    return ms.hessian(x) + ms.q**2 * ms.tensor.value(x) * ms.value(x)[..., None, None]


def div_hessian_flux(ms: ManufacturedSolution, x: np.ndarray) -> np.ndarray:
    """``div M`` with ``(div M)_i = d_i (lap u) + q^2 (div(T)_i u + (T grad u)_i)``."""
    third = ms.derivative(x, 3)
    grad_lap = np.einsum("...ijj->...i", third)
    T = ms.tensor.value(x)
    dT = ms.tensor.div(x)
    u = ms.value(x)[..., None]
    return grad_lap + ms.q**2 * (dT * u + np.einsum("...ij,...j->...i", T, ms.gradient(x)))


def divdiv_hessian_flux(ms: ManufacturedSolution, x: np.ndarray) -> np.ndarray:
    """``div div M = lap^2 u + q^2 div div (T u)``."""
    x = np.asarray(x, dtype=float)
    bilap = np.einsum("...iijj->...", ms.derivative(x, 4))
    TH = np.einsum("...ij,...ij->...", ms.tensor.value(x), ms.hessian(x))
    divdiv_Tu = (ms.tensor.divdiv(x) * ms.value(x)
                 + 2 * np.einsum("...i,...i->...", ms.tensor.div(x), ms.gradient(x)) + TH)
    return bilap + ms.q**2 * divdiv_Tu


def forcing(ms: ManufacturedSolution, x: np.ndarray) -> np.ndarray:
    """Right-hand side of the smectic density equation for the exact solution."""
    x = np.asarray(x, dtype=float)
    B, q, m = ms.B, ms.q, ms.m
    u = ms.value(x)
    T = ms.tensor.value(x)
    TH = np.einsum("...ij,...ij->...", T, ms.hessian(x))
    TT = np.einsum("...ij,...ij->...", T, T)
    return B * divdiv_hessian_flux(ms, x) + B * q**2 * TH + (B * q**4 * TT + m) * u


@dataclass(frozen=True)
class BoundaryData:
    """Point evaluators of boundary data; normals are outward unit normals.

    ``g0 = u`` on Gamma_0, ``g1 = grad u`` on Gamma_1, ``G2 = M n`` on Gamma_2 and
    ``G3 = (div M) . n`` on Gamma_3, with ``M = grad grad u + q^2 T u``.
    ``flux`` evaluates ``M`` itself anywhere on the boundary.
    """

    g0: Callable[[np.ndarray], np.ndarray]
    g1: Callable[[np.ndarray], np.ndarray]
    G2: Callable[[np.ndarray, np.ndarray], np.ndarray]
    G3: Callable[[np.ndarray, np.ndarray], np.ndarray]
    flux: Callable[[np.ndarray], np.ndarray]
    partition: object = None


def boundary_data(ms: ManufacturedSolution, partition=None) -> BoundaryData:
    return BoundaryData(
        g0=ms.value,
        g1=ms.gradient,
        G2=lambda x, n: np.einsum("...ij,...j->...i", hessian_flux(ms, x), n),
        G3=lambda x, n: np.einsum("...i,...i->...", div_hessian_flux(ms, x), n),
        flux=lambda x: hessian_flux(ms, x),
        partition=partition,
    )


SOLUTIONS = {"planewave": plane_wave, "bump": bump_polynomial}


def make_solution(name: str, q: float, nu, B: float, m: float) -> ManufacturedSolution:
    try:
        factory = SOLUTIONS[name]
    except KeyError:
        raise ValueError(f"unknown solution {name!r}; choose from {sorted(SOLUTIONS)}") from None
    return factory(q=q, nu=nu, B=B, m=m)

