"""Error measures against a manufactured solution, interpolants, and convergence slopes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import AssembledSystem, cell_quadrature, edge_quadrature, _chunks
from .elements import argyris_interpolate, physical_basis
from .mms import ManufacturedSolution, div_hessian_flux, divdiv_hessian_flux
from .quadrature import MAX_DEGREE

# Columns reported per method family, in CSV order.
NORMS = {
    "argyris": ("l2", "h2q", "triple"),
    "c0ip": ("l2", "h2q", "triple"),
    "mixed": ("l2", "product", "v_h1", "alpha_l2", "alpha_div"),
}

NORM_LABELS = {
    "l2": "||u - u_h||_0",
    "h2q": "||u - u_h||_{2,q}",
    "triple": "|||u - u_h|||",
    "product": "||(u - u_h, v - v_h)||_{0,q,1}",
    "v_h1": "q^-2 ||v - v_h||_1",
    "alpha_l2": "q^-2 ||alpha - alpha_h||_0",
    "alpha_div": "q^-2 ||div(alpha - alpha_h)||_0",
}


def method_family(method: str) -> str:
    return method.rstrip("0123456789")


def error_quad_degree(trial_degree: int) -> int:
    return min(MAX_DEGREE, max(14, 2 * trial_degree + 4))


@dataclass
class ErrorReport:
    method: str
    k: int | None
    n: int
    errors: dict[str, float]
    dofs: int
    seconds: float = 0.0
    residual: float | None = None
    status: str = "ok"
    parts: dict[str, float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.status == "ok":
            for name, val in self.errors.items():
                if not (math.isfinite(val) and val >= 0):
                    raise ValueError(f"error {name} = {val} is not finite and non-negative")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_dict(self) -> dict:
        return {"method": self.method, "k": self.k, "n": self.n, "h": self.h, "dofs": self.dofs,
                "errors": dict(self.errors), "residual": self.residual, "seconds": self.seconds,
                "status": self.status}


# ---------------------------------------------------------------------------
# Evaluating discrete fields


def _coeffs(system: AssembledSystem, x: np.ndarray, name: str) -> np.ndarray:
    lo, hi = system.offsets[name]
    return np.asarray(x, dtype=float)[lo:hi]


def _scalar_field(system, x, name, cells, ref_pts, order):
    """Values and derivatives ``[(C,P), (C,P,2), ...]`` of a scalar field."""
    dm = system.dof_maps[name]
    M = system.extras.get("transformation")
    M = None if M is None or name != "u" else M[cells]
    tab = physical_basis(dm.element, system.mesh, cells, ref_pts, order, M)
    c = _coeffs(system, x, name)[dm.cell_dofs[cells]]
    return [np.einsum("cpn...,cn->cp...", t, c, optimize=True) for t in tab]


def _vector_cg_field(system, x, cells, ref_pts):
    """Values ``(C,P,2)`` and gradients ``(C,P,2,2)`` (``[..., d, j] = d_j v_d``) of ``v``."""
    dm = system.dof_maps["v"]
    val, grad = physical_basis(dm.element, system.mesh, cells, ref_pts, 1)
    c = _coeffs(system, x, "v").reshape(2, dm.n_dofs)[:, dm.cell_dofs[cells]]
    return (np.einsum("cpn,dcn->cpd", val, c), np.einsum("cpnj,dcn->cpdj", grad, c))


def _rt_field(system, x, cells, ref_pts):
    dm = system.dof_maps["alpha"]
    val, div = physical_basis(dm.element, system.mesh, cells, ref_pts, 1)
    c = _coeffs(system, x, "alpha")[dm.cell_dofs[cells]]
    return np.einsum("cpnd,cn->cpd", val, c), np.einsum("cpn,cn->cp", div, c)


def _flux(H, u, T, q):
    return H + q**2 * T * u[..., None, None]


# ---------------------------------------------------------------------------
# Per-method error integrals


def _primal_volume(system, x, ms, degree):
    l2 = grad = hess = 0.0
    for cells in _chunks(system.mesh.n_cells):
        ref_pts, X, W = cell_quadrature(system.mesh, cells, degree)
        u, g, H = _scalar_field(system, x, "u", cells, ref_pts, 2)
        l2 += np.sum(W * (ms.value(X) - u) ** 2)
        grad += np.sum(W[..., None] * (ms.gradient(X) - g) ** 2)
        hess += np.sum(W[..., None, None] * (ms.hessian(X) - H) ** 2)
    return l2, grad, hess


def _conforming_boundary(system, x, ms, degree):
    mesh, part, q = system.mesh, system.partition, ms.q
    out = {"g0_value": 0.0, "g0_flux": 0.0, "g1_grad": 0.0, "g1_flux": 0.0}
    e0 = part.gamma(0)
    if e0.size:
        eq = edge_quadrature(mesh, e0, degree)
        cells, ref = eq.reference_points(mesh)
        u, g, H, D3 = _scalar_field(system, x, "u", cells, ref, 3)
        T = ms.tensor.value(eq.X)
        divM_h = np.einsum("fpijj->fpi", D3) + q**2 * (ms.tensor.div(eq.X) * u[..., None]
                                                      + np.einsum("fpab,fpb->fpa", T, g))
        err = div_hessian_flux(ms, eq.X) - divM_h
        out["g0_value"] = np.sum(eq.W * (ms.value(eq.X) - u) ** 2)
        out["g0_flux"] = np.sum(eq.W * np.einsum("fpa,fa->fp", err, eq.normals) ** 2)
    e1 = part.gamma(1)
    if e1.size:
        eq = edge_quadrature(mesh, e1, degree)
        cells, ref = eq.reference_points(mesh)
        u, g, H = _scalar_field(system, x, "u", cells, ref, 2)
        T = ms.tensor.value(eq.X)
        eM = _flux(ms.hessian(eq.X), ms.value(eq.X), T, q) - _flux(H, u, T, q)
        out["g1_grad"] = np.sum(eq.W[..., None] * (ms.gradient(eq.X) - g) ** 2)
        out["g1_flux"] = np.sum(eq.W[..., None] * np.einsum("fpab,fb->fpa", eM, eq.normals) ** 2)
    return out


def _c0ip_facets(system, x, ms, degree):
    """Sums of ``{{n M(e) n}}^2`` and ``[[d_n e]]^2`` over interior and Gamma_1 edges."""
    mesh, q = system.mesh, ms.q
    avg2 = jump2 = 0.0
    for edges, interior in ((mesh.interior_edges, True), (system.partition.gamma(1), False)):
        if edges.size == 0:
            continue
        eq = edge_quadrature(mesh, edges, degree)
        n = eq.normals
        T = ms.tensor.value(eq.X)
        exact_nMn = np.einsum("fa,fpab,fb->fp", n, _flux(ms.hessian(eq.X), ms.value(eq.X), T, q), n)
        exact_dn = np.einsum("fpa,fa->fp", ms.gradient(eq.X), n)
        sides = (0, 1) if interior else (0,)
        nMn, dn = [], []
        for side in sides:
            cells, ref = eq.reference_points(mesh, side)
            u, g, H = _scalar_field(system, x, "u", cells, ref, 2)
            nMn.append(np.einsum("fa,fpab,fb->fp", n, _flux(H, u, T, q), n))
            dn.append(np.einsum("fpa,fa->fp", g, n))
        if interior:
            avg = exact_nMn - 0.5 * (nMn[0] + nMn[1])
            jump = dn[1] - dn[0]  # the exact normal derivative is continuous
        else:
            avg = exact_nMn - nMn[0]
            jump = exact_dn - dn[0]
        avg2 += np.sum(eq.W * avg**2)
        jump2 += np.sum(eq.W * jump**2)
    return avg2, jump2


def _mixed_volume(system, x, ms, degree):
    B = ms.B
    acc = dict.fromkeys(("u", "v", "grad_v", "alpha", "div_alpha"), 0.0)
    for cells in _chunks(system.mesh.n_cells):
        ref_pts, X, W = cell_quadrature(system.mesh, cells, degree)
        (u,) = _scalar_field(system, x, "u", cells, ref_pts, 0)
        v, gv = _vector_cg_field(system, x, cells, ref_pts)
        a, da = _rt_field(system, x, cells, ref_pts)
        acc["u"] += np.sum(W * (ms.value(X) - u) ** 2)
        acc["v"] += np.sum(W[..., None] * (ms.gradient(X) - v) ** 2)
        acc["grad_v"] += np.sum(W[..., None, None] * (ms.hessian(X) - gv) ** 2)
        acc["alpha"] += np.sum(W[..., None] * (B * div_hessian_flux(ms, X) - a) ** 2)
        acc["div_alpha"] += np.sum(W * (B * divdiv_hessian_flux(ms, X) - da) ** 2)
    return acc


def compute_errors(
    system: AssembledSystem,
    x: np.ndarray,
    ms: ManufacturedSolution,
    *,
    method: str | None = None,
    quad_degree: int | None = None,
    seconds: float = 0.0,
    residual: float | None = None,
) -> ErrorReport:
    """Errors of the discrete solution ``x`` in every norm relevant to its method.

    ``ms`` should carry the same ``B, q, m`` as the assembled problem.
    """
    if method is not None and method_family(method) != method_family(system.method):
        raise ValueError(f"report requested for {method!r} but the system is {system.method!r}")
    if len(x) != system.n_dofs:
        raise ValueError(f"solution has {len(x)} entries, system has {system.n_dofs}")
    family = method_family(system.method)
    params, q, h = system.params, system.params.q, system.mesh.h
    ms = ms.with_params(B=float(params.B), q=float(q), m=float(params.m))
    k = None if family == "argyris" else params.k
    trial = 5 if family == "argyris" else (params.k + 2 if family == "mixed" else params.k)
    degree = quad_degree or error_quad_degree(trial)

    if family in ("argyris", "c0ip"):
        l2, grad, hess = _primal_volume(system, x, ms, degree)
        h2q = q**-4 * (hess + grad) + l2
        parts = {"l2": l2, "grad": grad, "hess": hess}
        if family == "argyris":
            bnd = _conforming_boundary(system, x, ms, degree)
            extra = (bnd["g0_value"] / (q * h**3) + h**3 / q**7 * bnd["g0_flux"]
                     + bnd["g1_grad"] / (q**3 * h) + h / q**5 * bnd["g1_flux"])
            parts.update(bnd)
        else:
            avg2, jump2 = _c0ip_facets(system, x, ms, degree)
            extra = h / q**5 * avg2 + jump2 / (q**3 * h)
            parts.update(avg=avg2, jump=jump2)
        errors = {"l2": math.sqrt(l2), "h2q": math.sqrt(h2q), "triple": math.sqrt(h2q + extra)}
    else:
        acc = _mixed_volume(system, x, ms, degree)
        v_h1_sq = acc["v"] + acc["grad_v"]
        errors = {
            "l2": math.sqrt(acc["u"]),
            "product": math.sqrt(acc["u"] + q**-4 * v_h1_sq),
            "v_h1": q**-2 * math.sqrt(v_h1_sq),
            "alpha_l2": q**-2 * math.sqrt(acc["alpha"]),
            "alpha_div": q**-2 * math.sqrt(acc["div_alpha"]),
        }
        parts = acc
    return ErrorReport(system.method, k, system.mesh.n, errors, system.n_dofs, seconds, residual,
                       parts={k_: float(v) for k_, v in parts.items()})


# ---------------------------------------------------------------------------
# Interpolants


def _lagrange_values(dm, f):
    return f(dm.dof_coordinates())


def _rt_interpolant(dm, alpha, degree):
    """Edge fluxes at the element's Gauss points; interior DOFs by a cellwise L2 fit."""
    from .elements import rt_edge_parameters

    mesh, el = dm.mesh, dm.element
    k = el.k
    out = np.zeros(dm.n_dofs)
    t = rt_edge_parameters(k)
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    X = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    flux = np.einsum("epa,ea->ep", alpha(X), mesh.edge_normals) * mesh.edge_lengths[:, None]
    out[: (k + 1) * mesh.n_edges] = flux.ravel()
    interior = list(el.interior_dofs)
    if interior:
        edge_local = [d for dofs in el.edge_dofs for d in dofs]
        cells = np.arange(mesh.n_cells)
        ref_pts, Xc, W = cell_quadrature(mesh, cells, degree)
        val, _ = physical_basis(el, mesh, cells, ref_pts, 1)
        cd = dm.cell_dofs
        known = np.einsum("cpnd,cn->cpd", val[:, :, edge_local], out[cd[:, edge_local]])
        r = alpha(Xc) - known
        P = val[:, :, interior]
        G = np.einsum("cp,cpid,cpjd->cij", W, P, P)
        rhs = np.einsum("cp,cpid,cpd->ci", W, P, r)
        out[cd[:, interior]] = np.linalg.solve(G, rhs[..., None])[..., 0]
    return out


def interpolate(system: AssembledSystem, ms: ManufacturedSolution) -> np.ndarray:
    """Coefficient vector of the canonical interpolant of the exact fields.

    Argyris uses its own functionals; Lagrange spaces interpolate at nodes; the
    mixed multiplier uses ``alpha = B div(grad grad u + q^2 T u)``.
    """
    family = method_family(system.method)
    mesh = system.mesh
    ms = ms.with_params(B=float(system.params.B), q=float(system.params.q), m=float(system.params.m))
    if family == "argyris":
        return argyris_interpolate(mesh, ms.value, ms.gradient, ms.hessian)
    if family == "c0ip":
        return _lagrange_values(system.dof_maps["u"], ms.value)
    du, dv, da = (system.dof_maps[f] for f in ("u", "v", "alpha"))
    gv = _lagrange_values(dv, ms.gradient)
    xa = _rt_interpolant(da, lambda X: ms.B * div_hessian_flux(ms, X), system.quad_degree)
    return np.concatenate([_lagrange_values(du, ms.value), gv[:, 0], gv[:, 1], xa])


# ---------------------------------------------------------------------------
# Convergence slopes


def slope(x_prev: float, x_last: float, e_prev: float, e_last: float) -> float:
    """``log(e_last / e_prev) / log(x_last / x_prev)``."""
    if e_prev <= 0 or e_last <= 0:
        raise ValueError("slope is undefined for zero error values")
    if x_prev <= 0 or x_last <= 0 or x_prev == x_last:
        raise ValueError("abscissae must be distinct and positive")
    return math.log(e_last / e_prev) / math.log(x_last / x_prev)


def estimate_rates(reports: list[ErrorReport]) -> dict[str, float]:
    """Convergence order per norm from the last two (completed) reports."""
    reports = [r for r in reports if r.ok]
    if len(reports) < 2:
        raise ValueError("at least two completed reports are needed to estimate a rate")
    prev, last = reports[-2], reports[-1]
    if last.n != 2 * prev.n:
        raise ValueError(f"rates need doubling refinement, got n={prev.n} then n={last.n}")
    return {name: slope(prev.h, last.h, prev.errors[name], last.errors[name])
            for name in last.errors if name in prev.errors}
