"""Linear systems for the conforming (Argyris + Nitsche), C0IP and mixed methods.

Matrix rows are test functions and columns are trial functions, so a form
``A(u, phi)`` contributes ``A[phi_i, u_j]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elements import (
    GlobalDofMap,
    argyris,
    argyris_transformation,
    build_dof_map,
    cell_geometry,
    lagrange,
    physical_basis,
    raviart_thomas,
    rt_edge_parameters,
    to_reference,
)
from .mesh import BoundaryPartition, Mesh
from .mms import BoundaryData, ManufacturedSolution, boundary_data, forcing
from .quadrature import MAX_DEGREE, interval_quadrature, triangle_quadrature

CHUNK = 1024


@dataclass(frozen=True)
class ProblemParams:
    B: float = 1.0
    q: float = 40.0
    m: float = 10.0
    k: int | None = None

    def __post_init__(self):
        if not self.q >= 1:
            raise ValueError(f"wavenumber q must be >= 1, got {self.q}")
        if not 0 < self.B <= 1:
            raise ValueError(f"B must lie in (0, 1], got {self.B}")
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")


@dataclass
class AssembledSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    method: str
    mesh: Mesh
    partition: BoundaryPartition
    params: ProblemParams
    dof_maps: dict[str, GlobalDofMap]
    offsets: dict[str, tuple[int, int]]
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    constrained_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    quad_degree: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]

    def block(self, row: str, col: str) -> sp.csr_matrix:
        r0, r1 = self.offsets[row]
        c0, c1 = self.offsets[col]
        return self.matrix[r0:r1, c0:c1]


class _Triplets:
    def __init__(self, n_rows: int, n_cols: int | None = None):
        self.shape = (n_rows, n_rows if n_cols is None else n_cols)
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows: np.ndarray, cols: np.ndarray, local: np.ndarray) -> None:
        r = np.broadcast_to(rows[:, :, None], local.shape)
        c = np.broadcast_to(cols[:, None, :], local.shape)
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(local.ravel())

    def tocsr(self) -> sp.csr_matrix:
        if not self.vals:
            return sp.csr_matrix(self.shape)
        A = sp.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=self.shape,
        ).tocsr()
        A.sum_duplicates()
        A.eliminate_zeros()
        return A


def _scatter_vector(n: int, dofs: np.ndarray, local: np.ndarray) -> np.ndarray:
    out = np.zeros(n)
    np.add.at(out, dofs.ravel(), local.ravel())
    return out


def _check_degree(degree: int) -> int:
    if degree > MAX_DEGREE:
        raise ValueError(f"quadrature degree {degree} exceeds the supported maximum {MAX_DEGREE}")
    return degree


def cell_quadrature(mesh: Mesh, cells: np.ndarray, degree: int):
    """Physical quadrature points ``(C, P, 2)`` and weights ``(C, P)``."""
    rule = triangle_quadrature(_check_degree(degree))
    x0, J, det, _ = cell_geometry(mesh, cells)
    X = x0[:, None, :] + np.einsum("cab,pb->cpa", J, rule.points)
    W = np.abs(det)[:, None] * rule.weights[None, :]
    return rule.points, X, W


@dataclass
class EdgeQuadrature:
    edges: np.ndarray
    X: np.ndarray  # (F, P, 2)
    W: np.ndarray  # (F, P)
    normals: np.ndarray  # (F, 2), global edge normals
    tangents: np.ndarray  # (F, 2)

    def reference_points(self, mesh: Mesh, side: int = 0):
        cells = mesh.edge_to_cells[self.edges, side]
        return cells, to_reference(mesh, cells, self.X)


def edge_quadrature(mesh: Mesh, edges: np.ndarray, degree: int) -> EdgeQuadrature:
    t, w = interval_quadrature(_check_degree(degree))
    edges = np.asarray(edges, dtype=np.int64)
    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    X = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    L = mesh.edge_lengths[edges]
    W = L[:, None] * w[None, :]
    nrm = mesh.edge_normals[edges]
    tan = np.column_stack([-nrm[:, 1], nrm[:, 0]])
    return EdgeQuadrature(edges, X, W, nrm, tan)


def default_degree(trial_degree: int) -> int:
    return 2 * trial_degree + 4


def _chunks(n: int, size: int = CHUNK):
    for s in range(0, n, size):
        yield np.arange(s, min(n, s + size))


def apply_constraints(A: sp.csr_matrix, b: np.ndarray, dofs: np.ndarray, values: np.ndarray):
    """Symmetric elimination: zero rows and columns, unit diagonal, data to the RHS."""
    dofs = np.asarray(dofs, dtype=np.int64)
    if dofs.size == 0:
        return A.tocsr(), b
    x = np.zeros(A.shape[0])
    x[dofs] = values
    b = b - A @ x
    b[dofs] = values
    keep = np.ones(A.shape[0])
    keep[dofs] = 0.0
    D = sp.diags(keep)
    A = (D @ A @ D + sp.diags(1.0 - keep)).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return A, b


def _merge_constraints(dofs_list, vals_list):
    if not dofs_list:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    dofs = np.concatenate(dofs_list)
    vals = np.concatenate(vals_list)
    order = np.argsort(dofs, kind="stable")
    dofs, vals = dofs[order], vals[order]
    keep = np.ones(len(dofs), dtype=bool)
    keep[1:] = dofs[1:] != dofs[:-1]
    return dofs[keep], vals[keep]


# ---------------------------------------------------------------------------
# Shared primal-form pieces


def _volume_primal(tri: _Triplets, rhs: np.ndarray, dm: GlobalDofMap, ms, params, degree, M_all=None):
    """Broken form: B H:H + B q^2 (T u : H_phi + H_u : T phi) + (B q^4 T:T + m) u phi."""
    mesh, el = dm.mesh, dm.element
    B, q, m = params.B, params.q, params.m
    for cells in _chunks(mesh.n_cells):
        ref_pts, X, W = cell_quadrature(mesh, cells, degree)
        M = None if M_all is None else M_all[cells]
        v, _, H = physical_basis(el, mesh, cells, ref_pts, 2, M)
        T = ms.tensor.value(X)
        TH = np.einsum("cpab,cpnab->cpn", T, H)
        TT = np.einsum("cpab,cpab->cp", T, T)
        Hf = H.reshape(H.shape[:3] + (4,))
        local = B * np.einsum("cp,cpia,cpja->cij", W, Hf, Hf, optimize=True)
        cross = B * q**2 * np.einsum("cp,cpi,cpj->cij", W, TH, v, optimize=True)
        local += cross + np.swapaxes(cross, 1, 2)
        local += np.einsum("cp,cpi,cpj->cij", W * (B * q**4 * TT + m), v, v, optimize=True)
        dofs = dm.cell_dofs[cells]
        tri.add(dofs, dofs, local)
        f = forcing(ms, X)
        rhs += _scatter_vector(len(rhs), dofs, np.einsum("cp,cpi->ci", W * f, v))


def _boundary_basis(dm: GlobalDofMap, eq: EdgeQuadrature, order: int, M_all=None):
    mesh = dm.mesh
    cells, ref = eq.reference_points(mesh)
    M = None if M_all is None else M_all[cells]
    return cells, physical_basis(dm.element, mesh, cells, ref, order, M)


def _flux_terms(tab, T, divT, q):
    """Per-basis ``M(phi) n`` (vector) and ``div M(phi) . n`` given outward ``n``."""
    v, g, H = tab[0], tab[1], tab[2]
    Mphi = H + q**2 * T[:, :, None] * v[..., None, None]
    out = {"Mphi": Mphi}
    if len(tab) > 3:
        grad_lap = np.einsum("cpnijj->cpni", tab[3])
        Tg = np.einsum("cpab,cpnb->cpna", T, g)
        out["divM"] = grad_lap + q**2 * (divT[:, :, None, :] * v[..., None] + Tg)
    return out


def _natural_loads(rhs, dm, partition, data, params, degree, M_all=None):
    """``-B int_{G3} phi G3 + B int_{G2} grad phi . G2`` from integration by parts."""
    B = params.B
    e3 = partition.gamma(3)
    if e3.size:
        eq = edge_quadrature(dm.mesh, e3, degree)
        cells, tab = _boundary_basis(dm, eq, 0, M_all)
        G3 = data.G3(eq.X, eq.normals[:, None, :])
        rhs += _scatter_vector(len(rhs), dm.cell_dofs[cells], -B * np.einsum("fp,fpi->fi", eq.W * G3, tab[0]))
    e2 = partition.gamma(2)
    if e2.size:
        eq = edge_quadrature(dm.mesh, e2, degree)
        cells, tab = _boundary_basis(dm, eq, 1, M_all)
        G2 = data.G2(eq.X, np.broadcast_to(eq.normals[:, None, :], eq.X.shape))
        rhs += _scatter_vector(len(rhs), dm.cell_dofs[cells], B * np.einsum("fp,fpia,fpa->fi", eq.W, tab[1], G2))


def _with_params(ms: ManufacturedSolution, params: ProblemParams) -> ManufacturedSolution:
    return ms.with_params(B=float(params.B), q=float(params.q), m=float(params.m))


# ---------------------------------------------------------------------------
# Conforming method


def assemble_conforming(
    mesh: Mesh,
    partition: BoundaryPartition,
    params: ProblemParams,
    ms: ManufacturedSolution,
    quad_degree: int | None = None,
    terms: str = "all",
    data: BoundaryData | None = None,
) -> AssembledSystem:
    """Argyris discretisation with non-symmetric Nitsche terms on Gamma_0 and Gamma_1.

    ``terms="penalty"`` assembles only the two penalty contributions (used to
    check their semidefiniteness).
    """
    ms = _with_params(ms, params)
    degree = _check_degree(quad_degree or default_degree(5))
    dm = build_dof_map(mesh, argyris(), partition)
    M_all = argyris_transformation(mesh)
    N = dm.n_dofs
    tri = _Triplets(N)
    rhs = np.zeros(N)
    data = data or boundary_data(ms, partition)
    B, q, h = params.B, params.q, mesh.h
    pen0 = 1.0 / (q * h**3)
    pen1 = 1.0 / (q**3 * h)
    if terms == "all":
        _volume_primal(tri, rhs, dm, ms, params, degree, M_all)
        _natural_loads(rhs, dm, partition, data, params, degree, M_all)

    e0 = partition.gamma(0)
    if e0.size:
        eq = edge_quadrature(mesh, e0, degree)
        cells, tab = _boundary_basis(dm, eq, 3, M_all)
        fl = _flux_terms(tab, ms.tensor.value(eq.X), ms.tensor.div(eq.X), q)
        DMn = np.einsum("fpia,fa->fpi", fl["divM"], eq.normals)
        v, W = tab[0], eq.W
        local = pen0 * np.einsum("fp,fpi,fpj->fij", W, v, v)
        if terms == "all":
            local += B * np.einsum("fp,fpi,fpj->fij", W, v, DMn)
            local -= B * np.einsum("fp,fpi,fpj->fij", W, DMn, v)
        dofs = dm.cell_dofs[cells]
        tri.add(dofs, dofs, local)
        g0 = data.g0(eq.X)
        load = pen0 * np.einsum("fp,fpi->fi", W * g0, v) - B * np.einsum("fp,fpi->fi", W * g0, DMn)
        if terms == "all":
            rhs += _scatter_vector(N, dofs, load)

    e1 = partition.gamma(1)
    if e1.size:
        eq = edge_quadrature(mesh, e1, degree)
        cells, tab = _boundary_basis(dm, eq, 2, M_all)
        fl = _flux_terms(tab, ms.tensor.value(eq.X), ms.tensor.div(eq.X), q)
        Mn = np.einsum("fpiab,fb->fpia", fl["Mphi"], eq.normals)
        g, W = tab[1], eq.W
        local = pen1 * np.einsum("fp,fpia,fpja->fij", W, g, g)
        if terms == "all":
            local -= B * np.einsum("fp,fpia,fpja->fij", W, g, Mn)
            local += B * np.einsum("fp,fpia,fpja->fij", W, Mn, g)
        dofs = dm.cell_dofs[cells]
        tri.add(dofs, dofs, local)
        g1 = data.g1(eq.X)
        load = pen1 * np.einsum("fp,fpia,fpa->fi", W, g, g1) + B * np.einsum("fp,fpia,fpa->fi", W, Mn, g1)
        if terms == "all":
            rhs += _scatter_vector(N, dofs, load)

    A = tri.tocsr()
    return AssembledSystem(A, rhs, "argyris", mesh, partition, params, {"u": dm}, {"u": (0, N)},
                           quad_degree=degree, extras={"transformation": M_all})


# ---------------------------------------------------------------------------
# C0 interior penalty


def _facet_tabs(dm: GlobalDofMap, eq: EdgeQuadrature, side: int):
    mesh = dm.mesh
    cells, ref = eq.reference_points(mesh, side)
    return cells, physical_basis(dm.element, mesh, cells, ref, 2)


def _c0ip_facet_arrays(dm, eq, ms, q, interior: bool):
    """Jump of the normal derivative and average of ``n . M(phi) . n`` per facet DOF."""
    n = eq.normals
    T = ms.tensor.value(eq.X)
    nTn = np.einsum("fa,fpab,fb->fp", n, T, n)
    parts = []
    for side in ((0, 1) if interior else (0,)):
        cells, (v, g, H) = _facet_tabs(dm, eq, side)
        dn = np.einsum("fpia,fa->fpi", g, n)
        nMn = np.einsum("fa,fpiab,fb->fpi", n, H, n) + q**2 * nTn[..., None] * v
        sgn = 1.0 if side == 0 else -1.0
        scale = 0.5 if interior else 1.0
        parts.append((dm.cell_dofs[cells], sgn * dn, scale * nMn, g))
    dofs = np.concatenate([p[0] for p in parts], axis=1)
    jump = np.concatenate([p[1] for p in parts], axis=2)
    avg = np.concatenate([p[2] for p in parts], axis=2)
    return dofs, jump, avg, parts[0][3]


def assemble_c0ip(
    mesh: Mesh,
    partition: BoundaryPartition,
    params: ProblemParams,
    ms: ManufacturedSolution,
    k: int | None = None,
    quad_degree: int | None = None,
    terms: str = "all",
    data: BoundaryData | None = None,
) -> AssembledSystem:
    """Continuous Lagrange CG(k) with interior-penalty facet terms off Gamma_2."""
    k = params.k if k is None else k
    if k not in (2, 3, 4):
        raise ValueError(f"C0IP degree must be 2, 3 or 4, got {k}")
    ms = _with_params(ms, params)
    degree = _check_degree(quad_degree or default_degree(k))
    dm = build_dof_map(mesh, lagrange(k), partition, constrain=("02", "01"))
    N = dm.n_dofs
    tri = _Triplets(N)
    rhs = np.zeros(N)
    data = data or boundary_data(ms, partition)
    B, q = params.B, params.q
    pen = 1.0 / (q**3 * mesh.h)
    if terms == "all":
        _volume_primal(tri, rhs, dm, ms, params, degree)
        _natural_loads(rhs, dm, partition, data, params, degree)

    for edges, interior in ((mesh.interior_edges, True), (partition.gamma(1), False)):
        if edges.size == 0:
            continue
        eq = edge_quadrature(mesh, edges, degree)
        dofs, jump, avg, g = _c0ip_facet_arrays(dm, eq, ms, q, interior)
        W = eq.W
        local = pen * np.einsum("fp,fpi,fpj->fij", W, jump, jump)
        if terms == "all":
            local -= B * np.einsum("fp,fpi,fpj->fij", W, jump, avg)
            local += B * np.einsum("fp,fpi,fpj->fij", W, avg, jump)
        tri.add(dofs, dofs, local)
        if not interior and terms == "all":
            gn = np.einsum("fpa,fa->fp", data.g1(eq.X), eq.normals)
            load = B * np.einsum("fp,fpi->fi", W * gn, avg) + pen * np.einsum("fp,fpi->fi", W * gn, jump)
            # Tangential part of the Hessian flux, absent from the facet terms.
            e31 = np.isin(edges, partition.edges_with("31"))
            if e31.any():
                flux = data.flux(eq.X)
                tMn = np.einsum("fa,fpab,fb->fp", eq.tangents, flux, eq.normals)
                dt = np.einsum("fpia,fa->fpi", g, eq.tangents)
                load += B * np.einsum("fp,fpi->fi", W * tMn * e31[:, None], dt)
            rhs += _scatter_vector(N, dofs, load)

    A = tri.tocsr()
    values = data.g0(dm.dof_coordinates()[dm.constrained])
    if terms == "all":
        A, rhs = apply_constraints(A, rhs, dm.constrained, values)
    return AssembledSystem(A, rhs, f"c0ip{k}", mesh, partition, params, {"u": dm}, {"u": (0, N)},
                           dm.constrained, values, degree)


# ---------------------------------------------------------------------------
# Mixed method


def mixed_spaces(mesh: Mesh, k: int, partition: BoundaryPartition | None = None):
    du = build_dof_map(mesh, lagrange(k, discontinuous=True), partition)
    dv = build_dof_map(mesh, lagrange(k + 2), partition)
    da = build_dof_map(mesh, raviart_thomas(k), partition)
    return du, dv, da


def mixed_offsets(du, dv, da) -> dict[str, tuple[int, int]]:
    nu, nv, na = du.n_dofs, 2 * dv.n_dofs, da.n_dofs
    return {"u": (0, nu), "v": (nu, nu + nv), "alpha": (nu + nv, nu + nv + na)}


def assemble_mixed(
    mesh: Mesh,
    partition: BoundaryPartition,
    params: ProblemParams,
    ms: ManufacturedSolution,
    k: int | None = None,
    quad_degree: int | None = None,
    constrain: bool = True,
    data: BoundaryData | None = None,
) -> AssembledSystem:
    """Saddle-point system over DG(k) x [CG(k+2)]^2 x RT(k) in block order (u, v, alpha)."""
    k = params.k if k is None else k
    if k not in (1, 2, 3):
        raise ValueError(f"mixed degree must be 1, 2 or 3, got {k}")
    if all(partition.sides[s] == "31" for s in "SNEW"):
        raise ValueError("the mixed method requires part of the boundary outside Gamma_31")
    ms = _with_params(ms, params)
    degree = _check_degree(quad_degree or default_degree(k + 2))
    du, dv, da = mixed_spaces(mesh, k, partition)
    off = mixed_offsets(du, dv, da)
    Nu, Ncg, Na = du.n_dofs, dv.n_dofs, da.n_dofs
    Nv = 2 * Ncg
    B, q, m = params.B, params.q, params.m

    t_uu, t_uv, t_vv = _Triplets(Nu), _Triplets(Nu, Nv), _Triplets(Nv)
    t_au = _Triplets(Na, Nu)
    t_av = _Triplets(Na, Nv)
    F = np.zeros(Nu)
    for cells in _chunks(mesh.n_cells):
        ref_pts, X, W = cell_quadrature(mesh, cells, degree)
        (u,) = physical_basis(du.element, mesh, cells, ref_pts, 0)
        c, gc = physical_basis(dv.element, mesh, cells, ref_pts, 1)
        a, diva = physical_basis(da.element, mesh, cells, ref_pts, 1)
        T = ms.tensor.value(X)
        TT = np.einsum("cpab,cpab->cp", T, T)
        dofu = du.cell_dofs[cells]
        dofc = dv.cell_dofs[cells]
        dofa = da.cell_dofs[cells]
        dofv = np.concatenate([dofc, dofc + Ncg], axis=1)

        t_uu.add(dofu, dofu, np.einsum("cp,cpi,cpj->cij", W * (B * q**4 * TT + m), u, u, optimize=True))
        K = B * np.einsum("cp,cpia,cpja->cij", W, gc, gc, optimize=True)
        zero = np.zeros_like(K)
        t_vv.add(dofv, dofv, np.block([[K, zero], [zero, K]]))
        Tg = np.einsum("cpab,cpnb->cpna", T, gc)  # (T grad phi_b)_d
        cross = B * q**2 * np.einsum("cp,cpi,cpjd->cidj", W, u, Tg, optimize=True)
        t_uv.add(dofu, dofv, cross.reshape(len(cells), u.shape[2], -1))
        t_au.add(dofa, dofu, np.einsum("cp,cpi,cpj->cij", W, diva, u, optimize=True))
        av = np.einsum("cp,cpid,cpj->cidj", W, a, c, optimize=True)
        t_av.add(dofa, dofv, av.reshape(len(cells), a.shape[2], -1))
        F += _scatter_vector(Nu, dofu, np.einsum("cp,cpi->ci", W * forcing(ms, X), u))

    # Global symmetrisation makes the diagonal blocks symmetric to the last bit.
    A_uu, A_uv, A_vv = t_uu.tocsr(), t_uv.tocsr(), t_vv.tocsr()
    A_uu = 0.5 * (A_uu + A_uu.T).tocsr()
    A_vv = 0.5 * (A_vv + A_vv.T).tocsr()
    B_au, B_av = t_au.tocsr(), t_av.tocsr()
    Bblk = sp.hstack([B_au, B_av]).tocsr()
    Ablk = sp.bmat([[A_uu, A_uv], [A_uv.T, A_vv]]).tocsr()
    A = sp.bmat([[Ablk, Bblk.T], [Bblk, None]]).tocsr()
    A.sum_duplicates()
    A.sort_indices()

    data = data or boundary_data(ms, partition)
    G = np.zeros(Nv)
    e2 = partition.gamma(2)
    if e2.size:
        eq = edge_quadrature(mesh, e2, degree)
        cells, ref = eq.reference_points(mesh)
        (c,) = physical_basis(dv.element, mesh, cells, ref, 0)
        G2 = data.G2(eq.X, np.broadcast_to(eq.normals[:, None, :], eq.X.shape))
        loc = B * np.einsum("fp,fpi,fpd->fdi", eq.W, c, G2)
        dofc = dv.cell_dofs[cells]
        G += _scatter_vector(Nv, np.concatenate([dofc, dofc + Ncg], axis=1), loc.reshape(len(cells), -1))
    Z = np.zeros(Na)
    e0 = partition.gamma(0)
    if e0.size:
        eq = edge_quadrature(mesh, e0, degree)
        cells, ref = eq.reference_points(mesh)
        a, _ = physical_basis(da.element, mesh, cells, ref, 0)
        an = np.einsum("fpid,fd->fpi", a, eq.normals)
        Z += _scatter_vector(Na, da.cell_dofs[cells], np.einsum("fp,fpi->fi", eq.W * data.g0(eq.X), an))
    rhs = np.concatenate([F, G, Z])

    dofs, vals = _mixed_constraints(mesh, partition, ms, data, du, dv, da, off)
    system = AssembledSystem(A, rhs, f"mixed{k}", mesh, partition, params,
                             {"u": du, "v": dv, "alpha": da}, off, dofs, vals, degree,
                             extras={"A_block": Ablk, "B_block": Bblk,
                                     "local_blocks": du.cell_dofs + off["u"][0]})
    if constrain:
        system.matrix, system.rhs = apply_constraints(A, rhs, dofs, vals)
    return system


def _mixed_constraints(mesh, partition, ms, data, du, dv, da, off):
    Ncg = dv.n_dofs
    v0 = off["v"][0]
    xcg = dv.dof_coordinates()
    dofs_list, vals_list = [], []
    # v = grad u on Gamma_1 (both components).
    d1 = dv.boundary_dofs(partition, "01", "31")
    if d1.size:
        g = data.g1(xcg[d1])
        for comp in range(2):
            dofs_list.append(v0 + comp * Ncg + d1)
            vals_list.append(g[:, comp])
    # Tangential component of v on Gamma_02; sides are axis-aligned.
    for edge in partition.edges_with("02").tolist():
        d = dv.edge_closure_dofs(np.array([edge]))
        t = mesh.vertices[mesh.edges[edge, 1]] - mesh.vertices[mesh.edges[edge, 0]]
        comp = 0 if abs(t[1]) < abs(t[0]) else 1
        dofs_list.append(v0 + comp * Ncg + d)
        vals_list.append(data.g1(xcg[d])[:, comp])
    # alpha . n = B G3 on Gamma_3; DOFs are fluxes against length-scaled normals.
    e3 = partition.gamma(3)
    if e3.size:
        kk = da.element.k
        t = rt_edge_parameters(kk)
        a = mesh.vertices[mesh.edges[e3, 0]]
        b = mesh.vertices[mesh.edges[e3, 1]]
        X = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        n = np.broadcast_to(mesh.edge_normals[e3][:, None, :], X.shape)
        vals = ms.B * data.G3(X, n) * mesh.edge_lengths[e3][:, None]
        dofs = off["alpha"][0] + e3[:, None] * (kk + 1) + np.arange(kk + 1)[None, :]
        dofs_list.append(dofs.ravel())
        vals_list.append(vals.ravel())
    return _merge_constraints(dofs_list, vals_list)


# ---------------------------------------------------------------------------
# DOF counting without assembly


def system_size(method: str, n: int, k: int | None = None) -> int:
    """Dimension of the assembled system, from the DOF maps alone."""
    from .mesh import build_structured_mesh

    mesh = build_structured_mesh(n)
    if method == "argyris":
        return build_dof_map(mesh, argyris()).n_dofs
    if method == "c0ip":
        return build_dof_map(mesh, lagrange(k)).n_dofs
    if method == "mixed":
        du, dv, da = mixed_spaces(mesh, k)
        return du.n_dofs + 2 * dv.n_dofs + da.n_dofs
    raise ValueError(f"unknown method {method!r}")


def assemble(method: str, mesh, partition, params, ms, quad_degree=None, data=None) -> AssembledSystem:
    """Dispatch on method name. ``data`` replaces the boundary data derived from ``ms``."""
    if method == "argyris":
        return assemble_conforming(mesh, partition, params, ms, quad_degree, data=data)
    if method == "c0ip":
        return assemble_c0ip(mesh, partition, params, ms, params.k, quad_degree, data=data)
    if method == "mixed":
        return assemble_mixed(mesh, partition, params, ms, params.k, quad_degree, data=data)
    raise ValueError(f"unknown method {method!r}")


def write_triplets(system: AssembledSystem, path) -> None:
    """Dump matrix and RHS as ``row col value`` lines (17 significant digits)."""
    A = system.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"% {A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for r, c, v in zip(A.row.tolist(), A.col.tolist(), A.data.tolist()):
            fh.write(f"{r} {c} {v:.17g}\n")
        fh.write("% rhs\n")
        for i, v in enumerate(system.rhs.tolist()):
            fh.write(f"{i} {v:.17g}\n")
