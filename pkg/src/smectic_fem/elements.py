"""Reference elements, physical tabulation and global DOF maps.

Supported families: continuous and discontinuous Lagrange (``CG``/``DG``), the
quintic Argyris triangle, and Raviart-Thomas indexed by the degree of its
divergence (``RT(k)`` has divergence onto ``DG(k)`` and degree ``k + 1``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from math import comb

import numpy as np

from .mesh import BoundaryPartition, Mesh
from .quadrature import interval_quadrature, triangle_quadrature

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
# Monomials are centred on the reference barycentre for conditioning.
CENTRE = np.array([1.0, 1.0]) / 3.0


def monomial_exponents(p: int) -> list[tuple[int, int]]:
    return [(t - b, b) for t in range(p + 1) for b in range(t + 1)]


def tabulate_monomials(points: np.ndarray, p: int, order: int) -> list[np.ndarray]:
    """Monomials (x - 1/3)^a (y - 1/3)^b (a + b <= p) and full derivative tensors up to ``order``.

    Returns ``[values, d1, d2, ...]`` with shapes ``(..., M)``, ``(..., M, 2)``,
    ``(..., M, 2, 2)`` and so on.
    """
    exps = np.array(monomial_exponents(p))
    a, b = exps[:, 0], exps[:, 1]
    x = points[..., 0, None] - CENTRE[0]
    y = points[..., 1, None] - CENTRE[1]
    cache: dict[tuple[int, int], np.ndarray] = {}

    def partial(dx: int, dy: int) -> np.ndarray:
        if (dx, dy) not in cache:
            coef = np.ones(len(exps))
            for s in range(dx):
                coef = coef * (a - s)
            for s in range(dy):
                coef = coef * (b - s)
            pa = np.maximum(a - dx, 0)
            pb = np.maximum(b - dy, 0)
            cache[dx, dy] = coef * x**pa * y**pb
        return cache[dx, dy]

    out = [partial(0, 0)]
    for r in range(1, order + 1):
        shape = points.shape[:-1] + (len(exps),) + (2,) * r
        arr = np.empty(shape)
        for idx in product((0, 1), repeat=r):
            dy = sum(idx)
            arr[(...,) + (slice(None),) + idx] = partial(r - dy, dy)
        out.append(arr)
    return out


def push_forward(ref: list[np.ndarray], K: np.ndarray) -> list[np.ndarray]:
    """Map reference derivatives to physical ones for affine cells.

    ``ref[r]`` has shape ``(C, P, n, 2, ..., 2)`` (or without the leading ``C``,
    in which case it is shared by all cells); ``K = J^{-T}`` has shape ``(C, 2, 2)``.
    """
    C = K.shape[0]
    out = []
    for r, arr in enumerate(ref):
        if arr.ndim == 2 + r:  # shared across cells
            arr = np.broadcast_to(arr, (C,) + arr.shape)
        if r == 0:
            out.append(np.ascontiguousarray(arr))
        elif r == 1:
            out.append(np.einsum("cpna,cba->cpnb", arr, K, optimize=True))
        elif r == 2:
            out.append(np.einsum("cpnij,cai,cbj->cpnab", arr, K, K, optimize=True))
        elif r == 3:
            out.append(np.einsum("cpnijk,cai,cbj,cdk->cpnabd", arr, K, K, K, optimize=True))
        else:
            raise ValueError("derivatives above order 3 are not supported")
    return out


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    family: str
    k: int  # family index: Lagrange degree, or divergence degree for RT
    degree: int  # polynomial degree of the space
    coeffs: np.ndarray = field(repr=False)  # (M, nd) or (M, 2, nd)
    vertex_dofs: tuple = ()
    edge_dofs: tuple = ()
    interior_dofs: tuple = ()
    nodes: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_dofs(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def is_vector(self) -> bool:
        return self.coeffs.ndim == 3

    @property
    def name(self) -> str:
        return "ARGYRIS" if self.family == "ARGYRIS" else f"{self.family}({self.k})"

    def tabulate(self, points: np.ndarray, order: int = 0) -> list[np.ndarray]:
        """Reference basis and derivatives through ``order`` at ``points``.

        Scalar families return ``(..., nd)``, ``(..., nd, 2)``, ...; RT returns
        ``[values (..., nd, 2), divergence (..., nd)]``.
        """
        if self.is_vector:
            mono = tabulate_monomials(points, self.degree, 1)
            vals = np.einsum("...m,mdn->...nd", mono[0], self.coeffs)
            div = np.einsum("...md,mdn->...n", mono[1], self.coeffs)
            return [vals, div]
        mono = tabulate_monomials(points, self.degree, order)
        out = [mono[0] @ self.coeffs]
        for r in range(1, order + 1):
            ax = "ijk"[:r]
            out.append(np.einsum(f"...m{ax},mn->...n{ax}", mono[r], self.coeffs))
        return out


def _lagrange_nodes(k: int):
    nodes = [tuple(v) for v in REF_VERTICES]
    vertex_dofs = ((0,), (1,), (2,))
    edge_dofs = []
    for i in range(3):
        A, B = REF_VERTICES[(i + 1) % 3], REF_VERTICES[(i + 2) % 3]
        ids = []
        for j in range(1, k):
            ids.append(len(nodes))
            nodes.append(tuple(A + (B - A) * j / k))
        edge_dofs.append(tuple(ids))
    interior = []
    for jy in range(1, k):
        for jx in range(1, k - jy):
            interior.append(len(nodes))
            nodes.append((jx / k, jy / k))
    return np.array(nodes), vertex_dofs, tuple(edge_dofs), tuple(interior)


@lru_cache(maxsize=None)
def lagrange(k: int, discontinuous: bool = False) -> ReferenceElement:
    if k < 1:
        raise ValueError(f"Lagrange degree must be >= 1, got {k}")
    nodes, vdofs, edofs, idofs = _lagrange_nodes(k)
    V = tabulate_monomials(nodes, k, 0)[0]
    coeffs = np.linalg.inv(V)
    if discontinuous:
        return ReferenceElement("DG", k, k, coeffs, (), (), tuple(range(len(nodes))), nodes)
    return ReferenceElement("CG", k, k, coeffs, vdofs, edofs, idofs, nodes)


def _ref_outward_normals() -> np.ndarray:
    normals = []
    for i in range(3):
        t = REF_VERTICES[(i + 2) % 3] - REF_VERTICES[(i + 1) % 3]
        normals.append([t[1], -t[0]])
    return np.array(normals)  # scaled by edge length


@lru_cache(maxsize=None)
def argyris() -> ReferenceElement:
    """Quintic Argyris element with reference-coordinate functionals.

    Local DOFs: for each vertex (value, d/dx, d/dy, d2/dx2, d2/dxdy, d2/dy2), then
    one normal derivative at the midpoint of each edge.
    """
    mids = np.array([(REF_VERTICES[(i + 1) % 3] + REF_VERTICES[(i + 2) % 3]) / 2 for i in range(3)])
    nrm = _ref_outward_normals()
    nrm = nrm / np.linalg.norm(nrm, axis=1)[:, None]
    vt = tabulate_monomials(REF_VERTICES, 5, 2)
    mt = tabulate_monomials(mids, 5, 1)
    rows = []
    for v in range(3):
        rows += [vt[0][v], vt[1][v, :, 0], vt[1][v, :, 1],
                 vt[2][v, :, 0, 0], vt[2][v, :, 0, 1], vt[2][v, :, 1, 1]]
    for i in range(3):
        rows.append(mt[1][i] @ nrm[i])
    coeffs = np.linalg.inv(np.array(rows))
    vdofs = tuple(tuple(range(6 * v, 6 * v + 6)) for v in range(3))
    edofs = tuple((18 + i,) for i in range(3))
    return ReferenceElement("ARGYRIS", 5, 5, coeffs, vdofs, edofs, ())


def _rt_prime_basis(k: int) -> np.ndarray:
    exps = monomial_exponents(k + 1)
    index = {e: i for i, e in enumerate(exps)}
    prime = []
    for a, b in monomial_exponents(k):
        for d in range(2):
            c = np.zeros((len(exps), 2))
            c[index[a, b], d] = 1.0
            prime.append(c)
    for a in range(k, -1, -1):
        b = k - a
        c = np.zeros((len(exps), 2))
        c[index[a + 1, b], 0] = 1.0
        c[index[a, b + 1], 1] = 1.0
        prime.append(c)
    return np.stack(prime, axis=-1)  # (M, 2, nd)


def rt_edge_parameters(k: int) -> np.ndarray:
    """Points on [0, 1] where RT(k) normal fluxes are sampled (ascending)."""
    t, _ = interval_quadrature(2 * k + 1)
    return np.sort(t)


@lru_cache(maxsize=None)
def raviart_thomas(k: int) -> ReferenceElement:
    """RT space of degree ``k + 1`` whose divergence is onto DG(k).

    Edge DOFs are the normal flux ``phi . n_e`` against the length-scaled outward
    normal at ``k + 1`` Gauss points per edge; interior DOFs are moments against
    vector polynomials of degree ``k - 1``.
    """
    if k < 0:
        raise ValueError(f"RT divergence degree must be >= 0, got {k}")
    prime = _rt_prime_basis(k)
    nd = prime.shape[-1]
    t = rt_edge_parameters(k)
    nrm = _ref_outward_normals()
    rows = []
    for i in range(3):
        A, B = REF_VERTICES[(i + 1) % 3], REF_VERTICES[(i + 2) % 3]
        pts = A + np.outer(t, B - A)
        mono = tabulate_monomials(pts, k + 1, 0)[0]
        vals = np.einsum("pm,mdn->pnd", mono, prime)
        rows.extend(vals @ nrm[i])
    if k >= 1:
        q = triangle_quadrature(2 * k + 1)
        mono = tabulate_monomials(q.points, k + 1, 0)[0]
        vals = np.einsum("pm,mdn->pnd", mono, prime)
        test = tabulate_monomials(q.points, k - 1, 0)[0]
        # L2-orthonormal test polynomials keep interior basis functions O(1).
        gram = np.einsum("p,pi,pj->ij", q.weights, test, test)
        test = test @ np.linalg.inv(np.linalg.cholesky(gram)).T
        for d in range(2):
            for m in range(test.shape[1]):
                rows.append(np.einsum("p,p,pn->n", q.weights, test[:, m], vals[:, :, d]))
    V = np.array(rows)
    assert V.shape == (nd, nd)
    coeffs = np.einsum("mdn,nj->mdj", prime, np.linalg.inv(V))
    ne = k + 1
    edofs = tuple(tuple(range(i * ne, (i + 1) * ne)) for i in range(3))
    return ReferenceElement("RT", k, k + 1, coeffs, ((), (), ()), edofs, tuple(range(3 * ne, nd)))


def make_element(family: str, k: int | None = None) -> ReferenceElement:
    family = family.upper()
    if family == "CG":
        return lagrange(int(k))
    if family == "DG":
        return lagrange(int(k), discontinuous=True)
    if family == "ARGYRIS":
        return argyris()
    if family == "RT":
        return raviart_thomas(int(k))
    raise ValueError(f"unknown element family {family!r}")


# ---------------------------------------------------------------------------
# Physical tabulation


def cell_geometry(mesh: Mesh, cells: np.ndarray | slice = slice(None)):
    """Return ``(x0, J, detJ, K)`` for the selected cells, with ``K = J^{-T}``."""
    J = mesh.jacobians()[cells]
    x0 = mesh.vertices[mesh.cells[cells, 0]]
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    K = np.empty_like(J)
    K[:, 0, 0] = J[:, 1, 1] / det
    K[:, 0, 1] = -J[:, 1, 0] / det
    K[:, 1, 0] = -J[:, 0, 1] / det
    K[:, 1, 1] = J[:, 0, 0] / det
    return x0, J, det, K


def to_reference(mesh: Mesh, cells: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Inverse affine map of physical points ``x`` (C, P, 2) on ``cells``."""
    x0, _, _, K = cell_geometry(mesh, cells)
    return np.einsum("cba,cpb->cpa", K, x - x0[:, None, :])


def argyris_transformation(mesh: Mesh, cells: np.ndarray | slice = slice(None)) -> np.ndarray:
    """Per-cell matrix ``M`` with physical basis ``phi_i = sum_j M[c, i, j] psi_j``.

    ``W[c, i, j]`` applies the i-th physical (global) functional to the j-th
    mapped reference basis function; ``M = W^{-T}``.
    """
    el = argyris()
    cells = np.arange(mesh.n_cells)[cells]
    _, _, _, K = cell_geometry(mesh, cells)
    mids = np.array([(REF_VERTICES[(i + 1) % 3] + REF_VERTICES[(i + 2) % 3]) / 2 for i in range(3)])
    vt = push_forward(el.tabulate(REF_VERTICES, 2), K)
    mt = push_forward(el.tabulate(mids, 1), K)
    normals = mesh.edge_normals[mesh.cell_to_edges[cells]]  # (C, 3, 2)
    C = len(cells)
    W = np.empty((C, 21, 21))
    for v in range(3):
        W[:, 6 * v] = vt[0][:, v]
        W[:, 6 * v + 1] = vt[1][:, v, :, 0]
        W[:, 6 * v + 2] = vt[1][:, v, :, 1]
        W[:, 6 * v + 3] = vt[2][:, v, :, 0, 0]
        W[:, 6 * v + 4] = vt[2][:, v, :, 0, 1]
        W[:, 6 * v + 5] = vt[2][:, v, :, 1, 1]
    for i in range(3):
        W[:, 18 + i] = np.einsum("cna,ca->cn", mt[1][:, i], normals[:, i])
    return np.swapaxes(np.linalg.inv(W), 1, 2)


def argyris_interpolate(mesh: Mesh, value, gradient, hessian) -> np.ndarray:
    """Global Argyris coefficients of a smooth function from its point evaluators."""
    V = mesh.vertices
    g, H = gradient(V), hessian(V)
    vert = np.column_stack([value(V), g[:, 0], g[:, 1], H[:, 0, 0], H[:, 0, 1], H[:, 1, 1]])
    mid = V[mesh.edges].mean(axis=1)
    dn = np.einsum("ea,ea->e", gradient(mid), mesh.edge_normals)
    return np.concatenate([vert.ravel(), dn])


@dataclass
class BasisTabulation:
    """Basis values and derivatives at points, reference or physical."""

    family: str
    n_dofs: int
    values: np.ndarray
    gradients: np.ndarray | None = None
    hessians: np.ndarray | None = None
    third: np.ndarray | None = None
    divergence: np.ndarray | None = None
    transformation: np.ndarray | None = None

    def derivative(self, r: int) -> np.ndarray:
        return [self.values, self.gradients, self.hessians, self.third][r]


def physical_basis(
    element: ReferenceElement,
    mesh: Mesh,
    cells: np.ndarray,
    ref_points: np.ndarray,
    order: int = 0,
    transformation: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Global-basis restrictions on ``cells`` at reference points.

    ``ref_points`` is ``(P, 2)`` (shared) or ``(C, P, 2)`` (per cell).  Scalar
    families return ``[values, grads, ...]`` with leading ``(C, P, nd)``; RT
    returns ``[values (C, P, nd, 2), divergence (C, P, nd)]`` including the
    contravariant Piola map and global edge-orientation signs.
    """
    _, J, det, K = cell_geometry(mesh, cells)
    ref = element.tabulate(ref_points, order)
    if element.family == "RT":
        vals, div = ref
        if vals.ndim == 3:
            vals = np.broadcast_to(vals, (len(cells),) + vals.shape)
            div = np.broadcast_to(div, (len(cells),) + div.shape)
        signs = rt_local_signs(element, mesh, cells)
        vals = np.einsum("cab,cpnb->cpna", J, vals) / det[:, None, None, None]
        vals = vals * signs[:, None, :, None]
        div = div * (signs / det[:, None])[:, None, :]
        return [vals, div]
    phys = push_forward(ref, K)
    if element.family == "ARGYRIS":
        M = argyris_transformation(mesh, cells) if transformation is None else transformation
        phys = [np.einsum("cij,cpj...->cpi...", M, arr, optimize=True) for arr in phys]
    return phys


def tabulate(
    element: ReferenceElement,
    points: np.ndarray,
    max_derivative_order: int = 0,
    mesh: Mesh | None = None,
    cells: np.ndarray | None = None,
) -> BasisTabulation:
    """Tabulate an element at reference points, on the reference cell or on mesh cells."""
    if not 0 <= max_derivative_order <= 3:
        raise ValueError("derivative order must be in 0..3")
    if element.family == "RT" and max_derivative_order > 1:
        raise ValueError("RT tabulation provides values and divergence only")
    if element.family == "ARGYRIS" and mesh is None and max_derivative_order > 3:
        raise ValueError("Argyris supports derivatives through order 3")
    points = np.asarray(points, dtype=float)
    if mesh is None:
        arrs = element.tabulate(points, max_derivative_order)
        M = None
    else:
        cells = np.arange(mesh.n_cells) if cells is None else np.asarray(cells)
        M = argyris_transformation(mesh, cells) if element.family == "ARGYRIS" else None
        arrs = physical_basis(element, mesh, cells, points, max_derivative_order, M)
    if element.family == "RT":
        return BasisTabulation(element.name, element.n_dofs, arrs[0], divergence=arrs[1])
    arrs = arrs + [None] * (4 - len(arrs))
    return BasisTabulation(element.name, element.n_dofs, *arrs, transformation=M)


# ---------------------------------------------------------------------------
# Global DOF maps


def rt_local_signs(element: ReferenceElement, mesh: Mesh, cells: np.ndarray) -> np.ndarray:
    signs = np.ones((len(cells), element.n_dofs))
    ns = mesh.cell_normal_signs()[cells]
    for i, dofs in enumerate(element.edge_dofs):
        signs[:, list(dofs)] = ns[:, i : i + 1]
    return signs


@dataclass(frozen=True, eq=False)
class GlobalDofMap:
    element: ReferenceElement
    mesh: Mesh
    cell_dofs: np.ndarray  # (C, nd)
    n_dofs: int
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def edge_closure_dofs(self, edges: np.ndarray) -> np.ndarray:
        """Global DOFs living on the given edges or their endpoints."""
        edges = np.asarray(edges, dtype=np.int64)
        if edges.size == 0:
            return np.zeros(0, dtype=np.int64)
        mesh, el = self.mesh, self.element
        owner = mesh.edge_to_cells[edges, 0]
        loc = np.argmax(mesh.cell_to_edges[owner] == edges[:, None], axis=1)
        out = []
        for c, i in zip(owner.tolist(), loc.tolist()):
            local = list(el.edge_dofs[i]) if el.edge_dofs else []
            if el.vertex_dofs:
                local += list(el.vertex_dofs[(i + 1) % 3]) + list(el.vertex_dofs[(i + 2) % 3])
            out.extend(self.cell_dofs[c, local].tolist())
        return np.unique(np.array(out, dtype=np.int64))

    def boundary_dofs(self, partition: BoundaryPartition, *labels: str) -> np.ndarray:
        return self.edge_closure_dofs(partition.edges_with(*labels))

    def dof_coordinates(self) -> np.ndarray:
        """Physical nodal points of a Lagrange map."""
        if self.element.nodes is None:
            raise ValueError(f"{self.element.name} has no nodal points")
        x0, J, _, _ = cell_geometry(self.mesh)
        pts = x0[:, None, :] + np.einsum("cab,pb->cpa", J, self.element.nodes)
        out = np.empty((self.n_dofs, 2))
        out[self.cell_dofs.ravel()] = pts.reshape(-1, 2)
        return out


def build_dof_map(
    mesh: Mesh,
    element: ReferenceElement,
    partition: BoundaryPartition | None = None,
    constrain: tuple[str, ...] = (),
) -> GlobalDofMap:
    """Number global DOFs: vertices first, then edges (low-to-high order), then cells."""
    if partition is not None and partition.mesh is not mesh:
        raise ValueError("boundary partition belongs to a different mesh")
    V, E, C = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    nd = element.n_dofs
    dofs = np.empty((C, nd), dtype=np.int64)
    fam = element.family
    if fam == "DG":
        dofs[:] = np.arange(C * nd).reshape(C, nd)
        total = C * nd
    elif fam == "CG":
        k = element.k
        for a in range(3):
            dofs[:, element.vertex_dofs[a][0]] = mesh.cells[:, a]
        ne = k - 1
        for i in range(3):
            e = mesh.cell_to_edges[:, i]
            fwd = mesh.cell_edge_signs[:, i] > 0
            for j, ld in enumerate(element.edge_dofs[i]):
                dofs[:, ld] = V + e * ne + np.where(fwd, j, ne - 1 - j)
        ni = len(element.interior_dofs)
        for j, ld in enumerate(element.interior_dofs):
            dofs[:, ld] = V + ne * E + np.arange(C) * ni + j
        total = V + ne * E + ni * C
    elif fam == "ARGYRIS":
        for a in range(3):
            for r in range(6):
                dofs[:, element.vertex_dofs[a][r]] = 6 * mesh.cells[:, a] + r
        for i in range(3):
            dofs[:, element.edge_dofs[i][0]] = 6 * V + mesh.cell_to_edges[:, i]
        total = 6 * V + E
    elif fam == "RT":
        ne = element.k + 1
        for i in range(3):
            e = mesh.cell_to_edges[:, i]
            fwd = mesh.cell_edge_signs[:, i] > 0
            for j, ld in enumerate(element.edge_dofs[i]):
                dofs[:, ld] = e * ne + np.where(fwd, j, ne - 1 - j)
        ni = len(element.interior_dofs)
        for j, ld in enumerate(element.interior_dofs):
            dofs[:, ld] = ne * E + np.arange(C) * ni + j
        total = ne * E + ni * C
    else:
        raise ValueError(f"unsupported family {fam}")
    dm = GlobalDofMap(element, mesh, dofs, int(total))
    if constrain:
        if partition is None:
            raise ValueError("constraints need a boundary partition")
        dm = GlobalDofMap(element, mesh, dofs, int(total), dm.boundary_dofs(partition, *constrain))
    return dm


def dof_count_formula(family: str, k: int | None, n: int) -> int:
    """Closed-form global DOF count on the structured n x n mesh."""
    V, C = (n + 1) ** 2, 2 * n * n
    E = V + C - 1
    family = family.upper()
    if family == "CG":
        return V + (k - 1) * E + (k - 1) * (k - 2) // 2 * C
    if family == "DG":
        return comb(k + 2, 2) * C
    if family == "ARGYRIS":
        return 6 * V + E
    if family == "RT":
        return (k + 1) * E + k * (k + 1) * C
    raise ValueError(family)
