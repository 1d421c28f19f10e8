import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smectic_fem.elements import (
    argyris,
    argyris_interpolate,
    build_dof_map,
    cell_geometry,
    dof_count_formula,
    lagrange,
    make_element,
    monomial_exponents,
    physical_basis,
    raviart_thomas,
    tabulate,
    tabulate_monomials,
)
from smectic_fem.mesh import assign_boundary, build_structured_mesh
from smectic_fem.mms import polynomial_solution
from smectic_fem.quadrature import triangle_quadrature

RNG = np.random.default_rng(20240611)


def random_interior_points(count):
    p = RNG.random((count, 2))
    flip = p.sum(axis=1) > 1
    p[flip] = 1 - p[flip]
    return p


def cell_points(mesh, cells, ref):
    x0, J, _, _ = cell_geometry(mesh, cells)
    return x0[:, None, :] + np.einsum("cab,pb->cpa", J, ref)


def test_cg1_barycentre():
    vals = tabulate(lagrange(1), np.array([[1 / 3, 1 / 3]])).values
    assert np.allclose(vals, 1 / 3, atol=1e-15)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_partition_of_unity(k):
    tab = tabulate(lagrange(k), random_interior_points(20), 2)
    assert np.allclose(tab.values.sum(axis=-1), 1.0, atol=1e-12)
    assert np.allclose(tab.gradients.sum(axis=-2), 0.0, atol=1e-11)
    assert np.allclose(tab.hessians.sum(axis=-3), 0.0, atol=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_lagrange_nodal(k):
    el = lagrange(k)
    assert np.allclose(el.tabulate(el.nodes)[0], np.eye(el.n_dofs), atol=1e-12)


def test_argyris_reference_x5():
    # reference functionals of p = x^5: vertex (1,0) carries 1, 5, 0, 20, 0, 0 and the
    # hypotenuse midpoint normal derivative is 5 (1/2)^4 / sqrt(2)
    dofs = np.zeros(21)
    dofs[6:12] = [1, 5, 0, 20, 0, 0]
    dofs[18] = 5 * 0.5**4 / np.sqrt(2)
    val = argyris().tabulate(np.array([[0.2, 0.3]]))[0] @ dofs
    assert val[0] == pytest.approx(0.2**5, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=21, max_size=21), st.sampled_from([1, 2, 3]))
def test_argyris_quintic_reproduction(coeffs, n):
    ms = polynomial_solution(dict(zip(monomial_exponents(5), coeffs)))
    mesh = build_structured_mesh(n)
    x = argyris_interpolate(mesh, ms.value, ms.gradient, ms.hessian)
    dm = build_dof_map(mesh, argyris())
    rule = triangle_quadrature(10)
    cells = np.arange(mesh.n_cells)
    v, g, H = physical_basis(dm.element, mesh, cells, rule.points, 2)
    X = cell_points(mesh, cells, rule.points)
    scale = max(1.0, np.abs(ms.value(X)).max())
    c = x[dm.cell_dofs]
    assert np.abs(np.einsum("cpn,cn->cp", v, c) - ms.value(X)).max() <= 1e-9 * scale
    assert np.abs(np.einsum("cpnab,cn->cpab", H, c) - ms.hessian(X)).max() <= 1e-8 * max(1, np.abs(ms.hessian(X)).max())


def test_argyris_is_c1_across_edges():
    mesh = build_structured_mesh(3)
    dm = build_dof_map(mesh, argyris())
    x = RNG.standard_normal(dm.n_dofs)
    t = np.linspace(0.1, 0.9, 5)
    e = mesh.interior_edges
    a, b = mesh.vertices[mesh.edges[e, 0]], mesh.vertices[mesh.edges[e, 1]]
    X = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    vals = []
    for side in (0, 1):
        cells = mesh.edge_to_cells[e, side]
        x0, _, _, K = cell_geometry(mesh, cells)
        ref = np.einsum("cba,cpb->cpa", K, X - x0[:, None, :])
        v, g = physical_basis(dm.element, mesh, cells, ref, 1)
        c = x[dm.cell_dofs[cells]]
        vals.append((np.einsum("cpn,cn->cp", v, c), np.einsum("cpna,cn->cpa", g, c)))
    assert np.abs(vals[0][0] - vals[1][0]).max() < 1e-10
    assert np.abs(vals[0][1] - vals[1][1]).max() < 1e-9


@pytest.mark.parametrize("family, k, deg", [("CG", 2, 2), ("CG", 3, 3), ("CG", 4, 4), ("DG", 1, 1), ("DG", 3, 3)])
def test_lagrange_monomial_interpolation(family, k, deg):
    mesh = build_structured_mesh(2)
    dm = build_dof_map(mesh, make_element(family, k))
    pts = random_interior_points(7)
    cells = np.arange(mesh.n_cells)
    X = cell_points(mesh, cells, pts)
    (v,) = physical_basis(dm.element, mesh, cells, pts, 0)
    for a, b in monomial_exponents(deg):
        f = lambda y: y[..., 0] ** a * y[..., 1] ** b
        x = f(dm.dof_coordinates())
        got = np.einsum("cpn,cn->cp", v, x[dm.cell_dofs])
        assert np.allclose(got, f(X), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_rt_normal_trace_continuity(k):
    mesh = build_structured_mesh(2)
    el = raviart_thomas(k)
    dm = build_dof_map(mesh, el)
    e = mesh.interior_edges
    t = np.array([0.2, 0.5, 0.7])
    a, b = mesh.vertices[mesh.edges[e, 0]], mesh.vertices[mesh.edges[e, 1]]
    X = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    n = mesh.edge_normals[e]
    traces = []
    for side in (0, 1):
        cells = mesh.edge_to_cells[e, side]
        x0, _, _, K = cell_geometry(mesh, cells)
        ref = np.einsum("cba,cpb->cpa", K, X - x0[:, None, :])
        vals, _ = physical_basis(el, mesh, cells, ref, 0)
        full = np.zeros((len(e), len(t), dm.n_dofs))
        for f in range(len(e)):
            full[f][:, dm.cell_dofs[cells[f]]] = np.einsum("pnd,d->pn", vals[f], n[f])
        traces.append(full)
    assert np.abs(traces[0] - traces[1]).max() < 1e-12


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_rt_divergence_in_dg(k):
    # the divergence of every basis function is reproduced by its L2 projection onto P_k
    el = raviart_thomas(k)
    rule = triangle_quadrature(2 * k + 4)
    _, div = el.tabulate(rule.points, 1)
    P = tabulate_monomials(rule.points, k, 0)[0]
    G = np.einsum("p,pi,pj->ij", rule.weights, P, P)
    coef = np.linalg.solve(G, np.einsum("p,pi,pn->in", rule.weights, P, div))
    resid = div - P @ coef
    assert np.sqrt(np.einsum("p,pn->n", rule.weights, resid**2)).max() < 1e-12


def test_rt_degree_and_dimension():
    for k in range(4):
        el = raviart_thomas(k)
        assert el.degree == k + 1
        assert el.n_dofs == (k + 1) * (k + 3)


def test_shared_vertices_share_global_dofs():
    mesh = build_structured_mesh(3)
    dm = build_dof_map(mesh, lagrange(3))
    coords = dm.dof_coordinates()
    x0, J, _, _ = cell_geometry(mesh)
    local = x0[:, None, :] + np.einsum("cab,pb->cpa", J, dm.element.nodes)
    assert np.allclose(coords[dm.cell_dofs], local, atol=1e-14)


@pytest.mark.parametrize("family, k, n, total", [
    ("CG", 2, 64, 16641), ("CG", 3, 64, 37249), ("CG", 4, 64, 66049),
    ("ARGYRIS", None, 64, 37766), ("DG", 1, 64, 24576), ("RT", 1, 64, 41216),
])
def test_dof_map_counts(family, k, n, total):
    mesh = build_structured_mesh(n)
    assert build_dof_map(mesh, make_element(family, k)).n_dofs == total
    assert dof_count_formula(family, k, n) == total


@pytest.mark.parametrize("n, cg2, cg3, cg4", [
    (128, 66049, 148225, 263169), (256, 263169, 591361, 1050625), (512, 1050625, 2362369, 4198401),
])
def test_cg_closed_forms_against_table(n, cg2, cg3, cg4):
    assert [dof_count_formula("CG", k, n) for k in (2, 3, 4)] == [cg2, cg3, cg4]


def test_constrained_dofs_lie_on_tagged_sides():
    mesh = build_structured_mesh(4)
    part = assign_boundary(mesh)
    dm = build_dof_map(mesh, lagrange(2), part, constrain=("02", "01"))
    y = dm.dof_coordinates()[dm.constrained, 1]
    assert np.all((y == 0) | (y == 1))
    assert len(dm.constrained) == 2 * (2 * 4 + 1)


def test_rejects_bad_requests():
    with pytest.raises(ValueError):
        tabulate(raviart_thomas(1), np.zeros((1, 2)), 2)
    with pytest.raises(ValueError):
        make_element("HCT")
    other = build_structured_mesh(2)
    with pytest.raises(ValueError):
        build_dof_map(build_structured_mesh(2), lagrange(1), assign_boundary(other))
