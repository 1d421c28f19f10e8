import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from smectic_fem.assembly import (
    ProblemParams,
    apply_constraints,
    assemble,
    assemble_c0ip,
    assemble_conforming,
    assemble_mixed,
    system_size,
    write_triplets,
)
from smectic_fem.elements import monomial_exponents
from smectic_fem.linalg import solve_direct
from smectic_fem.mesh import assign_boundary, build_structured_mesh
from smectic_fem.mms import bump_polynomial, plane_wave, polynomial_solution
from smectic_fem.norms import compute_errors, interpolate

RNG = np.random.default_rng(11)
NEUMANN = {s: "32" for s in "SNEW"}


def setup(n, spec=None, mixed=False):
    mesh = build_structured_mesh(n)
    return mesh, assign_boundary(mesh, spec, mixed=mixed)


def test_params_validation():
    for bad in [dict(B=0.0, q=10, m=1), dict(B=2.0, q=10, m=1), dict(B=1, q=0.5, m=1), dict(B=1, q=10, m=0)]:
        with pytest.raises(ValueError):
            ProblemParams(**bad)


@pytest.mark.parametrize("method, k, total", [("argyris", None, 37766), ("c0ip", 2, 16641),
                                              ("c0ip", 3, 37249), ("c0ip", 4, 66049), ("mixed", 1, 140290),
                                              ("mixed", 2, 267650), ("mixed", 3, 435970)])
def test_system_size_n64(method, k, total):
    assert system_size(method, 64, k) == total


def test_assembled_dimension_matches_count():
    mesh, part = setup(8, mixed=True)
    ms = plane_wave(10.0)
    for method, k in [("argyris", None), ("c0ip", 3), ("mixed", 2)]:
        S = assemble(method, mesh, part, ProblemParams(1e-4, 10.0, 10.0, k), ms)
        assert S.matrix.shape == (system_size(method, 8, k),) * 2 == (len(S.rhs),) * 2


@pytest.mark.parametrize("n", [4, 8, 16])
def test_full_neumann_conforming_is_symmetric(n):
    mesh, part = setup(n, NEUMANN)
    A = assemble_conforming(mesh, part, ProblemParams(1.0, 10.0, 10.0), plane_wave(10.0)).matrix
    asym = abs(A - A.T).max()
    assert asym <= 1e-12 * abs(A).max()


def test_nitsche_matrix_is_not_symmetric():
    mesh, part = setup(4)
    A = assemble_conforming(mesh, part, ProblemParams(1.0, 10.0, 10.0), plane_wave(10.0)).matrix
    assert abs(A - A.T).max() > 1e-6 * abs(A).max()


@pytest.mark.parametrize("method, k", [("argyris", None), ("c0ip", 2), ("c0ip", 3), ("c0ip", 4)])
@pytest.mark.parametrize("B", [1.0, 1e-4])
def test_positivity_random_vectors(method, k, B):
    mesh, part = setup(8)
    S = assemble(method, mesh, part, ProblemParams(B, 10.0, 10.0, k), plane_wave(10.0))
    V = RNG.standard_normal((S.n_dofs, 100))
    assert np.all(np.einsum("ij,ij->j", V, S.matrix @ V) > 0)


@pytest.mark.parametrize("method", ["argyris", "c0ip"])
def test_penalty_terms_semidefinite(method):
    mesh, part = setup(8)
    params = ProblemParams(1.0, 10.0, 10.0, 3)
    if method == "argyris":
        P = assemble_conforming(mesh, part, params, plane_wave(10.0), terms="penalty").matrix
    else:
        P = assemble_c0ip(mesh, part, params, plane_wave(10.0), terms="penalty").matrix
    assert abs(P - P.T).max() <= 1e-12 * abs(P).max()
    V = RNG.standard_normal((P.shape[0], 100))
    assert np.all(np.einsum("ij,ij->j", V, P @ V) >= -1e-10 * abs(P).max())


def test_c0ip_penalty_vanishes_for_global_quadratic():
    # the facet penalty only sees jumps of the normal derivative
    mesh, part = setup(6)
    ms = polynomial_solution({(2, 0): 1.0, (1, 1): -0.5, (0, 2): 2.0, (1, 0): 0.3})
    S = assemble_c0ip(mesh, assign_boundary(mesh, NEUMANN), ProblemParams(1.0, 10.0, 10.0, 2), ms,
                      terms="penalty")
    x = interpolate(S, ms)
    assert x @ (S.matrix @ x) < 1e-12


def test_mixed_blocks_symmetry_and_adjointness():
    mesh, part = setup(4, mixed=True)
    S = assemble_mixed(mesh, part, ProblemParams(1.0, 10.0, 10.0, 2), plane_wave(10.0), constrain=False)
    A, Bb = S.extras["A_block"], S.extras["B_block"]
    assert abs(A - A.T).max() == 0
    nA = A.shape[0]
    upper = S.matrix[:nA, nA:]
    lower = S.matrix[nA:, :nA]
    assert (upper != lower.T).nnz == 0
    assert (lower != Bb).nnz == 0
    assert S.matrix[nA:, nA:].nnz == 0


def test_mixed_constrained_system_stays_symmetric():
    mesh, part = setup(4, mixed=True)
    S = assemble_mixed(mesh, part, ProblemParams(1.0, 10.0, 10.0, 1), plane_wave(10.0))
    assert abs(S.matrix - S.matrix.T).max() <= 1e-12 * abs(S.matrix).max()


def test_mixed_rejects_all_31():
    mesh = build_structured_mesh(2)
    part = assign_boundary(mesh, {s: "31" for s in "SNEW"})
    with pytest.raises(ValueError):
        assemble_mixed(mesh, part, ProblemParams(1.0, 10.0, 10.0, 1), plane_wave(10.0))


@pytest.mark.parametrize("method, k", [("c0ip", 1), ("c0ip", 5), ("mixed", 0), ("mixed", 4)])
def test_degree_range(method, k):
    mesh, part = setup(2, mixed=True)
    with pytest.raises(ValueError):
        assemble(method, mesh, part, ProblemParams(1.0, 10.0, 10.0, k), plane_wave(10.0))


def test_quadrature_degree_limit():
    mesh, part = setup(2)
    with pytest.raises(ValueError):
        assemble_conforming(mesh, part, ProblemParams(1.0, 10.0, 10.0), plane_wave(10.0), quad_degree=21)


def test_assembly_is_deterministic():
    mesh, part = setup(6)
    params = ProblemParams(1e-2, 10.0, 10.0, 3)
    a = assemble("c0ip", mesh, part, params, plane_wave(10.0))
    b = assemble("c0ip", mesh, part, params, plane_wave(10.0))
    assert np.array_equal(a.matrix.indptr, b.matrix.indptr)
    assert np.array_equal(a.matrix.indices, b.matrix.indices)
    assert np.array_equal(a.matrix.data, b.matrix.data)
    assert np.array_equal(a.rhs, b.rhs)


def test_no_stored_zeros_and_sparsity_bound():
    mesh, part = setup(8)
    S = assemble("argyris", mesh, part, ProblemParams(1.0, 10.0, 10.0), plane_wave(10.0))
    assert np.all(S.matrix.data != 0)
    # a vertex DOF touches at most 6 cells of 21 DOFs each
    assert np.diff(S.matrix.indptr).max() <= 6 * 21


SPECS = [None, NEUMANN, {"S": "01", "N": "02", "E": "31", "W": "32"},
         {"S": "31", "N": "32", "E": "01", "W": "02"}]


@pytest.mark.parametrize("spec", SPECS, ids=["default", "neumann", "swapped", "rotated"])
@pytest.mark.parametrize("method, k, deg", [("argyris", None, 5), ("c0ip", 2, 2), ("c0ip", 3, 3),
                                            ("c0ip", 4, 4), ("mixed", 1, 1), ("mixed", 2, 2), ("mixed", 3, 3)])
def test_polynomial_reproduction(spec, method, k, deg):
    # inhomogeneous data from a polynomial in the trial space: the discrete
    # solution must be exact, which pins down every boundary-data term
    coeffs = {e: RNG.uniform(-1, 1) for e in monomial_exponents(deg)}
    ms = polynomial_solution(coeffs, q=3.0, B=0.5, m=2.0)
    mesh, part = setup(4, spec, mixed=method == "mixed")
    S = assemble(method, mesh, part, ProblemParams(0.5, 3.0, 2.0, k), ms)
    x = solve_direct(S.matrix, S.rhs)
    assert compute_errors(S, x, ms).errors["l2"] < 1e-9


def test_mixed_consistency_residual_decreases():
    ms = bump_polynomial(q=10.0, B=1.0)
    res = []
    for n in (8, 16, 32):
        mesh, part = setup(n, mixed=True)
        S = assemble_mixed(mesh, part, ProblemParams(1.0, 10.0, 10.0, 2), ms)
        x = interpolate(S, ms)
        res.append(np.linalg.norm(S.matrix @ x - S.rhs))
    assert res[0] / res[1] >= 6 and res[1] / res[2] >= 6


def test_apply_constraints():
    A = sp.csr_matrix(np.array([[4.0, 1, 0], [1, 3, 1], [0, 1, 2]]))
    b = np.array([1.0, 2, 3])
    A2, b2 = apply_constraints(A, b, np.array([2]), np.array([5.0]))
    assert A2.toarray().tolist() == [[4, 1, 0], [1, 3, 0], [0, 0, 1]]
    assert b2.tolist() == [1, -3, 5]


def test_triplet_dump_round_trip(tmp_path):
    mesh, part = setup(2)
    S = assemble("c0ip", mesh, part, ProblemParams(0.3, 7.0, 10.0, 2), plane_wave(7.0))
    path = tmp_path / "m.txt"
    write_triplets(S, path)
    lines = path.read_text().splitlines()
    head = lines[0].split()
    assert int(head[1]) == S.n_dofs and int(head[3]) == S.matrix.nnz
    rows = [l.split() for l in lines[1 : 1 + S.matrix.nnz]]
    A = sp.csr_matrix(([float(v) for _, _, v in rows], ([int(r) for r, _, _ in rows], [int(c) for _, c, _ in rows])),
                      shape=S.matrix.shape)
    assert (A != S.matrix).nnz == 0


@settings(max_examples=8, deadline=None)
@given(st.sampled_from(["02", "01", "32", "31"]), st.sampled_from(["02", "01", "32", "31"]))
def test_any_partition_assembles_and_solves(south, north):
    spec = {"S": south, "N": north, "E": "01", "W": "32"}
    mesh, part = setup(4, spec)
    ms = plane_wave(5.0)
    for method, k in [("argyris", None), ("c0ip", 2)]:
        S = assemble(method, mesh, part, ProblemParams(0.1, 5.0, 10.0, k), ms)
        _, res = solve_direct(S.matrix, S.rhs, return_residual=True)
        assert res <= 1e-9
