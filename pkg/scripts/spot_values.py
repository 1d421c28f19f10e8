"""Errors at n=64 for q=40, B=1 and the plane wave, next to reference values.

For the mixed method it also prints the L2 error of the DG projection, a
lower bound for the L2 error of any function in that space.

    python scripts/spot_values.py
"""

import logging

import numpy as np

from smectic_fem.assembly import ProblemParams, assemble, cell_quadrature
from smectic_fem.cli import StudyConfig, run_study
from smectic_fem.elements import physical_basis
from smectic_fem.mesh import assign_boundary, build_structured_mesh
from smectic_fem.mms import plane_wave
from smectic_fem.norms import error_quad_degree

N, Q, B = 64, 40.0, 1.0
REFERENCE = {
    ("argyris", None): {"l2": 5.0377e-08, "h2q": 5.958e-06},
    ("mixed", 1): {"l2": 4.1487e-03, "alpha_div": 2.4509},
}


def dg_projection_error(k):
    """||u - P u||_0 where P is the cellwise L2 projection onto DG(k)."""
    mesh = build_structured_mesh(N)
    part = assign_boundary(mesh, None, mixed=True)
    ms = plane_wave(Q, B=B)
    system = assemble("mixed", mesh, part, ProblemParams(B, Q, 10.0, k), ms)
    cells = np.arange(mesh.n_cells)
    ref, X, W = cell_quadrature(mesh, cells, error_quad_degree(k + 2))
    (phi,) = physical_basis(system.dof_maps["u"].element, mesh, cells, ref, 0)
    u = ms.value(X)
    M = np.einsum("cp,cpi,cpj->cij", W, phi, phi)
    c = np.linalg.solve(M, np.einsum("cp,cpi->ci", W * u, phi)[..., None])[..., 0]
    uh = np.einsum("cpi,ci->cp", phi, c)
    return float(np.sqrt(np.sum(W * (uh - u) ** 2)))


def main():
    logging.basicConfig(level=logging.WARNING)
    for (method, k), ref in REFERENCE.items():
        result = run_study(StudyConfig(method=method, k=k, q=Q, B=B, levels=(N,)))
        errors = result.reports[0].errors
        tag = result.config.tag()
        for name, value in ref.items():
            print(f"{tag:8s} {name:10s} computed {errors[name]:.4e}  reference {value:.4e}  "
                  f"ratio {errors[name] / value:.3g}")
        if method == "mixed":
            print(f"{tag:8s} l2 of the DG{k} L2 projection {dg_projection_error(k):.4e}")


if __name__ == "__main__":
    main()
