"""Structured triangulations of the unit square and boundary tagging."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

SIDES = ("S", "N", "E", "W")
LABELS = ("02", "01", "32", "31")
DEFAULT_BOUNDARY = {"S": "02", "N": "01", "E": "32", "W": "31"}

# Derived unions: Gamma_i collects every label whose first or second index is i.
_UNIONS = {
    0: ("02", "01"),
    1: ("01", "31"),
    2: ("02", "32"),
    3: ("32", "31"),
}


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation with full cell/edge/vertex connectivity.

    Local edge ``i`` of a cell is the edge opposite local vertex ``i``, running
    from local vertex ``i+1`` to ``i+2`` (cyclically).  Global edges are stored
    lower vertex index first, and ``edge_to_cells[e, 0]`` is always the
    lower-indexed incident cell; the global edge normal points out of that cell.
    """

    n: int
    vertices: np.ndarray  # (V, 2)
    cells: np.ndarray  # (C, 3), counter-clockwise
    edges: np.ndarray  # (E, 2), lower index first
    cell_to_edges: np.ndarray  # (C, 3)
    cell_edge_signs: np.ndarray  # (C, 3): +1 if local edge direction is low->high
    edge_to_cells: np.ndarray  # (E, 2), -1 where absent
    boundary_edges: np.ndarray
    edge_normals: np.ndarray = field(repr=False)  # (E, 2) unit normals
    edge_lengths: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_to_cells[:, 1] >= 0)

    def jacobians(self) -> np.ndarray:
        """Affine map Jacobians ``J[c] = [x1 - x0, x2 - x0]`` (columns)."""
        x = self.vertices[self.cells]
        return np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]], axis=-1)

    def signed_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.det(self.jacobians())

    def cell_normal_signs(self) -> np.ndarray:
        """(C, 3) sign of the global edge normal relative to the outward normal."""
        owner = self.edge_to_cells[self.cell_to_edges, 0]
        return np.where(owner == np.arange(self.n_cells)[:, None], 1.0, -1.0)

    def to_text(self, partition: "BoundaryPartition | None" = None) -> str:
        lines = [f"# vertices {self.n_vertices}"]
        lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(self.vertices.tolist())]
        lines.append(f"# cells {self.n_cells}")
        lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(self.cells.tolist())]
        if partition is not None:
            lines.append(f"# boundary {len(self.boundary_edges)}")
            for e in self.boundary_edges.tolist():
                a, b = self.edges[e]
                lines.append(f"{e} {a} {b} {partition.label_of(e)}")
        return "\n".join(lines) + "\n"


def build_structured_mesh(n: int) -> Mesh:
    """Unit square split into ``n x n`` squares, each cut bottom-left to top-right."""
    if int(n) != n or n < 1:
        raise ValueError(f"number of subdivisions must be a positive integer, got {n!r}")
    n = int(n)
    idx = np.arange(n + 1)
    xs = idx / n
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([v00, v10, v11])
    cells[1::2] = np.column_stack([v00, v11, v01])

    local = np.stack([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]], axis=1)
    lo = local.min(axis=2)
    hi = local.max(axis=2)
    keys = lo * (n + 1) ** 2 + hi
    uniq, inverse = np.unique(keys.ravel(), return_inverse=True)
    edges = np.column_stack([uniq // (n + 1) ** 2, uniq % (n + 1) ** 2])
    cell_to_edges = inverse.reshape(-1, 3)
    cell_edge_signs = np.where(local[:, :, 0] < local[:, :, 1], 1, -1)

    E = len(edges)
    edge_to_cells = np.full((E, 2), -1, dtype=np.int64)
    flat_edges = cell_to_edges.ravel()
    flat_cells = np.repeat(np.arange(len(cells)), 3)
    order = np.lexsort((flat_cells, flat_edges))
    se, sc = flat_edges[order], flat_cells[order]
    first = np.ones(len(se), dtype=bool)
    first[1:] = se[1:] != se[:-1]
    edge_to_cells[se[first], 0] = sc[first]
    edge_to_cells[se[~first], 1] = sc[~first]
    boundary = np.flatnonzero(edge_to_cells[:, 1] < 0)

    # Outward normal of the owning cell: rotate the local edge direction clockwise.
    owner = edge_to_cells[:, 0]
    loc = np.argmax(cell_to_edges[owner] == np.arange(E)[:, None], axis=1)
    a = cells[owner, (loc + 1) % 3]
    b = cells[owner, (loc + 2) % 3]
    t = vertices[b] - vertices[a]
    lengths = np.hypot(t[:, 0], t[:, 1])
    normals = np.column_stack([t[:, 1], -t[:, 0]]) / lengths[:, None]

    return Mesh(
        n=n,
        vertices=vertices,
        cells=cells,
        edges=edges,
        cell_to_edges=cell_to_edges,
        cell_edge_signs=cell_edge_signs,
        edge_to_cells=edge_to_cells,
        boundary_edges=boundary,
        edge_normals=normals,
        edge_lengths=lengths,
    )


@dataclass(frozen=True, eq=False)
class BoundaryPartition:
    """Assignment of each boundary edge to one of the four condition pairs."""

    mesh: Mesh
    sides: Mapping[str, str]
    labels: Mapping[int, str]

    def label_of(self, edge: int) -> str:
        return self.labels[int(edge)]

    def edges_with(self, *labels: str) -> np.ndarray:
        wanted = set(labels)
        unknown = wanted - set(LABELS)
        if unknown:
            raise ValueError(f"unknown boundary labels {sorted(unknown)}")
        return np.array(
            [e for e in self.mesh.boundary_edges.tolist() if self.labels[e] in wanted],
            dtype=np.int64,
        )

    def gamma(self, i: int) -> np.ndarray:
        """Edges of Gamma_i, the union of pieces carrying a condition of order i."""
        return self.edges_with(*_UNIONS[i])

    def side_of(self, edge: int) -> str:
        return _side_of_midpoint(self.mesh, int(edge))


def _side_of_midpoint(mesh: Mesh, e: int) -> str:
    x, y = mesh.vertices[mesh.edges[e]].mean(axis=0)
    if y == 0.0:
        return "S"
    if y == 1.0:
        return "N"
    if x == 1.0:
        return "E"
    if x == 0.0:
        return "W"
    raise ValueError(f"edge {e} is not on the boundary of the unit square")


def parse_boundary_spec(text: str) -> dict[str, str]:
    """Parse ``"S=02,N=01,E=32,W=31"`` into a side -> label map."""
    spec: dict[str, str] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        side, _, label = item.partition("=")
        spec[side.strip().upper()] = label.strip()
    return spec


def assign_boundary(
    mesh: Mesh, spec: Mapping[str, str] | None = None, *, mixed: bool = False
) -> BoundaryPartition:
    """Tag every boundary edge by the side containing its midpoint."""
    spec = dict(DEFAULT_BOUNDARY if spec is None else spec)
    missing = [s for s in SIDES if s not in spec]
    extra = [s for s in spec if s not in SIDES]
    if missing or extra:
        raise ValueError(f"boundary spec must label each of S, N, E, W exactly once "
                         f"(missing {missing}, unexpected {extra})")
    bad = {s: l for s, l in spec.items() if l not in LABELS}
    if bad:
        raise ValueError(f"invalid boundary labels {bad}; allowed {LABELS}")
    if mixed and all(spec[s] == "31" for s in SIDES):
        raise ValueError("the mixed method requires part of the boundary outside Gamma_31")
    labels = {int(e): spec[_side_of_midpoint(mesh, int(e))] for e in mesh.boundary_edges}
    return BoundaryPartition(mesh=mesh, sides=spec, labels=labels)
