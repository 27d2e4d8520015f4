"""Uniform right-triangle mesh of the unit square with oriented edge topology."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INTERIOR = "interior"
BOTTOM = "bottom"
RIGHT = "right"
TOP = "top"
LEFT = "left"
BOUNDARY_TAGS = (BOTTOM, RIGHT, TOP, LEFT)


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation, immutable after construction.

    Each edge stores its two incident triangles as (plus, minus); the minus slot
    is -1 on the boundary.  The global edge normal points from the plus triangle
    into the minus one (outward from the domain on boundary edges).
    """

    vertices: np.ndarray      # (nv, 2) float
    triangles: np.ndarray     # (nt, 3) int, counter-clockwise
    edges: np.ndarray         # (ne, 2) int, sorted vertex pairs
    edge_to_tri: np.ndarray   # (ne, 2) int, (plus, minus); minus = -1 on boundary
    tri_to_edge: np.ndarray   # (nt, 3) int, global edge opposite local vertex l
    edge_normal: np.ndarray   # (ne, 2) float, unit, plus-to-minus
    edge_length: np.ndarray   # (ne,) float
    boundary_tag: np.ndarray  # (ne,) str, one of INTERIOR/BOTTOM/RIGHT/TOP/LEFT
    h: float

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_to_tri[:, 1] >= 0)

    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_to_tri[:, 1] < 0)


@dataclass(frozen=True)
class ElementGeometry:
    """Constant per-element data for a single triangle."""

    coords: np.ndarray     # (3, 2) vertex coordinates
    area: float
    grad_bary: np.ndarray  # (3, 2) gradients of the barycentric coordinates
    edge_len: np.ndarray   # (3,) length of edge opposite local vertex l
    normal: np.ndarray     # (3, 2) outward unit normal of edge l
    sign: np.ndarray       # (3,) global-vs-outward normal sign, +1 or -1
    edges: np.ndarray      # (3,) global edge indices


@dataclass(frozen=True)
class BatchGeometry:
    """Per-element geometry stacked over all triangles (leading axis nt)."""

    coords: np.ndarray     # (nt, 3, 2)
    area: np.ndarray       # (nt,)
    grad_bary: np.ndarray  # (nt, 3, 2)
    edge_len: np.ndarray   # (nt, 3)
    normal: np.ndarray     # (nt, 3, 2)
    sign: np.ndarray       # (nt, 3)
    edges: np.ndarray      # (nt, 3)


def _geometry_arrays(coords: np.ndarray):
    """Areas, barycentric gradients, edge data for coords of shape (..., 3, 2).

    Local edge l runs counter-clockwise from vertex l+1 to vertex l+2 and is
    opposite vertex l; its outward normal is the edge vector rotated by -90 deg.
    """
    ev = coords[..., [2, 0, 1], :] - coords[..., [1, 2, 0], :]   # (..., 3, 2)
    # twice the signed area from any vertex; CCW orientation makes it positive
    det = ev[..., 1, 0] * ev[..., 2, 1] - ev[..., 1, 1] * ev[..., 2, 0]
    area = 0.5 * det
    edge_len = np.sqrt(ev[..., 0] ** 2 + ev[..., 1] ** 2)
    normal = np.stack([ev[..., 1], -ev[..., 0]], axis=-1) / edge_len[..., None]
    # grad lambda_l = -|e_l| n_l / (2|T|): constant gradient of the hat function
    grad = -edge_len[..., None] * normal / (2.0 * area[..., None, None])
    return area, grad, edge_len, normal


def build_uniform_grid(n: int) -> Mesh:
    """N x N structured grid, each cell split along its lower-left -> upper-right diagonal."""
    if n < 1:
        raise ValueError(f"grid size must be a positive integer, got {n}")
    k = n + 1
    xs = np.linspace(0.0, 1.0, k)
    xv, yv = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    a = (iy * k + ix).ravel()          # lower-left corner of each cell
    b, c, d = a + 1, a + k + 1, a + k
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    # unique edges; local edge l joins vertices (l+1, l+2) mod 3
    raw = triangles[:, [[1, 2], [2, 0], [0, 1]]].reshape(-1, 2)
    raw.sort(axis=1)
    edges, inverse = np.unique(raw, axis=0, return_inverse=True)
    tri_to_edge = inverse.reshape(-1, 3)

    ne = edges.shape[0]
    order = np.argsort(inverse, kind="stable")
    tri_of = order // 3
    counts = np.bincount(inverse, minlength=ne)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    edge_to_tri = np.full((ne, 2), -1, dtype=np.int64)
    edge_to_tri[:, 0] = tri_of[starts]           # smaller incident index = plus side
    second = counts == 2
    edge_to_tri[second, 1] = tri_of[starts[second] + 1]

    coords = vertices[triangles]
    _, _, el_len, el_normal = _geometry_arrays(coords)
    local_of_edge = np.argmax(tri_to_edge[edge_to_tri[:, 0]] == np.arange(ne)[:, None], axis=1)
    edge_normal = el_normal[edge_to_tri[:, 0], local_of_edge]
    edge_length = el_len[edge_to_tri[:, 0], local_of_edge]

    mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    boundary_tag = np.full(ne, INTERIOR, dtype="<U8")
    boundary = edge_to_tri[:, 1] < 0
    boundary_tag[boundary & np.isclose(mid[:, 1], 0.0)] = BOTTOM
    boundary_tag[boundary & np.isclose(mid[:, 0], 1.0)] = RIGHT
    boundary_tag[boundary & np.isclose(mid[:, 1], 1.0)] = TOP
    boundary_tag[boundary & np.isclose(mid[:, 0], 0.0)] = LEFT

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_to_tri=edge_to_tri,
        tri_to_edge=tri_to_edge,
        edge_normal=edge_normal,
        edge_length=edge_length,
        boundary_tag=boundary_tag,
        h=1.0 / n,
    )


def _signs(mesh: Mesh) -> np.ndarray:
    """sigma[t, l] = +1 where triangle t is the plus side of its l-th edge."""
    ge = mesh.tri_to_edge
    return np.where(mesh.edge_to_tri[ge, 0] == np.arange(mesh.num_triangles)[:, None], 1.0, -1.0)


def element_geometry(mesh: Mesh, t: int) -> ElementGeometry:
    """Geometry of a single triangle; raises on a degenerate element."""
    coords = mesh.vertices[mesh.triangles[t]]
    area, grad, edge_len, normal = _geometry_arrays(coords)
    if area <= 0.0:
        raise ValueError(f"triangle {t} is degenerate or mis-oriented (area {area})")
    return ElementGeometry(
        coords=coords,
        area=float(area),
        grad_bary=grad,
        edge_len=edge_len,
        normal=normal,
        sign=_signs(mesh)[t],
        edges=mesh.tri_to_edge[t],
    )


def batch_geometry(mesh: Mesh) -> BatchGeometry:
    """Vectorized geometry over all triangles, for assembly."""
    coords = mesh.vertices[mesh.triangles]
    area, grad, edge_len, normal = _geometry_arrays(coords)
    if np.any(area <= 0.0):
        bad = int(np.argmin(area))
        raise ValueError(f"triangle {bad} is degenerate or mis-oriented (area {area[bad]})")
    return BatchGeometry(
        coords=coords,
        area=area,
        grad_bary=grad,
        edge_len=edge_len,
        normal=normal,
        sign=_signs(mesh),
        edges=mesh.tri_to_edge,
    )


def save_mesh_text(mesh: Mesh, path) -> None:
    """Plain-text dump: one "v x y" line per vertex, one "t i j k" line per triangle."""
    with open(path, "w") as fh:
        for x, y in mesh.vertices:
            fh.write(f"v {x:.17g} {y:.17g}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"t {i} {j} {k}\n")
