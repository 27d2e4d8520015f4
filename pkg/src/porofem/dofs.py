"""Degree-of-freedom enumeration for the five unknown families.

Families are numbered contiguously in the order (bubble, linear displacement,
pressure, edge multiplier, broken velocity), matching the block layout of the
full stabilized system.  Constrained entities map to -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import BOUNDARY_TAGS, Mesh


@dataclass(frozen=True)
class BoundarySpec:
    """Which boundary sides carry which homogeneous condition.

    The pairs (displacement_dirichlet, traction) and (no_flow, pressure_dirichlet)
    must each partition the four sides of the square.
    """

    displacement_dirichlet: frozenset = frozenset(BOUNDARY_TAGS)
    traction: frozenset = frozenset()
    no_flow: frozenset = frozenset(BOUNDARY_TAGS)
    pressure_dirichlet: frozenset = frozenset()

    def __post_init__(self):
        for name in ("displacement_dirichlet", "traction", "no_flow", "pressure_dirichlet"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        all_tags = set(BOUNDARY_TAGS)
        for a, b, label in (
            (self.displacement_dirichlet, self.traction, "displacement/traction"),
            (self.no_flow, self.pressure_dirichlet, "no-flow/pressure"),
        ):
            unknown = (a | b) - all_tags
            if unknown:
                raise ValueError(f"unknown boundary tags {sorted(unknown)}")
            if a | b != all_tags:
                missing = all_tags - (a | b)
                raise ValueError(f"sides {sorted(missing)} carry no {label} condition")
            if a & b:
                raise ValueError(f"sides {sorted(a & b)} carry two {label} conditions")


def fully_clamped() -> BoundarySpec:
    """u = 0 and w.n = 0 on the whole boundary (manufactured-solution setup)."""
    return BoundarySpec()


def cantilever_clamped_left() -> BoundarySpec:
    """u = 0 on the left side, traction elsewhere; w.n = 0 everywhere."""
    return BoundarySpec(
        displacement_dirichlet=frozenset({"left"}),
        traction=frozenset({"bottom", "right", "top"}),
    )


@dataclass(frozen=True)
class DofMap:
    """Gap-free global numbering per family; -1 marks a constrained entity."""

    n_ulin: int
    n_bub: int
    n_p: int
    n_beta: int
    n_w: int
    vertex_dof: np.ndarray  # (nv, 2) linear-displacement dof per component
    bubble_dof: np.ndarray  # (ne,)
    pressure_dof: np.ndarray  # (nt,)
    beta_dof: np.ndarray    # (ne,)
    w_dof: np.ndarray       # (nt, 3) broken velocity dof per local edge

    @property
    def full_dim(self) -> int:
        return self.n_bub + self.n_ulin + self.n_p + self.n_beta + self.n_w

    @property
    def condensed_dim(self) -> int:
        return self.n_ulin + self.n_p + self.n_beta

    # offsets of each family in the full (uncondensed) block vector
    @property
    def offset_bubble(self) -> int:
        return 0

    @property
    def offset_linear(self) -> int:
        return self.n_bub

    @property
    def offset_pressure(self) -> int:
        return self.n_bub + self.n_ulin

    @property
    def offset_beta(self) -> int:
        return self.n_bub + self.n_ulin + self.n_p

    @property
    def offset_w(self) -> int:
        return self.n_bub + self.n_ulin + self.n_p + self.n_beta


def bubble_edge_set(mesh: Mesh, bc: BoundarySpec) -> np.ndarray:
    """Edges carrying a normal bubble: interior plus traction-boundary edges.

    Bubbles on displacement-Dirichlet edges would violate the essential
    condition, so those edges are excluded.
    """
    keep = mesh.edge_to_tri[:, 1] >= 0
    for tag in bc.traction:
        keep |= mesh.boundary_tag == tag
    return np.flatnonzero(keep)


def build_dof_map(mesh: Mesh, bc: BoundarySpec) -> DofMap:
    nv, nt, ne = mesh.num_vertices, mesh.num_triangles, mesh.num_edges

    # vertices on any displacement-Dirichlet edge are fully clamped
    vertex_fixed = np.zeros(nv, dtype=bool)
    dirichlet_edge = np.isin(mesh.boundary_tag, sorted(bc.displacement_dirichlet))
    vertex_fixed[mesh.edges[dirichlet_edge].ravel()] = True
    vertex_dof = np.full((nv, 2), -1, dtype=np.int64)
    free = ~vertex_fixed
    vertex_dof[free] = 2 * np.cumsum(free)[free][:, None] - 2 + np.array([0, 1])
    n_ulin = 2 * int(free.sum())

    bubble_edges = bubble_edge_set(mesh, bc)
    bubble_dof = np.full(ne, -1, dtype=np.int64)
    bubble_dof[bubble_edges] = np.arange(bubble_edges.size)
    n_bub = bubble_edges.size

    pressure_dof = np.arange(nt, dtype=np.int64)

    # multipliers live on interior edges; on pressure-Dirichlet boundary edges
    # they carry the essential value 0 and are eliminated, on no-flow edges the
    # velocity dof is constrained instead and no multiplier exists
    beta_free = mesh.edge_to_tri[:, 1] >= 0
    beta_dof = np.full(ne, -1, dtype=np.int64)
    beta_dof[beta_free] = np.arange(int(beta_free.sum()))
    n_beta = int(beta_free.sum())

    no_flow_edge = np.isin(mesh.boundary_tag, sorted(bc.no_flow))
    w_free = ~no_flow_edge[mesh.tri_to_edge]  # (nt, 3)
    w_dof = np.full((nt, 3), -1, dtype=np.int64)
    w_dof[w_free] = np.arange(int(w_free.sum()))
    n_w = int(w_free.sum())

    return DofMap(
        n_ulin=n_ulin,
        n_bub=n_bub,
        n_p=nt,
        n_beta=n_beta,
        n_w=n_w,
        vertex_dof=vertex_dof,
        bubble_dof=bubble_dof,
        pressure_dof=pressure_dof,
        beta_dof=beta_dof,
        w_dof=w_dof,
    )
