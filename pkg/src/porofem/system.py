"""Global block system, static condensation, and backward-Euler stepping.

The full five-family system (bubble, linear displacement, pressure, edge
multiplier, broken velocity) has the block layout

    [ D_bb      A_bl      alpha B_b^T   0            0        ] [U_b ]   [b_b ]
    [ A_bl^T    A_ll      alpha B_l^T   0            0        ] [U_l ]   [b_l ]
    [-alpha B_b -alpha B_l (1/M) M_p    0           -tau B_w  ] [P   ] = [b_p ]
    [ 0         0         0             0           -tau B_bt ] [Beta]   [b_bt]
    [ 0         0         tau B_w^T     tau B_bt^T   tau M_w  ] [W   ]   [b_w ]

with D_bb the diagonalized bubble stiffness.  Bubbles and velocities are
eliminated element-locally (D_bb is diagonal, M_w is 3x3-block diagonal),
leaving a three-field system in (U_l, P, Beta) of classical P1-RT0-P0 size.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dofs import BoundarySpec, DofMap
from .krylov import SolverReport
from .local_assembly import (
    bubble_div_row,
    local_bubble_blocks,
    local_div_p1,
    local_elasticity_p1,
    local_load,
    local_rt0,
)
from .mesh import Mesh, batch_geometry
from .params import PhysicalParams


@dataclass
class State:
    """Coefficient vectors of all five unknown families at one time level."""

    u_lin: np.ndarray
    u_bub: np.ndarray
    p: np.ndarray
    beta: np.ndarray
    w: np.ndarray

    @classmethod
    def zeros(cls, dofmap: DofMap) -> "State":
        return cls(
            u_lin=np.zeros(dofmap.n_ulin),
            u_bub=np.zeros(dofmap.n_bub),
            p=np.zeros(dofmap.n_p),
            beta=np.zeros(dofmap.n_beta),
            w=np.zeros(dofmap.n_w),
        )


@dataclass
class ProblemLoads:
    """Time-independent data of one backward-Euler step.

    f and g are vectorized callables of physical points (nq, 2); tractions maps
    a boundary tag to a constant traction vector on that side.
    """

    f: object = None
    g: object = None
    tractions: dict | None = None


@dataclass
class BlockSystem:
    """Assembled global blocks (constrained dofs removed) plus the RHS segments."""

    mesh: Mesh
    dofmap: DofMap
    params: PhysicalParams
    d_bb: np.ndarray          # (n_bub,) diagonal
    a_bl: sp.csr_matrix       # (n_bub, n_ulin)
    a_ll: sp.csr_matrix       # (n_ulin, n_ulin)
    b_b: sp.csr_matrix        # (n_p, n_bub)
    b_l: sp.csr_matrix        # (n_p, n_ulin)
    m_p: np.ndarray           # (n_p,) diagonal, entries |T|
    b_w: sp.csr_matrix        # (n_p, n_w)
    b_beta: sp.csr_matrix     # (n_beta, n_w)
    m_w: sp.csr_matrix        # (n_w, n_w), 3x3-element-block diagonal
    m_w_loc: np.ndarray       # (nt, 3, 3) element velocity mass blocks
    rhs_b: np.ndarray
    rhs_l: np.ndarray
    rhs_p: np.ndarray
    rhs_beta: np.ndarray
    rhs_w: np.ndarray

    def full_matrix(self) -> sp.csr_matrix:
        """Monolithic five-family matrix, mainly for oracles and export."""
        al, ta = self.params.alpha, self.params.tau
        Dbb = sp.diags(self.d_bb)
        Mp = sp.diags(self.m_p / self.params.M)
        rows = [
            [Dbb, self.a_bl, al * self.b_b.T, None, None],
            [self.a_bl.T, self.a_ll, al * self.b_l.T, None, None],
            [-al * self.b_b, -al * self.b_l, Mp, None, -ta * self.b_w],
            [None, None, None, None, -ta * self.b_beta],
            [None, None, ta * self.b_w.T, ta * self.b_beta.T, ta * self.m_w],
        ]
        shapes = [self.dofmap.n_bub, self.dofmap.n_ulin, self.dofmap.n_p,
                  self.dofmap.n_beta, self.dofmap.n_w]
        for i, ni in enumerate(shapes):  # keep empty families dimensioned
            if rows[i][i] is None:
                rows[i][i] = sp.csr_matrix((ni, ni))
        return sp.bmat(rows, format="csr")

    def full_rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs_b, self.rhs_l, self.rhs_p, self.rhs_beta, self.rhs_w])


@dataclass
class CondensedSystem:
    """Three-field system in (U_l, P, Beta) after eliminating bubbles and velocities."""

    a_u: sp.csr_matrix        # elasticity Schur complement, SPD
    b_u: sp.csr_matrix        # condensed displacement-pressure coupling (n_p, n_ulin)
    b_p: sp.csr_matrix        # pressure diagonal block
    c_pb: sp.csr_matrix       # pressure-multiplier coupling (n_p, n_beta)
    c_bb: sp.csr_matrix       # multiplier-multiplier block
    rhs_l: np.ndarray
    rhs_p: np.ndarray
    rhs_beta: np.ndarray
    d_bb_inv: np.ndarray      # retained for back-substitution
    m_w_inv: sp.csr_matrix
    n_ulin: int
    n_p: int
    n_beta: int
    alpha: float
    m_p: np.ndarray = field(default=None)  # pressure mass diagonal (element areas)
    _matrix: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.n_ulin + self.n_p + self.n_beta

    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            al = self.alpha
            self._matrix = sp.bmat(
                [
                    [self.a_u, al * self.b_u.T, None],
                    [-al * self.b_u, self.b_p, self.c_pb],
                    [None, self.c_pb.T, self.c_bb],
                ],
                format="csr",
            )
        return self._matrix

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs_l, self.rhs_p, self.rhs_beta])

    def split(self, x: np.ndarray):
        nl, npp = self.n_ulin, self.n_p
        return x[:nl], x[nl : nl + npp], x[nl + npp :]

    def pressure_multiplier_block(self) -> sp.csr_matrix:
        """[[B_p, C_pb], [C_pb^T, C_bb]], symmetric positive definite."""
        return sp.bmat([[self.b_p, self.c_pb], [self.c_pb.T, self.c_bb]], format="csr")


def _pad_gather(values: np.ndarray, index: np.ndarray) -> np.ndarray:
    """values[index] with index -1 mapping to 0 (constrained homogeneous dofs)."""
    return np.append(values, 0.0)[index]


def _scatter(vals, rows, cols, shape) -> sp.csr_matrix:
    """Accumulate (vals, rows, cols) into CSR, dropping entries with index -1."""
    keep = (rows >= 0) & (cols >= 0)
    mat = sp.coo_matrix(
        (vals[keep].ravel(), (rows[keep].ravel(), cols[keep].ravel())), shape=shape
    ).tocsr()
    mat.sum_duplicates()
    return mat


def _local_traction_array(mesh: Mesh, bc: BoundarySpec, tractions: dict | None):
    """Per-(element, local edge) constant traction vectors, or None if all zero."""
    if not tractions:
        return None
    t_arr = np.zeros((mesh.num_triangles, 3, 2))
    any_load = False
    for tag, vec in tractions.items():
        if tag not in bc.traction:
            raise ValueError(f"traction given on side {tag!r} not in the traction boundary")
        sel = np.flatnonzero(mesh.boundary_tag == tag)
        v = np.asarray(vec, dtype=float)
        if not v.any():
            continue
        any_load = True
        for e in sel:
            t = mesh.edge_to_tri[e, 0]
            l = int(np.flatnonzero(mesh.tri_to_edge[t] == e)[0])
            t_arr[t, l] = v
    return t_arr if any_load else None


def assemble_full(
    mesh: Mesh,
    dofmap: DofMap,
    params: PhysicalParams,
    bc: BoundarySpec,
    prev_state: State | None = None,
    loads: ProblemLoads | None = None,
    stabilized: bool = True,
) -> BlockSystem:
    """Scatter all element contributions into global blocks.

    With stabilized=False the bubble family is dropped entirely, giving the
    classical (unstable) P1-RT0-P0 discretization used as a comparison baseline.
    """
    geo = batch_geometry(mesh)
    nt = mesh.num_triangles
    lam, mu = params.lam, params.mu

    # displacement dof indices per element, interleaved (vertex, component)
    vdof = dofmap.vertex_dof[mesh.triangles].reshape(nt, 6)
    edof = dofmap.bubble_dof[mesh.tri_to_edge] if stabilized else np.full((nt, 3), -1)
    pdof = dofmap.pressure_dof[:, None]
    bdof = dofmap.beta_dof[mesh.tri_to_edge]
    wdof = dofmap.w_dof
    n_bub = dofmap.n_bub if stabilized else 0

    a_ll_loc = local_elasticity_p1(geo, lam, mu)
    a_ll = _scatter(a_ll_loc, vdof[:, :, None].repeat(6, 2), vdof[:, None, :].repeat(6, 1),
                    (dofmap.n_ulin, dofmap.n_ulin))
    div_l = local_div_p1(geo)
    b_l = _scatter(div_l, pdof.repeat(6, 1), vdof, (dofmap.n_p, dofmap.n_ulin))

    if stabilized:
        a_bl_loc, d_bb_loc, b_b_loc = local_bubble_blocks(geo, lam, mu)
        d_bb = np.zeros(n_bub)
        ok = edof >= 0
        np.add.at(d_bb, edof[ok], d_bb_loc[ok])
        a_bl = _scatter(a_bl_loc, edof[:, :, None].repeat(6, 2), vdof[:, None, :].repeat(3, 1),
                        (n_bub, dofmap.n_ulin))
        b_b = _scatter(b_b_loc, pdof.repeat(3, 1), edof, (dofmap.n_p, n_bub))
    else:
        d_bb = np.zeros(0)
        a_bl = sp.csr_matrix((0, dofmap.n_ulin))
        b_b = sp.csr_matrix((dofmap.n_p, 0))

    m_w_loc, b_w_loc, _ = local_rt0(geo, params.K)
    b_w = _scatter(b_w_loc, pdof.repeat(3, 1), wdof, (dofmap.n_p, dofmap.n_w))
    m_w = _scatter(m_w_loc, wdof[:, :, None].repeat(3, 2), wdof[:, None, :].repeat(3, 1),
                   (dofmap.n_w, dofmap.n_w))
    b_beta = _scatter(-geo.sign.copy(), bdof, wdof, (dofmap.n_beta, dofmap.n_w))

    # right-hand side
    prev_local = None
    if prev_state is not None:
        prev_local = (
            _pad_gather(prev_state.u_lin, vdof),
            _pad_gather(prev_state.u_bub, edof) if stabilized else np.zeros((nt, 3)),
            prev_state.p,
        )
    loads = loads or ProblemLoads()
    t_arr = _local_traction_array(mesh, bc, loads.tractions)
    ll = local_load(geo, params, f=loads.f, traction=t_arr, prev=prev_local, g=loads.g)

    rhs_b = np.zeros(n_bub)
    if stabilized:
        np.add.at(rhs_b, edof[ok], ll.b_bub[ok])
    rhs_l = np.zeros(dofmap.n_ulin)
    okv = vdof >= 0
    np.add.at(rhs_l, vdof[okv], ll.b_lin[okv])
    rhs_p = ll.b_p.copy()

    dm = dofmap if stabilized else _without_bubbles(dofmap)
    return BlockSystem(
        mesh=mesh, dofmap=dm, params=params,
        d_bb=d_bb, a_bl=a_bl, a_ll=a_ll, b_b=b_b, b_l=b_l,
        m_p=geo.area.copy(), b_w=b_w, b_beta=b_beta, m_w=m_w, m_w_loc=m_w_loc,
        rhs_b=rhs_b, rhs_l=rhs_l, rhs_p=rhs_p,
        rhs_beta=np.zeros(dofmap.n_beta), rhs_w=np.zeros(dofmap.n_w),
    )


def _without_bubbles(dofmap: DofMap) -> DofMap:
    from dataclasses import replace

    return replace(
        dofmap, n_bub=0, bubble_dof=np.full(dofmap.bubble_dof.shape, -1)
    )


def _block_diag_inverse(m_w_loc: np.ndarray, w_dof: np.ndarray, n_w: int) -> sp.csr_matrix:
    """Blockwise inverse of the element-block-diagonal velocity mass matrix.

    Constrained local dofs shrink an element block to its free principal
    submatrix, which stays SPD; elements are batched by free-dof count.
    """
    mask = w_dof >= 0
    counts = mask.sum(axis=1)
    rows, cols, vals = [], [], []
    for c in (1, 2, 3):
        sel = np.flatnonzero(counts == c)
        if sel.size == 0:
            continue
        pos = np.argsort(~mask[sel], kind="stable", axis=1)[:, :c]
        sub = m_w_loc[sel[:, None, None], pos[:, :, None], pos[:, None, :]]
        inv = np.linalg.inv(sub)
        gd = np.take_along_axis(w_dof[sel], pos, axis=1)  # (nsel, c)
        rows.append(np.broadcast_to(gd[:, :, None], inv.shape).ravel())
        cols.append(np.broadcast_to(gd[:, None, :], inv.shape).ravel())
        vals.append(inv.ravel())
    if rows:
        data = (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols)))
    else:
        data = (np.zeros(0), (np.zeros(0, int), np.zeros(0, int)))
    return sp.coo_matrix(data, shape=(n_w, n_w)).tocsr()


def condense(system: BlockSystem) -> CondensedSystem:
    """Eliminate bubbles and velocities, forming the three-field matrix explicitly."""
    p = system.params
    al, ta = p.alpha, p.tau
    if system.d_bb.size and system.d_bb.min() <= 0.0:
        raise ValueError("bubble stiffness diagonal must be positive")
    d_inv = 1.0 / system.d_bb if system.d_bb.size else system.d_bb
    Dinv = sp.diags(d_inv, shape=(system.d_bb.size,) * 2)
    m_w_inv = _block_diag_inverse(system.m_w_loc, system.dofmap.w_dof, system.dofmap.n_w)

    a_u = (system.a_ll - system.a_bl.T @ Dinv @ system.a_bl).tocsr()
    b_u = (system.b_l - system.b_b @ Dinv @ system.a_bl).tocsr()
    b_p = (
        sp.diags(system.m_p / p.M)
        + al**2 * system.b_b @ Dinv @ system.b_b.T
        + ta * system.b_w @ m_w_inv @ system.b_w.T
    ).tocsr()
    c_pb = (ta * system.b_w @ m_w_inv @ system.b_beta.T).tocsr()
    c_bb = (ta * system.b_beta @ m_w_inv @ system.b_beta.T).tocsr()

    rhs_l = system.rhs_l - system.a_bl.T @ (d_inv * system.rhs_b)
    rhs_p = system.rhs_p + al * system.b_b @ (d_inv * system.rhs_b) \
        + system.b_w @ (m_w_inv @ system.rhs_w)
    rhs_beta = system.rhs_beta + system.b_beta @ (m_w_inv @ system.rhs_w)

    return CondensedSystem(
        a_u=a_u, b_u=b_u, b_p=b_p, c_pb=c_pb, c_bb=c_bb,
        rhs_l=rhs_l, rhs_p=rhs_p, rhs_beta=rhs_beta,
        d_bb_inv=d_inv, m_w_inv=m_w_inv,
        n_ulin=system.dofmap.n_ulin, n_p=system.dofmap.n_p, n_beta=system.dofmap.n_beta,
        alpha=al, m_p=np.asarray(system.m_p).copy(),
    )


def back_substitute(system: BlockSystem, cond: CondensedSystem, solution: np.ndarray) -> State:
    """Recover bubbles and velocities from the condensed solution (U_l, P, Beta)."""
    u_l, pres, beta = cond.split(solution)
    p = system.params
    u_b = cond.d_bb_inv * (
        system.rhs_b - system.a_bl @ u_l - p.alpha * (system.b_b.T @ pres)
    )
    w = cond.m_w_inv @ (
        system.rhs_w / p.tau - system.b_w.T @ pres - system.b_beta.T @ beta
    )
    return State(u_lin=u_l, u_bub=u_b, p=pres, beta=beta, w=w)


def solve_direct(cond: CondensedSystem):
    """Sparse LU solve of the condensed system."""
    t0 = time.perf_counter()
    lu = spla.splu(cond.matrix().tocsc())
    x = lu.solve(cond.rhs())
    rep = SolverReport(0, [], True, time.perf_counter() - t0, ("direct",))
    return x, rep


def step(
    state_prev: State,
    mesh: Mesh,
    dofmap: DofMap,
    params: PhysicalParams,
    bc: BoundarySpec,
    loads: ProblemLoads | None = None,
    solver=None,
    stabilized: bool = True,
):
    """One backward-Euler step; solver is a callable (CondensedSystem) -> (x, report)."""
    system = assemble_full(mesh, dofmap, params, bc, prev_state=state_prev,
                           loads=loads, stabilized=stabilized)
    cond = condense(system)
    x, report = (solver or solve_direct)(cond)
    return back_substitute(system, cond, x), report


def save_matrix_market(system_or_cond, path) -> None:
    """Matrix Market export of the full or condensed matrix for external checks."""
    from scipy.io import mmwrite

    mat = (
        system_or_cond.full_matrix()
        if isinstance(system_or_cond, BlockSystem)
        else system_or_cond.matrix()
    )
    mmwrite(str(path), mat.tocoo())
