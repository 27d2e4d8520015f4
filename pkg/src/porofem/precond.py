"""Block preconditioners for the condensed three-field operator.

The condensed system couples displacement with a grouped pressure+multiplier
unknown.  Preconditioners invert the block diagonal

    X = blockdiag(A_u, A_pb),

where A_u is the displacement Schur complement and A_pb is the grouped
pressure-multiplier block augmented by (alpha^2 / zeta^2) M_p on its
pressure-pressure part (the augmentation makes the block uniformly SPD across
parameter regimes).  Three kinds are provided:

    diag  : z = X^{-1} r
    lower : invert [[A_u, 0], [-alpha B, A_pb]]
    upper : invert [[A_u, alpha B^T], [0, A_pb]]

with B the condensed displacement-to-pressure coupling padded by zero
multiplier rows.  Each diagonal block is solved either exactly (sparse direct
factorization) or inexactly (conjugate gradients preconditioned by an
aggregation-multigrid V-cycle, to a fixed inner tolerance).

``fov_probe`` computes dense spectral surrogates for the preconditioned
operator's condition number (diag) or its field-of-values bounds in the
X-weighted inner product (lower/upper); it is intended for small systems only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .amg import AmgConfig, ua_amg_setup, vcycle_apply
from .krylov import pcg
from .params import PhysicalParams
from .system import CondensedSystem

__all__ = [
    "PrecondConfig",
    "PrecondBlocks",
    "Preconditioner",
    "build_blocks",
    "build_preconditioner",
    "make_inner_solvers",
    "fov_probe",
]

KINDS = ("diag", "lower", "upper")
INNER_MODES = ("exact", "inexact")


@dataclass(frozen=True)
class PrecondConfig:
    kind: str = "diag"
    inner: str = "exact"
    inner_tol: float = 1e-3
    inner_max_iter: int = 200
    amg: AmgConfig = field(default_factory=AmgConfig)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.inner not in INNER_MODES:
            raise ValueError(
                f"inner must be one of {INNER_MODES}, got {self.inner!r}"
            )
        if self.inner == "inexact" and not 0.0 < self.inner_tol < 1.0:
            raise ValueError("inner_tol must lie in (0, 1) for inexact mode")
        if self.inner_max_iter < 1:
            raise ValueError("inner_max_iter must be positive")


@dataclass
class PrecondBlocks:
    """Sparse blocks shared by every preconditioner kind."""

    a_u: sp.csr_matrix    # displacement Schur complement
    a_pb: sp.csr_matrix   # augmented pressure-multiplier block
    b_u: sp.csr_matrix    # displacement -> pressure coupling (n_p, n_u)
    n_u: int
    n_p: int
    n_beta: int
    alpha: float


def build_blocks(cond: CondensedSystem, params: PhysicalParams) -> PrecondBlocks:
    """Extract and augment the diagonal blocks of the condensed system."""
    a_pb = cond.pressure_multiplier_block().tocsr(copy=True)
    augment = np.zeros(cond.n_p + cond.n_beta)
    augment[: cond.n_p] = (params.alpha / params.zeta) ** 2 * cond.m_p
    a_pb = (a_pb + sp.diags(augment)).tocsr()
    return PrecondBlocks(
        a_u=cond.a_u,
        a_pb=a_pb,
        b_u=cond.b_u,
        n_u=cond.n_ulin,
        n_p=cond.n_p,
        n_beta=cond.n_beta,
        alpha=params.alpha,
    )


class _ExactSolve:
    def __init__(self, matrix: sp.csr_matrix):
        self._lu = spla.splu(matrix.tocsc()) if matrix.shape[0] else None

    def __call__(self, r: np.ndarray, owner=None) -> np.ndarray:
        if self._lu is None:
            return np.zeros(0)
        return self._lu.solve(r)


class _InexactSolve:
    def __init__(self, matrix: sp.csr_matrix, config: PrecondConfig):
        self._matrix = matrix
        self._hierarchy = (
            ua_amg_setup(matrix, config.amg) if matrix.shape[0] else None
        )
        self._tol = config.inner_tol
        self._max_iter = config.inner_max_iter

    def __call__(self, r: np.ndarray, owner=None) -> np.ndarray:
        if self._hierarchy is None:
            return np.zeros(0)
        z, report = pcg(
            self._matrix,
            r,
            apply_P=lambda v: vcycle_apply(self._hierarchy, v),
            tol=self._tol,
            max_iter=self._max_iter,
        )
        if owner is not None:
            owner.inner_iterations += report.iterations
            if not report.converged:
                owner.inner_overruns += 1
        return z


def make_inner_solvers(blocks: PrecondBlocks, config: PrecondConfig):
    """Factor (exact) or AMG-setup (inexact) both diagonal blocks once.

    The returned pair can be shared by several ``Preconditioner`` instances of
    different kinds; solve statistics are attributed to whichever instance
    performs the call.
    """
    make = _ExactSolve if config.inner == "exact" else (
        lambda m: _InexactSolve(m, config)
    )
    return make(blocks.a_u), make(blocks.a_pb)


class Preconditioner:
    """Apply-callback wrapper; pass directly as the solver's ``apply_P``.

    ``inner_overruns`` counts inexact inner solves that hit the iteration cap
    without reaching the inner tolerance; a nonzero value taints the run.
    """

    def __init__(self, blocks: PrecondBlocks, config: PrecondConfig, solvers=None):
        self.blocks = blocks
        self.config = config
        self._solve_u, self._solve_pb = solvers or make_inner_solvers(blocks, config)
        self.inner_iterations = 0
        self.inner_overruns = 0

    def reset_inner_stats(self) -> None:
        self.inner_iterations = 0
        self.inner_overruns = 0

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        b = self.blocks
        ru, rpb = r[: b.n_u], r[b.n_u :]
        if self.config.kind == "diag":
            zu = self._solve_u(ru, self)
            zpb = self._solve_pb(rpb, self)
        elif self.config.kind == "lower":
            zu = self._solve_u(ru, self)
            shifted = rpb.copy()
            shifted[: b.n_p] += b.alpha * (b.b_u @ zu)
            zpb = self._solve_pb(shifted, self)
        else:  # upper
            zpb = self._solve_pb(rpb, self)
            zu = self._solve_u(ru - b.alpha * (b.b_u.T @ zpb[: b.n_p]), self)
        return np.concatenate([zu, zpb])


def build_preconditioner(
    cond: CondensedSystem,
    params: PhysicalParams,
    config: PrecondConfig | None = None,
    blocks: PrecondBlocks | None = None,
    solvers=None,
) -> Preconditioner:
    """Build the preconditioner; pass precomputed ``blocks``/``solvers`` to share them."""
    config = config or PrecondConfig()
    if blocks is None:
        blocks = build_blocks(cond, params)
    return Preconditioner(blocks, config, solvers=solvers)


def _triangular_matrix(blocks: PrecondBlocks, kind: str) -> np.ndarray:
    au = blocks.a_u.toarray()
    apb = blocks.a_pb.toarray()
    coupling = np.zeros((blocks.n_p + blocks.n_beta, blocks.n_u))
    coupling[: blocks.n_p] = blocks.alpha * blocks.b_u.toarray()
    top = np.hstack([au, coupling.T if kind == "upper" else np.zeros(coupling.T.shape)])
    bottom = np.hstack([-coupling if kind == "lower" else np.zeros(coupling.shape), apb])
    return np.vstack([top, bottom])


def fov_probe(
    cond: CondensedSystem,
    blocks: PrecondBlocks,
    kind: str,
    max_dim: int = 2000,
) -> tuple[float, float]:
    """Dense spectral bounds for the preconditioned operator.

    diag: extreme generalized singular values of the system matrix in the
    blockdiag(A_u, A_pb)-weighted norm; their ratio estimates the condition
    number of the diag-preconditioned operator.

    lower/upper: (minimum eigenvalue of the weighted symmetric part, weighted
    operator norm) of the preconditioned matrix -- field-of-values bounds; a
    positive lower value certifies residual-minimization convergence.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if cond.dim > max_dim:
        raise ValueError(
            f"system dimension {cond.dim} exceeds dense probe cap {max_dim}"
        )
    a = cond.matrix().toarray()
    x = sla.block_diag(blocks.a_u.toarray(), blocks.a_pb.toarray())
    x = 0.5 * (x + x.T)

    if kind == "diag":
        y = sla.solve(x, a, assume_a="pos")
        gram = a.T @ y
        eigs = sla.eigh(0.5 * (gram + gram.T), x, eigvals_only=True)
        sigma = np.sqrt(np.clip(eigs, 0.0, None))
        return float(sigma[0]), float(sigma[-1])

    t = _triangular_matrix(blocks, kind)
    m = sla.solve(t, a)
    s = x @ m
    lower = sla.eigh(0.5 * (s + s.T), x, eigvals_only=True)[0]
    gram = m.T @ x @ m
    upper = np.sqrt(
        np.clip(sla.eigh(0.5 * (gram + gram.T), x, eigvals_only=True)[-1], 0.0, None)
    )
    return float(lower), float(upper)
