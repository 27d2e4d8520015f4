"""Unsmoothed-aggregation algebraic multigrid.

The hierarchy is built by greedy aggregation of strongly coupled unknowns:
a connection i-j is *strong* when ``|a_ij| >= theta * sqrt(a_ii * a_jj)``.
Each aggregate contributes one coarse unknown, the tentative prolongation is
the 0/1 aggregate indicator matrix, and coarse operators are Galerkin
products ``P.T @ A @ P``.  Coarsening stops once the operator is small
enough for a direct factorization (or no further coarsening is possible).

A single V(1,1) cycle -- forward Gauss-Seidel pre-smoothing, coarse-grid
correction, backward Gauss-Seidel post-smoothing -- defines the application
of the hierarchy to a residual.  Because the post-smoother is the adjoint of
the pre-smoother, the induced operator is symmetric positive definite and is
therefore a valid conjugate-gradient preconditioner.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "AmgConfig",
    "AmgLevel",
    "AmgHierarchy",
    "ua_amg_setup",
    "vcycle_apply",
]


@dataclass(frozen=True)
class AmgConfig:
    """Knobs for hierarchy construction.

    strength_threshold: relative coupling size below which a connection is
        ignored during aggregation.
    max_coarse: stop coarsening once the operator has at most this many rows.
    max_levels: hard cap on the number of levels (including the coarsest).
    """

    strength_threshold: float = 0.08
    max_coarse: int = 64
    max_levels: int = 25

    def __post_init__(self) -> None:
        if not 0.0 <= self.strength_threshold < 1.0:
            raise ValueError("strength_threshold must lie in [0, 1)")
        if self.max_coarse < 1:
            raise ValueError("max_coarse must be positive")
        if self.max_levels < 1:
            raise ValueError("max_levels must be positive")


@dataclass
class AmgLevel:
    """One fine level: its operator, aggregation map, and smoother factors."""

    matrix: sp.csr_matrix
    aggregate_of: np.ndarray
    prolongation: sp.csr_matrix
    lower_solve: spla.SuperLU
    upper_solve: spla.SuperLU


@dataclass
class AmgHierarchy:
    levels: list[AmgLevel]
    coarse_matrix: sp.csr_matrix
    coarse_factor: spla.SuperLU
    config: AmgConfig
    level_sizes: tuple[int, ...] = field(default=())

    @property
    def num_levels(self) -> int:
        return len(self.levels) + 1


def _strength_graph(a: sp.csr_matrix, theta: float) -> sp.csr_matrix:
    """Symmetric adjacency of strong off-diagonal couplings.

    Entry values are |a_ij| so that callers can rank neighbours by coupling
    strength; weak and diagonal entries are dropped.
    """
    coo = a.tocoo()
    scale = np.sqrt(np.abs(a.diagonal()))
    mag = np.abs(coo.data)
    keep = (coo.row != coo.col) & (mag >= theta * scale[coo.row] * scale[coo.col])
    keep &= mag > 0.0
    s = sp.coo_matrix(
        (mag[keep], (coo.row[keep], coo.col[keep])), shape=a.shape
    ).tocsr()
    return s.maximum(s.T).tocsr()


def _aggregate(strength: sp.csr_matrix) -> tuple[np.ndarray, int]:
    """Greedy aggregation over the strength graph.

    Pass 1 turns each still-free node whose strong neighbourhood is entirely
    free into a new aggregate together with that neighbourhood.  Pass 2
    attaches the remaining nodes to the neighbouring aggregate with the
    strongest coupling, judged against the pass-1 state so late attachments
    do not chain.  Pass 3 is a safety net that makes singletons out of
    anything still unassigned.
    """
    n = strength.shape[0]
    indptr, indices, weights = strength.indptr, strength.indices, strength.data
    aggregate = np.full(n, -1, dtype=np.int64)
    count = 0

    for i in range(n):
        if aggregate[i] != -1:
            continue
        nbrs = indices[indptr[i] : indptr[i + 1]]
        if (aggregate[nbrs] == -1).all():
            aggregate[i] = count
            aggregate[nbrs] = count
            count += 1

    attached = aggregate.copy()
    for i in range(n):
        if aggregate[i] != -1:
            continue
        nbrs = indices[indptr[i] : indptr[i + 1]]
        owners = aggregate[nbrs]
        hit = owners != -1
        if hit.any():
            w = weights[indptr[i] : indptr[i + 1]]
            best = np.flatnonzero(hit)[np.argmax(w[hit])]
            attached[i] = owners[best]
    aggregate = attached

    for i in range(n):
        if aggregate[i] == -1:
            aggregate[i] = count
            count += 1
    return aggregate, count


def _tentative_prolongation(aggregate: np.ndarray, count: int) -> sp.csr_matrix:
    n = aggregate.shape[0]
    return sp.csr_matrix(
        (np.ones(n), (np.arange(n), aggregate)), shape=(n, count)
    )


def _triangular_factors(a: sp.csr_matrix) -> tuple[spla.SuperLU, spla.SuperLU]:
    """LU handles for the lower (D+L) and upper (D+U) Gauss-Seidel sweeps.

    Natural ordering keeps the factorization of an already-triangular matrix
    trivial, so each handle amounts to a fast sparse triangular solve.
    """
    lower = sp.tril(a).tocsc()
    upper = sp.triu(a).tocsc()
    # Pin the pivot to the diagonal: partial pivoting would permute rows of a
    # badly scaled triangular matrix, causing fill and slow solves.  The
    # diagonal is that of an SPD matrix, so it is always a valid pivot.
    opts = dict(SymmetricMode=False, DiagPivotThresh=0.0)
    return (
        spla.splu(lower, permc_spec="NATURAL", options=opts),
        spla.splu(upper, permc_spec="NATURAL", options=opts),
    )


def ua_amg_setup(a: sp.spmatrix, config: AmgConfig | None = None) -> AmgHierarchy:
    """Build an aggregation hierarchy for a symmetric positive definite matrix."""
    config = config or AmgConfig()
    a = sp.csr_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("operator must be square")
    if (a.diagonal() <= 0.0).any():
        raise ValueError("operator must have a positive diagonal")

    levels: list[AmgLevel] = []
    sizes = [a.shape[0]]
    while a.shape[0] > config.max_coarse and len(levels) + 1 < config.max_levels:
        strength = _strength_graph(a, config.strength_threshold)
        aggregate, count = _aggregate(strength)
        if count >= a.shape[0]:
            break
        p = _tentative_prolongation(aggregate, count)
        lower, upper = _triangular_factors(a)
        levels.append(AmgLevel(a, aggregate, p, lower, upper))
        a = (p.T @ a @ p).tocsr()
        a.sum_duplicates()
        sizes.append(a.shape[0])

    # A sparse factorization: aggregation can stall with a coarse level that is
    # large but still sparse, where a dense Cholesky would dominate the setup.
    coarse_factor = spla.splu(sp.csc_matrix(a))
    return AmgHierarchy(levels, a, coarse_factor, config, tuple(sizes))


def _cycle(h: AmgHierarchy, depth: int, r: np.ndarray) -> np.ndarray:
    if depth == len(h.levels):
        return h.coarse_factor.solve(r)
    lvl = h.levels[depth]
    a = lvl.matrix
    x = lvl.lower_solve.solve(r)
    coarse_residual = lvl.prolongation.T @ (r - a @ x)
    x = x + lvl.prolongation @ _cycle(h, depth + 1, coarse_residual)
    return x + lvl.upper_solve.solve(r - a @ x)


def vcycle_apply(h: AmgHierarchy, r: np.ndarray) -> np.ndarray:
    """Apply one V(1,1) cycle to a residual (zero initial guess)."""
    r = np.asarray(r, dtype=float)
    if r.shape != (h.level_sizes[0],):
        raise ValueError(
            f"residual has shape {r.shape}, expected ({h.level_sizes[0]},)"
        )
    return _cycle(h, 0, r)
