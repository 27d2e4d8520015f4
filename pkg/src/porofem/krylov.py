"""Flexible GMRES and preconditioned CG with true-residual tracking."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


class IndefiniteOperatorError(RuntimeError):
    """CG detected a nonpositive curvature direction: operator or preconditioner not SPD."""


@dataclass
class SolverReport:
    iterations: int
    relative_residuals: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    flags: tuple = ()


def _as_apply(op):
    """Accept a callable, a sparse matrix, or an ndarray as the operator."""
    if op is None or callable(op):
        return op
    return lambda v: op @ v


def fgmres(
    apply_A,
    b: np.ndarray,
    *,
    apply_P=None,
    x0: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 500,
    restart: int | None = None,
):
    """Right-preconditioned flexible GMRES (no restart unless requested).

    The preconditioner may change between iterations (inner iterative solves);
    preconditioned directions are stored so the update remains exact.
    Convergence is measured on the unpreconditioned relative residual
    ||b - A x|| / ||b||, falling back to ||r0|| for a zero right-hand side.
    """
    t0 = time.perf_counter()
    A = _as_apply(apply_A)
    P = _as_apply(apply_P)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else x0.astype(float, copy=True)

    r = b - A(x)
    beta = float(np.linalg.norm(r))
    denom = float(np.linalg.norm(b)) or beta
    residuals = [beta / denom if denom else 0.0]
    if beta == 0.0 or residuals[0] <= tol:
        return x, SolverReport(0, residuals, True, time.perf_counter() - t0)

    cycle = max_iter if restart is None else min(restart, max_iter)
    total = 0
    flags = []
    while True:
        m = min(cycle, max_iter - total)
        V = np.empty((m + 1, n))
        Z = np.empty((m, n))
        H = np.zeros((m + 1, m))
        cs = np.empty(m)
        sn = np.empty(m)
        g = np.zeros(m + 1)
        V[0] = r / beta
        g[0] = beta

        k = 0
        exhausted = False
        for j in range(m):
            Z[j] = V[j] if P is None else P(V[j])
            w = A(Z[j])
            # modified Gram-Schmidt
            for i in range(j + 1):
                H[i, j] = V[i] @ w
                w -= H[i, j] * V[i]
            hnext = float(np.linalg.norm(w))
            H[j + 1, j] = hnext
            lucky = hnext <= 1e-14 * abs(H[j, j] if H[j, j] else 1.0)
            if not lucky:
                V[j + 1] = w / hnext
            # apply accumulated Givens rotations, then zero the new subdiagonal
            for i in range(j):
                hi, hj = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * hi + sn[i] * hj
                H[i + 1, j] = -sn[i] * hi + cs[i] * hj
            rho = float(np.hypot(H[j, j], H[j + 1, j]))
            if rho == 0.0:
                rho, H[j, j] = 1.0, 1.0
            cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
            H[j, j] = rho
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] *= cs[j]
            k = j + 1
            total += 1
            residuals.append(abs(g[j + 1]) / denom)
            if residuals[-1] <= tol or lucky:
                if lucky:
                    flags.append("breakdown")
                break
        else:
            exhausted = total >= max_iter

        y = np.linalg.solve(H[:k, :k], g[:k]) if k else np.zeros(0)
        x = x + y @ Z[:k]
        r = b - A(x)
        true_rel = float(np.linalg.norm(r)) / denom
        residuals[-1] = true_rel
        if true_rel <= tol:
            return x, SolverReport(total, residuals, True, time.perf_counter() - t0, tuple(flags))
        if exhausted or total >= max_iter or "breakdown" in flags:
            flags.append("stagnation" if "breakdown" not in flags else "breakdown_unconverged")
            return x, SolverReport(total, residuals, False, time.perf_counter() - t0, tuple(flags))
        beta = float(np.linalg.norm(r))  # restart


def pcg(
    apply_A,
    b: np.ndarray,
    *,
    apply_P=None,
    x0: np.ndarray | None = None,
    tol: float = 1e-3,
    max_iter: int = 200,
):
    """Preconditioned conjugate gradients for SPD operator and preconditioner."""
    t0 = time.perf_counter()
    A = _as_apply(apply_A)
    P = _as_apply(apply_P)
    x = np.zeros_like(b) if x0 is None else x0.astype(float, copy=True)

    r = b - A(x)
    denom = float(np.linalg.norm(b)) or float(np.linalg.norm(r))
    residuals = [float(np.linalg.norm(r)) / denom if denom else 0.0]
    if denom == 0.0 or residuals[0] <= tol:
        return x, SolverReport(0, residuals, True, time.perf_counter() - t0)

    z = r if P is None else P(r)
    p = z.copy()
    rz = float(r @ z)
    it = 0
    while it < max_iter:
        Ap = A(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise IndefiniteOperatorError(
                f"nonpositive curvature p.Ap = {pAp:.3e} at iteration {it}"
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        residuals.append(float(np.linalg.norm(r)) / denom)
        if residuals[-1] <= tol:
            return x, SolverReport(it, residuals, True, time.perf_counter() - t0)
        z = r if P is None else P(r)
        rz_new = float(r @ z)
        if rz_new <= 0.0:
            raise IndefiniteOperatorError("preconditioner produced nonpositive r.z")
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolverReport(it, residuals, False, time.perf_counter() - t0, ("stagnation",))
