"""Quadrature rules on the reference triangle {x >= 0, y >= 0, x + y <= 1}."""

from __future__ import annotations

import numpy as np

MAX_DEGREE = 12


def gauss_legendre_01(n: int):
    """n-point Gauss-Legendre rule shifted to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def quadrature_rule(degree: int):
    """Points (nq, 2) and weights (nq,) exact for the given total degree.

    Weights sum to the reference area 1/2.  Degrees 1 and 2 use the classical
    centroid and edge-midpoint rules; higher degrees use a collapsed
    Gauss-Legendre product rule (square-to-triangle Duffy map), exact for any
    requested degree up to MAX_DEGREE.
    """
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"quadrature degree must be in [1, {MAX_DEGREE}], got {degree}")
    if degree == 1:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5])
    if degree == 2:
        pts = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
        return pts, np.full(3, 1.0 / 6.0)
    # x = u, y = v (1 - u) maps the unit square onto the triangle with
    # Jacobian (1 - u); the u-integrand picks up one extra degree
    nu = (degree + 3) // 2
    nv = (degree + 2) // 2
    u, wu = gauss_legendre_01(nu)
    v, wv = gauss_legendre_01(nv)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([uu.ravel(), (vv * (1.0 - uu)).ravel()])
    wts = (np.outer(wu * (1.0 - u), wv)).ravel()
    return pts, wts


def barycentric(points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates (nq, 3) of reference points, ordered (1-x-y, x, y)."""
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([1.0 - x - y, x, y])


def physical_points(coords: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Map reference points to elements; coords (..., 3, 2) -> (..., nq, 2)."""
    lam = barycentric(points)  # (nq, 3)
    return np.einsum("ql,...lk->...qk", lam, coords)
