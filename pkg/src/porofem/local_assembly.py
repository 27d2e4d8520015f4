"""Per-element matrices and loads for the stabilized three-field discretization.

All functions accept either a single ElementGeometry or a BatchGeometry and
broadcast over leading axes; the local dof orders are

    linear displacement: (v0x, v0y, v1x, v1y, v2x, v2y)
    bubbles / velocities / multipliers: local edge a (opposite vertex a)

Bubbles are edge-normal fields Phi_a = phi_a n_a with phi_a the product of the
barycentric coordinates of the edge endpoints and n_a the *global* unit normal
of the edge; broken lowest-order Raviart-Thomas velocities likewise carry the
global-flux orientation, so an interior edge sees equal dof values from both
sides when the normal flux is continuous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import PhysicalParams
from .quadrature import barycentric, physical_points, quadrature_rule

# endpoints of local edge a = ((a+1) % 3, (a+2) % 3)
_EP0 = np.array([1, 2, 0])
_EP1 = np.array([2, 0, 1])

SPACE_DIM = 2


def _p1_strains(grad: np.ndarray) -> np.ndarray:
    """Strain tensors (..., 6, 2, 2) of the nodal basis fields phi_l e_k."""
    G = np.zeros(grad.shape[:-2] + (6, 2, 2))
    G[..., 0::2, 0, :] = grad
    G[..., 1::2, 1, :] = grad
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def _p1_divs(grad: np.ndarray) -> np.ndarray:
    """Divergences (..., 6) of the nodal basis fields."""
    return grad.reshape(grad.shape[:-2] + (6,))


def _global_normals(geom) -> np.ndarray:
    return np.asarray(geom.sign)[..., None] * np.asarray(geom.normal)


def _bubble_gradients(geom, points: np.ndarray) -> np.ndarray:
    """grad phi_a at reference points; returns (..., nq, 3, 2)."""
    grad = np.asarray(geom.grad_bary)
    bl = barycentric(points)  # (nq, 3)
    g0 = grad[..., None, _EP0, :]
    g1 = grad[..., None, _EP1, :]
    return bl[:, _EP0, None] * g1 + bl[:, _EP1, None] * g0


def local_elasticity_p1(geom, lam: float, mu: float) -> np.ndarray:
    """Exact 6x6 element matrix of 2 mu (eps, eps) + lam (div, div)."""
    grad = np.asarray(geom.grad_bary)
    area = np.asarray(geom.area)
    eps = _p1_strains(grad)
    div = _p1_divs(grad)
    full = 2.0 * mu * np.einsum("...aij,...bij->...ab", eps, eps)
    full += lam * div[..., :, None] * div[..., None, :]
    return area[..., None, None] * full


def local_div_p1(geom) -> np.ndarray:
    """Row of -(div u_h, 1)_T over the 6 linear dofs."""
    return -np.asarray(geom.area)[..., None] * _p1_divs(np.asarray(geom.grad_bary))


def bubble_div_row(geom) -> np.ndarray:
    """Row of -(div Phi_a, 1)_T = -sigma_a |e_a| / 6 over the 3 bubble dofs."""
    return -np.asarray(geom.sign) * np.asarray(geom.edge_len) / 6.0


def _bubble_strain_div(geom, points: np.ndarray):
    """Strains (..., nq, 3, 2, 2) and divergences (..., nq, 3) of the bubbles."""
    normals = _global_normals(geom)
    gphi = _bubble_gradients(geom, points)  # (..., nq, 3, 2)
    outer = normals[..., None, :, :, None] * gphi[..., :, None, :]
    eps = 0.5 * (outer + np.swapaxes(outer, -1, -2))
    div = np.einsum("...ai,...qai->...qa", normals, gphi)
    return eps, div


def local_bubble_stiffness(geom, lam: float, mu: float) -> np.ndarray:
    """Exact 3x3 elasticity block of the bubble fields (no diagonalization)."""
    area = np.asarray(geom.area)
    pts, wts = quadrature_rule(2)
    eps_b, div_b = _bubble_strain_div(geom, pts)
    ee = np.einsum("q,...qaij,...qbij->...ab", wts, eps_b, eps_b)
    dd = np.einsum("q,...qa,...qb->...ab", wts, div_b, div_b)
    return 2.0 * area[..., None, None] * (2.0 * mu * ee + lam * dd)


def local_bubble_blocks(geom, lam: float, mu: float, d: int = SPACE_DIM):
    """Bubble-linear coupling, diagonalized bubble stiffness, bubble divergence.

    Returns (A_bl, D_bb, B_b) with A_bl of shape (..., 3, 6), D_bb the (d+1)-
    scaled diagonal entries (..., 3) of the perturbed elasticity form, and
    B_b(a) = -int_T div Phi_a = -sigma_a |e_a| / 6.
    """
    grad = np.asarray(geom.grad_bary)
    area = np.asarray(geom.area)
    pts, wts = quadrature_rule(2)

    eps_b, div_b = _bubble_strain_div(geom, pts)
    eps_l = _p1_strains(grad)
    div_l = _p1_divs(grad)

    full = local_bubble_stiffness(geom, lam, mu)
    d_bb = (d + 1) * np.einsum("...aa->...a", full)

    scale = 2.0 * area  # reference weights sum to 1/2
    eps_bm = np.einsum("q,...qaij->...aij", wts, eps_b)
    div_bm = np.einsum("q,...qa->...a", wts, div_b)
    a_bl = scale[..., None, None] * (
        2.0 * mu * np.einsum("...aij,...bij->...ab", eps_bm, eps_l)
        + lam * div_bm[..., :, None] * div_l[..., None, :]
    )
    return a_bl, d_bb, bubble_div_row(geom)


def local_rt0(geom, K: float):
    """Velocity mass with kappa^{-1}, velocity divergence row, multiplier pairing.

    Returns (M_w, B_w, B_beta): M_w(a,b) = K^{-1} int_T psi_a . psi_b (exact),
    B_w(a) = -int_T div psi_a = -sigma_a |e_a|, and the diagonal pairing
    B_beta(a,a) = -sigma_a of multipliers with outward normal fluxes.
    """
    if K <= 0.0:
        raise ValueError(f"permeability must be positive, got {K}")
    coords = np.asarray(geom.coords)
    area = np.asarray(geom.area)
    sign = np.asarray(geom.sign)
    edge_len = np.asarray(geom.edge_len)

    pts, wts = quadrature_rule(2)
    xq = physical_points(coords, pts)  # (..., nq, 2)
    scale = sign * edge_len / (2.0 * area[..., None])
    diff = xq[..., :, None, :] - coords[..., None, :, :]  # (..., nq, 3, 2)
    psi = scale[..., None, :, None] * diff
    m_w = (2.0 * area / K)[..., None, None] * np.einsum("q,...qai,...qbi->...ab", wts, psi, psi)

    b_w = -sign * edge_len
    b_beta = np.zeros(sign.shape + (3,))
    idx = np.arange(3)
    b_beta[..., idx, idx] = -sign
    return m_w, b_w, b_beta


@dataclass
class LocalLoads:
    """Element-local right-hand-side contributions."""

    b_bub: np.ndarray  # (..., 3)
    b_lin: np.ndarray  # (..., 6)
    b_p: np.ndarray    # (...,)


def local_load(
    geom,
    params: PhysicalParams,
    f=None,
    traction: np.ndarray | None = None,
    prev=None,
    g=None,
    degree: int = 10,
) -> LocalLoads:
    """Momentum, traction, and mass-equation loads for one backward-Euler step.

    f and g are callables of physical coordinates (nq, 2) -> (nq, 2) / (nq,);
    traction is a per-local-edge constant vector field (..., 3, 2), already
    zeroed outside the traction boundary; prev = (u_lin, u_bub, p) supplies the
    previous-step coefficients entering the mass load
    tau (g, q) + (1/M)(p_prev, q) + alpha (div u_prev, q).
    """
    area = np.asarray(geom.area)
    shape = area.shape
    b_bub = np.zeros(shape + (3,))
    b_lin = np.zeros(shape + (6,))
    b_p = np.zeros(shape)

    if f is not None or g is not None:
        pts, wts = quadrature_rule(degree)
        xq = physical_points(np.asarray(geom.coords), pts)
        flat = xq.reshape(-1, 2)
        if f is not None:
            fv = np.asarray(f(flat)).reshape(xq.shape)  # (..., nq, 2)
            bl = barycentric(pts)
            # (f, phi_l e_k): component k weighted by the hat function of vertex l
            b_lin += 2.0 * area[..., None] * np.einsum(
                "q,ql,...qk->...lk", wts, bl, fv
            ).reshape(shape + (6,))
            phi = bl[:, _EP0] * bl[:, _EP1]  # (nq, 3) bubble values
            normals = _global_normals(geom)
            b_bub += 2.0 * area[..., None] * np.einsum(
                "q,qa,...qk,...ak->...a", wts, phi, fv, normals
            )
        if g is not None:
            gv = np.asarray(g(flat)).reshape(xq.shape[:-1])
            b_p += params.tau * 2.0 * area * np.einsum("q,...q->...", wts, gv)

    if traction is not None:
        t = np.asarray(traction)
        edge_len = np.asarray(geom.edge_len)
        normals = _global_normals(geom)
        # (t, Phi_a)_e = (t . n_a) |e|/6 ; (t, phi_l e_k)_e = t_k |e|/2 per endpoint
        b_bub += np.einsum("...ak,...ak->...a", t, normals) * edge_len / 6.0
        contrib = t * edge_len[..., None] / 2.0  # (..., 3, 2)
        for a in range(3):
            for v in (_EP0[a], _EP1[a]):
                b_lin[..., 2 * v : 2 * v + 2] += contrib[..., a, :]

    if prev is not None:
        u_lin, u_bub, p = prev
        b_p += area * np.asarray(p) / params.M
        b_p -= params.alpha * (
            np.einsum("...i,...i->...", local_div_p1(geom), np.asarray(u_lin))
            + np.einsum("...a,...a->...", bubble_div_row(geom), np.asarray(u_bub))
        )
    return LocalLoads(b_bub=b_bub, b_lin=b_lin, b_p=b_p)
