"""Acceptance suite: one test per release criterion, one pass/fail line under -v.

Reference numbers are the published benchmark values this package is expected
to reproduce; they are frozen here so every run re-checks them at the stated
tolerances.  Each criterion is a single test so that ``pytest -v`` reports one
line per criterion.
"""

import time

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from porofem.dofs import BoundarySpec, build_dof_map, fully_clamped
from porofem.experiments import (
    initial_manufactured_state,
    manufactured_body_force,
    run_cantilever,
    run_convergence,
    run_precond_bench,
    table3_points,
    table4_points,
    table5_points,
)
from porofem.krylov import fgmres
from porofem.local_assembly import (
    local_bubble_stiffness,
    local_elasticity_p1,
)
from porofem.mesh import batch_geometry, build_uniform_grid
from porofem.params import PhysicalParams
from porofem.precond import build_blocks, fov_probe
from porofem.quadrature import gauss_legendre_01
from porofem.system import (
    ProblemLoads,
    assemble_full,
    back_substitute,
    condense,
    solve_direct,
    step,
)

# ---------------------------------------------------------------------------
# frozen reference values
# ---------------------------------------------------------------------------

_NS = (4, 8, 16, 32, 64)
_KS = (1e-4, 1e-6, 1e-8, 1e-10)

# stabilized manufactured-solution errors: {K: (energy row, pressure row)} over _NS
REF_STABILIZED_ERRORS = {
    1e-4: ((0.0369, 0.0183, 0.0093, 0.0047, 0.0024),
           (0.0511, 0.0185, 0.0034, 0.0006, 0.0001)),
    1e-6: ((0.0377, 0.0189, 0.0091, 0.0045, 0.0022),
           (0.0593, 0.0346, 0.0155, 0.0062, 0.0019)),
    1e-8: ((0.0377, 0.0189, 0.0092, 0.0045, 0.0023),
           (0.0594, 0.0349, 0.0162, 0.0074, 0.0035)),
    1e-10: ((0.0377, 0.0189, 0.0092, 0.0045, 0.0023),
            (0.0594, 0.0349, 0.0162, 0.0074, 0.0035)),
}

_K_LABELS = tuple(f"K={K:.0e}" for K in (1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12))
_NU_LABELS = tuple(f"nu={nu:g}" for nu in (0.0, 0.1, 0.2, 0.4, 0.45, 0.49))
_H_LABELS = tuple(f"h=1/{n}" for n in _NS)

# benchmark iteration counts: {group: {(kind, inner): row over the group labels}}
REF_BENCH_3 = {
    "nu=0, varying K": {
        ("diag", "exact"): (21, 28, 38, 40, 40, 38),
        ("upper", "exact"): (12, 13, 14, 15, 15, 15),
        ("lower", "exact"): (13, 14, 14, 15, 15, 15),
        ("diag", "inexact"): (29, 38, 44, 46, 44, 43),
        ("upper", "inexact"): (16, 18, 23, 22, 23, 21),
        ("lower", "inexact"): (20, 22, 21, 22, 20, 20),
    },
    "K=1e-06, varying nu": {
        ("diag", "exact"): (38, 38, 38, 36, 33, 29),
        ("upper", "exact"): (14, 14, 14, 13, 11, 8),
        ("lower", "exact"): (14, 14, 14, 13, 11, 8),
        ("diag", "inexact"): (44, 44, 44, 45, 44, 40),
        ("upper", "inexact"): (23, 21, 20, 19, 15, 12),
        ("lower", "inexact"): (21, 21, 20, 16, 15, 12),
    },
}
REF_BENCH_4 = {
    "nu=0.45, varying K": {
        ("diag", "exact"): (4, 4, 5, 14, 21, 25),
        ("upper", "exact"): (2, 2, 2, 2, 2, 2),
        ("lower", "exact"): (3, 3, 4, 4, 3, 3),
        ("diag", "inexact"): (5, 6, 10, 29, 36, 38),
        ("upper", "inexact"): (4, 4, 4, 6, 9, 16),
        ("lower", "inexact"): (5, 5, 6, 8, 8, 11),
    },
    "K=1e-07, varying nu": {
        ("diag", "exact"): (13, 13, 13, 10, 9, 6),
        ("upper", "exact"): (2, 2, 2, 2, 2, 2),
        ("lower", "exact"): (5, 5, 5, 4, 4, 3),
        ("diag", "inexact"): (23, 23, 23, 20, 18, 11),
        ("upper", "inexact"): (7, 7, 7, 5, 5, 5),
        ("lower", "inexact"): (9, 9, 9, 7, 7, 7),
    },
}
_T5_ROWS = ("tau=1", "tau=0.1", "tau=0.01", "tau=0.001", "tau=0.0001")
_T5 = {
    ("diag", "exact"): ((15, 15, 12, 10, 8), (22, 20, 18, 16, 14), (25, 23, 21, 20, 18),
                        (25, 25, 24, 22, 21), (26, 26, 26, 25, 23)),
    ("diag", "inexact"): ((22, 23, 21, 20, 17), (29, 33, 36, 33, 30), (30, 33, 35, 36, 37),
                          (31, 38, 39, 34, 36), (31, 38, 39, 38, 36)),
    ("upper", "exact"): ((2, 2, 2, 2, 2), (3, 2, 2, 2, 2), (3, 2, 2, 2, 2),
                         (3, 2, 2, 2, 2), (3, 2, 2, 2, 2)),
    ("upper", "inexact"): ((7, 6, 5, 5, 5), (10, 8, 7, 6, 7), (11, 11, 9, 8, 7),
                           (13, 12, 15, 12, 9), (14, 13, 14, 15, 13)),
    ("lower", "exact"): ((4, 4, 4, 4, 4), (4, 4, 4, 4, 4), (4, 4, 4, 3, 3),
                         (4, 4, 4, 3, 3), (3, 3, 3, 3, 3)),
    ("lower", "inexact"): ((7, 7, 7, 6, 7), (9, 8, 8, 7, 8), (11, 10, 9, 8, 8),
                           (11, 12, 11, 10, 8), (10, 11, 11, 10, 11)),
}
REF_BENCH_5 = {
    row: {key: _T5[key][i] for key in _T5} for i, row in enumerate(_T5_ROWS)
}

_SWEEP_K = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12)
_SWEEP_NU = (0.0, 0.2, 0.45, 0.49)


# ---------------------------------------------------------------------------
# shared runs (computed once per session)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def stabilized_table():
    start = time.perf_counter()
    table = run_convergence(scheme="stabilized", Ks=_KS, Ns=_NS)
    return table, time.perf_counter() - start


@pytest.fixture(scope="module")
def unstabilized_table():
    return run_convergence(scheme="unstabilized", Ks=(1e-4, 1e-10), Ns=_NS)


def _bench(points):
    start = time.perf_counter()
    table = run_precond_bench(points, inner_modes=("exact", "inexact"), reps=5)
    return table, time.perf_counter() - start


@pytest.fixture(scope="module")
def bench3():
    return _bench(table3_points())


@pytest.fixture(scope="module")
def bench4():
    return _bench(table4_points())


@pytest.fixture(scope="module")
def bench5():
    return _bench(table5_points())


def _bench_cells(bench):
    """{(group, label, kind, inner): BenchCell} for one benchmark run."""
    table = bench[0]
    return {
        (table.points[i].group, table.points[i].label, kind, inner): cell
        for (i, kind, inner), cell in table.results.items()
    }


_GROUP_LABELS = {
    "nu=0, varying K": _K_LABELS, "nu=0.45, varying K": _K_LABELS,
    "K=1e-06, varying nu": _NU_LABELS, "K=1e-07, varying nu": _NU_LABELS,
    **{row: _H_LABELS for row in _T5_ROWS},
}


# ---------------------------------------------------------------------------
# criterion 1: stabilized manufactured-solution convergence
# ---------------------------------------------------------------------------


def test_criterion_1_stabilized_convergence(stabilized_table):
    table, wall = stabilized_table
    problems = []
    for K, (energy_row, pressure_row) in REF_STABILIZED_ERRORS.items():
        for j, n in enumerate(_NS):
            cell = table.cells[(K, n)]
            assert cell.error is None, f"K={K:g} N={n} failed: {cell.error}"
            for name, mine, ref in (("e_energy", cell.e_energy, energy_row[j]),
                                    ("e_p", cell.e_p, pressure_row[j])):
                close = abs(mine - ref) <= 0.15 * ref
                same_print = f"{mine:.4f}" == f"{ref:.4f}"
                if not (close or same_print):
                    problems.append(f"K={K:g} N={n} {name}: {mine:.4g} vs {ref:.4g}")
    for (K, n), rate in table.rates("energy").items():
        if not 0.85 <= rate <= 1.15:
            problems.append(f"K={K:g} N={n}: energy rate {rate:.3f} outside [0.85, 1.15]")
    assert not problems, "\n".join(problems)
    assert wall < 300.0, f"sweep took {wall:.0f}s (budget 300s)"


# ---------------------------------------------------------------------------
# criterion 2: pressure locking of the unstabilized variant
# ---------------------------------------------------------------------------


def test_criterion_2_unstabilized_locking(unstabilized_table):
    table = unstabilized_table
    for (K, n), cell in table.cells.items():
        assert cell.error is None, f"K={K:g} N={n} failed: {cell.error}"
    locked = [table.cells[(1e-10, n)].e_p for n in _NS]
    assert locked[-1] > 10.0 * locked[0], (
        f"e_p grew only {locked[-1] / locked[0]:.2f}x from N=4 to N=64"
    )
    for coarse, fine in zip(locked, locked[1:]):
        assert fine >= coarse, f"e_p not nondecreasing: {locked}"
    assert table.cells[(1e-4, 64)].e_p < 1e-3, (
        f"high-permeability run should converge, e_p(64)={table.cells[(1e-4, 64)].e_p:.2e}"
    )


# ---------------------------------------------------------------------------
# criterion 3: static condensation equals the monolithic solve
# ---------------------------------------------------------------------------


def test_criterion_3_condensation_matches_monolithic_solve():
    rng = np.random.default_rng(314)
    bc = fully_clamped()
    worst = 0.0
    for _ in range(5):
        params = PhysicalParams(
            lam=rng.uniform(0.5, 5.0), mu=rng.uniform(0.5, 5.0),
            alpha=rng.uniform(0.5, 1.0), M=10.0 ** rng.uniform(0.0, 6.0),
            K=10.0 ** rng.uniform(-8.0, -2.0), tau=10.0 ** rng.uniform(-2.0, 0.0),
        )
        for n in (2, 4):
            mesh = build_uniform_grid(n)
            dofmap = build_dof_map(mesh, bc)
            system = assemble_full(mesh, dofmap, params, bc)
            system.rhs_b = rng.standard_normal(system.rhs_b.shape)
            system.rhs_l = rng.standard_normal(system.rhs_l.shape)
            system.rhs_p = rng.standard_normal(system.rhs_p.shape)
            system.rhs_beta = rng.standard_normal(system.rhs_beta.shape)
            system.rhs_w = rng.standard_normal(system.rhs_w.shape)
            cond = condense(system)
            x, _ = solve_direct(cond)
            state = back_substitute(system, cond, x)
            full = spla.spsolve(system.full_matrix().tocsc(), system.full_rhs())
            sizes = [dofmap.n_bub, dofmap.n_ulin, dofmap.n_p, dofmap.n_beta, dofmap.n_w]
            offsets = np.cumsum([0] + sizes)
            mine = (state.u_bub, state.u_lin, state.p, state.beta, state.w)
            for i, family in enumerate(mine):
                ref = full[offsets[i] : offsets[i + 1]]
                rel = np.linalg.norm(family - ref) / max(np.linalg.norm(ref), 1e-300)
                worst = max(worst, rel)
                assert rel <= 1e-9, (
                    f"family {i} disagrees by {rel:.2e} (n={n}, params={params})"
                )
    assert worst <= 1e-9


# ---------------------------------------------------------------------------
# criterion 4: positive definiteness of the condensed flow blocks
# ---------------------------------------------------------------------------


def _assert_spd(matrix: sp.spmatrix, what: str):
    dense = matrix.toarray()
    asym = np.abs(dense - dense.T).max()
    scale = max(np.abs(dense).max(), 1e-300)
    assert asym <= 1e-12 * scale, f"{what} asymmetric by {asym / scale:.2e}"
    np.linalg.cholesky(0.5 * (dense + dense.T))  # raises if not positive definite


def test_criterion_4_condensed_flow_blocks_are_spd():
    bc = fully_clamped()
    for n in (4, 8):
        mesh = build_uniform_grid(n)
        dofmap = build_dof_map(mesh, bc)
        for K in _SWEEP_K:
            for nu in _SWEEP_NU:
                params = PhysicalParams.from_young_poisson(
                    1.0, nu, alpha=1.0, M=1e6, K=K, tau=1.0
                )
                cond = condense(assemble_full(mesh, dofmap, params, bc))
                tag = f"(N={n}, K={K:g}, nu={nu:g})"
                _assert_spd(cond.pressure_multiplier_block(),
                            f"pressure-multiplier block {tag}")
                _assert_spd(build_blocks(cond, params).a_pb,
                            f"augmented pressure-multiplier block {tag}")


# ---------------------------------------------------------------------------
# criterion 5: spectral equivalence of the diagonalized enrichment
# ---------------------------------------------------------------------------


def _enriched_forms(n: int):
    """Perturbed and exact enriched elasticity forms, plus rigid-motion modes.

    Assembled without essential constraints: the equivalence constant is a
    per-element quantity, and clamping boundary dofs on very coarse meshes
    truncates the extremal field.  Both forms share the rigid-motion kernel.
    """
    mesh = build_uniform_grid(n)
    bc = BoundarySpec(
        displacement_dirichlet=frozenset(),
        traction=frozenset({"left", "right", "top", "bottom"}),
    )
    dofmap = build_dof_map(mesh, bc)
    params = PhysicalParams(lam=2.0, mu=1.0, alpha=1.0, M=1e6, K=1e-6, tau=1.0)
    system = assemble_full(mesh, dofmap, params, bc)

    geo = batch_geometry(mesh)
    full_local = local_bubble_stiffness(geo, params.lam, params.mu)  # (nt, 3, 3)
    edof = dofmap.bubble_dof[mesh.tri_to_edge]  # (nt, 3)
    rows = np.broadcast_to(edof[:, :, None], full_local.shape)
    cols = np.broadcast_to(edof[:, None, :], full_local.shape)
    keep = (rows >= 0) & (cols >= 0)
    a_bb = sp.coo_matrix(
        (full_local[keep], (rows[keep], cols[keep])),
        shape=(dofmap.n_bub, dofmap.n_bub),
    ).tocsr()

    coupling = system.a_bl
    perturbed = sp.bmat(
        [[sp.diags(system.d_bb), coupling], [coupling.T, system.a_ll]], format="csr"
    ).toarray()
    exact = sp.bmat(
        [[a_bb, coupling], [coupling.T, system.a_ll]], format="csr"
    ).toarray()

    rigid = np.zeros((3, perturbed.shape[0]))
    rigid[0, dofmap.n_bub::2] = 1.0
    rigid[1, dofmap.n_bub + 1 :: 2] = 1.0
    rigid[2, dofmap.n_bub::2] = -mesh.vertices[:, 1]
    rigid[2, dofmap.n_bub + 1 :: 2] = mesh.vertices[:, 0]
    return perturbed, exact, rigid


def test_criterion_5_diagonalized_form_dominates_exact_form():
    rng = np.random.default_rng(2718)
    etas = {}
    for n in (4, 8, 16):
        perturbed, exact, rigid = _enriched_forms(n)
        dim = perturbed.shape[0]

        # measured equivalence bound: extreme generalized eigenvalues of the
        # form pencil, with the shared rigid-motion kernel shifted to 1
        q, _ = np.linalg.qr(rigid.T)
        shift = (np.trace(exact) / dim) * (q @ q.T)
        eta = sla.eigh(perturbed + shift, exact + shift, eigvals_only=True,
                       subset_by_index=[dim - 1, dim - 1])[0]
        floor = sla.eigh(perturbed + shift, exact + shift, eigvals_only=True,
                         subset_by_index=[0, 0])[0]
        assert floor >= 1.0 - 1e-10, f"N={n}: pencil floor {floor:.12f} below 1"
        etas[n] = eta

        # random displacement fields stay inside the measured envelope
        samples = rng.standard_normal((200, dim))
        num = np.einsum("sd,sd->s", samples, samples @ perturbed)
        den = np.einsum("sd,sd->s", samples, samples @ exact)
        quotients = num / den
        assert quotients.min() >= 1.0 - 1e-10, (
            f"N={n}: quotient {quotients.min():.12f} below lower bound"
        )
        assert quotients.max() <= eta * (1.0 + 1e-10), (
            f"N={n}: quotient {quotients.max():.6f} above measured bound {eta:.6f}"
        )
    lo, hi = min(etas.values()), max(etas.values())
    assert (hi - lo) / lo <= 0.10, f"equivalence bound drifts with mesh: {etas}"


# ---------------------------------------------------------------------------
# criterion 6: preconditioned solver robustness benchmarks
# ---------------------------------------------------------------------------


def test_criterion_6_preconditioner_benchmarks(bench3, bench4, bench5):
    problems = []
    for name, bench, reference in (("sweep3", bench3, REF_BENCH_3),
                                   ("sweep4", bench4, REF_BENCH_4),
                                   ("sweep5", bench5, REF_BENCH_5)):
        cells = _bench_cells(bench)
        for group, rows in reference.items():
            labels = _GROUP_LABELS[group]
            for (kind, inner), row in rows.items():
                for label, ref in zip(labels, row):
                    cell = cells[(group, label, kind, inner)]
                    where = f"{name} {group} {label} {kind}/{inner}"
                    if inner == "exact" and abs(cell.mean_iterations - ref) > 5:
                        problems.append(
                            f"{where}: {cell.mean_iterations} vs reference {ref}"
                        )
                    if inner == "inexact" and not cell.converged:
                        problems.append(f"{where}: did not converge")
        # permeability-sweep flatness (assessed on the manufactured-problem sweep,
        # where the reference rows themselves satisfy it)
        if name == "sweep3":
            for kind in ("diag", "lower", "upper"):
                for inner in ("exact", "inexact"):
                    row = [cells[("nu=0, varying K", lbl, kind, inner)].mean_iterations
                           for lbl in _K_LABELS]
                    if max(row) > 2 * min(row):
                        problems.append(
                            f"{name} K-sweep {kind}/{inner}: counts {row} vary "
                            f"more than 2x"
                        )
            for (group, label, kind, inner), cell in cells.items():
                if inner != "inexact":
                    continue
                exact_cell = cells[(group, label, kind, "exact")]
                if cell.mean_iterations > exact_cell.mean_iterations + 12:
                    problems.append(
                        f"{name} {group} {label} {kind}: inexact "
                        f"{cell.mean_iterations} exceeds exact "
                        f"{exact_cell.mean_iterations} by more than 12"
                    )
        for (group, label, kind, inner), cell in cells.items():
            if kind == "diag":
                continue
            diag_cell = cells[(group, label, "diag", inner)]
            if inner == "exact" and cell.mean_iterations > diag_cell.mean_iterations:
                problems.append(
                    f"{name} {group} {label}: {kind}/exact "
                    f"{cell.mean_iterations} exceeds diag {diag_cell.mean_iterations}"
                )
        if bench[1] >= 1200.0:
            problems.append(f"{name} took {bench[1]:.0f}s (budget 1200s)")
    assert not problems, "\n".join(problems)


# ---------------------------------------------------------------------------
# criterion 7: dense spectral probes of the preconditioned operators
# ---------------------------------------------------------------------------


def test_criterion_7_spectral_probes_are_parameter_robust():
    bc = fully_clamped()
    conds = {}
    for n in (2, 4):
        mesh = build_uniform_grid(n)
        dofmap = build_dof_map(mesh, bc)
        for K in _SWEEP_K:
            params = PhysicalParams(lam=2.0, mu=1.0, alpha=1.0, M=1e6, K=K, tau=1.0)
            cond = condense(assemble_full(mesh, dofmap, params, bc))
            blocks = build_blocks(cond, params)
            smin, smax = fov_probe(cond, blocks, "diag")
            conds[(n, K)] = smax / smin
            low, _norm = fov_probe(cond, blocks, "lower")
            assert low > 0.0, (
                f"N={n} K={K:g}: symmetric part of the lower-preconditioned "
                f"operator not positive ({low:.3e})"
            )
    for n in (2, 4):
        row = [conds[(n, K)] for K in _SWEEP_K]
        assert max(row) < 2.0 * min(row), (
            f"N={n}: condition estimate varies more than 2x over K: {row}"
        )
    for K in _SWEEP_K:
        a, b = conds[(2, K)], conds[(4, K)]
        assert abs(a - b) / min(a, b) < 0.25, (
            f"K={K:g}: condition estimate mesh-dependent ({a:.3f} vs {b:.3f})"
        )


# ---------------------------------------------------------------------------
# criterion 8: stabilization suppresses pressure oscillation
# ---------------------------------------------------------------------------


def test_criterion_8_stabilization_suppresses_oscillation():
    # Coarse mesh: the one regime at the benchmark permeability where the
    # per-step drainage cannot relieve the elementwise volume constraint.
    stab = run_cantilever(n=4)
    unstab = run_cantilever(n=4, stabilized=False)
    assert abs(stab.final_time - 0.005) < 1e-12
    assert stab.oscillation <= 0.5 * unstab.oscillation, (
        f"oscillation {stab.oscillation:.3f} vs {unstab.oscillation:.3f}"
    )


# ---------------------------------------------------------------------------
# criterion 9: deterministic structural identities
# ---------------------------------------------------------------------------


def _rt0_divergence_residual(mesh) -> float:
    """Max per-element gap between the RT0 divergence integral and its flux."""
    geo = batch_geometry(mesh)
    coords = geo.coords                      # (nt, 3, 2)
    sign = geo.sign
    edge_len = geo.edge_len
    area = geo.area
    qp, qw = gauss_legendre_01(4)

    div_integral = sign * edge_len           # int_T div psi_a, exactly
    worst = 0.0
    for local in range(3):                   # edge opposite local vertex `local`
        a, b = (local + 1) % 3, (local + 2) % 3
        seg = coords[:, b] - coords[:, a]                      # (nt, 2)
        outward = np.stack([seg[:, 1], -seg[:, 0]], axis=-1)
        outward /= np.linalg.norm(outward, axis=1, keepdims=True)
        # orient away from the opposite vertex
        flip = np.einsum("ti,ti->t", outward, coords[:, local] - coords[:, a]) > 0
        outward[flip] *= -1.0
        points = coords[:, None, a, :] + qp[None, :, None] * seg[:, None, :]
        for basis in range(3):
            scale = sign[:, basis] * edge_len[:, basis] / (2.0 * area)
            psi = scale[:, None, None] * (points - coords[:, None, basis, :])
            normal_trace = np.einsum("tqi,ti->tq", psi, outward)
            flux = edge_len[:, local] * (normal_trace @ qw)
            expected = div_integral[:, basis] * (basis == local)
            worst = max(worst, np.abs(flux - expected).max())
    return worst


def test_criterion_9_structural_identities():
    mesh = build_uniform_grid(5)
    geo = batch_geometry(mesh)

    # per-element flux integral of each RT0 basis matches its divergence integral
    assert _rt0_divergence_residual(mesh) <= 1e-13

    # barycentric gradients sum to zero on every element
    assert np.abs(geo.grad_bary.sum(axis=1)).max() <= 1e-13

    # elasticity annihilates rigid motions: translations plus a rotation
    ke = local_elasticity_p1(geo, lam=2.0, mu=1.0)           # (nt, 6, 6)
    x, y = geo.coords[..., 0], geo.coords[..., 1]
    rigid = np.stack(
        [
            np.tile([1.0, 0.0], 3) * np.ones_like(ke[..., 0]),
            np.tile([0.0, 1.0], 3) * np.ones_like(ke[..., 0]),
            np.stack([-y[..., 0], x[..., 0], -y[..., 1], x[..., 1],
                      -y[..., 2], x[..., 2]], axis=-1),
        ],
        axis=1,
    )  # (nt, 3, 6)
    residual = np.einsum("tab,tmb->tma", ke, rigid)
    assert np.abs(residual).max() <= 1e-10 * np.abs(ke).max()

    # recovered seepage velocity is normal-continuous across interior edges
    bc = fully_clamped()
    mesh8 = build_uniform_grid(8)
    dofmap = build_dof_map(mesh8, bc)
    params = PhysicalParams(lam=2.0, mu=1.0, alpha=1.0, M=1e6, K=1e-6, tau=1.0)
    loads = ProblemLoads(
        f=lambda q: np.stack(manufactured_body_force(q[..., 0], q[..., 1], 1.0), axis=-1)
    )
    state, _ = step(initial_manufactured_state(mesh8, dofmap), mesh8, dofmap,
                    params, bc, loads=loads)
    wmax = np.abs(state.w).max()
    for e in mesh8.interior_edges():
        tp, tm = mesh8.edge_to_tri[e]
        lp = int(np.flatnonzero(mesh8.tri_to_edge[tp] == e)[0])
        lm = int(np.flatnonzero(mesh8.tri_to_edge[tm] == e)[0])
        jump = abs(state.w[dofmap.w_dof[tp, lp]] - state.w[dofmap.w_dof[tm, lm]])
        assert jump <= 1e-9 * wmax

    # zero input stays zero through assembly, condensation, both solvers,
    # back-substitution, and a full time step
    dofmap5 = build_dof_map(mesh, bc)
    system = assemble_full(mesh, dofmap5, params, bc)
    assert not system.full_rhs().any()
    cond = condense(system)
    assert not cond.rhs().any()
    x, report = solve_direct(cond)
    assert report.converged and not x.any()
    xk, report_k = fgmres(cond.matrix().__matmul__, cond.rhs())
    assert report_k.converged and report_k.iterations == 0 and not xk.any()
    zero_state = back_substitute(system, cond, x)
    for family in (zero_state.u_bub, zero_state.u_lin, zero_state.p,
                   zero_state.beta, zero_state.w):
        assert not family.any()
    stepped, _ = step(zero_state, mesh, dofmap5, params, bc)
    assert not np.concatenate(
        [stepped.u_bub, stepped.u_lin, stepped.p, stepped.beta, stepped.w]
    ).any()
