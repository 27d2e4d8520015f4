"""Benchmark problems, error metrics, and the reproduction sweeps.

Two problems drive every study in this package:

* a manufactured divergence-free solution on the unit square (stream-function
  construction) used for convergence tables and for the first family of
  iteration-count benchmarks, and
* a cantilever bracket: clamped on the left, pushed down on the top, sealed
  against flow everywhere, started from rest.

The runners return plain result tables; CSV and markdown serialization lives
at the bottom of the module so the command-line layer only handles file paths.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dofs import BoundarySpec, DofMap, build_dof_map, cantilever_clamped_left, fully_clamped
from .krylov import fgmres
from .local_assembly import _bubble_gradients, _global_normals
from .mesh import Mesh, batch_geometry, build_uniform_grid
from .params import PhysicalParams
from .precond import (
    INNER_MODES,
    KINDS,
    PrecondConfig,
    Preconditioner,
    build_blocks,
    make_inner_solvers,
)
from .quadrature import gauss_legendre_01, physical_points, quadrature_rule
from .system import ProblemLoads, State, _pad_gather, assemble_full, condense, step

__all__ = [
    "ManufacturedCase",
    "CantileverCase",
    "manufactured_displacement",
    "manufactured_displacement_gradient",
    "manufactured_body_force",
    "manufactured_fields",
    "interpolate_manufactured_state",
    "initial_manufactured_state",
    "error_norms",
    "oscillation_index",
    "ConvergenceCell",
    "ConvergenceTable",
    "run_convergence",
    "CantileverResult",
    "run_cantilever",
    "BenchPoint",
    "BenchCell",
    "BenchTable",
    "run_precond_bench",
    "table3_points",
    "table4_points",
    "table5_points",
    "convergence_csv_lines",
    "convergence_markdown",
    "bench_csv_lines",
    "bench_markdown",
]

SCHEMES = ("stabilized", "unstabilized")


# ---------------------------------------------------------------------------
# case definitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManufacturedCase:
    """Divergence-free manufactured solution on the unit square.

    Displacement is the curl of the stream function [x y (1-x) (1-y)]^2,
    pressure is identically one, the seepage velocity vanishes, and the fluid
    source is zero; the body force closes the momentum balance.  Every
    boundary side is clamped and sealed.
    """

    lam: float = 2.0
    mu: float = 1.0
    alpha: float = 1.0
    M: float = 1e6
    tau: float = 1.0
    t_max: float = 1.0

    def params(self, K: float) -> PhysicalParams:
        return PhysicalParams(
            lam=self.lam, mu=self.mu, alpha=self.alpha, M=self.M, K=K, tau=self.tau
        )

    @property
    def num_steps(self) -> int:
        return max(1, int(round(self.t_max / self.tau)))


@dataclass(frozen=True)
class CantileverCase:
    """Cantilever bracket: left side clamped, unit downward pull on the top.

    The remaining sides are traction-free, the whole boundary is sealed
    against flow, and the run starts from the zero state.
    """

    E: float = 1e5
    nu: float = 0.45
    alpha: float = 0.93
    M: float = 1e10
    K: float = 1e-7
    tau: float = 1e-3
    steps: int = 5
    traction: tuple = (0.0, -1.0)

    def params(self) -> PhysicalParams:
        return PhysicalParams.from_young_poisson(
            self.E, self.nu, alpha=self.alpha, M=self.M, K=self.K, tau=self.tau
        )


def _scheme_stabilized(scheme: str) -> bool:
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    return scheme == "stabilized"


# ---------------------------------------------------------------------------
# manufactured fields (closed forms)
# ---------------------------------------------------------------------------
#
# With a(t) = t^2 (1 - t)^2 the stream function factors as phi = a(x) a(y);
# the displacement u = (d phi / dy, -d phi / dx) needs a, a' and the body
# force f = -mu * laplace(u) needs a'', a'''.


def _a(t):
    return t * t * (1.0 - t) ** 2


def _da(t):
    return 2.0 * t - 6.0 * t * t + 4.0 * t**3


def _dda(t):
    return 2.0 - 12.0 * t + 12.0 * t * t


def _ddda(t):
    return -12.0 + 24.0 * t


def manufactured_displacement(x, y):
    """Exact displacement components (u1, u2) at the given coordinates."""
    x, y = np.asarray(x), np.asarray(y)
    return _a(x) * _da(y), -_da(x) * _a(y)


def manufactured_displacement_gradient(x, y):
    """Exact gradient entries (du1/dx, du1/dy, du2/dx, du2/dy)."""
    x, y = np.asarray(x), np.asarray(y)
    return (
        _da(x) * _da(y),
        _a(x) * _dda(y),
        -_dda(x) * _a(y),
        -_da(x) * _da(y),
    )


def manufactured_body_force(x, y, mu: float):
    """Body force -mu * laplace(u) closing the momentum balance.

    The pressure gradient and the volumetric elastic term both vanish (the
    exact pressure is constant and the displacement divergence-free), so only
    the vector Laplacian survives.
    """
    x, y = np.asarray(x), np.asarray(y)
    lap1 = _dda(x) * _da(y) + _a(x) * _ddda(y)
    lap2 = -_ddda(x) * _a(y) - _da(x) * _dda(y)
    return -mu * lap1, -mu * lap2


def manufactured_fields(x, y, mu: float = 1.0):
    """Bundle (displacement, pressure, body force) at the given coordinates."""
    u1, u2 = manufactured_displacement(x, y)
    f1, f2 = manufactured_body_force(x, y, mu)
    p = np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    return np.stack([u1, u2], axis=-1), p, np.stack([f1, f2], axis=-1)


# ---------------------------------------------------------------------------
# interpolation and error norms
# ---------------------------------------------------------------------------


def interpolate_manufactured_state(
    mesh: Mesh, dofmap: DofMap, case: ManufacturedCase, stabilized: bool = True
) -> State:
    """Interpolate the exact fields into the discrete spaces.

    Vertex values carry the linear part; each bubble coefficient is chosen so
    the enriched interpolant reproduces the exact normal flux through its
    edge, which makes the element-mean divergence of the interpolant match
    the (zero) mean divergence of the exact field.
    """
    vx, vy = mesh.vertices[:, 0], mesh.vertices[:, 1]
    u1, u2 = manufactured_displacement(vx, vy)
    vals = np.stack([u1, u2], axis=1)  # (nv, 2)
    u_lin = np.zeros(dofmap.n_ulin)
    free = dofmap.vertex_dof >= 0
    u_lin[dofmap.vertex_dof[free]] = vals[free]

    u_bub = np.zeros(dofmap.n_bub if stabilized else 0)
    if stabilized and dofmap.n_bub:
        be = np.flatnonzero(dofmap.bubble_dof >= 0)
        v0, v1 = mesh.edges[be, 0], mesh.edges[be, 1]
        p0, p1 = mesh.vertices[v0], mesh.vertices[v1]
        nrm = mesh.edge_normal[be]
        ln = mesh.edge_length[be]
        tq, wq = gauss_legendre_01(4)  # exact for the degree-7 exact field
        pts = p0[:, None, :] + tq[None, :, None] * (p1 - p0)[:, None, :]
        q1, q2 = manufactured_displacement(pts[..., 0], pts[..., 1])
        exact_flux = ln * ((q1 * nrm[:, None, 0] + q2 * nrm[:, None, 1]) @ wq)
        linear_flux = ln * 0.5 * np.einsum("ek,ek->e", vals[v0] + vals[v1], nrm)
        # a bubble carries flux |e|/6 per unit coefficient
        u_bub[dofmap.bubble_dof[be]] = (exact_flux - linear_flux) / (ln / 6.0)

    return State(
        u_lin=u_lin,
        u_bub=u_bub,
        p=np.ones(dofmap.n_p),
        beta=np.zeros(dofmap.n_beta),
        w=np.zeros(dofmap.n_w),
    )


def initial_manufactured_state(mesh: Mesh, dofmap: DofMap, stabilized: bool = True) -> State:
    """Starting state of the manufactured runs: exact pressure, zero displacement.

    The single backward-Euler step then has to recover the displacement from
    scratch while the mass balance ties each element's volume change to the
    (zero) change in fluid content — exactly the regime where a pressure space
    without enrichment locks at small permeability.  Starting instead from an
    interpolated displacement hides the effect, because the volume constraint
    is measured against the interpolant rather than against zero.
    """
    zeros = State.zeros(dofmap)
    return State(
        u_lin=zeros.u_lin,
        u_bub=np.zeros(dofmap.n_bub if stabilized else 0),
        p=np.ones(dofmap.n_p),
        beta=zeros.beta,
        w=zeros.w,
    )


def error_norms(
    state: State, case: ManufacturedCase, mesh: Mesh, dofmap: DofMap, degree: int = 10
):
    """Energy-norm displacement error (bubble part included) and L2 pressure error."""
    geo = batch_geometry(mesh)
    pts, wts = quadrature_rule(degree)
    xq = physical_points(geo.coords, pts)  # (nt, nq, 2)

    d11, d12, d21, d22 = manufactured_displacement_gradient(xq[..., 0], xq[..., 1])
    grad_err = np.empty(xq.shape[:2] + (2, 2))
    grad_err[..., 0, 0] = d11
    grad_err[..., 0, 1] = d12
    grad_err[..., 1, 0] = d21
    grad_err[..., 1, 1] = d22

    u_loc = _pad_gather(
        state.u_lin, dofmap.vertex_dof[mesh.triangles].reshape(-1, 6)
    ).reshape(-1, 3, 2)
    grad_err -= np.einsum("tlk,tlj->tkj", u_loc, geo.grad_bary)[:, None, :, :]
    if state.u_bub.size:
        c_loc = _pad_gather(state.u_bub, dofmap.bubble_dof[mesh.tri_to_edge])
        grad_err -= np.einsum(
            "ta,tak,tqaj->tqkj", c_loc, _global_normals(geo), _bubble_gradients(geo, pts)
        )

    eps = 0.5 * (grad_err + np.swapaxes(grad_err, -1, -2))
    div = grad_err[..., 0, 0] + grad_err[..., 1, 1]
    density = 2.0 * case.mu * np.einsum("tqij,tqij->tq", eps, eps) + case.lam * div**2
    e_energy = float(np.sqrt(np.sum(2.0 * geo.area * (density @ wts))))

    p_h = state.p[dofmap.pressure_dof]
    e_p = float(np.sqrt(np.sum(geo.area * (1.0 - p_h) ** 2)))
    return e_energy, e_p


def oscillation_index(p_h: np.ndarray, mesh: Mesh) -> float:
    """Total interelement jump of a piecewise-constant field over its range.

    A smooth field scores near the mesh diameter count times h, a checkerboard
    scores the number of interior edges; a constant field scores zero.
    """
    p_h = np.asarray(p_h, dtype=float)
    spread = float(p_h.max() - p_h.min()) if p_h.size else 0.0
    if spread <= 0.0:
        return 0.0
    interior = mesh.interior_edges()
    plus, minus = mesh.edge_to_tri[interior, 0], mesh.edge_to_tri[interior, 1]
    return float(np.abs(p_h[plus] - p_h[minus]).sum() / spread)


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceCell:
    K: float
    n: int
    e_energy: float | None = None
    e_p: float | None = None
    error: str | None = None


@dataclass
class ConvergenceTable:
    scheme: str
    Ks: tuple
    Ns: tuple
    cells: dict

    def rates(self, which: str = "energy") -> dict:
        """log2 error drop between successive meshes, keyed by the finer one."""
        attr = {"energy": "e_energy", "pressure": "e_p"}[which]
        out = {}
        for K in self.Ks:
            for coarse, fine in zip(self.Ns, self.Ns[1:]):
                a, b = self.cells.get((K, coarse)), self.cells.get((K, fine))
                if a is None or b is None or a.error or b.error:
                    continue
                ea, eb = getattr(a, attr), getattr(b, attr)
                if ea and eb:
                    out[(K, fine)] = float(np.log2(ea / eb))
        return out


def run_convergence(
    scheme: str = "stabilized",
    Ks=(1e-4, 1e-6, 1e-8, 1e-10),
    Ns=(4, 8, 16, 32, 64),
    case: ManufacturedCase | None = None,
    solver=None,
) -> ConvergenceTable:
    """Errors of one-step solves of the manufactured problem over a (K, N) grid.

    Solver failures are recorded in the affected cell and the sweep continues.
    """
    case = case or ManufacturedCase()
    stabilized = _scheme_stabilized(scheme)
    bc = fully_clamped()

    def body_force(points):
        f1, f2 = manufactured_body_force(points[..., 0], points[..., 1], mu=case.mu)
        return np.stack([f1, f2], axis=-1)

    loads = ProblemLoads(f=body_force)
    cells = {}
    for n in Ns:
        mesh = build_uniform_grid(n)
        dofmap = build_dof_map(mesh, bc)
        for K in Ks:
            try:
                state = initial_manufactured_state(mesh, dofmap, stabilized)
                params = case.params(K)
                for _ in range(case.num_steps):
                    state, _ = step(
                        state, mesh, dofmap, params, bc,
                        loads=loads, solver=solver, stabilized=stabilized,
                    )
                e_energy, e_p = error_norms(state, case, mesh, dofmap)
                cells[(K, n)] = ConvergenceCell(K=K, n=n, e_energy=e_energy, e_p=e_p)
            except Exception as exc:  # recorded, not raised: sweeps must finish
                cells[(K, n)] = ConvergenceCell(
                    K=K, n=n, error=f"{type(exc).__name__}: {exc}"
                )
    return ConvergenceTable(scheme=scheme, Ks=tuple(Ks), Ns=tuple(Ns), cells=cells)


# ---------------------------------------------------------------------------
# cantilever run
# ---------------------------------------------------------------------------


@dataclass
class CantileverResult:
    mesh: Mesh
    dofmap: DofMap
    state: State
    oscillation: float
    steps_run: int
    final_time: float
    reports: list


def run_cantilever(
    case: CantileverCase | None = None,
    n: int = 32,
    stabilized: bool = True,
    solver=None,
    params: PhysicalParams | None = None,
) -> CantileverResult:
    """March the cantilever bracket from rest and score the final pressure field.

    ``params`` overrides the coefficient set derived from the case (for callers
    that specify Lame constants directly instead of Young modulus/Poisson ratio).
    """
    case = case or CantileverCase()
    bc = cantilever_clamped_left()
    mesh = build_uniform_grid(n)
    dofmap = build_dof_map(mesh, bc)
    params = params or case.params()
    loads = ProblemLoads(tractions={"top": np.asarray(case.traction, dtype=float)})

    state = State.zeros(dofmap)
    reports = []
    for _ in range(case.steps):
        state, report = step(
            state, mesh, dofmap, params, bc,
            loads=loads, solver=solver, stabilized=stabilized,
        )
        reports.append(report)
    return CantileverResult(
        mesh=mesh,
        dofmap=dofmap,
        state=state,
        oscillation=oscillation_index(state.p[dofmap.pressure_dof], mesh),
        steps_run=len(reports),
        final_time=case.steps * params.tau,
        reports=reports,
    )


# ---------------------------------------------------------------------------
# preconditioner benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchPoint:
    """One matrix of a benchmark sweep: mesh resolution, parameters, boundary."""

    label: str
    group: str
    n: int
    params: PhysicalParams
    bc: BoundarySpec


@dataclass(frozen=True)
class BenchCell:
    kind: str
    inner: str
    mean_iterations: int
    rep_iterations: tuple
    converged: bool
    inner_overruns: int = 0


@dataclass
class BenchTable:
    title: str
    points: tuple
    kinds: tuple
    inner_modes: tuple
    results: dict  # (point index, kind, inner) -> BenchCell

    def groups(self):
        seen = []
        for p in self.points:
            if p.group not in seen:
                seen.append(p.group)
        return seen


def run_precond_bench(
    points,
    kinds=KINDS,
    inner_modes=("exact",),
    reps: int = 5,
    tol: float = 1e-8,
    seed: int = 0,
    max_iter: int = 200,
    inner_tol: float = 1e-3,
    inner_max_iter: int = 200,
    title: str = "preconditioner benchmark",
) -> BenchTable:
    """Mean iteration counts of preconditioned solves with zero right-hand side.

    Each cell solves the homogeneous system from a uniformly random initial
    guess ``reps`` times and reports the rounded mean count; runs that do not
    reach the tolerance are marked rather than averaged silently.  Block
    factorizations and multigrid hierarchies are shared across kinds.
    """
    points = tuple(points)
    for kind in kinds:
        if kind not in KINDS:
            raise ValueError(f"unknown preconditioner kind {kind!r}")
    for inner in inner_modes:
        if inner not in INNER_MODES:
            raise ValueError(f"unknown inner mode {inner!r}")

    mesh_cache: dict = {}
    results = {}
    for i, pt in enumerate(points):
        cache_key = (pt.n, pt.bc)
        if cache_key not in mesh_cache:
            mesh = build_uniform_grid(pt.n)
            mesh_cache[cache_key] = (mesh, build_dof_map(mesh, pt.bc))
        mesh, dofmap = mesh_cache[cache_key]
        cond = condense(assemble_full(mesh, dofmap, pt.params, pt.bc))
        blocks = build_blocks(cond, pt.params)
        apply_a = cond.matrix().__matmul__
        zero = np.zeros(cond.dim)
        for inner in inner_modes:
            base = PrecondConfig(
                kind="diag", inner=inner,
                inner_tol=inner_tol, inner_max_iter=inner_max_iter,
            )
            solvers = make_inner_solvers(blocks, base)
            for kind in kinds:
                pre = Preconditioner(blocks, replace(base, kind=kind), solvers=solvers)
                rng = np.random.default_rng(
                    (seed, i, KINDS.index(kind), INNER_MODES.index(inner))
                )
                its, all_converged, overruns = [], True, 0
                for _ in range(reps):
                    x0 = rng.random(cond.dim)
                    pre.reset_inner_stats()
                    _, report = fgmres(
                        apply_a, zero, apply_P=pre, x0=x0, tol=tol, max_iter=max_iter
                    )
                    its.append(report.iterations)
                    all_converged &= report.converged
                    overruns += pre.inner_overruns
                results[(i, kind, inner)] = BenchCell(
                    kind=kind,
                    inner=inner,
                    mean_iterations=int(round(float(np.mean(its)))),
                    rep_iterations=tuple(its),
                    converged=all_converged,
                    inner_overruns=overruns,
                )
    return BenchTable(
        title=title,
        points=points,
        kinds=tuple(kinds),
        inner_modes=tuple(inner_modes),
        results=results,
    )


_K_SWEEP = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12)
_NU_SWEEP = (0.0, 0.1, 0.2, 0.4, 0.45, 0.49)
_TAU_SWEEP = (1.0, 0.1, 0.01, 0.001, 0.0001)
_N_SWEEP = (4, 8, 16, 32, 64)


def table3_points() -> list:
    """Manufactured-problem matrices: K sweep at nu=0 and nu sweep at K=1e-6."""
    bc = fully_clamped()
    pts = [
        BenchPoint(
            label=f"K={K:.0e}", group="nu=0, varying K", n=64,
            params=PhysicalParams.from_young_poisson(
                1.0, 0.0, alpha=1.0, M=1e6, K=K, tau=1.0
            ),
            bc=bc,
        )
        for K in _K_SWEEP
    ]
    pts += [
        BenchPoint(
            label=f"nu={nu:g}", group="K=1e-06, varying nu", n=64,
            params=PhysicalParams.from_young_poisson(
                1.0, nu, alpha=1.0, M=1e6, K=1e-6, tau=1.0
            ),
            bc=bc,
        )
        for nu in _NU_SWEEP
    ]
    return pts


def table4_points() -> list:
    """Cantilever matrices: K sweep at nu=0.45 and nu sweep at K=1e-7."""
    bc = cantilever_clamped_left()
    pts = [
        BenchPoint(
            label=f"K={K:.0e}", group="nu=0.45, varying K", n=64,
            params=PhysicalParams.from_young_poisson(
                1e5, 0.45, alpha=0.93, M=1e10, K=K, tau=1.0
            ),
            bc=bc,
        )
        for K in _K_SWEEP
    ]
    pts += [
        BenchPoint(
            label=f"nu={nu:g}", group="K=1e-07, varying nu", n=64,
            params=PhysicalParams.from_young_poisson(
                1e5, nu, alpha=0.93, M=1e10, K=1e-7, tau=1.0
            ),
            bc=bc,
        )
        for nu in _NU_SWEEP
    ]
    return pts


def table5_points() -> list:
    """Cantilever matrices over the mesh-size / time-step grid at nu=0.45, K=1e-7."""
    bc = cantilever_clamped_left()
    return [
        BenchPoint(
            label=f"h=1/{n}", group=f"tau={tau:g}", n=n,
            params=PhysicalParams.from_young_poisson(
                1e5, 0.45, alpha=0.93, M=1e10, K=1e-7, tau=tau
            ),
            bc=bc,
        )
        for tau in _TAU_SWEEP
        for n in _N_SWEEP
    ]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _comment_lines(comments) -> list:
    return [f"# {c}" for c in comments]


def _csv_quote(text: str) -> str:
    return '"' + text.replace('"', "'").replace("\n", " ") + '"'


def convergence_csv_lines(table: ConvergenceTable, comments=()) -> list:
    """CSV rows (one per sweep cell) with leading '#' config comments."""
    lines = _comment_lines(comments)
    lines.append("scheme,K,N,e_energy,rate_energy,e_p,rate_p,error")
    r_en, r_p = table.rates("energy"), table.rates("pressure")
    for K in table.Ks:
        for n in table.Ns:
            cell = table.cells.get((K, n))
            if cell is None:
                continue
            if cell.error is not None:
                lines.append(f"{table.scheme},{K:.6g},{n},,,,,{_csv_quote(cell.error)}")
                continue
            fe = f"{cell.e_energy:.6e}"
            fp = f"{cell.e_p:.6e}"
            re_ = f"{r_en[(K, n)]:.3f}" if (K, n) in r_en else ""
            rp = f"{r_p[(K, n)]:.3f}" if (K, n) in r_p else ""
            lines.append(f"{table.scheme},{K:.6g},{n},{fe},{re_},{fp},{rp},")
    return lines


def convergence_markdown(table: ConvergenceTable) -> str:
    """Aligned tables, one block per permeability value."""
    out = [f"## {table.scheme} convergence", ""]
    r_en, r_p = table.rates("energy"), table.rates("pressure")
    for K in table.Ks:
        out += [f"### K = {K:.0e}", "", "| N | e_energy | rate | e_p | rate |",
                "|---:|---:|---:|---:|---:|"]
        for n in table.Ns:
            cell = table.cells.get((K, n))
            if cell is None:
                continue
            if cell.error is not None:
                out.append(f"| {n} | failed | | failed | |")
                continue
            re_ = f"{r_en[(K, n)]:.2f}" if (K, n) in r_en else ""
            rp = f"{r_p[(K, n)]:.2f}" if (K, n) in r_p else ""
            out.append(
                f"| {n} | {cell.e_energy:.4e} | {re_} | {cell.e_p:.4e} | {rp} |"
            )
        out.append("")
    return "\n".join(out)


def _bench_cell_text(cell: BenchCell | None) -> str:
    if cell is None:
        return ""
    return f"{cell.mean_iterations}{'' if cell.converged else '*'}"


def bench_csv_lines(table: BenchTable, comments=()) -> list:
    """CSV rows (one per point/preconditioner combination) with '#' comments."""
    lines = _comment_lines(comments)
    lines.append(
        "group,label,N,lam,mu,alpha,M,K,tau,kind,inner,"
        "mean_iterations,rep_iterations,converged,inner_overruns"
    )
    for i, pt in enumerate(table.points):
        pp = pt.params
        prefix = (
            f"{_csv_quote(pt.group)},{_csv_quote(pt.label)},{pt.n},"
            f"{pp.lam:.10g},{pp.mu:.10g},{pp.alpha:.10g},{pp.M:.10g},"
            f"{pp.K:.10g},{pp.tau:.10g}"
        )
        for inner in table.inner_modes:
            for kind in table.kinds:
                cell = table.results.get((i, kind, inner))
                if cell is None:
                    continue
                reps = ";".join(str(r) for r in cell.rep_iterations)
                lines.append(
                    f"{prefix},{kind},{inner},{cell.mean_iterations},{reps},"
                    f"{cell.converged},{cell.inner_overruns}"
                )
    return lines


def bench_markdown(table: BenchTable) -> str:
    """One aligned block per sweep group; '*' marks non-converged cells."""
    out = [f"## {table.title}", ""]
    for group in table.groups():
        idx = [i for i, p in enumerate(table.points) if p.group == group]
        out += [f"### {group}", ""]
        header = "| preconditioner | " + " | ".join(table.points[i].label for i in idx) + " |"
        out += [header, "|" + "---|" * (len(idx) + 1)]
        for inner in table.inner_modes:
            for kind in table.kinds:
                cells = [_bench_cell_text(table.results.get((i, kind, inner))) for i in idx]
                out.append(f"| {kind} ({inner}) | " + " | ".join(cells) + " |")
        out.append("")
    return "\n".join(out)
