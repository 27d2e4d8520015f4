"""Command-line front end: configuration, subcommand dispatch, result files.

Four subcommands cover the package's studies:

* ``convergence``   – manufactured-solution error sweep over (K, N)
* ``cantilever``    – transient cantilever run(s) with the oscillation score
* ``precond-bench`` – preconditioned iteration-count sweeps (``--table 3|4|5``)
* ``single-solve``  – one time step at one parameter point, with an optional
  consistency check of the condensed solve against the monolithic system

Configuration precedence is built-in defaults, then a plain ``key=value``
config file (``--config``), then command-line flags.  Each run writes
``<outdir>/<subcommand>-<timestamp>.csv``, ``.md`` and ``.json``; the CSV and
markdown contents depend only on the resolved configuration (and seed), so
identical configurations produce byte-identical tables.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .dofs import build_dof_map, fully_clamped
from .experiments import (
    BenchTable,
    CantileverCase,
    ManufacturedCase,
    bench_csv_lines,
    bench_markdown,
    convergence_csv_lines,
    convergence_markdown,
    error_norms,
    initial_manufactured_state,
    manufactured_body_force,
    run_cantilever,
    run_convergence,
    run_precond_bench,
    table3_points,
    table4_points,
    table5_points,
)
from .krylov import fgmres
from .mesh import build_uniform_grid
from .params import PhysicalParams
from .precond import INNER_MODES, KINDS, PrecondConfig, build_preconditioner
from .system import ProblemLoads, assemble_full, back_substitute, condense, solve_direct, step

__all__ = ["main"]


class ConfigError(ValueError):
    """Invalid configuration value or combination; reported before any assembly."""


# ---------------------------------------------------------------------------
# value converters (shared by argparse flags and config-file entries)
# ---------------------------------------------------------------------------


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}")


def _int(text: str) -> int:
    value = _float(text)
    if value != int(value):
        raise ConfigError(f"not an integer: {text!r}")
    return int(value)


def _float_list(text: str):
    return tuple(_float(part) for part in str(text).split(",") if part.strip())


def _int_list(text: str):
    return tuple(_int(part) for part in str(text).split(",") if part.strip())


def _choice(*options):
    def convert(text: str) -> str:
        if text not in options:
            raise ConfigError(f"expected one of {options}, got {text!r}")
        return text

    return convert


def _bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    return str(text)


# ---------------------------------------------------------------------------
# per-subcommand configuration schema: name -> (converter, default, help)
# ---------------------------------------------------------------------------

_COMMON = {
    "outdir": (_str, ".", "directory for result files"),
    "seed": (_int, 0, "seed for every random draw in the run"),
}

_SCHEMA = {
    "convergence": {
        **_COMMON,
        "scheme": (_choice("stabilized", "unstabilized"), "stabilized", "discretization variant"),
        "K": (_float_list, (1e-4, 1e-6, 1e-8, 1e-10), "comma-separated permeabilities"),
        "N": (_int_list, (4, 8, 16, 32, 64), "comma-separated mesh resolutions"),
        "lam": (_float, None, "first Lame parameter (default 2 unless E/nu given)"),
        "mu": (_float, None, "shear modulus (default 1 unless E/nu given)"),
        "E": (_float, None, "Young modulus (with --nu, replaces lam/mu)"),
        "nu": (_float, None, "Poisson ratio (with --E, replaces lam/mu)"),
        "alpha": (_float, 1.0, "Biot coupling coefficient"),
        "M": (_float, 1e6, "Biot modulus"),
        "tau": (_float, 1.0, "time step"),
        "steps": (_int, 1, "number of backward-Euler steps"),
    },
    "cantilever": {
        **_COMMON,
        "scheme": (
            _choice("stabilized", "unstabilized", "both"),
            "both",
            "which variant(s) to run",
        ),
        "N": (_int, 32, "mesh resolution"),
        "E": (_float, 1e5, "Young modulus"),
        "nu": (_float, 0.45, "Poisson ratio"),
        "lam": (_float, None, "first Lame parameter (overrides E/nu)"),
        "mu": (_float, None, "shear modulus (overrides E/nu)"),
        "alpha": (_float, 0.93, "Biot coupling coefficient"),
        "M": (_float, 1e10, "Biot modulus"),
        "K": (_float, 1e-7, "permeability"),
        "tau": (_float, 1e-3, "time step"),
        "steps": (_int, 5, "number of backward-Euler steps"),
    },
    "precond-bench": {
        **_COMMON,
        "table": (_choice("3", "4", "5"), "3", "which benchmark sweep to run"),
        "kinds": (
            lambda s: tuple(_choice(*KINDS)(p) for p in str(s).split(",") if p.strip()),
            KINDS,
            "comma-separated preconditioner kinds",
        ),
        "inner": (
            _choice("exact", "inexact", "both"),
            "exact",
            "inner block-solve mode(s)",
        ),
        "reps": (_int, 5, "repetitions per cell (averaged)"),
        "tol": (_float, 1e-8, "outer relative-residual tolerance"),
        "max_iter": (_int, 200, "outer iteration cap"),
        "inner_tol": (_float, 1e-3, "inexact inner relative tolerance"),
        "inner_max_iter": (_int, 200, "inexact inner iteration cap"),
    },
    "single-solve": {
        **_COMMON,
        "scheme": (_choice("stabilized", "unstabilized"), "stabilized", "discretization variant"),
        "N": (_int, 4, "mesh resolution"),
        "K": (_float, 1e-8, "permeability"),
        "lam": (_float, None, "first Lame parameter (default 2 unless E/nu given)"),
        "mu": (_float, None, "shear modulus (default 1 unless E/nu given)"),
        "E": (_float, None, "Young modulus (with --nu, replaces lam/mu)"),
        "nu": (_float, None, "Poisson ratio (with --E, replaces lam/mu)"),
        "alpha": (_float, 1.0, "Biot coupling coefficient"),
        "M": (_float, 1e6, "Biot modulus"),
        "tau": (_float, 1.0, "time step"),
        "precond": (
            _choice("none", "diag", "lower", "upper"),
            "none",
            "solve via FGMRES with this preconditioner instead of sparse LU",
        ),
        "inner": (_choice("exact", "inexact"), "exact", "inner mode when preconditioned"),
        "tol": (_float, 1e-8, "FGMRES relative-residual tolerance"),
        "max_iter": (_int, 200, "FGMRES iteration cap"),
        "check_schur": (_bool, False, "compare condensed solve against the monolithic system"),
    },
}

_FLAG_ALIASES = {"lam": ("--lambda", "--lam")}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porofem",
        description="Stabilized hybrid mixed finite elements for poroelasticity.",
    )
    parser.add_argument("--version", action="version", version=f"porofem {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in _SCHEMA.items():
        sub = subparsers.add_parser(name, help=f"run the {name} study")
        sub.add_argument("--config", default=None, help="key=value configuration file")
        for key, (convert, default, help_text) in schema.items():
            flags = _FLAG_ALIASES.get(key, (f"--{key.replace('_', '-')}",))
            if convert is _bool:
                sub.add_argument(*flags, dest=key, action="store_const", const=True,
                                 default=None, help=help_text)
            else:
                sub.add_argument(*flags, dest=key, type=convert, default=None,
                                 metavar="X", help=f"{help_text} (default: {default})")
    return parser


def _read_config_file(path: str) -> dict:
    entries = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                entries[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    return entries


def _resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and flags into one validated mapping."""
    schema = _SCHEMA[args.subcommand]
    file_cfg = _read_config_file(args.config) if args.config else {}
    unknown = set(file_cfg) - set(schema)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = {}
    for key, (convert, default, _help) in schema.items():
        flag_value = getattr(args, key)
        if flag_value is not None:
            cfg[key] = flag_value
        elif key in file_cfg:
            cfg[key] = convert(file_cfg[key])
        else:
            cfg[key] = default
    _validate(args.subcommand, cfg)
    return cfg


def _validate(subcommand: str, cfg: dict) -> None:
    def positive(key):
        value = cfg.get(key)
        if value is not None and value <= 0:
            raise ConfigError(f"{key} must be positive, got {value:g}")

    for key in ("E", "mu", "M", "tau", "tol", "inner_tol"):
        positive(key)
    if cfg.get("lam") is not None and cfg["lam"] < 0:
        raise ConfigError(f"lam must be nonnegative, got {cfg['lam']:g}")
    nu = cfg.get("nu")
    if nu is not None and not -1.0 < nu < 0.5:
        raise ConfigError(f"nu must lie in (-1, 0.5), got {nu:g}")
    if (cfg.get("E") is None) != (cfg.get("nu") is None) and subcommand in (
        "convergence",
        "single-solve",
    ):
        raise ConfigError("E and nu must be given together")
    for key in ("steps", "reps", "max_iter", "inner_max_iter"):
        value = cfg.get(key)
        if value is not None and value < 1:
            raise ConfigError(f"{key} must be at least 1, got {value}")
    ks = cfg.get("K")
    for k in np.atleast_1d(ks if ks is not None else []):
        if k <= 0:
            raise ConfigError(f"K must be positive, got {k:g}")
    ns = cfg.get("N")
    for n in np.atleast_1d(ns if ns is not None else []):
        if n < 1:
            raise ConfigError(f"N must be at least 1, got {n}")


def _lame_constants(cfg: dict, default_lam: float, default_mu: float):
    """Direct Lame values win; otherwise Young/Poisson; otherwise the defaults."""
    if cfg.get("lam") is not None or cfg.get("mu") is not None:
        lam = cfg["lam"] if cfg.get("lam") is not None else default_lam
        mu = cfg["mu"] if cfg.get("mu") is not None else default_mu
        return lam, mu
    if cfg.get("E") is not None:
        probe = PhysicalParams.from_young_poisson(
            cfg["E"], cfg["nu"], alpha=1.0, M=1.0, K=1.0, tau=1.0
        )
        return probe.lam, probe.mu
    return default_lam, default_mu


# ---------------------------------------------------------------------------
# subcommand implementations; each returns (csv_lines, markdown, summary, failed)
# ---------------------------------------------------------------------------


def _config_comments(subcommand: str, cfg: dict) -> list:
    rendered = []
    for key in sorted(cfg):
        value = cfg[key]
        if isinstance(value, tuple):
            value = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = f"{value:g}"
        rendered.append(f"{key}={value}")
    return [f"subcommand={subcommand}", f"version={__version__}"] + rendered


def _md_header(subcommand: str, comments: list) -> str:
    return "\n".join(
        [f"# porofem {subcommand}", "", "```", *comments, "```", ""]
    )


def _cmd_convergence(cfg: dict):
    lam, mu = _lame_constants(cfg, default_lam=2.0, default_mu=1.0)
    case = ManufacturedCase(
        lam=lam, mu=mu, alpha=cfg["alpha"], M=cfg["M"],
        tau=cfg["tau"], t_max=cfg["steps"] * cfg["tau"],
    )
    table = run_convergence(scheme=cfg["scheme"], Ks=cfg["K"], Ns=cfg["N"], case=case)
    comments = _config_comments("convergence", cfg)
    failures = {key: cell.error for key, cell in table.cells.items() if cell.error}
    summary = {
        "cells": len(table.cells),
        "failed_cells": {f"K={k:g},N={n}": msg for (k, n), msg in sorted(failures.items())},
        "energy_rates": {
            f"K={k:g},N={n}": round(rate, 4)
            for (k, n), rate in sorted(table.rates("energy").items())
        },
    }
    return (
        convergence_csv_lines(table, comments),
        _md_header("convergence", comments) + "\n" + convergence_markdown(table),
        summary,
        bool(failures),
    )


def _cmd_cantilever(cfg: dict):
    case = CantileverCase(
        E=cfg["E"], nu=cfg["nu"], alpha=cfg["alpha"], M=cfg["M"],
        K=cfg["K"], tau=cfg["tau"], steps=cfg["steps"],
    )
    params = None
    if cfg.get("lam") is not None or cfg.get("mu") is not None:
        lam, mu = _lame_constants(cfg, default_lam=case.params().lam, default_mu=case.params().mu)
        params = PhysicalParams(lam=lam, mu=mu, alpha=cfg["alpha"], M=cfg["M"],
                                K=cfg["K"], tau=cfg["tau"])
    schemes = ("stabilized", "unstabilized") if cfg["scheme"] == "both" else (cfg["scheme"],)
    comments = _config_comments("cantilever", cfg)
    lines = [f"# {c}" for c in comments]
    lines.append("scheme,N,steps,final_time,oscillation_index,p_min,p_max")
    md = [_md_header("cantilever", comments), "| scheme | oscillation index | p min | p max |",
          "|---|---:|---:|---:|"]
    summary = {}
    for scheme in schemes:
        result = run_cantilever(case, n=cfg["N"], stabilized=(scheme == "stabilized"),
                                params=params)
        p = result.state.p
        lines.append(
            f"{scheme},{cfg['N']},{result.steps_run},{result.final_time:.10g},"
            f"{result.oscillation:.6e},{p.min():.6e},{p.max():.6e}"
        )
        md.append(
            f"| {scheme} | {result.oscillation:.4e} | {p.min():.4e} | {p.max():.4e} |"
        )
        summary[scheme] = {"oscillation_index": result.oscillation,
                           "pressure_range": [float(p.min()), float(p.max())]}
    if len(schemes) == 2:
        ratio = summary["unstabilized"]["oscillation_index"] / max(
            summary["stabilized"]["oscillation_index"], np.finfo(float).tiny
        )
        summary["oscillation_ratio_unstabilized_over_stabilized"] = ratio
        md.append(f"\nunstabilized / stabilized oscillation ratio: {ratio:.3f}")
    return lines, "\n".join(md) + "\n", summary, False


def _cmd_precond_bench(cfg: dict):
    points = {"3": table3_points, "4": table4_points, "5": table5_points}[cfg["table"]]()
    inner_modes = INNER_MODES if cfg["inner"] == "both" else (cfg["inner"],)
    table = run_precond_bench(
        points,
        kinds=cfg["kinds"],
        inner_modes=inner_modes,
        reps=cfg["reps"],
        tol=cfg["tol"],
        seed=cfg["seed"],
        max_iter=cfg["max_iter"],
        inner_tol=cfg["inner_tol"],
        inner_max_iter=cfg["inner_max_iter"],
        title=f"preconditioner benchmark (sweep {cfg['table']})",
    )
    comments = _config_comments("precond-bench", cfg)
    not_converged = [
        f"{table.points[i].group} / {table.points[i].label} / {kind} ({inner})"
        for (i, kind, inner), cell in sorted(table.results.items())
        if not cell.converged
    ]
    summary = {
        "points": len(table.points),
        "cells": len(table.results),
        "not_converged": not_converged,
        "max_mean_iterations": max(c.mean_iterations for c in table.results.values()),
    }
    return (
        bench_csv_lines(table, comments),
        _md_header("precond-bench", comments) + "\n" + bench_markdown(table),
        summary,
        bool(not_converged),
    )


def _make_krylov_solver(cfg: dict, params: PhysicalParams):
    precond_config = PrecondConfig(
        kind=cfg["precond"], inner=cfg["inner"],
        inner_tol=1e-3, inner_max_iter=200,
    )

    def solver(cond):
        preconditioner = build_preconditioner(cond, params, config=precond_config)
        return fgmres(
            cond.matrix().__matmul__, cond.rhs(), apply_P=preconditioner,
            tol=cfg["tol"], max_iter=cfg["max_iter"],
        )

    return solver


def _cmd_single_solve(cfg: dict):
    lam, mu = _lame_constants(cfg, default_lam=2.0, default_mu=1.0)
    case = ManufacturedCase(lam=lam, mu=mu, alpha=cfg["alpha"], M=cfg["M"],
                            tau=cfg["tau"], t_max=cfg["tau"])
    params = case.params(cfg["K"])
    stabilized = cfg["scheme"] == "stabilized"
    bc = fully_clamped()
    mesh = build_uniform_grid(cfg["N"])
    dofmap = build_dof_map(mesh, bc)
    loads = ProblemLoads(
        f=lambda q: np.stack(manufactured_body_force(q[..., 0], q[..., 1], case.mu), axis=-1)
    )
    state0 = initial_manufactured_state(mesh, dofmap, stabilized)
    solver = None if cfg["precond"] == "none" else _make_krylov_solver(cfg, params)
    state, report = step(state0, mesh, dofmap, params, bc, loads=loads,
                         solver=solver, stabilized=stabilized)
    e_energy, e_p = error_norms(state, case, mesh, dofmap)

    schur_mismatch = None
    if cfg["check_schur"]:
        system = assemble_full(mesh, dofmap, params, bc, prev_state=state0,
                               loads=loads, stabilized=stabilized)
        cond = condense(system)
        x, _ = solve_direct(cond)
        condensed = back_substitute(system, cond, x)
        from scipy.sparse.linalg import spsolve

        full = spsolve(system.full_matrix().tocsc(), system.full_rhs())
        dm = system.dofmap
        offsets = np.cumsum([0, dm.n_bub, dm.n_ulin, dm.n_p, dm.n_beta, dm.n_w])
        families = ("u_bub", "u_lin", "p", "beta", "w")
        mismatch = 0.0
        for i, name in enumerate(families):
            mine = getattr(condensed, name)
            ref = full[offsets[i] : offsets[i + 1]]
            denom = max(np.linalg.norm(ref), 1.0)
            mismatch = max(mismatch, np.linalg.norm(mine - ref) / denom)
        schur_mismatch = float(mismatch)
        print(f"condensed vs monolithic solve: max relative mismatch {schur_mismatch:.3e} "
              f"({'OK' if schur_mismatch <= 1e-9 else 'MISMATCH'})")

    print(f"e_energy={e_energy:.6e} e_p={e_p:.6e} "
          f"iterations={report.iterations} converged={report.converged}")

    comments = _config_comments("single-solve", cfg)
    lines = [f"# {c}" for c in comments]
    lines.append("scheme,N,K,e_energy,e_p,iterations,converged,schur_mismatch")
    lines.append(
        f"{cfg['scheme']},{cfg['N']},{cfg['K']:.6g},{e_energy:.6e},{e_p:.6e},"
        f"{report.iterations},{report.converged},"
        + ("" if schur_mismatch is None else f"{schur_mismatch:.6e}")
    )
    md = [_md_header("single-solve", comments),
          "| quantity | value |", "|---|---:|",
          f"| e_energy | {e_energy:.6e} |", f"| e_p | {e_p:.6e} |",
          f"| iterations | {report.iterations} |", f"| converged | {report.converged} |"]
    if schur_mismatch is not None:
        md.append(f"| condensed-vs-monolithic mismatch | {schur_mismatch:.3e} |")
    summary = {
        "e_energy": e_energy,
        "e_p": e_p,
        "iterations": report.iterations,
        "converged": bool(report.converged),
    }
    failed = not report.converged
    if schur_mismatch is not None:
        summary["schur_mismatch"] = schur_mismatch
        failed = failed or schur_mismatch > 1e-9
    return lines, "\n".join(md) + "\n", summary, failed


_COMMANDS = {
    "convergence": _cmd_convergence,
    "cantilever": _cmd_cantilever,
    "precond-bench": _cmd_precond_bench,
    "single-solve": _cmd_single_solve,
}


# ---------------------------------------------------------------------------
# output persistence and entry point
# ---------------------------------------------------------------------------


def _write_outputs(subcommand: str, cfg: dict, csv_lines, markdown, summary, wall_time):
    import pathlib

    outdir = pathlib.Path(cfg["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    base = outdir / f"{subcommand}-{stamp}"
    csv_path = base.with_suffix(".csv")
    md_path = base.with_suffix(".md")
    json_path = base.with_suffix(".json")
    csv_path.write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    md_path.write_text(markdown, encoding="utf-8")
    metadata = {
        "subcommand": subcommand,
        "config": {
            key: (list(value) if isinstance(value, tuple) else value)
            for key, value in sorted(cfg.items())
        },
        "versions": {
            "porofem": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
        },
        "timestamp_utc": stamp,
        "wall_time_seconds": round(wall_time, 3),
        "outputs": {"csv": csv_path.name, "markdown": md_path.name},
        "summary": summary,
    }
    json_path.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    return csv_path, md_path, json_path


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        csv_lines, markdown, summary, failed = _COMMANDS[args.subcommand](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver or assembly failure: report, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    paths = _write_outputs(args.subcommand, cfg, csv_lines, markdown, summary,
                           time.perf_counter() - start)
    for path in paths:
        print(f"wrote {path}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
