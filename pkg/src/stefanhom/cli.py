"""Command-line front end.

Exit codes: 0 success, 1 audit failure, 2 usage or configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import reference as ref
from .config import ConfigError, RunConfig, config_dict, override, parse_config
from .dumps import read_dump, write_dump, write_steplog
from .frontmetrics import extract_front, sphere_deviation, write_front_csv, write_metrics_csv
from .geometry import GeometryError, GridProblem, make_grid
from .harness import (
    StudyConfig,
    audit_comparison,
    audit_enthalpy,
    audit_monotonicity,
    config_summary,
    convergence_study,
    write_manifest,
)
from .media import LatentHeatField
from .obstacle import NumericalFailure, ObstacleState, SolverParams, run
from .rescale import make_params

EXIT_OK, EXIT_AUDIT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ------------------------------------------------------------ config -> objects


def build_grid(cfg: RunConfig) -> GridProblem:
    g = cfg.geometry
    return make_grid(g.dimension, g.h, g.extent, g.core.radius, g.omega0.radius, g.boundary_datum, g.omega0.profile)


def build_field(cfg: RunConfig) -> LatentHeatField:
    m = cfg.media
    return LatentHeatField(m.kind, m.m, m.M, m.period, m.seed or 0, cfg.geometry.dimension, m.mollify)


def build_solver(cfg: RunConfig) -> SolverParams:
    s = cfg.solver
    return SolverParams(s.omega, s.tol, s.maxit, s.ordering)


def build_study(cfg: RunConfig) -> StudyConfig:
    s, g = cfg.study, cfg.geometry
    return StudyConfig(
        dimension=g.dimension,
        core_radius=g.core.radius,
        omega0_radius=g.omega0.radius,
        field=build_field(cfg),
        lambdas=tuple(s.lambdas),
        rescaled_times=tuple(s.rescaled_times),
        annulus=tuple(s.annulus),
        target_h=s.target_h,
        target_extent=s.target_extent,
        dtau=s.dtau,
        boundary_datum=g.boundary_datum,
        v0_profile=g.omega0.profile,
        solver=build_solver(cfg),
        homogenization_cells=s.homogenization_cells,
        amplitude_probes=tuple(s.amplitude_probes),
    )


def default_jobs() -> int:
    env = os.environ.get("STEFAN_HOMOG_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"STEFAN_HOMOG_JOBS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _load(args) -> RunConfig:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    cfg = parse_config(text)
    changes = {}
    if getattr(args, "out", None):
        changes["output.directory"] = args.out
    if getattr(args, "seed", None) is not None:
        changes["media.seed"] = args.seed
    if getattr(args, "omega", None) is not None:
        changes["solver.omega"] = args.omega
    return override(cfg, **changes) if changes else cfg


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------ commands


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(f"ok: schema_version {cfg.schema_version}")
    return EXIT_OK


def _simulate(cfg: RunConfig):
    grid = build_grid(cfg)
    snaps = cfg.time.snapshots or [0.0, cfg.time.T]
    return grid, run(grid, build_field(cfg), cfg.time.T, cfg.time.dt, build_solver(cfg), snaps)


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg)
    grid, traj = _simulate(cfg)
    write_steplog(out / "steplog.csv", traj.steplog)
    lam = cfg.rescale.lam
    params = make_params(lam, grid.dimension) if lam else None
    fronts, metrics = [], []
    for k, s in enumerate(traj.snapshots):
        if cfg.output.dumps:
            write_dump(out / f"snapshot_{k:04d}.stfh", s.U, s.V, grid.h, s.t)
            if params is not None:
                # rescaled fields live on the same nodes with spacing h / space_factor
                write_dump(
                    out / f"rescaled_{k:04d}.stfh",
                    params.u_amplitude_factor * s.U,
                    params.amplitude_factor * s.V,
                    grid.h / params.space_factor,
                    s.t / params.time_factor,
                    lam=lam,
                )
        fr = extract_front(s.U, grid.h, origin=np.full(grid.dimension, -grid.extent), t=s.t)
        if not fr.empty:
            fronts.append(fr)
            d = sphere_deviation(fr)
            metrics.append({"t": s.t, "r_min": d.r_min, "r_max": d.r_max, "deviation": d.deviation,
                            "hausdorff_to_reference": float("nan")})
    if cfg.output.fronts:
        write_front_csv(out / "fronts.csv", fronts)
        write_metrics_csv(out / "front_metrics.csv", metrics)
    write_manifest(out / "manifest.yaml", config_dict(cfg), {"command": "run", "snapshots": len(traj.snapshots)})
    print(f"wrote {len(traj.snapshots)} snapshots to {out}")
    return EXIT_OK


def cmd_study(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg)
    jobs = args.jobs if args.jobs else default_jobs()
    study = build_study(cfg)
    report = convergence_study(study, jobs=jobs)
    (out / "study.csv").write_text(report.to_csv())
    (out / "amplitude_probes.csv").write_text(report.probes_csv())
    audit_lines = {str(lam): [a.line() for a in audits] for lam, audits in report.audits.items()}
    write_manifest(
        out / "manifest.yaml",
        config_dict(cfg),
        {"command": "study", "study": config_summary(study), "failures": {str(k): v for k, v in report.failures.items()},
         "audits": audit_lines},
    )
    sys.stdout.write(report.to_csv())
    for lam, lines in audit_lines.items():
        for line in lines:
            print(f"lambda={lam}: {line}", file=sys.stderr)
    if report.failures:
        for lam, msg in report.failures.items():
            print(f"lambda={lam} failed: {msg}", file=sys.stderr)
        return EXIT_NUMERIC
    failed = any(not a.passed for audits in report.audits.values() for a in audits)
    return EXIT_AUDIT if failed else EXIT_OK


def _dump_states(directory: Path) -> list[ObstacleState]:
    files = sorted(directory.glob("*.stfh"))
    files = [f for f in files if not f.name.startswith("rescaled_")]
    if not files:
        raise UsageError(f"no .stfh dumps in {directory}")
    states = []
    for k, f in enumerate(files):
        d = read_dump(f)
        states.append(ObstacleState(d.U, d.V, d.t, k))
    return sorted(states, key=lambda s: s.t)


def cmd_audit(args) -> int:
    results = []
    if args.dumps:
        results.append(audit_monotonicity(_dump_states(Path(args.dumps))))
    else:
        if not args.config:
            raise UsageError("audit needs a config file or --dumps DIR")
        cfg = _load(args)
        grid, traj = _simulate(cfg)
        results += [audit_monotonicity(traj), audit_enthalpy(traj)]
        if not args.skip_comparison:
            m, M = cfg.media.m, cfg.media.M
            lo = override(cfg, **{"media.kind": "constant", "media.M": m})
            hi = override(cfg, **{"media.kind": "constant", "media.m": M})
            results.append(audit_comparison(_simulate(lo)[1], _simulate(hi)[1]))
    for r in results:
        print(r.line())
        for w in r.witnesses:
            print(f"  {w}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_AUDIT


def _kv(items: list[str]) -> dict[str, float]:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"expected key=value, got {item!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise UsageError(f"{key} must be numeric, got {val!r}") from None
    return out


def _need(kv: dict, *keys) -> list[float]:
    missing = [k for k in keys if k not in kv]
    if missing:
        raise UsageError("missing parameter(s): " + ", ".join(missing))
    return [kv[k] for k in keys]


def cmd_reference(args) -> int:
    kv = _kv(args.params)
    if args.what == "rho":
        n, A, L, t = _need(kv, "n", "A", "L", "t")
        print(f"{ref.rho(A, L, int(n), t):.7f}")
    elif args.what in ("v", "u"):
        n, A, L, t, r = _need(kv, "n", "A", "L", "t", "r")
        sol = ref.SelfSimilarSolution(A, L, int(n))
        fn = ref.v_radial if args.what == "v" else ref.u_radial
        print(f"{fn(sol, r, t):.10g}")
    elif args.what == "cstar":
        n, a, d = _need(kv, "n", "a", "datum")
        print(f"{ref.cstar(a, d, int(n)):.10g}")
    else:
        a, b, A, L, n, T, dt = _need(kv, "a", "b", "A", "L", "n", "T", "dt")
        if args.what == "front":
            front = ref.radial_hele_shaw_front(a, b, A, L, int(n), T, dt)
        else:
            dr = kv.get("dr", (b - a) / 64)
            front = ref.radial_stefan_solve(a, b, A, L, None, T, dr, dt, n=int(n)).front
        sys.stdout.write("t,R,R_over_rho\n")
        for row in front.rows():
            sys.stdout.write(f"{row['t']!r},{row['R']!r},{row['R_over_rho']!r}\n")
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stefan-homog", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp, required=True):
        sp.add_argument("config", nargs=None if required else "?", help="YAML configuration file")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        sp.add_argument("--seed", type=int, help="media seed (overrides media.seed)")
        sp.add_argument("--omega", type=float, help="PSOR relaxation (overrides solver.omega)")
        return sp

    with_config(sub.add_parser("validate", help="parse and validate a config"))
    with_config(sub.add_parser("run", help="single simulation with snapshots"))
    sp = with_config(sub.add_parser("study", help="convergence study over lambda"))
    sp.add_argument("--jobs", type=int, help="worker processes (default: STEFAN_HOMOG_JOBS or cores)")
    sp = with_config(sub.add_parser("audit", help="invariant audits"), required=False)
    sp.add_argument("--dumps", help="audit existing snapshot dumps in this directory")
    sp.add_argument("--skip-comparison", action="store_true", help="skip the g=m vs g=M comparison run")

    sp = sub.add_parser("reference", help="closed-form and radial reference values")
    grp = sp.add_mutually_exclusive_group(required=True)
    for name, what in [("--rho", "rho"), ("--v", "v"), ("--u", "u"), ("--cstar", "cstar"),
                       ("--front", "front"), ("--stefan", "stefan")]:
        grp.add_argument(name, dest="what", action="store_const", const=what)
    sp.add_argument("params", nargs="*", help="key=value parameters, e.g. n=3 A=1 L=1 t=1")
    return p


COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "study": cmd_study,
    "audit": cmd_audit,
    "reference": cmd_reference,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for issue in exc.issues:
            print(f"  {issue}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
