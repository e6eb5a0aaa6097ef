"""Convergence studies over the scale parameter and invariant audits."""

from __future__ import annotations

import csv
import io
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import yaml

from . import __version__
from .frontmetrics import FrontSet, extract_front, hausdorff, sphere_deviation, sphere_front
from .geometry import GridProblem, make_grid
from .media import LatentHeatField, averaged_latent_heat
from .obstacle import (
    NumericalFailure,
    ObstacleState,
    SolverParams,
    Trajectory,
    boundary_flux,
    enthalpy,
    initial_state,
    run,
)
from .reference import RadialStefanResult, SelfSimilarSolution, cstar, u_radial, v_radial
from .rescale import make_params, rescale_snapshot

REPORT_COLUMNS = (
    "lambda",
    "t_rescaled",
    "sup_err_v",
    "sup_err_u",
    "hausdorff",
    "dev_sphere",
    "cstar",
    "L_hom",
    "grid_h",
    "seed",
)


# --------------------------------------------------------------------- audits


@dataclass
class AuditResult:
    name: str
    passed: bool
    witnesses: list[str] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.stats.items())
        return f"{status} {self.name}" + (f" ({extra})" if extra else "")


_MAX_WITNESSES = 5


def _unpack(run_) -> tuple[list[ObstacleState], np.ndarray | None, float]:
    """Snapshots, initial data ``v0`` on free nodes (NaN elsewhere) and the datum."""
    if isinstance(run_, Trajectory):
        v0 = np.where(run_.grid.mask.fluid, run_.grid.v0, np.nan)
        return list(run_.snapshots), v0, run_.grid.boundary_datum
    if isinstance(run_, RadialStefanResult):
        v0 = run_.theta0.copy()
        v0[0] = v0[-1] = np.nan
        return list(run_.snapshots), v0, run_.A * run_.a ** (2.0 - run_.n)
    states = list(run_)
    return states, None, 1.0


def _node(idx) -> str:
    return "(" + ", ".join(str(int(i)) for i in idx) + ")"


def audit_monotonicity(run_, v0: np.ndarray | None = None) -> AuditResult:
    """``V >= 0``, ``U`` nondecreasing, nested positivity sets, finite ``C_mono``.

    ``run_`` is a :class:`Trajectory`, a :class:`RadialStefanResult` or a
    time-ordered sequence of :class:`ObstacleState`.  Nodes with ``v0 > 0``
    must be positive at every snapshot with ``t > 0``.
    """
    states, v0_run, datum = _unpack(run_)
    v0 = v0_run if v0 is None else v0
    states = sorted(states, key=lambda s: s.t)
    wit: list[str] = []
    top = max((float(np.max(s.U)) for s in states), default=0.0)
    eps = 1e-12 * max(top, 1e-300)
    slack = 1e-9 * max(1.0, top)
    masks = [s.U > eps for s in states]

    for s in states:
        bad = np.argwhere(s.V < 0)
        for idx in bad[:_MAX_WITNESSES]:
            wit.append(f"V={s.V[tuple(idx)]:.3e} < 0 at node {_node(idx)}, t={s.t:g}")
    for prev, cur, mp, mc in zip(states, states[1:], masks, masks[1:]):
        drop = np.argwhere(cur.U < prev.U - slack)
        for idx in drop[:_MAX_WITNESSES]:
            wit.append(f"U decreased at node {_node(idx)} between t={prev.t:g} and t={cur.t:g}")
        lost = np.argwhere(mp & ~mc)
        for idx in lost[:_MAX_WITNESSES]:
            wit.append(f"positivity lost at node {_node(idx)} between t={prev.t:g} and t={cur.t:g}")

    c_mono = 0.0
    if v0 is not None:
        support = np.nan_to_num(v0) > 0
        floor = 1e-12 * datum
        for s, m in zip(states, masks):
            if s.t <= 0:
                continue
            missing = np.argwhere(support & ~m)
            for idx in missing[:_MAX_WITNESSES]:
                wit.append(f"initial support node {_node(idx)} not positive at t={s.t:g}")
            if support.any():
                ratio = v0[support] / np.maximum(s.V[support], floor)
                c_mono = max(c_mono, float(ratio.max()))
    return AuditResult("monotonicity", not wit, wit, {"C_mono": c_mono, "snapshots": len(states)})


def audit_comparison(lower, upper) -> AuditResult:
    """Ordered data gives ordered solutions: ``U <= U_hat`` node-wise,
    ``sum V <= sum V_hat`` and ``Omega(U) within Omega(U_hat)`` at every
    common snapshot time."""
    sa, _, _ = _unpack(lower)
    sb, _, _ = _unpack(upper)
    by_t = {round(s.t, 12): s for s in sb}
    wit: list[str] = []
    matched = 0
    worst = 0.0
    for a in sa:
        b = by_t.get(round(a.t, 12))
        if b is None:
            continue
        matched += 1
        slack = 1e-8 * max(1.0, float(np.max(b.U)))
        gap = a.U - b.U
        worst = max(worst, float(gap.max()))
        for idx in np.argwhere(gap > slack)[:_MAX_WITNESSES]:
            wit.append(f"U above U_hat by {gap[tuple(idx)]:.3e} at node {_node(idx)}, t={a.t:g}")
        va, vb = float(a.V.sum()), float(b.V.sum())
        if va > vb + 1e-8 * max(1.0, abs(vb)):
            wit.append(f"sum V = {va:.6g} exceeds {vb:.6g} at t={a.t:g}")
        eps = 1e-12 * max(float(np.max(b.U)), 1e-300)
        outside = np.argwhere((a.U > eps) & ~(b.U > 0))
        for idx in outside[:_MAX_WITNESSES]:
            wit.append(f"positivity set not nested at node {_node(idx)}, t={a.t:g}")
    if matched == 0:
        wit.append("no common snapshot times")
    return AuditResult("comparison", not wit, wit, {"max_excess": worst, "snapshots": matched})


def comparison_pair(
    problem: GridProblem,
    field_lower: LatentHeatField,
    field_upper: LatentHeatField,
    T: float,
    dt: float,
    params: SolverParams = SolverParams(),
    snapshot_times=None,
) -> AuditResult:
    """Run two media on one geometry and audit the ordering of the results.

    Requires ``f <= f_hat`` node-wise, i.e. ``g <= g_hat`` off the initial
    support.
    """
    from .media import build_f

    fa = build_f(field_lower, problem.v0, problem.points)
    fb = build_f(field_upper, problem.v0, problem.points)
    if np.any(fa > fb):
        raise ValueError("comparison pair needs f <= f_hat node-wise")
    ra = run(problem, field_lower, T, dt, params, snapshot_times)
    rb = run(problem, field_upper, T, dt, params, snapshot_times)
    return audit_comparison(ra, rb)


def audit_enthalpy(run_, rel_tol: float = 0.05) -> AuditResult:
    """Enthalpy gained equals the accumulated boundary flux (relative ``rel_tol``).

    The mismatch is the O(h) front term (:func:`obstacle.front_defect`); it
    is roughly constant in time, so the relative error is largest for early
    snapshots and coarse grids.
    """
    wit: list[str] = []
    worst = 0.0
    if isinstance(run_, Trajectory):
        e0 = enthalpy(run_.grid, run_.f, initial_state(run_.grid))
        pairs = [(s, enthalpy(run_.grid, run_.f, s), F) for s, F in zip(run_.snapshots, run_.flux)]
    elif isinstance(run_, RadialStefanResult):
        init = ObstacleState(np.zeros_like(run_.r), run_.theta0.copy(), 0.0)
        e0 = run_.enthalpy(init)
        pairs = [(s, run_.enthalpy(s), F) for s, F in zip(run_.snapshots, run_.flux)]
    else:
        raise TypeError("enthalpy audit needs a Trajectory or RadialStefanResult")
    for s, e, F in pairs:
        if s.t == 0:
            continue
        gained = e - e0
        err = abs(gained - F) / max(abs(F), 1e-300)
        worst = max(worst, err)
        if err > rel_tol:
            wit.append(f"t={s.t:g}: enthalpy gain {gained:.6g} vs flux {F:.6g} (rel {err:.3g})")
    return AuditResult("enthalpy", not wit, wit, {"max_rel_err": worst})


def audit_bound(result: RadialStefanResult, c_bound: float | None = None) -> AuditResult:
    """``theta <= C |x|^(2-n)`` for a radial run with ``n >= 3``.

    The default ``C`` is the maximum-principle constant
    ``max(A, sup theta0 r^(n-2))``; the fitted constant
    ``max_t sup theta r^(n-2)`` is reported.
    """
    n = result.n
    if n < 3:
        raise ValueError("the |x|^(2-n) bound applies to n >= 3")
    weight = result.r ** (n - 2.0)
    if c_bound is None:
        c_bound = max(result.A, float(np.max(result.theta0 * weight)))
    fitted = max(float(np.max(s.V * weight)) for s in result.snapshots)
    wit = []
    if fitted > c_bound * (1 + 1e-9):
        wit.append(f"fitted constant {fitted:.6g} exceeds bound {c_bound:.6g}")
    return AuditResult("bound", not wit, wit, {"C_fit": fitted, "C_bound": c_bound})


# --------------------------------------------------------------------- study


@dataclass(frozen=True)
class StudyConfig:
    dimension: int
    core_radius: float
    omega0_radius: float
    field: LatentHeatField
    lambdas: tuple[float, ...]
    rescaled_times: tuple[float, ...]
    annulus: tuple[float, float]
    target_h: float = 1 / 128
    target_extent: float = 2.0
    dtau: float = 0.02
    boundary_datum: float = 1.0
    v0_profile: str = "linear"
    solver: SolverParams = SolverParams(omega=1.96)
    homogenization_cells: int = 100
    amplitude_probes: tuple[float, ...] = (0.8, 1.25)
    audits: bool = True

    def __post_init__(self):
        problems = []
        lam = list(self.lambdas)
        if not lam or any(b <= a for a, b in zip(lam, lam[1:])):
            problems.append("lambdas must be a nonempty strictly increasing list")
        if not self.rescaled_times or min(self.rescaled_times) <= 0:
            problems.append("rescaled_times must be positive")
        r_in, r_out = self.annulus
        if not 0 < r_in < r_out:
            problems.append("annulus needs 0 < r_inner < r_outer")
        if self.dtau <= 0 or self.target_h <= 0:
            problems.append("dtau and target_h must be positive")
        for t in self.rescaled_times:
            k = t / self.dtau
            if abs(k - round(k)) > 1e-9 * max(1.0, k):
                problems.append(f"rescaled time {t} is not a multiple of dtau={self.dtau}")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class StudyReport:
    config: StudyConfig
    cstar: float
    L_hom: float
    rows: list[dict] = field(default_factory=list)
    probes: dict = field(default_factory=dict)  # (lambda, t) -> {factor: sup error}
    audits: dict = field(default_factory=dict)  # lambda -> [AuditResult]
    failures: dict = field(default_factory=dict)  # lambda -> message

    def row(self, lam: float, t: float) -> dict:
        for r in self.rows:
            if r["lambda"] == lam and r["t_rescaled"] == t:
                return r
        raise KeyError((lam, t))

    def column(self, name: str, t: float) -> list[float]:
        return [r[name] for r in self.rows if r["t_rescaled"] == t]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in REPORT_COLUMNS])
        return buf.getvalue()

    def probes_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "t_rescaled", "amplitude_factor", "sup_err_v"])
        for (lam, t), d in sorted(self.probes.items()):
            for k, v in sorted(d.items()):
                w.writerow([_fmt(lam), _fmt(t), _fmt(k), _fmt(v)])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _target_axis(cfg: StudyConfig) -> np.ndarray:
    k = int(round(cfg.target_extent / cfg.target_h))
    return cfg.target_h * np.arange(-k, k + 1)


def _annulus_points(cfg: StudyConfig) -> np.ndarray:
    ax = _target_axis(cfg)
    pts = np.stack(np.meshgrid(*([ax] * cfg.dimension), indexing="ij"), axis=-1).reshape(-1, cfg.dimension)
    r = np.linalg.norm(pts, axis=1)
    r_in, r_out = cfg.annulus
    return pts[(r >= r_in - 1e-12) & (r <= r_out + 1e-12)]


def homogenized_constants(cfg: StudyConfig) -> tuple[float, float]:
    """``(C*, L)`` for the limit profile."""
    extent = cfg.homogenization_cells * cfg.field.cell
    return cstar(cfg.core_radius, cfg.boundary_datum, cfg.dimension), averaged_latent_heat(cfg.field, extent)


def study_point(cfg: StudyConfig, lam: float) -> dict:
    """Run one scale parameter; returns rows, probe errors and audits."""
    params = make_params(lam, cfg.dimension)
    s = params.space_factor
    c_star, L = homogenized_constants(cfg)
    grid = make_grid(
        cfg.dimension,
        s * cfg.target_h,
        s * cfg.target_extent,
        cfg.core_radius,
        cfg.omega0_radius,
        cfg.boundary_datum,
        cfg.v0_profile,
    )
    times = sorted(cfg.rescaled_times)
    T = lam * times[-1]
    dt = lam * cfg.dtau
    traj = run(grid, cfg.field, T, dt, cfg.solver, [0.0] + [lam * t for t in times])

    pts = _annulus_points(cfg)
    r = np.linalg.norm(pts, axis=1)
    ref = SelfSimilarSolution(c_star, L, cfg.dimension)
    rows, probes = [], {}
    for t in times:
        snap = traj.snapshot_at(lam * t)
        v, u = rescale_snapshot(snap, grid, params, pts)
        err_v = float(np.max(np.abs(v - v_radial(ref, r, t))))
        err_u = float(np.max(np.abs(u - u_radial(ref, r, t))))
        raw = extract_front(snap.U, grid.h, origin=np.full(cfg.dimension, -grid.extent))
        gam = FrontSet(raw.points / s, cfg.target_h, t)
        if gam.empty:
            haus = dev = math.nan
        else:
            sphere = sphere_front(ref.rho(t), cfg.dimension, cfg.target_h / 4, t)
            haus = hausdorff(gam, sphere)
            dev = sphere_deviation(gam).deviation
        rows.append(
            {
                "lambda": float(lam),
                "t_rescaled": float(t),
                "sup_err_v": err_v,
                "sup_err_u": err_u,
                "hausdorff": haus,
                "dev_sphere": dev,
                "cstar": c_star,
                "L_hom": L,
                "grid_h": cfg.target_h,
                "seed": cfg.field.seed,
            }
        )
        probes[(float(lam), float(t))] = {
            float(k): float(np.max(np.abs(v - v_radial(SelfSimilarSolution(k * c_star, L, cfg.dimension), r, t))))
            for k in cfg.amplitude_probes
        }
    audits = [audit_monotonicity(traj), audit_enthalpy(traj)] if cfg.audits else []
    return {"rows": rows, "probes": probes, "audits": audits}


def _safe_point(args) -> dict:
    cfg, lam = args
    try:
        return study_point(cfg, lam)
    except NumericalFailure as exc:
        return {"failure": f"{type(exc).__name__}: {exc}"}


def _failed_rows(cfg: StudyConfig, lam: float, c_star: float, L: float) -> list[dict]:
    nan = math.nan
    return [
        {
            "lambda": float(lam),
            "t_rescaled": float(t),
            "sup_err_v": nan,
            "sup_err_u": nan,
            "hausdorff": nan,
            "dev_sphere": nan,
            "cstar": c_star,
            "L_hom": L,
            "grid_h": cfg.target_h,
            "seed": cfg.field.seed,
        }
        for t in sorted(cfg.rescaled_times)
    ]


def convergence_study(config: StudyConfig, jobs: int = 1) -> StudyReport:
    """Run every scale parameter and assemble the report in ``(lambda, t)`` order.

    Failed points get NaN metric rows and an entry in ``report.failures``.
    """
    c_star, L = homogenized_constants(config)
    report = StudyReport(config, c_star, L)
    tasks = [(config, float(lam)) for lam in config.lambdas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_safe_point, tasks))
    else:
        results = [_safe_point(t) for t in tasks]
    for (_, lam), res in zip(tasks, results):
        if "failure" in res:
            report.failures[lam] = res["failure"]
            report.rows.extend(_failed_rows(config, lam, c_star, L))
            continue
        report.rows.extend(res["rows"])
        report.probes.update(res["probes"])
        report.audits[lam] = res["audits"]
    report.rows.sort(key=lambda r: (r["lambda"], r["t_rescaled"]))
    return report


def config_summary(cfg: StudyConfig) -> dict:
    d = asdict(cfg)
    d["lambdas"] = list(cfg.lambdas)
    d["rescaled_times"] = list(cfg.rescaled_times)
    d["annulus"] = list(cfg.annulus)
    d["amplitude_probes"] = list(cfg.amplitude_probes)
    return d


def write_manifest(path, config: dict, extra: dict | None = None) -> None:
    """Provenance manifest: effective config, versions and outcome notes."""
    body = {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": config,
    }
    if extra:
        body.update(extra)
    with open(path, "w") as fh:
        yaml.safe_dump(_plain(body), fh, sort_keys=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def ladder_checks(values: Sequence[float], slack: float = 1.1, final_ratio: float = 0.5) -> tuple[bool, str]:
    """Each step at most ``slack`` times the previous value, last at most
    ``final_ratio`` times the first."""
    vals = list(values)
    if any(not math.isfinite(v) for v in vals) or len(vals) < 2:
        return False, f"values {vals}"
    steps = [b / a if a > 0 else math.inf for a, b in zip(vals, vals[1:])]
    ok = all(s <= slack for s in steps) and vals[-1] <= final_ratio * vals[0]
    return ok, "values " + ", ".join(f"{v:.4g}" for v in vals) + f"; final/initial {vals[-1] / vals[0]:.3f}"
