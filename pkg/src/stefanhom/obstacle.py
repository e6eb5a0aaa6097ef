"""Implicit time stepping of the parabolic obstacle problem.

Each step solves the linear complementarity problem

    U >= 0,   M U - q >= 0,   U . (M U - q) = 0,

with ``M = I/dt - Lap_h`` and ``q = U_prev/dt + f`` on fluid nodes.  Core
nodes carry the Dirichlet value ``datum * t`` and box-face nodes are held at
zero.  The weak solution is recovered as ``V = (U - U_prev)/dt``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from . import _kernels
from .geometry import GridProblem
from .media import LatentHeatField, build_f

log = logging.getLogger(__name__)

GUARD_CELLS = 4
CLAMP_FRACTION = 1e-12


class NumericalFailure(RuntimeError):
    """Base class for failures of the numerical pipeline."""


class ConvergenceError(NumericalFailure):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} sweeps)")
        self.residual = residual
        self.iterations = iterations


class DomainOverflowError(NumericalFailure):
    """The positivity set reached the guard band next to the box faces."""


class InvariantViolation(NumericalFailure, AssertionError):
    """A discrete invariant failed by more than round-off."""


@dataclass(frozen=True)
class SolverParams:
    omega: float = 1.5
    tol: float = 1e-10
    maxit: int | None = None  # default 50 * nodes per axis
    ordering: str = "lex"  # or "redblack"
    check_every: int = 10

    def __post_init__(self):
        if not 0 < self.omega < 2:
            raise ValueError(f"relaxation factor must lie in (0, 2), got {self.omega}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.ordering not in ("lex", "redblack"):
            raise ValueError(f"unknown sweep ordering {self.ordering!r}")


@dataclass
class ObstacleState:
    U: np.ndarray
    V: np.ndarray
    t: float
    step_index: int = 0
    residual: float = 0.0
    iterations: int = 0


@dataclass
class LcpSystem:
    """Constant-coefficient stencil LCP on a grid.

    Rows of ``fixed`` nodes are identity rows whose value is stored in
    ``values``; the other rows use ``diag`` and ``off`` on the 2n nearest
    neighbours.
    """

    diag: float
    off: float
    q: np.ndarray
    fixed: np.ndarray
    values: np.ndarray

    @property
    def dimension(self) -> int:
        return self.q.ndim

    def to_sparse(self) -> tuple[sparse.csr_matrix, np.ndarray]:
        """Explicit ``(M, q)`` including identity rows for fixed nodes."""
        shape = self.q.shape
        size = self.q.size
        idx = np.arange(size).reshape(shape)
        rows, cols, vals = [], [], []
        free = ~self.fixed.ravel()
        flat = idx.ravel()
        rows.append(flat)
        cols.append(flat)
        vals.append(np.where(free, self.diag, 1.0))
        for axis in range(self.q.ndim):
            for step in (-1, 1):
                nb = np.roll(idx, -step, axis=axis)
                valid = np.ones(shape, dtype=bool)
                edge = [slice(None)] * self.q.ndim
                edge[axis] = -1 if step == 1 else 0
                valid[tuple(edge)] = False
                sel = (valid.ravel()) & free
                rows.append(flat[sel])
                cols.append(nb.ravel()[sel])
                vals.append(np.full(sel.sum(), self.off))
        M = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
        )
        q = np.where(free, self.q.ravel(), self.values.ravel())
        return M, q


@dataclass
class DenseLcp:
    M: np.ndarray
    q: np.ndarray


@dataclass
class PsorResult:
    x: np.ndarray
    iterations: int
    residual: float


def _scale(q: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(q)))) if q.size else 1.0


def lcp_residual(M, q, x) -> float:
    """``max |min(x, Mx - q)|`` for an explicit matrix."""
    w = M @ x - q
    return float(np.max(np.abs(np.minimum(x, w)))) if x.size else 0.0


def assemble_step(state: ObstacleState, dt: float, f: np.ndarray, grid: GridProblem) -> LcpSystem:
    """Implicit Euler LCP for the step ``state.t -> state.t + dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = grid.dimension
    h2 = grid.h * grid.h
    mask = grid.mask
    values = np.zeros(grid.shape)
    values[mask.core] = grid.boundary_datum * (state.t + dt)
    return LcpSystem(
        diag=1.0 / dt + 2 * n / h2,
        off=-1.0 / h2,
        q=state.U / dt + f,
        fixed=mask.fixed,
        values=values,
    )


def _window(active: np.ndarray, margin: int) -> tuple[np.ndarray, np.ndarray]:
    shape = np.array(active.shape)
    if not active.any():
        return np.ones(active.ndim, dtype=np.int64), np.ones(active.ndim, dtype=np.int64)
    lo, hi = [], []
    for axis in range(active.ndim):
        other = tuple(a for a in range(active.ndim) if a != axis)
        hit = np.flatnonzero(active.any(axis=other))
        lo.append(hit[0] - margin)
        hi.append(hit[-1] + 1 + margin)
    lo = np.clip(np.array(lo, dtype=np.int64), 1, shape - 1)
    hi = np.clip(np.array(hi, dtype=np.int64), 1, shape - 1)
    return lo, hi


def _touches_edge(U: np.ndarray, lo, hi, shape) -> bool:
    for axis in range(U.ndim):
        for at_lo in (True, False):
            if at_lo and lo[axis] <= 1 or not at_lo and hi[axis] >= shape[axis] - 1:
                continue
            sl = [slice(l, h) for l, h in zip(lo, hi)]
            sl[axis] = slice(lo[axis], lo[axis] + 2) if at_lo else slice(hi[axis] - 2, hi[axis])
            if np.any(U[tuple(sl)] > 0):
                return True
    return False


def solve_lcp_psor(
    sys: LcpSystem | DenseLcp,
    omega: float = 1.5,
    tol: float = 1e-10,
    maxit: int | None = None,
    x0: np.ndarray | None = None,
    ordering: str = "lex",
    check_every: int = 10,
) -> PsorResult:
    """Projected SOR for an M-matrix LCP.

    Converged when ``max |min(U, MU - q)| <= tol * max(1, |q|_inf)``.  Grid
    systems sweep only a box window around the support of the iterate and
    of ``q``; the window grows whenever positive values reach its edge, and a
    final residual over the whole grid guards the result.

    Raises
    ------
    ConvergenceError
        If ``maxit`` sweeps do not reach the tolerance.
    """
    if not 0 < omega < 2:
        raise ValueError(f"relaxation factor must lie in (0, 2), got {omega}")
    if isinstance(sys, DenseLcp):
        M = np.ascontiguousarray(sys.M, dtype=float)
        q = np.ascontiguousarray(sys.q, dtype=float)
        x = np.zeros_like(q) if x0 is None else np.maximum(np.array(x0, dtype=float), 0.0)
        maxit = maxit or 50 * max(q.size, 10)
        it, res = _kernels.psor_dense(M, q, x, omega, tol, maxit, _scale(q))
        if res > tol * _scale(q):
            raise ConvergenceError("PSOR did not converge", res, it)
        return PsorResult(x, it, res)

    q = np.ascontiguousarray(sys.q, dtype=float)
    fixed = np.ascontiguousarray(sys.fixed)
    shape = q.shape
    if maxit is None:
        maxit = 50 * shape[0]
    U = np.zeros(shape) if x0 is None else np.maximum(np.array(x0, dtype=float), 0.0)
    U[fixed] = sys.values[fixed]
    scale = max(_scale(q[~fixed]), _scale(sys.values[fixed]) if fixed.any() else 1.0)
    if q.ndim == 2:
        sweep, resid = _kernels.psor_sweeps_2d, _kernels.residual_2d
    elif q.ndim == 3:
        sweep, resid = _kernels.psor_sweeps_3d, _kernels.residual_3d
    else:
        raise ValueError("stencil systems must be 2- or 3-dimensional")
    redblack = ordering == "redblack"
    full_lo = np.ones(q.ndim, dtype=np.int64)
    full_hi = np.array(shape, dtype=np.int64) - 1

    active = (U > 0) & ~fixed | (q > 0) & ~fixed
    # fixed nodes with positive value feed their neighbours
    active |= fixed & (U > 0)
    lo, hi = _window(active, margin=3)

    sweeps = 0
    res = math.inf
    while sweeps < maxit:
        batch = min(check_every, maxit - sweeps)
        sweep(U, q, fixed, sys.diag, sys.off, omega, lo, hi, batch, redblack)
        sweeps += batch
        res = resid(U, q, fixed, sys.diag, sys.off, lo, hi)
        if res > tol * scale:
            continue
        if _touches_edge(U, lo, hi, shape):
            lo = np.maximum(lo - 8, full_lo)
            hi = np.minimum(hi + 8, full_hi)
            continue
        res = resid(U, q, fixed, sys.diag, sys.off, full_lo, full_hi)
        if res <= tol * scale:
            return PsorResult(U, sweeps, res)
        lo, hi = full_lo, full_hi
    raise ConvergenceError("PSOR did not converge", res, sweeps)


@dataclass
class Trajectory:
    """Snapshots and diagnostics of one obstacle-problem run."""

    grid: GridProblem
    field: LatentHeatField
    f: np.ndarray
    dt: float
    snapshots: list[ObstacleState]
    steplog: list[dict] = field(default_factory=list)
    # accumulated boundary flux at each snapshot, aligned with ``snapshots``
    flux: list[float] = field(default_factory=list)

    def snapshot_at(self, t: float) -> ObstacleState:
        best = min(self.snapshots, key=lambda s: abs(s.t - t))
        if abs(best.t - t) > 0.5 * self.dt:
            raise KeyError(f"no snapshot at t={t}")
        return best


def enthalpy(grid: GridProblem, f: np.ndarray, state: ObstacleState) -> float:
    """Discrete enthalpy ``sum_fluid [V + (1/g) 1{U > 0, v0 = 0}] h^n``."""
    fluid = grid.mask.fluid
    melted = (state.U > 0) & (grid.v0 == 0) & fluid
    # off the initial support f = -1/g
    total = state.V[fluid].sum() + (-f[melted]).sum()
    return float(total) * grid.h**grid.dimension


def front_defect(grid: GridProblem, state: ObstacleState) -> float:
    """Front term that closes the enthalpy balance exactly.

    Summing the complementarity multipliers over the dry nodes gives
    ``E(t) - E(0) + front_defect = accumulated flux`` up to solver tolerance;
    the defect is ``h^(n-2) sum_{U=0} sum_nb U_nb`` and is O(h) relative.
    """
    fluid = grid.mask.fluid
    dry = fluid & ~(state.U > 0)
    total = 0.0
    for axis in range(grid.dimension):
        for step in (-1, 1):
            total += float(np.roll(state.U, step, axis=axis)[dry].sum())
    return total * grid.h ** (grid.dimension - 2)


def boundary_flux(grid: GridProblem, V: np.ndarray) -> float:
    """Discrete flux into the fluid through the fixed nodes (core and box faces)."""
    mask = grid.mask
    fluid = mask.fluid
    fixed = mask.fixed
    total = 0.0
    for axis in range(grid.dimension):
        for step in (-1, 1):
            nb_fixed = np.roll(fixed, step, axis=axis)
            nb_V = np.roll(V, step, axis=axis)
            sel = fluid & nb_fixed
            total += float((nb_V[sel] - V[sel]).sum())
    return total * grid.h ** (grid.dimension - 2)


def front_radii(grid: GridProblem, U: np.ndarray) -> tuple[float, float]:
    """Radial extremes of positive fluid nodes adjacent to a zero fluid node."""
    pos = U > 0
    zero = ~pos & grid.mask.fluid
    edge = np.zeros_like(pos)
    for axis in range(grid.dimension):
        for step in (-1, 1):
            edge |= np.roll(zero, step, axis=axis)
    edge &= pos
    if not edge.any():
        return math.nan, math.nan
    r = grid.radius[edge]
    return float(r.min()), float(r.max())


def advance(
    state: ObstacleState,
    dt: float,
    f: np.ndarray,
    grid: GridProblem,
    params: SolverParams = SolverParams(),
) -> ObstacleState:
    """One implicit step; ``V`` is the backward difference of ``U``."""
    sys = assemble_step(state, dt, f, grid)
    guess = np.maximum(state.U + dt * state.V, 0.0)
    guess[grid.mask.far] = 0.0
    result = solve_lcp_psor(
        sys,
        omega=params.omega,
        tol=params.tol,
        maxit=params.maxit,
        x0=guess,
        ordering=params.ordering,
        check_every=params.check_every,
    )
    U = result.x
    V = (U - state.U) / dt
    floor = -CLAMP_FRACTION * grid.boundary_datum
    worst = float(V.min())
    if worst < floor:
        node = np.unravel_index(int(np.argmin(V)), V.shape)
        raise InvariantViolation(f"negative weak solution V={worst:.3e} at node {node}, t={state.t + dt}")
    np.maximum(V, 0.0, out=V)
    return ObstacleState(U, V, state.t + dt, state.step_index + 1, result.residual, result.iterations)


def check_guard(grid: GridProblem, U: np.ndarray, t: float) -> None:
    g = GUARD_CELLS
    inner = tuple(slice(g, -g) for _ in range(grid.dimension))
    positive = int(np.count_nonzero(U > 0))
    if positive != int(np.count_nonzero(U[inner] > 0)):
        raise DomainOverflowError(
            f"positivity set reached within {g} cells of the box face at t={t}"
        )


def initial_state(grid: GridProblem) -> ObstacleState:
    return ObstacleState(np.zeros(grid.shape), grid.v0.copy(), 0.0)


def run(
    problem: GridProblem,
    field: LatentHeatField,
    T: float,
    dt: float,
    params: SolverParams = SolverParams(),
    snapshot_times=None,
    progress=None,
) -> Trajectory:
    """Integrate to ``T`` with fixed ``dt``, keeping snapshots at requested times.

    Snapshot times are matched to the nearest step; the initial state is kept
    when 0 is requested.  Default schedule: ``[0, T]``.
    """
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * T:
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    times = [0.0, T] if snapshot_times is None else sorted(float(s) for s in snapshot_times)
    if times and (times[0] < 0 or times[-1] > T * (1 + 1e-12)):
        raise ValueError("snapshot times must lie in [0, T]")
    wanted = sorted({int(round(s / dt)) for s in times})

    f = build_f(field, problem.v0, problem.points)
    state = initial_state(problem)
    traj = Trajectory(problem, field, f, dt, [])
    accumulated = 0.0
    if 0 in wanted:
        traj.snapshots.append(replace(state, U=state.U.copy(), V=state.V.copy()))
        traj.flux.append(0.0)
    for k in range(1, nsteps + 1):
        state = advance(state, dt, f, problem, params)
        check_guard(problem, state.U, state.t)
        accumulated += dt * boundary_flux(problem, state.V)
        rmin, rmax = front_radii(problem, state.U)
        traj.steplog.append(
            {
                "step_index": state.step_index,
                "t": state.t,
                "residual": state.residual,
                "iterations": state.iterations,
                "front_min_radius": rmin,
                "front_max_radius": rmax,
            }
        )
        if k in wanted:
            traj.snapshots.append(state)
            traj.flux.append(accumulated)
        if progress is not None:
            progress(state)
    return traj
