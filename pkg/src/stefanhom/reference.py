"""Closed-form and radially symmetric reference solutions.

* the self-similar point-source Hele-Shaw solution ``V_{A,L}`` and its time
  integral ``U_{A,L}``;
* the radial Hele-Shaw front ``R(t)`` with a fixed inner boundary;
* a one-dimensional radial Stefan solver built on the same obstacle/LCP
  formulation as the grid solver;
* the near-field constant ``C*`` for a ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .obstacle import (
    GUARD_CELLS,
    ConvergenceError,
    DomainOverflowError,
    ObstacleState,
    SolverParams,
)


class OriginEvaluationError(ValueError):
    """The point-source solution is singular at the origin."""


class StepSizeError(ValueError):
    """The front moved more than R/10 in one integration step."""


@dataclass(frozen=True)
class SelfSimilarSolution:
    A: float
    L: float
    n: int

    def __post_init__(self):
        if not (self.A > 0 and self.L > 0 and self.n >= 2):
            raise ValueError("need A > 0, L > 0 and n >= 2")

    def rho(self, t):
        return rho(self.A, self.L, self.n, t)


def rho(A: float, L: float, n: int, t):
    """Front radius of ``V_{A,L}``: ``(A n (n-2) t / L)^(1/n)``, or ``(2At/L)^(1/2)`` in 2D."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    c = 2 * A / L if n == 2 else A * n * (n - 2) / L
    out = (c * t) ** (1.0 / n)
    return float(out) if out.ndim == 0 else out


def _radius(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1)) if x.ndim >= 1 else np.abs(x)
    if np.any(r == 0):
        raise OriginEvaluationError("point-source solution evaluated at the origin")
    return r


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


def v_radial(sol: SelfSimilarSolution, r, t):
    """``V_{A,L}`` as a function of the radius."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise OriginEvaluationError("point-source solution evaluated at the origin")
    R = sol.rho(t)
    if sol.n == 2:
        with np.errstate(divide="ignore"):
            out = sol.A * np.maximum(np.log(R / r), 0.0) if R > 0 else np.zeros_like(r)
    else:
        p = 2.0 - sol.n
        out = sol.A * np.maximum(r**p - R**p, 0.0) if R > 0 else np.zeros_like(r)
    return _scalar(out)


def self_similar_v(sol: SelfSimilarSolution, x, t):
    """``V_{A,L}(x, t)`` at points ``x`` of shape ``(..., n)``."""
    return v_radial(sol, _radius(x), t)


def onset_time(sol: SelfSimilarSolution, r):
    """Time at which the front of ``V_{A,L}`` reaches radius ``r``."""
    r = np.asarray(r, dtype=float)
    if sol.n == 2:
        return _scalar(sol.L * r**2 / (2 * sol.A))
    return _scalar(sol.L * r**sol.n / (sol.A * sol.n * (sol.n - 2)))


def u_radial(sol: SelfSimilarSolution, r, t):
    """``U_{A,L} = int_0^t V_{A,L} ds`` in closed form."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise OriginEvaluationError("point-source solution evaluated at the origin")
    t = float(t)
    s0 = np.asarray(onset_time(sol, r), dtype=float)
    live = t > s0
    ts = np.where(live, t, s0)
    A, n = sol.A, sol.n
    if n == 2:
        out = 0.5 * A * (ts * np.log(ts / s0) - ts + s0)
    else:
        c = A * n * (n - 2) / sol.L
        p = 2.0 - n
        out = A * r**p * (ts - s0) - 0.5 * A * n * c ** (p / n) * (ts ** (2.0 / n) - s0 ** (2.0 / n))
    return _scalar(np.where(live, out, 0.0))


def self_similar_U(sol: SelfSimilarSolution, x, t):
    return u_radial(sol, _radius(x), t)


def cstar(a: float, datum: float, n: int) -> float:
    """Near-field constant for ``K = B_a`` with boundary value ``datum``.

    The exterior harmonic function is ``datum * a^(n-2) |x|^(2-n)`` for
    ``n >= 3``.  In two dimensions the logarithmic rescaling normalises the
    amplitude to ``datum`` itself.
    """
    if a <= 0 or datum <= 0:
        raise ValueError("core radius and datum must be positive")
    if n == 2:
        return float(datum)
    return float(datum * a ** (n - 2))


def interpolation_error_bound(sol: SelfSimilarSolution, r, t, h: float):
    """Bound on the multilinear interpolation error of ``V_{A,L}(., t)``.

    For cells away from the front this is ``(h^2/8) sum_i |d_ii V|`` with
    ``sum_i |d_ii V| <= 2 n max(n-2, 1) A r^-n`` at the cell's smallest radius;
    cells cut by the front fall back to the Lipschitz bound
    ``h sqrt(n) |DV|``.
    """
    r = np.asarray(r, dtype=float)
    n = sol.n
    half = 0.5 * h * math.sqrt(n)
    rmin = np.maximum(r - half, 1e-300)
    curv = 2 * n * max(n - 2, 1) * sol.A * rmin ** (-float(n))
    bound = h * h / 8.0 * curv
    R = sol.rho(t)
    slope = sol.A * max(n - 2, 1) * rmin ** (1.0 - n)
    cut = (r - half <= R) & (R <= r + half)
    return _scalar(np.where(cut, h * math.sqrt(n) * slope, bound))


@dataclass
class RadialFront:
    a: float
    b: float
    A: float
    L: float
    n: int
    t: np.ndarray
    R: np.ndarray

    @property
    def R_over_rho(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.R / rho(self.A, self.L, self.n, self.t)

    def rows(self):
        for t, R, q in zip(self.t, self.R, self.R_over_rho):
            yield {"t": float(t), "R": float(R), "R_over_rho": float(q)}


def radial_hele_shaw_front(
    a: float, b: float, A: float, L: float, n: int, T: float, dt: float, max_records: int = 10_000
) -> RadialFront:
    """Integrate the radial Hele-Shaw front from ``R(0) = b`` with RK4.

    The pressure is the exterior harmonic profile with ``p(a) = A a^(2-n)``
    and ``p(R) = 0``; the front moves with ``R' = |Dp|/L``, i.e.
    ``L R^(n-1) R' = (n-2) A a^(2-n) / (a^(2-n) - R^(2-n))`` for ``n >= 3``
    and ``L R R' = A / log(R/a)`` for ``n = 2``.
    """
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    if T < 0 or dt <= 0:
        raise ValueError("need T >= 0 and dt > 0")
    nsteps = int(math.ceil(T / dt - 1e-12))
    every = max(1, nsteps // max_records)
    ts, rs, failed = _kernels.rk4_radial_front(
        float(a), float(b), float(A), float(L), int(n), float(dt), nsteps, every
    )
    if failed >= 0:
        raise StepSizeError(f"front increment exceeded R/10 at step {failed}; reduce dt={dt}")
    if nsteps % every:
        # make sure the final time is present
        _, tail, _ = _kernels.rk4_radial_front(
            float(a), float(b), float(A), float(L), int(n), float(dt), nsteps, nsteps
        )
        ts = np.append(ts, nsteps * dt)
        rs = np.append(rs, tail[-1])
    return RadialFront(a, b, A, L, n, ts, rs)


@dataclass
class RadialStefanResult:
    """Trajectory of the radial obstacle solver.

    ``snapshots`` hold the time-integrated temperature ``U`` and the
    temperature ``V = theta`` on the radial nodes ``r`` (node 0 sits on
    ``|x| = a``, the last node is the truncation radius).
    """

    r: np.ndarray
    n: int
    a: float
    A: float
    L: float
    dt: float
    theta0: np.ndarray
    f: np.ndarray
    snapshots: list[ObstacleState]
    front: RadialFront
    flux: list[float] = field(default_factory=list)
    iterations: int = 0

    @property
    def weights(self) -> np.ndarray:
        dr = self.r[1] - self.r[0]
        return self.r ** (self.n - 1) * dr

    def enthalpy(self, state: ObstacleState) -> float:
        inner = slice(1, -1)
        melted = (state.U[inner] > 0) & (self.theta0[inner] == 0)
        w = self.weights[inner]
        return float(np.sum(w * state.V[inner]) + np.sum(w[melted] * -self.f[inner][melted]))

    def snapshot_at(self, t: float) -> ObstacleState:
        best = min(self.snapshots, key=lambda s: abs(s.t - t))
        if abs(best.t - t) > 0.5 * self.dt:
            raise KeyError(f"no snapshot at t={t}")
        return best

    def profile(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        s = self.snapshot_at(t)
        return self.r, s.V


def _front_position(r: np.ndarray, U: np.ndarray) -> float:
    pos = np.flatnonzero(U[1:] > 0) + 1
    if pos.size == 0:
        return float(r[0])
    k = pos[-1]
    dr = r[1] - r[0]
    # u ~ (R - r)^2 near the front: extrapolate sqrt(u) linearly to zero
    s1 = math.sqrt(U[k])
    s0 = math.sqrt(U[k - 1]) if k >= 1 else s1
    if s0 > s1 > 0:
        return float(r[k] + min(dr, dr * s1 / (s0 - s1)))
    return float(r[k])


def radial_stefan_solve(
    a: float,
    b: float,
    A: float,
    L: float,
    theta0: Callable | str | None,
    T: float,
    dr: float,
    dt: float,
    n: int = 3,
    r_max: float | None = None,
    snapshot_times=None,
    solver: str = "direct",
    params: SolverParams = SolverParams(),
) -> RadialStefanResult:
    """Radially symmetric one-phase Stefan problem outside ``B_a``.

    ``theta = A a^(2-n)`` on ``|x| = a``, constant latent heat ``L``.  Each
    implicit step is an LCP with a tridiagonal M-matrix from the
    conservative radial stencil; ``solver="direct"`` uses Brennan-Schwartz
    elimination (with a residual check and PSOR fallback), ``"psor"`` uses
    projected SOR throughout.

    ``theta0`` is a callable of the radius, ``"linear"`` (default) for
    ``A a^(2-n) (b - r)/(b - a)``, or ``"cubic"``.
    """
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    if dr <= 0 or dt <= 0 or T <= 0:
        raise ValueError("dr, dt and T must be positive")
    if solver not in ("direct", "psor"):
        raise ValueError(f"unknown radial LCP solver {solver!r}")
    wall = A * a ** (2.0 - n)
    if r_max is None:
        # Hele-Shaw asymptotics bound the Stefan front; pad generously
        c_inf = 2 * math.sqrt(A / L) if n == 2 else (A * n * (n - 2) / L) ** (1.0 / n)
        scale_t = T / max(math.log(T), 1.0) if n == 2 else T
        r_max = 2.0 * max(b, c_inf * scale_t ** (0.5 if n == 2 else 1.0 / n)) + 10 * dr
    N = int(math.ceil((r_max - a) / dr)) + 1
    r = a + dr * np.arange(N)
    if theta0 is None or theta0 == "linear":
        th0 = wall * np.clip((b - r) / (b - a), 0.0, None)
    elif theta0 == "cubic":
        s = np.clip((b - r) / (b - a), 0.0, 1.0)
        th0 = wall * (1.5 * s - 0.5 * s**3)
    else:
        th0 = np.asarray(theta0(r), dtype=float)
    if np.any(th0 < 0):
        raise ValueError("theta0 must be nonnegative")
    th0[0] = wall
    th0[-1] = 0.0
    f = np.where(th0 > 0, th0, -L)

    rc = r ** (n - 1)
    rp = (r + 0.5 * dr) ** (n - 1)
    rm = (r - 0.5 * dr) ** (n - 1)
    inner = slice(1, N - 1)
    lower = -(rm / (rc * dr * dr))[inner].copy()
    upper = -(rp / (rc * dr * dr))[inner].copy()
    diag = (1.0 / dt + (rp + rm) / (rc * dr * dr))[inner].copy()

    nsteps = int(round(T / dt))
    times = [0.0, nsteps * dt] if snapshot_times is None else list(snapshot_times)
    wanted = {int(round(s / dt)) for s in times}

    U = np.zeros(N)
    V = th0.copy()
    snaps: list[ObstacleState] = []
    fluxes: list[float] = []
    if 0 in wanted:
        snaps.append(ObstacleState(U.copy(), V.copy(), 0.0, 0))
        fluxes.append(0.0)
    ft = np.empty(nsteps + 1)
    fr = np.empty(nsteps + 1)
    ft[0], fr[0] = 0.0, b
    accumulated = 0.0
    total_it = 0
    x = np.zeros(N - 2)
    maxit = params.maxit or 50 * N
    for k in range(1, nsteps + 1):
        t = k * dt
        q = (U / dt + f)[inner].copy()
        q[0] -= lower[0] * wall * t
        scale = max(1.0, float(np.max(np.abs(q))), wall * t)
        if solver == "direct":
            _kernels.tridiag_lcp_direct(lower, diag, upper, q, x)
            res = _kernels.tridiag_residual(lower, diag, upper, q, x)
            it = 1
            if res > params.tol * scale:
                x = np.maximum(U[inner] + dt * V[inner], 0.0)
                it, res = _kernels.psor_tridiag(lower, diag, upper, q, x, params.omega, params.tol, maxit, scale)
        else:
            x = np.maximum(U[inner] + dt * V[inner], 0.0)
            it, res = _kernels.psor_tridiag(lower, diag, upper, q, x, params.omega, params.tol, maxit, scale)
        if res > params.tol * scale:
            raise ConvergenceError("radial LCP did not converge", res, it)
        total_it += it
        Un = np.empty(N)
        Un[0] = wall * t
        Un[inner] = x
        Un[-1] = 0.0
        Vn = (Un - U) / dt
        np.maximum(Vn, 0.0, out=Vn)
        U, V = Un, Vn
        if np.any(U[N - 1 - GUARD_CELLS:] > 0):
            raise DomainOverflowError(f"radial front reached the truncation radius {r[-1]} at t={t}")
        dr2 = 1.0 / dr
        accumulated += dt * dr2 * (rp[0] * (V[0] - V[1]) + rm[-1] * (V[-1] - V[-2]))
        ft[k] = t
        fr[k] = _front_position(r, U)
        if k in wanted:
            snaps.append(ObstacleState(U.copy(), V.copy(), t, k, res, it))
            fluxes.append(accumulated)
    front = RadialFront(a, b, A, L, n, ft, fr)
    return RadialStefanResult(r, n, a, A, L, dt, th0, f, snaps, front, fluxes, total_it)
