"""Scaling maps between original and rescaled variables.

For ``n >= 3``::

    v^lam(x, t) = lam^((n-2)/n) v(lam^(1/n) x, lam t)
    u^lam(x, t) = lam^(-2/n)    u(lam^(1/n) x, lam t)

In two dimensions the spatial scale is the root ``R`` of ``R^2 log R = lam``,
with ``v^lam = log R * v(R x, lam t)`` and ``u^lam = (log R / lam) u(R x, lam t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geometry import GridProblem
from .obstacle import ObstacleState


class CoverageError(ValueError):
    """Pulled-back target points fall outside the original grid."""


def solve_R(lam: float, rtol: float = 1e-12) -> float:
    """Large root of ``R^2 log R = lam`` (requires ``lam > e``)."""
    lam = float(lam)
    if not lam > math.e:
        raise ValueError(f"lambda must exceed e, got {lam}")

    def F(R):
        return R * R * math.log(R) - lam

    R = math.sqrt(lam / max(1.0, 0.5 * math.log(lam)))
    lo, hi = math.sqrt(math.e), max(math.e, math.sqrt(lam))  # F(lo) < 0 < F(hi)
    for _ in range(100):
        fr = F(R)
        if abs(fr) <= rtol * lam:
            return R
        if fr < 0:
            lo = max(lo, R)
        else:
            hi = min(hi, R)
        step = R - fr / (2 * R * math.log(R) + R)
        R = step if lo < step < hi else 0.5 * (lo + hi)
    raise ArithmeticError(f"solve_R did not converge for lambda={lam}")


@dataclass(frozen=True)
class RescaleParams:
    lam: float
    n: int
    space_factor: float
    amplitude_factor: float
    time_factor: float

    @property
    def u_amplitude_factor(self) -> float:
        if self.n == 2:
            return self.amplitude_factor / self.lam
        return self.lam ** (-2.0 / self.n)

    def factors(self) -> tuple[float, float, float]:
        return (self.space_factor, self.amplitude_factor, self.time_factor)


def make_params(lam: float, n: int) -> RescaleParams:
    if n == 2:
        R = solve_R(lam)
        return RescaleParams(float(lam), 2, R, math.log(R), float(lam))
    if n < 2:
        raise ValueError("dimension must be at least 2")
    if lam < 1:
        raise ValueError(f"lambda must be >= 1 for n >= 3, got {lam}")
    return RescaleParams(float(lam), n, lam ** (1.0 / n), lam ** ((n - 2.0) / n), float(lam))


def rescaled_core_radius(a: float, params: RescaleParams) -> float:
    """Radius of the rescaled core ``K / space_factor``."""
    return a / params.space_factor


def _interp(axis: np.ndarray, n: int, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    rgi = RegularGridInterpolator((axis,) * n, values, method="linear", bounds_error=True)
    return rgi(pts)


def rescale_snapshot(
    snapshot: ObstacleState,
    grid: GridProblem,
    params: RescaleParams,
    target: np.ndarray,
    t_target: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``(v^lam, u^lam)`` at rescaled points ``target`` of shape ``(..., n)``.

    ``snapshot`` lives on ``grid`` in original variables.  Values are
    obtained by multilinear interpolation at ``space_factor * target``.
    """
    if params.n != grid.dimension:
        raise ValueError("dimension mismatch between params and grid")
    if t_target is not None:
        want = params.time_factor * t_target
        if abs(snapshot.t - want) > 1e-9 * max(1.0, want):
            raise ValueError(f"snapshot time {snapshot.t} does not match {want}")
    target = np.asarray(target, dtype=float)
    shape = target.shape[:-1]
    pts = params.space_factor * target.reshape(-1, grid.dimension)
    # rounding slack so boundary nodes stay inside
    slack = 1e-9 * grid.h
    over = np.abs(pts).max(initial=0.0) - grid.extent
    if over > slack:
        raise CoverageError(
            f"original grid [-{grid.extent}, {grid.extent}]^n does not cover pulled-back points (overshoot {over:.3g})"
        )
    axis = grid.axis
    pts = np.clip(pts, axis[0], axis[-1])
    v = params.amplitude_factor * _interp(axis, grid.dimension, snapshot.V, pts)
    u = params.u_amplitude_factor * _interp(axis, grid.dimension, snapshot.U, pts)
    return v.reshape(shape), u.reshape(shape)
