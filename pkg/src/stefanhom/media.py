"""Inhomogeneous latent-heat media.

A :class:`LatentHeatField` describes the coefficient ``g(x)`` of the velocity
law ``V = g(x)|Dv|``.  Three kinds are supported:

``constant``
    ``g == m`` everywhere (``M`` must equal ``m``).
``periodic-checkerboard``
    Two-valued checkerboard with sub-cells of edge ``period / 2``; the pattern
    repeats with period ``period`` along every axis.  Even parity of
    ``sum(floor(2 x_i / period))`` selects ``m``, odd parity selects ``M``.
``random-checkerboard``
    Cells of edge ``period`` take ``m`` or ``M`` with probability 1/2 each,
    drawn from a counter-based hash keyed by ``(seed, cell index)``.  The field
    is reproducible point by point without storing any state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

KINDS = ("constant", "periodic-checkerboard", "random-checkerboard")

# band of the optional Lipschitz blend, as a fraction of ``period``
MOLLIFY_BAND = 1.0 / 8.0

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


class SamplingWindowError(ValueError):
    """Raised when an averaging window is too small for the requested medium."""


@dataclass(frozen=True)
class LatentHeatField:
    kind: str = "constant"
    m: float = 1.0
    M: float = 1.0
    period: float = 1.0
    seed: int = 0
    dimension: int = 2
    mollify: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown media kind {self.kind!r}; expected one of {KINDS}")
        if not (self.m > 0 and self.M > 0):
            raise ValueError("m and M must be positive")
        if self.m > self.M:
            raise ValueError(f"m={self.m} exceeds M={self.M}")
        if self.kind == "constant" and self.m != self.M:
            raise ValueError("constant medium requires m == M")
        if self.period <= 0:
            raise ValueError("period must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")

    @property
    def cell(self) -> float:
        """Edge length of the constant-value cells."""
        if self.kind == "periodic-checkerboard":
            return 0.5 * self.period
        return self.period

    def for_dimension(self, n: int) -> "LatentHeatField":
        return self if n == self.dimension else replace(self, dimension=n)

    def __call__(self, x) -> np.ndarray:
        return eval_g(self, x)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z + _GOLDEN) & _MASK64
        z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
        z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
        return z ^ (z >> np.uint64(31))


def _cell_values(field: LatentHeatField, idx: np.ndarray) -> np.ndarray:
    """Value of ``g`` on integer cells ``idx`` (shape ``(..., n)``)."""
    if field.kind == "constant":
        return np.full(idx.shape[:-1], float(field.m))
    if field.kind == "periodic-checkerboard":
        odd = idx.sum(axis=-1) % 2 == 1
    else:
        h = np.full(idx.shape[:-1], np.uint64(int(field.seed)), dtype=np.uint64)
        for axis in range(idx.shape[-1]):
            # two's-complement reinterpretation keeps negative cells distinct
            key = idx[..., axis].astype(np.int64).view(np.uint64)
            with np.errstate(over="ignore"):
                h = _splitmix64(h ^ (key + np.uint64(axis + 1) * _GOLDEN))
        odd = (h >> np.uint64(63)) == np.uint64(1)
    return np.where(odd, float(field.M), float(field.m))


def eval_g(field: LatentHeatField, x) -> np.ndarray | float:
    """Evaluate ``g`` at points ``x`` of shape ``(n,)`` or ``(..., n)``.

    Scalar input (a single point) returns a Python float.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    if pts.shape[-1] != field.dimension:
        raise ValueError(f"points must have {field.dimension} coordinates")
    if field.kind == "constant":
        out = np.full(pts.shape[:-1], float(field.m))
        return float(out) if single else out

    s = pts / field.cell
    base = np.floor(s).astype(np.int64)
    if not field.mollify:
        out = _cell_values(field, base)
        return float(out) if single else out

    # tensor-product linear blend across a band of width period/8 at each face
    frac = s - base
    half = 0.5 * MOLLIFY_BAND * field.period / field.cell
    n = field.dimension
    lo_w = np.clip((half - frac) / (2 * half), 0.0, None)
    hi_w = np.clip((frac - (1 - half)) / (2 * half), 0.0, None)
    self_w = 1.0 - lo_w - hi_w
    out = np.zeros(pts.shape[:-1])
    for corner in np.ndindex(*(3,) * n):
        w = np.ones(pts.shape[:-1])
        shift = np.zeros(n, dtype=np.int64)
        for axis, c in enumerate(corner):
            if c == 0:
                w = w * self_w[..., axis]
            elif c == 1:
                w = w * lo_w[..., axis]
                shift[axis] = -1
            else:
                w = w * hi_w[..., axis]
                shift[axis] = 1
        if not np.any(w):
            continue
        out = out + w * _cell_values(field, base + shift)
    return float(out) if single else out


def averaged_latent_heat(
    field: LatentHeatField, sample_extent: float, samples_per_cell: int = 1
) -> float:
    """Estimate the homogenized latent heat ``<1/g>``.

    Constant media return ``1/m`` exactly.  Periodic media are averaged over
    exactly one period with ``samples_per_cell`` midpoints per cell and axis,
    so the value does not depend on ``sample_extent`` beyond the check that
    it covers a full period.  Random media are averaged over the cube
    ``[0, sample_extent)^n``, which must span at least 50 cells per axis.
    """
    if samples_per_cell < 1:
        raise ValueError("samples_per_cell must be >= 1")
    if field.kind == "constant":
        return 1.0 / field.m
    if field.kind == "periodic-checkerboard":
        if sample_extent < field.period:
            raise SamplingWindowError(
                f"sample_extent={sample_extent} is shorter than one period ({field.period})"
            )
        window = field.period
    else:
        if sample_extent < 50 * field.cell:
            raise SamplingWindowError(
                f"sample_extent={sample_extent} spans fewer than 50 cells of edge {field.cell}"
            )
        window = sample_extent

    k = int(round(window / field.cell)) * samples_per_cell
    step = window / k
    axis = (np.arange(k) + 0.5) * step
    n = field.dimension
    # one axis slab at a time keeps memory at k**(n-1) points
    total = 0.0
    grids = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
    rest = np.stack([g.ravel() for g in grids], axis=-1)
    for x0 in axis:
        pts = np.column_stack([np.full(rest.shape[0], x0), rest])
        total += float(np.sum(1.0 / eval_g(field, pts)))
    return total / k**n


def build_f(field: LatentHeatField, v0: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Right-hand side of the obstacle problem.

    ``f = v0`` where ``v0 > 0`` and ``f = -1/g(x)`` where ``v0 == 0``
    (exact comparison; ``v0`` is constructed, never measured).  ``points``
    has shape ``v0.shape + (n,)``.
    """
    v0 = np.asarray(v0, dtype=float)
    if np.any(v0 < 0):
        raise ValueError("initial data must be nonnegative")
    points = np.asarray(points, dtype=float)
    g = np.asarray(eval_g(field.for_dimension(points.shape[-1]), points), dtype=float)
    return np.where(v0 > 0, v0, -1.0 / g)
