"""Discrete free boundaries and their geometry."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy.spatial import cKDTree
from skimage import measure

EPS_POS = 1e-12


class EmptyFrontError(ValueError):
    pass


@dataclass(frozen=True)
class FrontSet:
    points: np.ndarray  # (m, n)
    h: float
    t: float = float("nan")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0


def positivity(U: np.ndarray) -> np.ndarray:
    top = float(np.max(U)) if U.size else 0.0
    if top <= 0:
        return np.zeros(U.shape, dtype=bool)
    return U > EPS_POS * top


def extract_front(U: np.ndarray, h: float, origin=None, t: float = float("nan")) -> FrontSet:
    """Midpoints of the boundary of ``{U > eps}`` on the interior nodes.

    The outermost node layer (box faces) is dropped first, so a positivity
    set that fills the interior produces no front.  ``origin`` is the
    coordinate of node ``(0, ..., 0)`` of ``U``; the default centres the grid
    on the origin.
    """
    U = np.asarray(U, dtype=float)
    n = U.ndim
    if n not in (2, 3):
        raise ValueError("extract_front supports 2D and 3D grids")
    if origin is None:
        origin = -0.5 * h * (np.array(U.shape) - 1)
    origin = np.broadcast_to(np.asarray(origin, dtype=float), (n,))
    inner = positivity(U)[(slice(1, -1),) * n].astype(float)
    if inner.min(initial=1.0) == inner.max(initial=0.0):
        return FrontSet(np.empty((0, n)), h, t)
    if n == 2:
        segs = measure.find_contours(inner, 0.5, fully_connected="high")
        idx = np.concatenate([0.5 * (c[1:] + c[:-1]) for c in segs if len(c) > 1])
    else:
        verts, faces, _, _ = measure.marching_cubes(inner, 0.5, allow_degenerate=False)
        idx = verts[faces].mean(axis=1)
    pts = origin + h * (idx + 1.0)
    return FrontSet(pts, h, t)


def _nonempty(*fronts: FrontSet) -> None:
    for f in fronts:
        if f.empty:
            raise EmptyFrontError("front is empty")


def directed_hausdorff(A: FrontSet, B: FrontSet) -> float:
    _nonempty(A, B)
    d, _ = cKDTree(B.points).query(A.points)
    return float(np.max(d))


def hausdorff(A: FrontSet, B: FrontSet) -> float:
    return max(directed_hausdorff(A, B), directed_hausdorff(B, A))


class SphereDeviation(NamedTuple):
    r_min: float
    r_max: float
    deviation: float


def sphere_deviation(front: FrontSet, center=None) -> SphereDeviation:
    _nonempty(front)
    c = np.zeros(front.points.shape[1]) if center is None else np.asarray(center, dtype=float)
    r = np.linalg.norm(front.points - c, axis=1)
    lo, hi = float(r.min()), float(r.max())
    return SphereDeviation(lo, hi, (hi - lo) / (0.5 * (lo + hi)))


def sphere_front(radius: float, n: int, spacing: float, t: float = float("nan")) -> FrontSet:
    """Sample the sphere ``|x| = radius`` with points at most ``spacing`` apart."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n == 2:
        m = max(8, int(math.ceil(2 * math.pi * radius / spacing)))
        th = 2 * math.pi * np.arange(m) / m
        pts = radius * np.column_stack([np.cos(th), np.sin(th)])
    elif n == 3:
        # latitude rings, each ring sampled at the requested arc spacing
        k = max(4, int(math.ceil(math.pi * radius / spacing)))
        rows = []
        for phi in math.pi * (np.arange(k + 1) / k):
            ring = radius * math.sin(phi)
            m = max(1, int(math.ceil(2 * math.pi * ring / spacing)))
            th = 2 * math.pi * np.arange(m) / m
            rows.append(np.column_stack([ring * np.cos(th), ring * np.sin(th), np.full(m, radius * math.cos(phi))]))
        pts = np.concatenate(rows)
    else:
        raise ValueError("sphere_front supports n in {2, 3}")
    return FrontSet(pts, spacing, t)


def write_front_csv(path, fronts: Iterable[FrontSet]) -> None:
    fronts = list(fronts)
    n = fronts[0].points.shape[1] if fronts else 2
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
        for f in fronts:
            for p in f.points:
                w.writerow([repr(float(f.t))] + [repr(float(c)) for c in p])


METRIC_COLUMNS = ("t", "r_min", "r_max", "deviation", "hausdorff_to_reference")


def write_metrics_csv(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(float(row[k])) for k in METRIC_COLUMNS})
