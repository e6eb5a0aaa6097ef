"""Cartesian grids, the core set K, and admissible initial data."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

PROFILES = ("linear", "cubic")

FLUID = 0
CORE = 1
FAR = 2


class GeometryError(ValueError):
    """Invalid combination of grid and domain parameters."""


@dataclass(frozen=True)
class GridProblem:
    """Uniform node-centred grid on ``[-extent, extent]^n`` with ball data.

    ``K`` is the closed ball of radius ``core_radius`` and ``Omega_0`` the open
    ball of radius ``omega0_radius``; the origin is always a node.
    """

    dimension: int
    h: float
    extent: float
    core_radius: float
    omega0_radius: float
    boundary_datum: float = 1.0
    v0_profile: str = "linear"

    @property
    def nodes_per_axis(self) -> int:
        return int(round(2 * self.extent / self.h)) + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dimension

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.extent + self.h * np.arange(self.nodes_per_axis)

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``self.shape + (n,)``."""
        mesh = np.meshgrid(*([self.axis] * self.dimension), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def radius(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis] * self.dimension), indexing="ij")
        return np.sqrt(sum(c * c for c in mesh))

    @cached_property
    def v0(self) -> np.ndarray:
        return initial_profile(
            self.radius, self.core_radius, self.omega0_radius, self.boundary_datum, self.v0_profile
        )

    @cached_property
    def mask(self) -> "NodeMask":
        return classify_nodes(self)


@dataclass(frozen=True)
class NodeMask:
    labels: np.ndarray  # int8, FLUID / CORE / FAR

    @property
    def core(self) -> np.ndarray:
        return self.labels == CORE

    @property
    def far(self) -> np.ndarray:
        return self.labels == FAR

    @property
    def fluid(self) -> np.ndarray:
        return self.labels == FLUID

    @property
    def fixed(self) -> np.ndarray:
        return self.labels != FLUID


def initial_profile(r, a: float, b: float, datum: float, profile: str = "linear") -> np.ndarray:
    """Radial initial data: ``datum`` on ``K``, positive on ``a < r < b``, zero beyond.

    ``linear`` is ``datum * (b - r)/(b - a)``; ``cubic`` uses
    ``p(s) = 1.5 s - 0.5 s**3`` with ``s = (b - r)/(b - a)``, which is flat
    where it meets ``K`` and has slope ``-1.5 datum/(b - a)`` at ``r = b``.
    """
    r = np.asarray(r, dtype=float)
    s = np.clip((b - r) / (b - a), 0.0, 1.0)
    if profile == "linear":
        p = s
    elif profile == "cubic":
        p = 1.5 * s - 0.5 * s**3
    else:
        raise GeometryError(f"unknown initial profile {profile!r}; expected one of {PROFILES}")
    return datum * p


def make_grid(
    n: int,
    h: float,
    extent: float,
    a: float,
    b: float,
    datum: float = 1.0,
    profile: str = "linear",
) -> GridProblem:
    problems = []
    if n not in (2, 3):
        problems.append(f"dimension must be 2 or 3, got {n}")
    if h <= 0:
        problems.append(f"h must be positive, got {h}")
    if not 0 < a < b < extent:
        problems.append(f"need 0 < core radius ({a}) < omega0 radius ({b}) < extent ({extent})")
    if datum <= 0:
        problems.append(f"boundary datum must be positive, got {datum}")
    if profile not in PROFILES:
        problems.append(f"unknown initial profile {profile!r}")
    if h > 0:
        ratio = extent / h
        if abs(ratio - round(ratio)) > 1e-8 * max(1.0, ratio):
            problems.append(f"extent/h = {ratio} is not an integer")
        if b - a < 4 * h * (1 - 1e-12):
            problems.append(f"annulus b - a = {b - a} spans fewer than 4 cells of size {h}")
    if problems:
        raise GeometryError("; ".join(problems))
    return GridProblem(n, float(h), float(extent), float(a), float(b), float(datum), profile)


def classify_nodes(grid: GridProblem) -> NodeMask:
    """Tag nodes: core if ``|x| <= a``, far on the box faces, fluid otherwise."""
    labels = np.zeros(grid.shape, dtype=np.int8)
    labels[grid.radius <= grid.core_radius] = CORE
    for axis in range(grid.dimension):
        edge = [slice(None)] * grid.dimension
        edge[axis] = 0
        labels[tuple(edge)] = FAR
        edge[axis] = -1
        labels[tuple(edge)] = FAR
    return NodeMask(labels)
