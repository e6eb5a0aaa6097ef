"""Run configuration: YAML text <-> validated model.

Unknown keys, type errors and cross-field constraint violations are all
collected and reported together, each with its dotted key path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

SCHEMA_VERSION = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class Core(_Section):
    radius: float = Field(0.25, gt=0)


class Omega0(_Section):
    radius: float = Field(0.5, gt=0)
    profile: Literal["linear", "cubic"] = "linear"


class Geometry(_Section):
    dimension: Literal[2, 3] = 2
    h: float = Field(1 / 128, gt=0)
    extent: float = Field(2.0, gt=0)
    boundary_datum: float = Field(1.0, gt=0)
    core: Core = Core()
    omega0: Omega0 = Omega0()


class Media(_Section):
    kind: Literal["constant", "periodic-checkerboard", "random-checkerboard"] = "constant"
    m: float = Field(1.0, gt=0)
    M: float = Field(1.0, gt=0)
    period: float = Field(1.0, gt=0)
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    mollify: bool = False


class Solver(_Section):
    omega: float = Field(1.5, gt=0, lt=2)
    tol: float = Field(1e-10, gt=0)
    maxit: Optional[int] = Field(None, gt=0)
    ordering: Literal["lex", "redblack"] = "lex"


class Time(_Section):
    T: float = Field(1.0, gt=0)
    dt: float = Field(1 / 64, gt=0)
    snapshots: list[float] = Field(default_factory=list)


class Rescale(_Section):
    lam: Optional[float] = Field(None, alias="lambda", gt=0)


class Study(_Section):
    lambdas: list[float] = Field(default_factory=lambda: [1e2, 1e3, 1e4])
    rescaled_times: list[float] = Field(default_factory=lambda: [0.5, 1.0])
    annulus: tuple[float, float] = (0.25, 1.0)
    target_h: float = Field(1 / 128, gt=0)
    target_extent: float = Field(2.0, gt=0)
    dtau: float = Field(0.02, gt=0)
    homogenization_cells: int = Field(100, ge=50)
    amplitude_probes: list[float] = Field(default_factory=lambda: [0.8, 1.25])


class Output(_Section):
    directory: str = "out"
    dumps: bool = True
    fronts: bool = True


class RunConfig(_Section):
    schema_version: Literal[1] = SCHEMA_VERSION
    geometry: Geometry = Geometry()
    media: Media = Media()
    solver: Solver = Solver()
    time: Time = Time()
    rescale: Rescale = Rescale()
    study: Study = Study()
    output: Output = Output()


@dataclass(frozen=True)
class ConfigIssue:
    kind: str  # unknown-key | missing-key | type-mismatch | constraint-violation
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.path}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, issues: list[ConfigIssue]):
        self.issues = issues
        super().__init__("\n".join(str(i) for i in issues))


_CONSTRAINT_TYPES = {"greater_than", "greater_than_equal", "less_than", "less_than_equal", "literal_error"}


def _kind(err_type: str) -> str:
    if err_type == "extra_forbidden":
        return "unknown-key"
    if err_type == "missing":
        return "missing-key"
    if err_type in _CONSTRAINT_TYPES:
        return "constraint-violation"
    return "type-mismatch"


_ALIASES = {"lam": "lambda"}


def _path(loc) -> str:
    return ".".join(_ALIASES.get(str(p), str(p)) for p in loc)


def _get(d: Any, *keys, default=None):
    for k in keys:
        if not isinstance(d, dict) or k not in d:
            return default
        d = d[k]
    return d


def _num(x) -> float | None:
    return float(x) if isinstance(x, (int, float)) and not isinstance(x, bool) else None


def _cross_checks(raw: dict) -> list[ConfigIssue]:
    """Constraints spanning several keys, evaluated on whatever parsed."""
    out: list[ConfigIssue] = []
    d = Geometry()
    a = _num(_get(raw, "geometry", "core", "radius", default=d.core.radius))
    b = _num(_get(raw, "geometry", "omega0", "radius", default=d.omega0.radius))
    ext = _num(_get(raw, "geometry", "extent", default=d.extent))
    h = _num(_get(raw, "geometry", "h", default=d.h))
    if a is not None and b is not None and a >= b:
        out.append(
            ConfigIssue(
                "constraint-violation",
                "geometry.core.radius, geometry.omega0.radius",
                f"core.radius ({a}) must be smaller than omega0.radius ({b})",
            )
        )
    if b is not None and ext is not None and b >= ext:
        out.append(ConfigIssue("constraint-violation", "geometry.omega0.radius, geometry.extent", "omega0 must fit inside the box"))
    if h and ext and h > 0:
        ratio = ext / h
        if abs(ratio - round(ratio)) > 1e-8 * max(1.0, ratio):
            out.append(ConfigIssue("constraint-violation", "geometry.extent, geometry.h", "extent must be a multiple of h"))
    kind = _get(raw, "media", "kind", default="constant")
    if kind == "random-checkerboard" and _get(raw, "media", "seed") is None:
        out.append(ConfigIssue("missing-key", "media.seed", "random-checkerboard media require a seed"))
    m = _num(_get(raw, "media", "m", default=1.0))
    M = _num(_get(raw, "media", "M", default=1.0))
    if m is not None and M is not None:
        if m > M:
            out.append(ConfigIssue("constraint-violation", "media.m, media.M", f"m ({m}) must not exceed M ({M})"))
        elif kind == "constant" and m != M:
            out.append(ConfigIssue("constraint-violation", "media.m, media.M", "constant media need m == M"))
    lams = _get(raw, "study", "lambdas")
    if isinstance(lams, list) and all(_num(x) is not None for x in lams):
        if any(y <= x for x, y in zip(lams, lams[1:])) or not lams:
            out.append(ConfigIssue("constraint-violation", "study.lambdas", "must be strictly increasing"))
    ann = _get(raw, "study", "annulus")
    if isinstance(ann, (list, tuple)) and len(ann) == 2 and all(_num(x) is not None for x in ann):
        if not 0 < ann[0] < ann[1]:
            out.append(ConfigIssue("constraint-violation", "study.annulus", "need 0 < r_inner < r_outer"))
    times = _get(raw, "study", "rescaled_times")
    if isinstance(times, list) and any(_num(x) is not None and x <= 0 for x in times):
        out.append(ConfigIssue("constraint-violation", "study.rescaled_times", "times must be positive"))
    snaps = _get(raw, "time", "snapshots")
    T = _num(_get(raw, "time", "T", default=Time().T))
    if isinstance(snaps, list) and T is not None:
        if any(_num(x) is not None and not 0 <= x <= T for x in snaps):
            out.append(ConfigIssue("constraint-violation", "time.snapshots, time.T", "snapshots must lie in [0, T]"))
    return out


def parse_config(text: str) -> RunConfig:
    """Validate YAML text; raise :class:`ConfigError` listing every problem."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([ConfigIssue("type-mismatch", "<document>", f"not valid YAML: {exc}")]) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError([ConfigIssue("type-mismatch", "<document>", "top level must be a mapping")])
    issues: list[ConfigIssue] = []
    cfg = None
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        for e in exc.errors():
            issues.append(ConfigIssue(_kind(e["type"]), _path(e["loc"]), e["msg"]))
    issues.extend(_cross_checks(raw))
    if issues:
        raise ConfigError(issues)
    return cfg


def render_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_dict(cfg), sort_keys=False)


def config_dict(cfg: RunConfig) -> dict:
    return cfg.model_dump(mode="json", by_alias=True)


def override(cfg: RunConfig, **changes) -> RunConfig:
    """Apply dotted-path overrides (``{"media.seed": 3}``) and re-validate."""
    d = config_dict(cfg)
    for key, value in changes.items():
        node = d
        *head, last = key.split(".")
        for k in head:
            node = node[k]
        node[last] = value
    return parse_config(yaml.safe_dump(d))
