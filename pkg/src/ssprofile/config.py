"""Line-oriented run configuration: ``section.key = value``.

Blank lines and ``#`` comments are ignored. Unknown keys are rejected.
Scan axes are written ``scan.<section>.<key> = lo, hi, count, log|linear``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .core import BoundaryData, PhysicalParams
from .errors import ConfigError, InvalidArgument

COMMANDS = ("solve-expander", "verify-residuals", "scan", "shrinker-audit", "constants")
PHYSICS_KEYS = ("d", "alpha", "c_v", "kappa", "gas_r", "mu0", "lambda0")
BOUNDARY_KEYS = ("a_slope", "delta", "p_delta", "theta0", "eps_norm")


@dataclass(frozen=True)
class GridSpec:
    inner: int = 256
    outer: int = 512
    grading: float = 1.03
    r_max: float | None = None          # None: 50 far-field lengths 1/sqrt(P_delta)
    outer_length: float | None = None   # None: 1/sqrt(P_delta)

    def resolved(self, bd):
        ell = 1.0 / math.sqrt(bd.p_delta)
        r_max = 50.0 * ell if self.r_max is None else self.r_max
        length = ell if self.outer_length is None else self.outer_length
        return r_max, length


@dataclass(frozen=True)
class Tolerances:
    picard: float = 1e-13
    max_iter: int = 60
    smallness: float = 0.1
    ode_rtol: float = 1e-10
    residual: float = 1e-5
    rate: float = 0.05


@dataclass(frozen=True)
class ScanAxis:
    target: str
    lo: float
    hi: float
    count: int
    spacing: str = "log"

    def values(self):
        if self.count == 1:
            return [self.lo]
        out = []
        for i in range(self.count):
            t = i / (self.count - 1)
            if self.spacing == "log":
                out.append(math.exp(math.log(self.lo) + t * (math.log(self.hi) - math.log(self.lo))))
            else:
                out.append(self.lo + t * (self.hi - self.lo))
        out[0], out[-1] = self.lo, self.hi
        return out


@dataclass(frozen=True)
class AuditSpec:
    candidate: str = "zero"
    eps: float | None = None
    threshold: float = 1e-3
    nodes: int = 2048


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: PhysicalParams | None
    boundary: BoundaryData | None
    grid: GridSpec = field(default_factory=GridSpec)
    tol: Tolerances = field(default_factory=Tolerances)
    out: str = "ssprofile-out"
    profile: str | None = None
    scan: tuple = ()
    scan_mode: str = "constants"
    audit: AuditSpec = field(default_factory=AuditSpec)
    per_decade: int = 4
    lowest: float = -60.0


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _number(text, kind, name, line):
    try:
        if kind is int:
            v = float(text)
            if v != int(v):
                raise ValueError
            return int(v)
        return float(text)
    except ValueError:
        raise ConfigError(f"line {line}: {name} expects a number, got {text!r}",
                          line=line, field=name) from None


_RUN_KEYS = {"command": str, "out": str, "profile": str, "scan_mode": str,
             "per_decade": int, "lowest": float}
_GRID_KEYS = {f.name: (int if f.name in ("inner", "outer") else float) for f in fields(GridSpec)}
_TOL_KEYS = {"picard": float, "max_iter": int, "smallness": float, "ode_rtol": float,
             "residual": float, "rate": float}
_AUDIT_KEYS = {"candidate": str, "eps": float, "threshold": float, "nodes": int}


def _tokens(text):
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'section.key = value'", line=n)
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key or not value:
            raise ConfigError(f"line {n}: expected 'section.key = value'", line=n)
        section, name = key.split(".", 1)
        yield n, section, name, value


def parse_config(text, overrides=None):
    """Parse and validate a configuration document.

    ``overrides`` maps ``section.key`` to a string value and is applied after
    the document, exactly as if appended to it.
    """
    lines = list(_tokens(text))
    for key, value in (overrides or {}).items():
        lines.extend(_tokens(f"{key} = {value}"))

    raw = {"run": {}, "physics": {}, "boundary": {}, "grid": {}, "tol": {}, "audit": {}}
    scan = {}
    where = {}
    for n, section, name, value in lines:
        full = f"{section}.{name}"
        where[full] = n
        if section == "scan":
            scan[name] = (value, n)
            continue
        table = {"run": _RUN_KEYS, "physics": dict.fromkeys(PHYSICS_KEYS, float),
                 "boundary": dict.fromkeys(BOUNDARY_KEYS, float), "grid": _GRID_KEYS,
                 "tol": _TOL_KEYS, "audit": _AUDIT_KEYS}.get(section)
        if table is None:
            raise ConfigError(f"line {n}: unknown section {section!r}", line=n, field=full)
        if name not in table:
            raise ConfigError(f"line {n}: unknown key {full!r}", line=n, field=full)
        kind = table[name]
        if kind is str:
            raw[section][name] = value
        elif value in ("auto", "none") and section == "grid" and name in ("r_max", "outer_length"):
            raw[section][name] = None
        else:
            raw[section][name] = _number(value, kind, full, n)
    return _build(raw, scan, where)


def _field_error(exc, section, keys, where):
    msg = str(exc)
    for k in keys:
        if msg.startswith(k) or f" {k} " in f" {msg} " or msg.startswith(f"{k}:"):
            full = f"{section}.{k}"
            return ConfigError(f"{full}: {msg}", line=where.get(full), field=full)
    return ConfigError(f"{section}: {msg}", field=section)


def _build(raw, scan, where):
    run = raw["run"]
    command = run.get("command")
    if command is None:
        raise ConfigError("run.command is required", field="run.command")
    if command not in COMMANDS:
        raise ConfigError(f"run.command must be one of {', '.join(COMMANDS)}",
                          line=where.get("run.command"), field="run.command")

    params = None
    phys = dict(raw["physics"])
    if phys:
        missing = [k for k in PHYSICS_KEYS if k not in phys and k != "lambda0"]
        if missing:
            raise ConfigError(f"physics.{missing[0]} is required", field=f"physics.{missing[0]}")
        if "lambda0" not in phys and phys["alpha"] < 1.0:
            phys["lambda0"] = -2.0 * phys["mu0"] / phys["d"]
        if "lambda0" not in phys:
            raise ConfigError("physics.lambda0 is required when alpha = 1",
                              field="physics.lambda0")
        if phys["d"] != int(phys["d"]):
            raise ConfigError("physics.d must be an integer", line=where.get("physics.d"),
                              field="physics.d")
        phys["d"] = int(phys["d"])
        try:
            params = PhysicalParams(**phys)
        except InvalidArgument as exc:
            raise _field_error(exc, "physics", PHYSICS_KEYS, where) from None
    elif command in ("solve-expander", "verify-residuals", "scan", "constants"):
        raise ConfigError(f"{command} needs a [physics] section", field="physics")

    boundary = None
    if params is not None and command != "shrinker-audit":
        b = {"a_slope": 1e-3, "delta": 1e-2, "p_delta": 1e-2}
        b.update(raw["boundary"])
        if "theta0" not in b:
            b["theta0"] = ((2.0 * params.mu0 + params.d * params.lambda0) * b["a_slope"]
                           / params.gas_r if params.alpha == 1.0 else 0.5 * b["a_slope"])
        if "eps_norm" not in b:
            b["eps_norm"] = 0.75 * (1.0 - params.alpha) if params.alpha < 1.0 else 0.5
        try:
            boundary = BoundaryData(**b)
            boundary.check(params, forced_theta0=True)
        except InvalidArgument as exc:
            raise _field_error(exc, "boundary", BOUNDARY_KEYS, where) from None
    elif raw["boundary"]:
        raise ConfigError("boundary keys are not used by shrinker-audit", field="boundary")

    try:
        grid = GridSpec(**raw["grid"])
    except TypeError as exc:
        raise ConfigError(str(exc), field="grid") from None
    _positive(grid.grading - 1.0 + 1e-300, "grid.grading", where, allow_zero=True)
    for k in ("inner", "outer"):
        if getattr(grid, k) < 16:
            raise ConfigError(f"grid.{k} must be >= 16", line=where.get(f"grid.{k}"),
                              field=f"grid.{k}")
    tol = Tolerances(**raw["tol"])
    for f in fields(Tolerances):
        _positive(getattr(tol, f.name), f"tol.{f.name}", where)

    audit = AuditSpec(**raw["audit"])
    _positive(audit.threshold, "audit.threshold", where)
    if audit.eps is not None:
        _positive(audit.eps, "audit.eps", where)
    if audit.nodes < 64:
        raise ConfigError("audit.nodes must be >= 64", line=where.get("audit.nodes"),
                          field="audit.nodes")

    axes = []
    for target, (value, n) in scan.items():
        axes.append(_scan_axis(target, value, n))
    if command == "scan" and not axes:
        raise ConfigError("scan needs at least one scan.<section>.<key> axis", field="scan")
    mode = run.get("scan_mode", "constants")
    if mode not in ("constants", "solve"):
        raise ConfigError("run.scan_mode must be constants or solve",
                          line=where.get("run.scan_mode"), field="run.scan_mode")
    per_decade = run.get("per_decade", 4)
    if per_decade < 1:
        raise ConfigError("run.per_decade must be >= 1", field="run.per_decade")
    return RunConfig(command, params, boundary, grid, tol, run.get("out", "ssprofile-out"),
                     run.get("profile"), tuple(axes), mode, audit, per_decade,
                     run.get("lowest", -60.0))


def _positive(value, name, where, allow_zero=False):
    if not (value > 0.0 or (allow_zero and value == 0.0)):
        raise ConfigError(f"{name} must be positive", line=where.get(name), field=name)


def _scan_axis(target, value, n):
    parts = [p.strip() for p in value.split(",")]
    if len(parts) not in (3, 4):
        raise ConfigError(f"line {n}: scan axis needs lo, hi, count[, log|linear]", line=n,
                          field=f"scan.{target}")
    section, _, key = target.partition(".")
    if section not in ("physics", "boundary") or (
            key not in (PHYSICS_KEYS if section == "physics" else BOUNDARY_KEYS)):
        raise ConfigError(f"line {n}: cannot scan {target!r}", line=n, field=f"scan.{target}")
    lo = _number(parts[0], float, f"scan.{target}", n)
    hi = _number(parts[1], float, f"scan.{target}", n)
    count = _number(parts[2], int, f"scan.{target}", n)
    spacing = parts[3] if len(parts) == 4 else "log"
    if count < 1:
        raise ConfigError(f"line {n}: lattice count must be >= 1", line=n, field=f"scan.{target}")
    if spacing not in ("log", "linear"):
        raise ConfigError(f"line {n}: spacing must be log or linear", line=n,
                          field=f"scan.{target}")
    if spacing == "log" and (lo <= 0.0 or hi <= 0.0):
        raise ConfigError(f"line {n}: log spacing needs positive bounds", line=n,
                          field=f"scan.{target}")
    return ScanAxis(target, lo, hi, count, spacing)


# ---------------------------------------------------------------------------
# canonical form
# ---------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return "auto"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(cfg):
    """Canonical text for ``cfg``; parse_config(emit_config(cfg)) == cfg."""
    out = [f"run.command = {cfg.command}", f"run.out = {cfg.out}"]
    if cfg.profile is not None:
        out.append(f"run.profile = {cfg.profile}")
    out += [f"run.scan_mode = {cfg.scan_mode}", f"run.per_decade = {cfg.per_decade}",
            f"run.lowest = {_fmt(float(cfg.lowest))}"]
    if cfg.params is not None:
        for k in PHYSICS_KEYS:
            out.append(f"physics.{k} = {_fmt(getattr(cfg.params, k))}")
    if cfg.boundary is not None:
        for k in BOUNDARY_KEYS:
            out.append(f"boundary.{k} = {_fmt(float(getattr(cfg.boundary, k)))}")
    for f in fields(GridSpec):
        out.append(f"grid.{f.name} = {_fmt(getattr(cfg.grid, f.name))}")
    for f in fields(Tolerances):
        out.append(f"tol.{f.name} = {_fmt(getattr(cfg.tol, f.name))}")
    for f in fields(AuditSpec):
        v = getattr(cfg.audit, f.name)
        if v is not None:
            out.append(f"audit.{f.name} = {_fmt(v)}")
    for ax in cfg.scan:
        out.append(f"scan.{ax.target} = {_fmt(ax.lo)}, {_fmt(ax.hi)}, {ax.count}, {ax.spacing}")
    return "\n".join(out) + "\n"


def with_point(cfg, assignments):
    """Copy of ``cfg`` with physics/boundary values replaced (one scan lattice point)."""
    phys = {k: getattr(cfg.params, k) for k in PHYSICS_KEYS}
    bnd = {k: getattr(cfg.boundary, k) for k in BOUNDARY_KEYS}
    for target, value in assignments.items():
        section, key = target.split(".", 1)
        (phys if section == "physics" else bnd)[key] = value
    phys["d"] = int(phys["d"])
    params = PhysicalParams(**phys)
    return replace(cfg, params=params, boundary=BoundaryData(**bnd))
