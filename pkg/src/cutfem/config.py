"""Run configuration: JSON files or command-line flags, validated against a fixed schema."""
from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .forms import STEEL, MaterialParams, StabilizationParams, Variant
from .geometry import GeometryError, rep_from_config
from .mesh import Family


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based in the source text when known."""

    def __init__(self, msg, line: int | None = None, source: str | None = None):
        super().__init__(msg)
        self.msg = msg
        self.line = line
        self.source = source

    def __str__(self):
        where = self.source or "<config>"
        return f"{where}:{self.line}: {self.msg}" if self.line else f"{where}: {self.msg}"


COMMON = {"command", "output", "family", "h", "p", "theta", "material", "stabilization", "geometry", "jobs", "vtk"}


_NUM = re.compile(r"^\s*(?:(?P<pi>[-+]?\d*\.?\d*(?:[eE][-+]?\d+)?)\s*\*?\s*pi|(?P<num>[-+]?[\d.]+(?:[eE][-+]?\d+)?))"
                  r"\s*(?:/\s*(?P<den>[\d.]+(?:[eE][-+]?\d+)?))?\s*$")


def parse_number(v) -> float:
    """Numbers, fractions '1/16', '0.1/3' and multiples of pi 'pi/7', '2pi/5'."""
    if isinstance(v, bool):
        raise ConfigError(f"expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    m = _NUM.match(str(v))
    if not m:
        raise ConfigError(f"cannot parse number {v!r}")
    if m.group("pi") is not None:
        c = m.group("pi")
        val = math.pi * (float(c) if c not in ("", "+", "-") else (-1.0 if c == "-" else 1.0))
    else:
        val = float(m.group("num"))
    if m.group("den"):
        val /= float(m.group("den"))
    return val


def parse_list(v, conv=parse_number) -> list:
    """Lists, comma-separated strings and integer ranges 'a..b'."""
    if isinstance(v, (list, tuple)):
        return [conv(x) for x in v]
    s = str(v).strip()
    out = []
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part and "/" not in part and "pi" not in part:
            a, b = part.split("..", 1)
            out += [conv(x) for x in range(int(a), int(b) + 1)]
        else:
            out.append(conv(part))
    return out


def _int(v) -> int:
    f = parse_number(v)
    if f != int(f):
        raise ConfigError(f"expected an integer, got {v!r}")
    return int(f)


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "false"):
        return v.lower() == "true"
    raise ConfigError(f"expected true or false, got {v!r}")


def _check(conv, cond, what):
    def f(v):
        x = conv(v)
        if not cond(x):
            raise ConfigError(f"{what}, got {v!r}")
        return x
    return f


def _choice(*names):
    def f(v):
        if str(v) not in names:
            raise ConfigError(f"expected one of {list(names)}, got {v!r}")
        return str(v)
    return f


def _load(v):
    if v in ("gravity", "none"):
        return v
    vec = parse_list(v)
    if len(vec) != 2:
        raise ConfigError("load must be 'gravity', 'none' or a 2-vector")
    return vec


_pos = _check(parse_number, lambda x: x > 0, "expected a positive number")
_count = _check(_int, lambda x: x >= 1, "expected a positive integer")

# value converters per command and option key
OPTION_TYPES = {
    "run-static": {"load": _load},
    "run-freq": {"omega_max": _pos, "n_omega": _check(_int, lambda x: x >= 2, "expected at least 2 points"),
                 "omegas": lambda v: parse_list(v), "load": _load},
    "run-eig": {"k": _count, "index": _count, "lam_ref": _pos},
    "two-grid": {"H": _pos, "mode": _count, "literal_ratio": _bool, "direct": _bool},
    "cond-table": {"variant": _choice("fitted", "sliver", "rotated"),
                   "delta": _check(parse_number, lambda x: 0 < x <= 1, "delta must lie in (0, 1]"),
                   "scaling": _bool},
    "converge": {"scenario": _choice("manufactured"), "variant": _choice("uniform", "split")},
    "thin-demo": {"kind": _choice("cantilever", "ring_centrifugal"), "omega": _pos},
    "fibre-demo": {"configs": lambda v: parse_list(v, str), "fibre_load": _bool, "betas": lambda v: parse_list(v)},
    "compound-demo": {"kind": _choice("drilled-lshape", "halves"), "ratio": _pos, "ring_refine": _count,
                      "weighted": _bool, "gamma_d": _pos},
    "dump-quadrature": {"elements": lambda v: parse_list(v, _int)},
}


@dataclass
class RunConfig:
    command: str
    output: str = "out"
    family: str = "quad"
    h: list = field(default_factory=list)
    p: list = field(default_factory=list)
    theta: list = field(default_factory=lambda: [0.0])
    material: dict = field(default_factory=dict)
    stabilization: dict | None = None
    geometry: dict | None = None
    jobs: int = 1
    vtk: bool = True
    options: dict = field(default_factory=dict)

    @property
    def material_params(self) -> MaterialParams:
        return MaterialParams(**{**asdict(STEEL), **self.material})

    def stab_params(self, p: int) -> StabilizationParams | None:
        if not self.stabilization:
            return None
        base = StabilizationParams.defaults(self.material_params, p, self.stabilization.get("variant", "uniform"),
                                            self.stabilization.get("scale", 1.0))
        vals = {k: self.stabilization.get(k, getattr(base, k)) for k in ("gamma_m", "gamma_a", "beta", "variant")}
        return StabilizationParams(**vals)

    def echo(self) -> dict:
        """Plain dict that ``validate`` accepts again (options at top level, unset entries dropped)."""
        d = asdict(self)
        opts = d.pop("options")
        d = {k: v for k, v in d.items() if v not in (None, [])}
        if not d.get("material"):
            d.pop("material", None)
        return {**d, **opts}


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    pat = re.compile(r'"' + re.escape(key) + r'"\s*:')
    for i, ln in enumerate(text.splitlines(), 1):
        if pat.search(ln):
            return i
    return None


OPTIONS = {cmd: set(types) for cmd, types in OPTION_TYPES.items()}


def validate(raw: dict, text: str | None = None, source: str | None = None) -> RunConfig:
    """Check keys and types; unknown keys are rejected with the line they appear on."""
    def fail(msg, key=None):
        raise ConfigError(msg, _line_of(text, key) if key else None, source)

    if not isinstance(raw, dict):
        fail("configuration must be a JSON object")
    cmd = raw.get("command")
    if cmd not in OPTIONS:
        fail(f"unknown or missing command {cmd!r}; choose from {sorted(OPTIONS)}", "command")
    allowed = COMMON | OPTIONS[cmd]
    for k in raw:
        if k not in allowed:
            fail(f"unknown key {k!r} for command {cmd}", k)
    cfg = RunConfig(command=cmd)
    try:
        key = "output"
        cfg.output = str(raw.get("output", cfg.output))
        key = "family"
        cfg.family = Family(str(raw.get("family", "quad")).lower()).value
        key = "h"
        cfg.h = parse_list(raw["h"]) if "h" in raw else []
        if any(not x > 0 for x in cfg.h):
            raise ValueError("mesh sizes must be positive")
        key = "p"
        cfg.p = parse_list(raw["p"], _int) if "p" in raw else []
        if any(not 1 <= x <= 5 for x in cfg.p):
            raise ValueError("polynomial orders must lie in 1..5")
        key = "theta"
        cfg.theta = parse_list(raw["theta"]) if "theta" in raw else [0.0]
        key = "jobs"
        cfg.jobs = _int(raw.get("jobs", 1))
        if cfg.jobs < 1:
            raise ValueError("jobs must be at least 1")
        key = "vtk"
        cfg.vtk = _bool(raw.get("vtk", True))
        key = "material"
        mat = raw.get("material", {}) or {}
        bad = set(mat) - {"E", "nu", "rho"}
        if bad:
            raise ValueError(f"unknown material keys {sorted(bad)}")
        cfg.material = {k: parse_number(v) for k, v in mat.items()}
        cfg.material_params
        key = "stabilization"
        st = raw.get("stabilization")
        if st is not None:
            bad = set(st) - {"gamma_m", "gamma_a", "beta", "variant", "scale"}
            if bad:
                raise ValueError(f"unknown stabilization keys {sorted(bad)}")
            cfg.stabilization = {k: (Variant(v).value if k == "variant" else parse_number(v)) for k, v in st.items()}
            cfg.stab_params(1)
        key = "geometry"
        geo = raw.get("geometry")
        if geo is not None:
            rep_from_config(geo)
            cfg.geometry = geo
        for k in OPTIONS[cmd]:
            if k in raw:
                key = k
                cfg.options[k] = OPTION_TYPES[cmd][k](raw[k])
    except (ValueError, TypeError, KeyError, GeometryError) as exc:
        fail(f"invalid value for {key!r}: {getattr(exc, 'msg', exc)}", key)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, str(path)) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", exc.lineno, str(path)) from None
    return validate(raw, text, str(path))
