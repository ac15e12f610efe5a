"""Simulation configuration, the reference experiment presets and flat
``key = value`` config files."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .assembly import LoadSpec
from .friction import FrictionModel
from .material import ELASTICITY, MaterialParams
from .mesh import GAMMA1, GAMMA2, GAMMA3, ConfigurationError, rectangle_spec
from .solvers import SolverTolerances
from .timestepper import Problem, TimeGrid

# name -> (width, height, bottom partition, f0, f2)
PRESETS = {
    "exp1": (2.0, 1.0, [(0.0, 2.0, GAMMA2)], (0.0, -0.2), (0.0, 0.0)),
    "exp2": (2.0, 1.0, [(0.0, 1.0, GAMMA3), (1.0, 2.0, GAMMA2)], (0.0, -0.8), (0.0, 0.0)),
    "exp3": (2.0, 1.0, [(0.0, 2.0, GAMMA3)], (0.0, 0.0), (-1.0, -1.0)),
    "benchmark": (1.0, 1.0, [(0.0, 1.0, GAMMA3)], (0.0, 0.0), (-1.4, -0.2)),
}
EXPERIMENTS = {1: "exp1", 2: "exp2", 3: "exp3"}


def parse_fraction(text) -> Fraction:
    """Parse ``"1/32"``, ``"0.125"`` or a number into an exact fraction."""
    if isinstance(text, Fraction):
        return text
    try:
        value = Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"cannot parse {text!r} as a number") from exc
    if value <= 0:
        raise ConfigurationError(f"expected a positive value, got {text!r}")
    return value


def _pair(text) -> tuple:
    if isinstance(text, (tuple, list)):
        vals = tuple(float(v) for v in text)
    else:
        vals = tuple(float(v) for v in str(text).replace("(", "").replace(")", "").split(","))
    if len(vals) != 2:
        raise ConfigurationError(f"expected two components, got {text!r}")
    return vals


@dataclass
class SimConfig:
    preset: str = "benchmark"
    width: float | None = None
    height: float | None = None
    h: Fraction = Fraction(1, 32)
    k: Fraction = Fraction(1, 32)
    T: float = 1.0
    params: MaterialParams = field(default_factory=MaterialParams)
    friction_bound: float = 20.0
    f0: tuple | None = None
    f2: tuple | None = None
    zeta0: float = 1.0
    elasticity: str = "linear"
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    snapshots: str = "final"
    out: str = "out"

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if self.elasticity not in ELASTICITY:
            raise ConfigurationError(f"unknown elasticity model {self.elasticity!r}")
        self.h = parse_fraction(self.h)
        self.k = parse_fraction(self.k)

    @property
    def domain(self) -> tuple:
        w, hgt, *_ = PRESETS[self.preset]
        return (self.width or w, self.height or hgt)

    def boundary(self):
        width, height = self.domain
        _, _, bottom, *_ = PRESETS[self.preset]
        # pieces defined on the preset width are stretched with the domain
        scale = width / PRESETS[self.preset][0]
        pieces = [(lo * scale, hi * scale, tag) for lo, hi, tag in bottom]
        return rectangle_spec(width, height, left=GAMMA1, bottom=pieces)

    def load(self) -> LoadSpec:
        _, _, _, f0, f2 = PRESETS[self.preset]
        return LoadSpec(self.f0 if self.f0 is not None else f0, self.f2 if self.f2 is not None else f2)

    def grid(self) -> TimeGrid:
        return TimeGrid.from_step(self.T, self.k)

    def build_problem(self) -> Problem:
        width, height = self.domain
        return Problem.build(width, height, self.h, self.boundary(), self.params,
                             FrictionModel(self.friction_bound), self.load(), self.grid(),
                             self.tolerances, self.elasticity)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


_PARAM_KEYS = {f.name for f in dataclasses.fields(MaterialParams)}
_TOL_KEYS = {f.name for f in dataclasses.fields(SolverTolerances)} - {"rho_schedule"}


def config_from_mapping(values: dict, base: SimConfig | None = None) -> SimConfig:
    """Apply string-valued settings on top of ``base``; unknown keys are errors."""
    cfg = base or SimConfig()
    top, params, tols = {}, {}, {}
    for key, raw in values.items():
        key = key.strip()
        if key == "experiment":
            try:
                top["preset"] = EXPERIMENTS[int(raw)]
            except (KeyError, ValueError) as exc:
                raise ConfigurationError(f"experiment must be 1, 2 or 3, got {raw!r}") from exc
        elif key in ("preset", "elasticity", "snapshots", "out"):
            top[key] = str(raw).strip()
        elif key in ("h", "k"):
            top[key] = parse_fraction(raw)
        elif key in ("T", "width", "height", "friction_bound", "zeta0"):
            top[key] = float(raw)
        elif key in ("f0", "f2"):
            top[key] = _pair(raw)
        elif key in _PARAM_KEYS:
            params[key] = float(raw)
        elif key in _TOL_KEYS:
            tols[key] = type(getattr(cfg.tolerances, key))(float(raw))
        else:
            raise ConfigurationError(f"unknown configuration key {key!r}")
    if params:
        top["params"] = dataclasses.replace(cfg.params, **params)
    if tols:
        top["tolerances"] = dataclasses.replace(cfg.tolerances, **tols)
    return cfg.replace(**top)


def read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values
