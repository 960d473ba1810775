"""Run configuration: TOML sections, presets, validation and problem assembly."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import SolverOptions, eval_on_grid, grid_env
from .domain import ConeSpec, DiskGrid, Grid1D, GridFn, HammersteinProblem, SignPattern
from .exceptions import BKError, ConfigError
from .exprlang import parse
from .kernels import KernelId
from .verify import HypothesisSpec

__all__ = [
    "ProblemSection",
    "SolverSection",
    "HypothesisSection",
    "SweepSection",
    "OutputSection",
    "RunConfig",
    "PRESETS",
    "load_config",
    "loads_config",
    "preset",
    "build_problem",
]

KINDS = ("ode", "pde_disk")


@dataclass
class ProblemSection:
    kind: str = "ode"
    f: str = ""
    g: str = ""
    r1: float = 1.0
    r2: float = 1.0
    h1: str = "1"
    h2: str = "1"


@dataclass
class SolverSection:
    grid_n: Optional[int] = None
    n_r: Optional[int] = None
    n_theta: Optional[int] = None
    theta: float = 1.0
    tol_step: float = 1e-10
    tol_res: float = 1e-8
    max_iter: int = 500
    sign: str = "++"


@dataclass
class HypothesisSection:
    f_lower: Optional[str] = None
    g_lower: Optional[str] = None


@dataclass
class SweepSection:
    r1_min: Optional[float] = None
    r1_max: Optional[float] = None
    r1_steps: Optional[int] = None
    r2_min: Optional[float] = None
    r2_max: Optional[float] = None
    r2_steps: Optional[int] = None

    @property
    def present(self) -> bool:
        return any(v is not None for v in asdict(self).values())


@dataclass
class OutputSection:
    csv_path: Optional[str] = None
    precision: int = 12


@dataclass
class RunConfig:
    problem: ProblemSection = field(default_factory=ProblemSection)
    solver: SolverSection = field(default_factory=SolverSection)
    hypothesis: HypothesisSection = field(default_factory=HypothesisSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_toml(self) -> str:
        doc = {}
        for f in fields(self):
            section = {k: v for k, v in asdict(getattr(self, f.name)).items() if v is not None}
            if section:
                doc[f.name] = section
        return tomli_w.dumps(doc)

    @property
    def sign(self) -> SignPattern:
        return SignPattern.parse(self.solver.sign)

    def cones(self) -> tuple[ConeSpec, ConeSpec]:
        if self.problem.kind == "ode":
            return ConeSpec.guo(0.25, 0.75, 0.25), ConeSpec.whole_space()
        return ConeSpec.positive(), ConeSpec.positive()

    def grid(self):
        if self.problem.kind == "ode":
            return Grid1D(self.solver.grid_n)
        return DiskGrid(self.solver.n_r, self.solver.n_theta)

    def solver_options(self) -> SolverOptions:
        s = self.solver
        return SolverOptions(theta=s.theta, tol_step=s.tol_step, tol_res=s.tol_res, max_iter=s.max_iter)

    def hypothesis_spec(self) -> HypothesisSpec:
        h = self.hypothesis
        missing = [k for k in ("f_lower", "g_lower") if getattr(h, k) is None]
        if missing:
            raise ConfigError(f"[hypothesis] section is missing {', '.join(missing)}")
        return HypothesisSpec(_parse_key("hypothesis.f_lower", h.f_lower), _parse_key("hypothesis.g_lower", h.g_lower))

    def lattice(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.sweep
        if not s.present:
            raise ConfigError("no [sweep] section")
        axes = []
        for name in ("r1", "r2"):
            lo, hi, steps = (getattr(s, f"{name}_{k}") for k in ("min", "max", "steps"))
            if None in (lo, hi, steps):
                raise ConfigError(f"sweep.{name}_min, {name}_max and {name}_steps are all required")
            if steps < 1:
                raise ConfigError(f"sweep.{name}_steps must be >= 1 (empty lattice), got {steps}")
            if not (0 < lo <= hi):
                raise ConfigError(f"sweep.{name}_min/{name}_max must satisfy 0 < min <= max")
            axes.append(np.linspace(lo, hi, steps) if steps > 1 else np.array([float(lo)]))
        return axes[0], axes[1]


PRESETS = {
    "ode-example": {
        "problem": {"kind": "ode", "f": "t*(1+u^2*v^2)", "g": "t*exp(u*v)", "r1": 1.0, "r2": 1.0},
        "hypothesis": {"f_lower": "1/4", "g_lower": "t*exp(-r1*r2)"},
        "sweep": {"r1_min": 0.5, "r1_max": 1.0, "r1_steps": 2, "r2_min": 0.5, "r2_max": 1.0, "r2_steps": 2},
    },
    "pde-example": {
        "problem": {
            "kind": "pde_disk",
            "f": "(1+x^2)*exp(u)*(2+cos(v))",
            "g": "(1+y^2)*(1+v^2)*(2+sin(u))",
            "r1": 1.0,
            "r2": 1.0,
        },
        "hypothesis": {"f_lower": "1", "g_lower": "1"},
        "sweep": {"r1_min": 0.5, "r1_max": 1.0, "r1_steps": 2, "r2_min": 0.5, "r2_max": 1.0, "r2_steps": 2},
    },
}

_SECTIONS = {
    "problem": ProblemSection,
    "solver": SolverSection,
    "hypothesis": HypothesisSection,
    "sweep": SweepSection,
    "output": OutputSection,
}

_INT_KEYS = {"grid_n", "n_r", "n_theta", "max_iter", "r1_steps", "r2_steps", "precision"}
_FLOAT_KEYS = {"r1", "r2", "theta", "tol_step", "tol_res", "r1_min", "r1_max", "r2_min", "r2_max"}


def _coerce(section: str, key: str, value):
    where = f"{section}.{key}"
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where} must be a string, got {value!r}")
    return value


def _merge(base: dict, override: dict) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for sec, values in override.items():
        if not isinstance(values, dict):
            raise ConfigError(f"top-level key {sec!r} must be a [section]")
        out.setdefault(sec, {}).update(values)
    return out


def _parse_key(where: str, src: str):
    try:
        return parse(src)
    except BKError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def from_dict(doc: dict) -> RunConfig:
    """Validate a nested dict and apply kind-dependent defaults."""
    sections = {}
    for name, values in doc.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{name}] must be a table")
        cls = _SECTIONS[name]
        known = {f.name for f in fields(cls)}
        for key in values:
            if key not in known:
                raise ConfigError(f"unknown key {name}.{key}")
        sections[name] = cls(**{k: _coerce(name, k, v) for k, v in values.items()})
    cfg = RunConfig(**sections)

    p, s = cfg.problem, cfg.solver
    if p.kind not in KINDS:
        raise ConfigError(f"problem.kind must be one of {KINDS}, got {p.kind!r}")
    for key in ("f", "g", "h1", "h2"):
        _parse_key(f"problem.{key}", getattr(p, key))
    if not (p.r1 > 0 and p.r2 > 0):
        raise ConfigError("problem.r1 and problem.r2 must be positive")
    if p.kind == "ode":
        if s.n_r is not None or s.n_theta is not None:
            raise ConfigError("solver.n_r / solver.n_theta apply only to kind 'pde_disk'")
        cfg.solver = replace(s, grid_n=201 if s.grid_n is None else s.grid_n)
        if cfg.solver.grid_n < 3:
            raise ConfigError("solver.grid_n must be >= 3")
    else:
        if s.grid_n is not None:
            raise ConfigError("solver.grid_n applies only to kind 'ode'")
        cfg.solver = replace(
            s, n_r=64 if s.n_r is None else s.n_r, n_theta=128 if s.n_theta is None else s.n_theta
        )
        if cfg.solver.n_r < 1 or cfg.solver.n_theta < 1:
            raise ConfigError("solver.n_r and solver.n_theta must be positive")
    try:
        cfg.solver_options()
    except ValueError as exc:
        raise ConfigError(f"[solver]: {exc}") from None
    try:
        sign = SignPattern.parse(cfg.solver.sign)
        sign.check_legal(*cfg.cones())
    except ValueError as exc:
        raise ConfigError(f"solver.sign: {exc} (kind {p.kind!r})") from None
    for key in ("f_lower", "g_lower"):
        src = getattr(cfg.hypothesis, key)
        if src is not None:
            _parse_key(f"hypothesis.{key}", src)
    if cfg.output.precision < 1:
        raise ConfigError("output.precision must be >= 1")
    return cfg


def preset(name: str) -> dict:
    try:
        return _merge({}, PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def loads_config(text: str, base: Optional[dict] = None) -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    return from_dict(_merge(base or {}, doc))


def load_config(path=None, preset_name: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Load ``path`` on top of an optional preset; file keys win, then ``overrides``."""
    base = preset(preset_name) if preset_name else {}
    if path is None:
        if not base:
            raise ConfigError("either --config or --preset is required")
        doc = base
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            doc = _merge(base, tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}") from None
    return from_dict(_merge(doc, overrides or {}))


def build_problem(cfg: RunConfig, r1: Optional[float] = None, r2: Optional[float] = None) -> HammersteinProblem:
    p = cfg.problem
    r1 = p.r1 if r1 is None else r1
    r2 = p.r2 if r2 is None else r2
    grid = cfg.grid()
    if p.kind == "ode":
        kernels = (KernelId.K1_DIRICHLET, KernelId.K2_MIXED)
    else:
        kernels = (KernelId.DISK_LAPLACIAN, KernelId.DISK_LAPLACIAN)
    cone1, cone2 = cfg.cones()
    env = dict(grid_env(grid), r1=r1, r2=r2)
    hs = []
    for key in ("h1", "h2"):
        try:
            vals = eval_on_grid(_parse_key(f"problem.{key}", getattr(p, key)), grid, env)
        except BKError as exc:
            raise ConfigError(f"problem.{key}: {exc}") from None
        hs.append(GridFn(grid, vals))
    try:
        return HammersteinProblem(
            grid,
            kernels[0],
            kernels[1],
            _parse_key("problem.f", p.f),
            _parse_key("problem.g", p.g),
            r1,
            r2,
            cone1,
            cone2,
            hs[0],
            hs[1],
            name=p.kind,
        )
    except ValueError as exc:
        raise ConfigError(f"[problem]: {exc}") from None
