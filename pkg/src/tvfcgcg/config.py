"""Experiment configuration files (TOML).

Example::

    [mesh]
    n = 24
    jitter = 0.2
    seed = 0

    [problem]
    variant = "elliptic"
    y_d = "indicator 0 0 1 1"
    nonneg = false

    [solver]
    tolerance = 1e-10

Target specifications for ``problem.y_d``:

``indicator cx cy w h``   nodal indicator of an open box
``forward-of PATH``       observation of a stored P0 field
``file PATH``             a stored P1 field
``phantom``               observation of the built-in nested-set control
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

import numpy as np

from .fcgcg import SolverConfig
from .mesh import TriMesh, generate_square_mesh, load_field
from .pde import PdeProblem, indicator_target
from .problems import phantom_control

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "serialize_config",
           "build_problem"]


class ConfigError(ValueError):
    pass


@dataclass
class MeshSpec:
    n: int
    jitter: float = 0.0
    seed: int = 0


@dataclass
class ProblemSpec:
    variant: str
    y_d: str
    alpha: float = 1e-4
    T: float = 0.02
    N: int = 9
    nonneg: bool = True


@dataclass
class SolverSpec:
    tolerance: float = 1e-10
    max_iter: int = 200
    mode: str = "onecut"
    include_omega: bool = True


@dataclass
class OutputSpec:
    directory: str = "run"
    emit_fields: bool = True


@dataclass
class ExperimentConfig:
    mesh: MeshSpec
    problem: ProblemSpec
    solver: SolverSpec = field(default_factory=SolverSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(tolerance=self.solver.tolerance, max_iter=self.solver.max_iter,
                            mode=self.solver.mode, include_omega=self.solver.include_omega)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


_SECTIONS = {"mesh": MeshSpec, "problem": ProblemSpec, "solver": SolverSpec, "output": OutputSpec}
_REQUIRED = {"mesh": ("n",), "problem": ("variant", "y_d")}


def _typed(section, key, value, kind):
    name = f"{section}.{key}"
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{name} must be a string")
    return value


_TYPES = {
    "mesh": {"n": int, "jitter": float, "seed": int},
    "problem": {"variant": str, "y_d": str, "alpha": float, "T": float, "N": int, "nonneg": bool},
    "solver": {"tolerance": float, "max_iter": int, "mode": str, "include_omega": bool},
    "output": {"directory": str, "emit_fields": bool},
}


def parse_config(data: dict, base_dir=".") -> ExperimentConfig:
    """Validate a raw mapping (as read from TOML) and fill in defaults."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section {sorted(unknown)[0]!r}")
    parts = {}
    for section, cls in _SECTIONS.items():
        raw = data.get(section, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in _REQUIRED.get(section, ()):
            if key not in raw:
                raise ConfigError(f"missing required key {section}.{key}")
        types = _TYPES[section]
        extra = set(raw) - set(types)
        if extra:
            raise ConfigError(f"unknown key {section}.{sorted(extra)[0]}")
        parts[section] = cls(**{k: _typed(section, k, v, types[k]) for k, v in raw.items()})
    cfg = ExperimentConfig(base_dir=Path(base_dir), **parts)
    _validate(cfg)
    return cfg


def _bound(ok, name, bound):
    if not ok:
        raise ConfigError(f"{name} out of range: must be {bound}")


def _validate(cfg: ExperimentConfig) -> None:
    m, p, s = cfg.mesh, cfg.problem, cfg.solver
    _bound(m.n >= 1, "mesh.n", ">= 1")
    _bound(0.0 <= m.jitter <= 0.3, "mesh.jitter", "in [0, 0.3]")
    _bound(p.variant in ("elliptic", "parabolic"), "problem.variant", "'elliptic' or 'parabolic'")
    _bound(math.isfinite(p.alpha) and p.alpha > 0, "problem.alpha", "> 0")
    _bound(math.isfinite(p.T) and p.T > 0, "problem.T", "> 0")
    _bound(p.N >= 1, "problem.N", ">= 1")
    _bound(s.tolerance > 0, "solver.tolerance", "> 0")
    _bound(s.max_iter >= 0, "solver.max_iter", ">= 0")
    _bound(s.mode in ("onecut", "dinkelbach"), "solver.mode", "'onecut' or 'dinkelbach'")
    words = p.y_d.split()
    if not words:
        raise ConfigError("problem.y_d is empty")
    kind = words[0]
    if kind == "indicator":
        if len(words) != 5:
            raise ConfigError("problem.y_d: 'indicator' takes cx cy w h")
        try:
            vals = [float(w) for w in words[1:]]
        except ValueError:
            raise ConfigError("problem.y_d: indicator parameters must be numbers") from None
        _bound(vals[2] > 0 and vals[3] > 0, "problem.y_d indicator size", "> 0")
    elif kind in ("forward-of", "file"):
        if len(words) != 2:
            raise ConfigError(f"problem.y_d: '{kind}' takes one path")
        if not cfg.resolve(words[1]).is_file():
            raise ConfigError(f"problem.y_d: file not found: {words[1]}")
    elif kind == "phantom":
        if len(words) != 1:
            raise ConfigError("problem.y_d: 'phantom' takes no arguments")
    else:
        raise ConfigError(f"problem.y_d: unknown target kind {kind!r}")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, base_dir=path.parent)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical TOML text with every default spelled out."""
    data = {name: asdict(getattr(cfg, name)) for name in _SECTIONS}
    return tomli_w.dumps(data)


def build_problem(cfg: ExperimentConfig, mesh: TriMesh | None = None) -> PdeProblem:
    p = cfg.problem
    mesh = mesh or generate_square_mesh(cfg.mesh.n, cfg.mesh.jitter, cfg.mesh.seed)
    problem = PdeProblem(mesh, p.variant, alpha=p.alpha, T=p.T, N=p.N, nonneg=p.nonneg,
                         include_omega=cfg.solver.include_omega)
    words = p.y_d.split()
    if words[0] == "indicator":
        cx, cy, w, h = (float(v) for v in words[1:])
        problem.y_d = indicator_target(mesh, cx, cy, w, h)
    elif words[0] == "phantom":
        problem.y_d = problem.forward(phantom_control(mesh))
    else:
        kind, values = load_field(cfg.resolve(words[1]), mesh)
        expected = "P0" if words[0] == "forward-of" else "P1"
        if kind != expected:
            raise ConfigError(f"problem.y_d: {words[0]} needs a {expected} field, got {kind}")
        problem.y_d = problem.forward(values) if words[0] == "forward-of" else np.asarray(values)
    return problem
