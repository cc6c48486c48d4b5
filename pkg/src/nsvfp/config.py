"""Experiment configuration: one JSON document, strict keys, validated up front."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .diagnostics import EnergyWeights
from .errors import ConfigError
from .fourier import SpatialGrid
from .hermite import HermiteBasis, default_basis
from .linear_mode import LyapunovWeights
from .params import PhysicalParams
from .semigroup import KQuadrature

EXPERIMENTS = ("mode-decay", "linear-decay", "torus-sim", "picard-check", "diagnostics")


@dataclass(frozen=True)
class GridBlock:
    dim: int = 1
    n: int = 64
    L: float = 1.0


@dataclass(frozen=True)
class BasisBlock:
    N: int = 8


@dataclass(frozen=True)
class ParamsBlock:
    mu1: float = 1.0
    mu2: float = 0.0
    kappa: float = 1.0


@dataclass(frozen=True)
class WeightsBlock:
    """tau / C / r0 for the energy functionals, kappa for the per-mode functional."""

    tau: tuple = (0.01,) * 8
    C: tuple = (1.0, 1.0)
    r0: float = 2.0
    kappa: tuple = (0.01, 0.01, 0.01)


@dataclass(frozen=True)
class QuadratureBlock:
    n_radial: int = 64
    k_min: float = 1e-3
    k_max: float = 20.0
    angular: str = "lebedev26"
    n_theta: int = 6


@dataclass(frozen=True)
class FitBlock:
    """Fit window; None means the experiment's default window."""

    t_min: float | None = None
    t_max: float | None = None


@dataclass(frozen=True)
class ModeDecayRun:
    k_values: tuple = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)
    n_directions: int = 6
    s_max: float = 10.0
    n_times: int = 16
    max_degree: int = 8
    abscissa_tol: float = 1e-10
    spread_max: float = 5.0


@dataclass(frozen=True)
class LinearDecayRun:
    sigma: float = 1.0
    n_times: int = 20


@dataclass(frozen=True)
class TorusRun:
    T_final: float = 20.0
    dt: float = 0.02
    scheme: str = "imex2"
    dealias: bool = True
    amplitude: float = 1e-2
    n_modes: int = 2
    max_degree: int = 2
    observe_every: float = 0.25
    drift_tol: float = 1e-6
    fit_tol: float = 0.1


@dataclass(frozen=True)
class PicardRun:
    n_iter: int = 5
    n_steps: int = 100
    dt: float = 1e-2
    amplitude: float = 1e-2
    n_modes: int = 2


@dataclass(frozen=True)
class DiagnosticsRun:
    n_fields: int = 100
    band: int = 4
    p_values: tuple = (2.0, 3.0, 4.0, 6.0)
    tol: float = 1e-10


RUN_BLOCKS = {
    "mode-decay": ModeDecayRun,
    "linear-decay": LinearDecayRun,
    "torus-sim": TorusRun,
    "picard-check": PicardRun,
    "diagnostics": DiagnosticsRun,
}

DEFAULT_WINDOWS = {
    "linear-decay": (10.0, 1000.0),
    "torus-sim": (2.0, 20.0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    output_dir: str = "runs/out"
    grid: GridBlock = field(default_factory=GridBlock)
    basis: BasisBlock = field(default_factory=BasisBlock)
    params: ParamsBlock = field(default_factory=ParamsBlock)
    weights: WeightsBlock = field(default_factory=WeightsBlock)
    quadrature: QuadratureBlock = field(default_factory=QuadratureBlock)
    fit: FitBlock = field(default_factory=FitBlock)
    run: object = None

    # ---- domain objects, built on demand ----

    def spatial_grid(self) -> SpatialGrid:
        return SpatialGrid(self.grid.dim, self.grid.n, self.grid.L)

    def hermite_basis(self) -> HermiteBasis:
        return default_basis(self.basis.N)

    def physical_params(self) -> PhysicalParams:
        return PhysicalParams(self.params.mu1, self.params.mu2, self.params.kappa)

    def energy_weights(self) -> EnergyWeights:
        w = self.weights
        return EnergyWeights(tau=tuple(w.tau), C=tuple(w.C), r0=w.r0)

    def lyapunov_weights(self) -> LyapunovWeights:
        return LyapunovWeights(*self.weights.kappa)

    def k_quadrature(self) -> KQuadrature:
        q = self.quadrature
        return KQuadrature(q.n_radial, q.k_min, q.k_max, q.angular, q.n_theta)

    def fit_window(self) -> tuple:
        lo, hi = DEFAULT_WINDOWS.get(self.experiment, (0.0, math.inf))
        return (lo if self.fit.t_min is None else self.fit.t_min,
                hi if self.fit.t_max is None else self.fit.t_max)

    def to_dict(self) -> dict:
        d = asdict(self)
        return _lists(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _lists(x):
    if isinstance(x, dict):
        return {k: _lists(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_lists(v) for v in x]
    return x


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(where, name, default, value):
    """Type-check `value` against the type of the field default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}.{name}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{where}.{name}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or default is None:
        if value is None and default is None:
            return None
        if not _is_number(value):
            raise ConfigError(f"{where}.{name}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}.{name}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            raise ConfigError(f"{where}.{name}: expected a list of numbers, got {value!r}")
        return tuple(float(v) for v in value)
    raise ConfigError(f"{where}.{name}: unsupported field")


def _block(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    defaults = cls()
    kw = {k: _coerce(where, k, getattr(defaults, k), v) for k, v in data.items()}
    return cls(**kw)


_TOP = ("experiment", "seed", "output_dir", "grid", "basis", "params", "weights", "quadrature", "fit", "run")
_BLOCKS = {"grid": GridBlock, "basis": BasisBlock, "params": ParamsBlock, "weights": WeightsBlock,
           "quadrature": QuadratureBlock, "fit": FitBlock}


def parse_config(data: dict) -> ExperimentConfig:
    """Build and validate a config from a decoded JSON object."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - set(_TOP))
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    exp = data.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    out = data.get("output_dir", "runs/out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir must be a non-empty string")
    blocks = {k: _block(cls, data.get(k), k) for k, cls in _BLOCKS.items()}
    run = _block(RUN_BLOCKS[exp], data.get("run"), "run")
    cfg = ExperimentConfig(experiment=exp, seed=seed, output_dir=out, run=run, **blocks)
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(data)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def validate(cfg: ExperimentConfig) -> None:
    """Build every domain object and check the run block; raise ConfigError on any problem."""
    try:
        grid = cfg.spatial_grid()
        if cfg.basis.N < 3:
            raise ValueError("Hermite truncation N must be at least 3")
        cfg.hermite_basis()
        cfg.physical_params()
        cfg.energy_weights()
        if len(cfg.weights.kappa) != 3:
            raise ValueError("need three per-mode weights kappa")
        cfg.lyapunov_weights()
        cfg.k_quadrature()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    lo, hi = cfg.fit_window()
    _require(0 <= lo < hi, f"fit window must satisfy 0 <= t_min < t_max, got ({lo}, {hi})")
    r = cfg.run
    if isinstance(r, ModeDecayRun):
        _require(len(r.k_values) > 0, "run.k_values must be non-empty")
        _require(all(k > 0 and math.isfinite(k) for k in r.k_values), "run.k_values must be positive")
        _require(r.n_directions >= 1, "run.n_directions must be >= 1")
        _require(r.s_max > 0.5 and r.n_times >= 8, "need run.s_max > 0.5 and run.n_times >= 8")
        _require(0 <= r.max_degree <= cfg.basis.N, "run.max_degree must lie in [0, N]")
        _require(r.abscissa_tol >= 0 and r.spread_max > 1, "need abscissa_tol >= 0 and spread_max > 1")
    elif isinstance(r, LinearDecayRun):
        _require(r.sigma > 0, "run.sigma must be positive")
        _require(r.n_times >= 8, "run.n_times must be >= 8")
        _require(lo > 0 and math.isfinite(hi), "linear-decay needs a finite fit window with t_min > 0")
    elif isinstance(r, TorusRun):
        _require(r.T_final >= 0 and math.isfinite(r.T_final), "run.T_final must be finite and >= 0")
        _require(r.dt > 0, "run.dt must be positive")
        _require(r.scheme in ("imex1", "imex2"), f"run.scheme must be imex1 or imex2, got {r.scheme!r}")
        _require(r.amplitude >= 0, "run.amplitude must be >= 0")
        _require(r.n_modes >= 1 and 3 * r.n_modes < grid.n, "run.n_modes must be >= 1 and resolved by the grid")
        _require(0 <= r.max_degree <= cfg.basis.N, "run.max_degree must lie in [0, N]")
        _require(r.observe_every > 0, "run.observe_every must be positive")
        _require(r.drift_tol > 0 and r.fit_tol > 0, "tolerances must be positive")
    elif isinstance(r, PicardRun):
        _require(r.n_iter >= 2, "run.n_iter must be >= 2")
        _require(r.n_steps >= 1 and r.dt > 0, "need run.n_steps >= 1 and run.dt > 0")
        _require(r.amplitude >= 0, "run.amplitude must be >= 0")
        _require(r.n_modes >= 1 and 3 * r.n_modes < grid.n, "run.n_modes must be >= 1 and resolved by the grid")
    elif isinstance(r, DiagnosticsRun):
        _require(r.n_fields >= 1, "run.n_fields must be >= 1")
        _require(1 <= r.band < grid.n // 2, "run.band must lie in [1, n/2)")
        _require(len(r.p_values) > 0 and all(2 <= p <= 6 for p in r.p_values), "run.p_values must lie in [2, 6]")
        _require(r.tol >= 0, "run.tol must be >= 0")
    else:
        raise ConfigError("missing run block")
