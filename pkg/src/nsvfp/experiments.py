"""Experiment drivers behind the harness.

Each experiment is split into `compute` (the expensive part, producing CSV
tables) and `evaluate` (fits and pass/fail checks computed from the tables
alone), so the `report` subcommand can re-fit stored output without
recomputing anything.
"""

from __future__ import annotations

import math
import time
import traceback
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .diagnostics import FunctionalRecorder, fit_exponential, interpolation_check, lyapunov_from_series
from .fourier import FrequencySplitSpec, frequency_split, gradient_tensor_norm
from .io import RunManifest, Table, emit_plot_data, read_csv, write_csv
from .linear_mode import assemble_generator, fit_mode_decay
from .nonlinear import StepperConfig, admissible_data, picard_iterations, run_simulation
from .semigroup import InitialProfile, fit_power_law, synthesize_norm_table

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_FAILED = 0, 1, 2, 3

# target exponents and tolerances of the whole-space decay table, per derivative order
DECAY_TARGETS = {0: (-0.75, 0.10), 1: (-1.25, 0.10), 2: (-1.75, 0.15)}
INCREMENT_TARGET = (-0.5, 0.07)


@dataclass
class Evaluation:
    checks: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)  # file name -> (report, series name)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


@dataclass
class SeriesReport:
    """Minimal report for emit_plot_data: named series with optional envelopes."""

    times: np.ndarray
    series: dict
    envelopes: dict = field(default_factory=dict)

    def array(self, name):
        return np.asarray(self.series[name])

    def envelope(self, name):
        return self.envelopes.get(name)


# ---- mode-decay ----------------------------------------------------------------------


def unit_directions(rng, n: int) -> np.ndarray:
    d = rng.standard_normal((n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def random_mode_state(rng, basis, max_degree: int, decay: float = 0.5) -> np.ndarray:
    """Complex mode state with kinetic coefficients damped by decay**|alpha|."""
    n = basis.size
    U = np.zeros(n + 5, complex)
    sel = basis.degree <= max_degree
    m = int(sel.sum())
    U[:n][sel] = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) * decay ** basis.degree[sel]
    U[n:] = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    return U


def mode_decay_compute(cfg: ExperimentConfig) -> dict:
    r = cfg.run
    basis, params, weights = cfg.hermite_basis(), cfg.physical_params(), cfg.lyapunov_weights()
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for kabs in r.k_values:
        for d in unit_directions(rng, r.n_directions):
            k = kabs * d
            gen = assemble_generator(k, params, basis)
            abscissa = float(np.linalg.eigvals(gen.matrix).real.max())
            t_grid = (1 + kabs ** 2) / kabs ** 2 * np.linspace(0.5, r.s_max, r.n_times)
            fit = fit_mode_decay(gen, random_mode_state(rng, basis, r.max_degree), t_grid, weights)
            rows.append([kabs, *k, abscissa, fit.c, fit.rate_t, fit.residual])
    cols = ("k_abs", "k1", "k2", "k3", "abscissa", "c", "rate_t", "envelope_residual")
    desc = {
        "k_abs": "wavenumber modulus |k|",
        "k1": "wavenumber component 1", "k2": "wavenumber component 2", "k3": "wavenumber component 3",
        "abscissa": "largest real part of the eigenvalues of A(k) [1/time]",
        "c": "fitted envelope rate in s = |k|^2 t / (1 + |k|^2) [dimensionless]",
        "rate_t": "equivalent exponential rate in t [1/time]",
        "envelope_residual": "max relative excess of E_M over the fitted envelope",
    }
    return {"mode_decay.csv": Table(cols, np.array(rows), desc)}


def mode_decay_evaluate(cfg: ExperimentConfig, tables: dict) -> Evaluation:
    r = cfg.run
    tab = tables["mode_decay.csv"]
    c = tab.column("c")
    ev = Evaluation()
    ev.metrics["abscissa_max"] = float(tab.column("abscissa").max())
    ev.metrics["c_min"] = float(c.min())
    ev.metrics["c_max"] = float(c.max())
    ev.checks["spectral_abscissa"] = ev.metrics["abscissa_max"] <= r.abscissa_tol
    ev.checks["envelope_rate_positive"] = bool(np.all(c > 0))
    spread = float(c.max() / c.min()) if np.all(c > 0) else math.inf
    ev.metrics["rate_spread"] = spread
    ev.checks["rate_spread"] = spread < r.spread_max
    return ev


# ---- linear-decay --------------------------------------------------------------------


def linear_decay_times(cfg: ExperimentConfig) -> np.ndarray:
    lo, hi = cfg.fit_window()
    return np.logspace(math.log10(lo), math.log10(hi), cfg.run.n_times)


def linear_decay_compute(cfg: ExperimentConfig) -> dict:
    t = linear_decay_times(cfg)
    tab = synthesize_norm_table(InitialProfile(sigma=cfg.run.sigma), t, (0, 1, 2), cfg.k_quadrature(),
                                cfg.physical_params(), cfg.hermite_basis())
    desc = {"t": "time"}
    for m in range(3):
        desc[f"norm_m{m}"] = f"L2 norm of the order-{m} spatial derivatives of the linear solution"
    return {"decay_table.csv": Table(("t", "norm_m0", "norm_m1", "norm_m2"), np.column_stack([t, tab]), desc)}


def linear_decay_evaluate(cfg: ExperimentConfig, tables: dict) -> Evaluation:
    tab = tables["decay_table.csv"]
    t = tab.column("t")
    ev = Evaluation()
    rep = SeriesReport(t, {})
    exps = []
    for m in range(3):
        name = f"norm_m{m}"
        v = tab.column(name)
        fit = fit_power_law(t, v)
        exps.append(fit.exponent)
        ev.fits[name] = asdict(fit)
        target, tol = DECAY_TARGETS[m]
        ev.checks[f"exponent_m{m}"] = abs(fit.exponent - target) <= tol
        rep.series[name] = v
        rep.envelopes[name] = np.exp(fit.intercept) * (1 + t) ** fit.exponent
        ev.plots[f"plot_{name}.csv"] = (rep, name)
    target, tol = INCREMENT_TARGET
    for m in (1, 2):
        inc = exps[m] - exps[m - 1]
        ev.metrics[f"increment_m{m}"] = inc
        ev.checks[f"increment_m{m}"] = abs(inc - target) <= tol
    return ev


# ---- torus-sim -----------------------------------------------------------------------

TORUS_COLUMNS = ("t", "E", "D", "H", "M", "cons_mass_f", "cons_mass_rho", "cons_momentum", "cons_energy",
                 "positivity_min")


def torus_compute(cfg: ExperimentConfig) -> dict:
    r = cfg.run
    grid, basis = cfg.spatial_grid(), cfg.hermite_basis()
    data = admissible_data(grid, basis, r.amplitude, cfg.seed, r.n_modes, r.max_degree)
    rec = FunctionalRecorder(weights=cfg.energy_weights())
    step = StepperConfig(dt=r.dt, scheme=r.scheme, dealias=r.dealias)
    run_simulation(data, r.T_final, step, cfg.physical_params(), observers=[rec], observe_every=r.observe_every)
    rep = rec.report
    cons = np.array([[c[0], c[1], np.linalg.norm(c[2:5]), c[5]] for c in rep.conservation])
    data = np.column_stack([rep.times, rep.array("ENERGY_E"), rep.array("DISSIPATION_D"), rep.array("HIGH_H"),
                            rep.array("HIGH_M"), cons, rep.positivity])
    desc = {
        "t": "time",
        "E": "weighted energy functional",
        "D": "dissipation rate functional",
        "H": "high-order energy functional",
        "M": "high-order dissipation functional",
        "cons_mass_f": "integral of the particle density perturbation a",
        "cons_mass_rho": "integral of the fluid density perturbation rho",
        "cons_momentum": "Euclidean norm of the total momentum integral",
        "cons_energy": "total energy integral",
        "positivity_min": "minimum of M + sqrt(M) f over grid points and velocity nodes",
    }
    return {"torus.csv": Table(TORUS_COLUMNS, data, desc)}


def torus_evaluate(cfg: ExperimentConfig, tables: dict) -> Evaluation:
    r = cfg.run
    tab = tables["torus.csv"]
    t = tab.column("t")
    E, D = tab.column("E"), tab.column("D")
    ev = Evaluation()
    # drift relative to the box volume (the background value of each integral), per unit time
    cons = tab.data[:, 5:9]
    later = t > t[0]
    if np.any(later):
        rate = np.abs(cons[later] - cons[0]).max(axis=1) / (cfg.spatial_grid().volume * (t[later] - t[0]))
        ev.metrics["conservation_drift_rate"] = float(rate.max())
    else:
        ev.metrics["conservation_drift_rate"] = 0.0
    ev.checks["conservation"] = ev.metrics["conservation_drift_rate"] < r.drift_tol
    ev.metrics["positivity_min"] = float(tab.column("positivity_min").min())
    ev.checks["positivity"] = ev.metrics["positivity_min"] > 0
    ev.checks["energy_monotone"] = bool(np.all(np.diff(E) <= 0))
    rep = SeriesReport(t, {"E": E})
    lo, hi = cfg.fit_window()
    sel = (t >= lo) & (t <= hi)
    if sel.sum() >= 3:
        fit = fit_exponential(t[sel], E[sel])
        ev.fits["E"] = asdict(fit)
        ev.checks["decay_rate_positive"] = fit.rate > 0
        ev.checks["fit_residual"] = fit.residual < r.fit_tol
        rep.envelopes["E"] = np.exp(fit.intercept - fit.rate * t)
        # goodness of fit of the log-linear regression, for reference only
        y = np.log(E[sel])
        ev.metrics["fit_normalized_residual"] = float(math.sqrt(max(0.0, fit.residual ** 2 / np.var(y))))
    else:
        ev.metrics["fit_skipped"] = 1.0
    if t.size >= 3:
        lyap = lyapunov_from_series(t, E, D)
        ev.metrics["lyapunov_lambda"] = lyap.lam
        ev.checks["lyapunov"] = lyap.passed
    ev.plots["plot_E.csv"] = (rep, "E")
    return ev


# ---- picard-check --------------------------------------------------------------------


def picard_compute(cfg: ExperimentConfig) -> dict:
    r = cfg.run
    grid, basis = cfg.spatial_grid(), cfg.hermite_basis()
    data = admissible_data(grid, basis, r.amplitude, cfg.seed, r.n_modes)
    rep = picard_iterations(data, r.n_iter, r.n_steps, r.dt, cfg.physical_params())
    d = rep.differences
    desc = {"iteration": "sweep number n",
            "difference": "sup over time of the H1 grid norm of X^(n+1) - X^n"}
    return {"picard.csv": Table(("iteration", "difference"), np.column_stack([np.arange(d.size), d]), desc)}


def picard_evaluate(cfg: ExperimentConfig, tables: dict) -> Evaluation:
    d = tables["picard.csv"].column("difference")
    ev = Evaluation()
    if np.any(d[:-1] == 0):
        ratios = np.zeros(d.size - 1)
    else:
        ratios = d[1:] / d[:-1]
    for i, q in enumerate(ratios):
        ev.metrics[f"ratio_{i + 1}"] = float(q)
    ev.checks["ratios_below_one"] = bool(np.all(ratios < 1))
    ev.checks["ratios_decreasing"] = bool(np.all(np.diff(ratios) < 0)) or bool(np.all(d[1:] == 0))
    return ev


# ---- diagnostics ---------------------------------------------------------------------


def band_limited_field(rng, grid, band: int) -> np.ndarray:
    """Real random field with Fourier support in |m_j| <= band."""
    spec = np.zeros(grid.shape, complex)
    idx = grid.k_index
    sel = np.ones(grid.shape, bool)
    for j in range(grid.dim):
        sel &= np.abs(idx[j]) <= band
    m = int(sel.sum())
    spec[sel] = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.real(np.fft.ifftn(spec))


def _ratio(a, b):
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return a / b


def diagnostics_compute(cfg: ExperimentConfig) -> dict:
    r = cfg.run
    grid = cfg.spatial_grid()
    r0 = cfg.weights.r0
    spec = FrequencySplitSpec(r0)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for i in range(r.n_fields):
        g = band_limited_field(rng, grid, r.band)
        low, high = frequency_split(g, spec, grid)
        h0 = gradient_tensor_norm(high, grid, 0)
        row = [i,
               _ratio(h0, 2 / r0 * gradient_tensor_norm(g, grid, 1)),
               _ratio(h0, (2 / r0) ** 2 * gradient_tensor_norm(g, grid, 2)),
               _ratio(gradient_tensor_norm(low, grid, 2), r0 * gradient_tensor_norm(low, grid, 1))]
        row += [interpolation_check(g, p, grid).ratio for p in r.p_values]
        rows.append(row)
    cols = ("field", "split_high_grad", "split_high_hess", "split_low_bernstein") + \
        tuple(f"interp_p{p:g}" for p in r.p_values)
    desc = {"field": "sample number",
            "split_high_grad": "||g_high|| / ((2/r0) ||grad g||)",
            "split_high_hess": "||g_high|| / ((2/r0)^2 ||grad^2 g||)",
            "split_low_bernstein": "||grad^2 g_low|| / (r0 ||grad g_low||)"}
    for p in r.p_values:
        desc[f"interp_p{p:g}"] = f"||g||_{p:g} / (||g||_2^z ||g||_6^(1-z)), z = (6-p)/(2p)"
    return {"diagnostics.csv": Table(cols, np.array(rows), desc)}


def diagnostics_evaluate(cfg: ExperimentConfig, tables: dict) -> Evaluation:
    tab = tables["diagnostics.csv"]
    tol = cfg.run.tol
    ev = Evaluation()
    split = ("split_high_grad", "split_high_hess", "split_low_bernstein")
    for name in tab.columns[1:]:
        worst = float(tab.column(name).max())
        ev.metrics[f"{name}_max"] = worst
    ev.checks["frequency_split"] = all(ev.metrics[f"{n}_max"] <= 1 + tol for n in split)
    ev.checks["interpolation"] = all(ev.metrics[f"{n}_max"] <= 1 + tol for n in tab.columns[4:])
    return ev


# ---- orchestration -------------------------------------------------------------------

EXPERIMENT_TABLE = {
    "mode-decay": (mode_decay_compute, mode_decay_evaluate),
    "linear-decay": (linear_decay_compute, linear_decay_evaluate),
    "torus-sim": (torus_compute, torus_evaluate),
    "picard-check": (picard_compute, picard_evaluate),
    "diagnostics": (diagnostics_compute, diagnostics_evaluate),
}

TABLE_NAMES = {
    "mode-decay": ("mode_decay.csv",),
    "linear-decay": ("decay_table.csv",),
    "torus-sim": ("torus.csv",),
    "picard-check": ("picard.csv",),
    "diagnostics": ("diagnostics.csv",),
}


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_plots(out: Path, ev: Evaluation, files: list):
    for name, (rep, series) in ev.plots.items():
        emit_plot_data(rep, out / name, series)
        files.append(name)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> tuple[RunManifest, int]:
    """Run one validated experiment, write its tables, plot data and manifest.json.

    Returns the manifest and the exit code (0 pass, 2 runtime error, 3 a check failed).
    """
    out = Path(out_dir or cfg.output_dir)
    compute, evaluate = EXPERIMENT_TABLE[cfg.experiment]
    files: list = []
    start = time.perf_counter()
    man = RunManifest(experiment=cfg.experiment, config=cfg.to_dict(), version=__version__, status="running",
                      exit_code=EXIT_RUNTIME, wall_time=0.0)
    try:
        tables = compute(cfg)
        for name, tab in tables.items():
            write_csv(out / name, tab, title=f"{cfg.experiment} seed={cfg.seed}")
            files.append(name)
        ev = evaluate(cfg, tables)
        _write_plots(out, ev, files)
    except Exception as exc:
        man.status = "runtime_error"
        man.error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        man.files = files
        man.wall_time = time.perf_counter() - start
        man.timestamp = _now()
        man.write(out / "manifest.json")
        return man, EXIT_RUNTIME
    man.files = files
    man.checks = ev.checks
    man.fits = ev.fits
    man.metrics = ev.metrics
    man.exit_code = EXIT_OK if ev.passed else EXIT_FAILED
    man.status = "passed" if ev.passed else "failed"
    man.wall_time = time.perf_counter() - start
    man.timestamp = _now()
    man.write(out / "manifest.json")
    return man, man.exit_code


def report_experiment(cfg: ExperimentConfig, out_dir=None) -> tuple[RunManifest, int]:
    """Re-fit the stored tables of a previous run (no recomputation); writes report.json."""
    out = Path(out_dir or cfg.output_dir)
    start = time.perf_counter()
    _, evaluate = EXPERIMENT_TABLE[cfg.experiment]
    tables = {}
    for name in TABLE_NAMES[cfg.experiment]:
        path = out / name
        if not path.is_file():
            raise FileNotFoundError(f"{path} not found; run the experiment first")
        tables[name] = read_csv(path)
    ev = evaluate(cfg, tables)
    files = list(tables)
    _write_plots(out, ev, files)
    code = EXIT_OK if ev.passed else EXIT_FAILED
    man = RunManifest(experiment=cfg.experiment, config=cfg.to_dict(), version=__version__,
                      status="passed" if ev.passed else "failed", exit_code=code,
                      wall_time=time.perf_counter() - start, files=files, checks=ev.checks, fits=ev.fits,
                      metrics=ev.metrics, timestamp=_now())
    man.write(out / "report.json")
    return man, code
