"""Energy, dissipation and conservation functionals of a kinetic-fluid state.

Every functional is evaluated exactly on the grid in Fourier space: for real
fields g, h on the box, int d^alpha g d^alpha h dx = |box|^{-1} sum_k
k^{2 alpha} Re(g_hat conj(h_hat)) with g_hat = fft(g) dV.  Velocity-side
quantities (micro projection, Gamma/Upsilon moments, nu-norms, velocity
derivatives) act pointwise in x and therefore commute with the transform.

Notation: "shell m" is sum_{|alpha| = m} ||d^alpha g||^2 over spatial
multi-indices (mixed derivatives once); "grad^m" is the full tensor norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .fourier import FrequencySplitSpec, SpatialGrid, low_mask, multi_indices, norm_Lp
from .hermite import SQRT2, SQRT3, SQRT6, HermiteBasis, macro_moments, macro_part, nu_gram, velocity_derivative
from .nonlinear import KineticFluidState, positivity_min

KIND_NAMES = (
    "ENERGY_E",
    "DISSIPATION_D",
    "HIGH_H",
    "HIGH_M",
    "CROSS_E0",
    "CROSS_E0_HIGH",
    "E1_SECOND",
    "D1_SECOND",
    "SOBOLEV_PLAIN",
)


@dataclass(frozen=True)
class EnergyWeights:
    """Small weights tau_1..tau_8 of the cross terms, the constants C_1, C_2 of the
    mixed x-v terms, and the cutoff r0 of the low/high split."""

    tau: tuple = (0.01,) * 8
    C: tuple = (1.0, 1.0)
    r0: float = 2.0

    def __post_init__(self):
        if len(self.tau) != 8:
            raise ValueError("need eight weights tau_1..tau_8")
        for t in self.tau:
            if not 0.0 <= t <= 0.1:
                raise ValueError(f"weights must lie in [0, 0.1], got {t}")
        if len(self.C) != 2 or min(self.C) <= 0:
            raise ValueError("need two positive constants C_1, C_2")
        if not self.r0 > 0:
            raise ValueError("cutoff radius must be positive")

    @classmethod
    def uniform(cls, tau: float, **kw) -> EnergyWeights:
        return cls(tau=(float(tau),) * 8, **kw)

    def t(self, i: int) -> float:
        """tau_i with 1-based index."""
        return self.tau[i - 1]


@dataclass(frozen=True)
class FunctionalKind:
    name: str
    weights: EnergyWeights = EnergyWeights()

    def __post_init__(self):
        if self.name not in KIND_NAMES:
            raise ValueError(f"unknown functional {self.name!r}; expected one of {KIND_NAMES}")


# ---- spectral context ----------------------------------------------------------------


@lru_cache(maxsize=16)
def _wavenumbers(grid: SpatialGrid):
    """k_j with the Nyquist plane zeroed, padded to three components."""
    kz = np.zeros((3, *grid.shape))
    for j in range(grid.dim):
        kz[j] = np.where(np.abs(grid.k_index[j]) == grid.n // 2, 0.0, grid.k[j])
    return kz


@lru_cache(maxsize=16)
def _shell_weight(grid: SpatialGrid, m: int) -> np.ndarray:
    kz = _wavenumbers(grid)
    w = np.zeros(grid.shape)
    for alpha in multi_indices(m, grid.dim):
        term = np.ones(grid.shape)
        for j, a in enumerate(alpha):
            term = term * kz[j] ** (2 * a)
        w += term
    return w


def _shells(grid, lo, hi):
    return sum(_shell_weight(grid, m) for m in range(lo, hi + 1))


@lru_cache(maxsize=8)
def _velocity_forms(basis: HermiteBasis):
    """Quadratic forms sum_{|beta|=k} ||d_v^beta g||^2 and its nu-version, k = 1, 2."""
    eye = np.eye(basis.size)
    out = {}
    for k in (1, 2):
        l2 = np.zeros((basis.size, basis.size))
        nu = np.zeros_like(l2)
        for beta in multi_indices(k, 3):
            D, big = velocity_derivative(eye, beta, basis)
            l2 += D.T @ D
            nu += D.T @ _nu_gram(big) @ D
        out[k] = (l2, nu)
    return out


@lru_cache(maxsize=8)
def _nu_gram(basis: HermiteBasis) -> np.ndarray:
    return nu_gram(basis)


class _Spectral:
    """Fourier coefficients of every field of a state, with shared helpers."""

    def __init__(self, state: KineticFluidState):
        grid, basis = state.grid, state.basis
        self.grid, self.basis = grid, basis
        axes = tuple(range(-grid.dim, 0))
        Yh = np.fft.fftn(state.stacked(), axes=axes) * grid.cell_volume
        n = basis.size
        self.f = Yh[:n]
        self.rho = Yh[n]
        self.u = Yh[n + 1:n + 4]
        self.theta = Yh[n + 4]
        self.a = self.f[basis.i0]
        self.b = self.f[basis.i1]
        self.omega = self.f[basis.i2].sum(axis=0) / SQRT3
        self.micro = self.f - macro_part(self.f, basis)
        self.kz = _wavenumbers(grid)
        self.k2 = np.sum(self.kz ** 2, axis=0)
        self.inv_volume = 1.0 / grid.volume

    def high(self, r0):
        return ~low_mask(FrequencySplitSpec(r0), self.grid)

    def ip(self, g, h, weight=1.0) -> float:
        """sum_alpha int d^alpha g . d^alpha h, the alpha-sum encoded in `weight`."""
        return float(np.sum(weight * np.real(g * np.conj(h))) * self.inv_volume)

    def sq(self, g, weight=1.0) -> float:
        return self.ip(g, g, weight)

    def form(self, Q, c, weight=1.0) -> float:
        """sum_k weight(k) c(k)^H Q c(k) for Hermite coefficient fields c."""
        qc = np.tensordot(Q, c, axes=(1, 0))
        return float(np.sum(weight * np.real(np.sum(np.conj(c) * qc, axis=0))) * self.inv_volume)

    def d(self, g, j):
        return 1j * self.kz[j] * g

    def div(self, v):
        return sum(self.d(v[j], j) for j in range(3))


def _all_fields(s: _Spectral):
    return [s.f, s.rho, s.u, s.theta]


def _plain(s, weight):
    return sum(s.sq(g, weight) for g in _all_fields(s))


def _e0_core(s: _Spectral, weight, mask=None) -> float:
    """The cross functional built from b, omega, a and the micro moments Gamma, Upsilon."""
    sel = (lambda g: g) if mask is None else (lambda g: np.where(mask, g, 0.0))
    micro = sel(s.micro)
    mom = macro_moments(micro, s.basis)
    b = sel(s.b)
    omega = sel(s.omega)
    a = sel(s.a)
    total = 0.0
    for i in range(3):
        for j in range(3):
            total += s.ip(s.d(b[i], j) + s.d(b[j], i), mom.Gamma[i, j], weight)
    for i in range(3):
        total += s.ip(s.d(omega, i), mom.Upsilon[i], weight)
    inner = (SQRT6 / 5.0) * s.div(mom.Upsilon) - s.div(b)
    total += (2.0 / 21.0) * s.ip(a, inner, weight)
    return total


def _u_grad_rho(s, weight, rho=None):
    rho = s.rho if rho is None else rho
    return sum(s.ip(s.u[j], s.d(rho, j), weight) for j in range(3))


def _mixed_xv(s, k, weight, nu=False):
    l2, nuq = _velocity_forms(s.basis)[k]
    return s.form(nuq if nu else l2, s.micro, weight)


def _micro_nu(s, weight):
    return s.form(_nu_gram(s.basis), s.micro, weight)


def _exchange(s):
    return s.b - s.u, SQRT2 * s.omega - SQRT3 * s.theta


def evaluate_functional(kind: FunctionalKind | str, state: KineticFluidState) -> float:
    """Value of the named functional on the state."""
    if isinstance(kind, str):
        kind = FunctionalKind(kind)
    if state.basis.N < 3:
        raise ValueError("functionals need Hermite truncation N >= 3 (Upsilon moments)")
    s = _Spectral(state)
    w = kind.weights
    g = s.grid
    W0, W1, W2 = _shells(g, 0, 0), _shells(g, 0, 1), _shells(g, 0, 2)
    w1, w2 = _shell_weight(g, 1), _shell_weight(g, 2)
    name = kind.name

    if name == "SOBOLEV_PLAIN":
        return _plain(s, W2)
    if name == "CROSS_E0":
        return _e0_core(s, W1)
    if name == "CROSS_E0_HIGH":
        return _e0_core(s, s.k2, s.high(w.r0))
    if name == "ENERGY_E":
        return (_plain(s, W2) + w.t(1) * _e0_core(s, W1) + w.t(2) * _u_grad_rho(s, W1)
                + w.t(3) * (w.C[0] * _mixed_xv(s, 1, W1) + w.C[1] * _mixed_xv(s, 2, W0)))
    if name == "HIGH_H":
        return (_plain(s, w1 + w2) + w.t(4) * _e0_core(s, w1) + w.t(5) * _u_grad_rho(s, w1)
                + w.t(6) * w.C[0] * _mixed_xv(s, 1, W1))
    if name == "DISSIPATION_D":
        bu, ot = _exchange(s)
        grad_h1 = W1 * s.k2
        return (sum(s.sq(x, grad_h1) for x in (s.a, s.b, s.rho, s.omega))
                + _micro_nu(s, W2) + s.sq(s.u, W2 * s.k2) + s.sq(s.theta, W2 * s.k2)
                + s.sq(bu, W2) + s.sq(ot, W2)
                + _mixed_xv(s, 1, W1, nu=True) + _mixed_xv(s, 2, W0, nu=True))
    if name == "HIGH_M":
        bu, ot = _exchange(s)
        hi = w1 + w2
        return (_micro_nu(s, hi) + s.sq(bu, hi) + s.sq(ot, hi)
                + s.sq(s.u, hi * s.k2) + s.sq(s.theta, hi * s.k2)
                + sum(s.sq(x, w1 * s.k2) for x in (s.a, s.b, s.rho, s.omega))
                + _mixed_xv(s, 1, w1, nu=True))
    if name == "E1_SECOND":
        k4 = s.k2 ** 2
        mask = s.high(w.r0)
        rho_h = np.where(mask, s.rho, 0.0)
        cross = 0.0
        for i in range(3):
            for j in range(3):
                cross += s.ip(s.d(s.u[i], j), s.d(s.d(rho_h, i), j))
        return _plain(s, k4) + w.t(7) * _e0_core(s, s.k2, mask) + w.t(8) * cross
    if name == "D1_SECOND":
        bu, ot = _exchange(s)
        k4 = s.k2 ** 2
        mask = s.high(w.r0)
        hi = lambda x: np.where(mask, x, 0.0)  # noqa: E731
        return (_micro_nu(s, k4) + s.sq(bu, k4) + s.sq(ot, k4)
                + s.sq(s.u, k4 * s.k2) + s.sq(s.theta, k4 * s.k2)
                + sum(s.sq(hi(x), k4) for x in (s.a, s.b, s.omega, s.rho)))
    raise ValueError(f"unsupported functional {name!r}")


def cross_e0_first_order(state: KineticFluidState) -> float:
    """The first-derivative level of CROSS_E0 (the alpha-sum restricted to |alpha| = 1)."""
    s = _Spectral(state)
    return _e0_core(s, _shell_weight(s.grid, 1))


# ---- conservation ---------------------------------------------------------------------


@dataclass(frozen=True)
class ConservationResiduals:
    mass_f: float
    mass_rho: float
    momentum: np.ndarray
    energy: float

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.mass_f, self.mass_rho], self.momentum, [self.energy]])

    def scalars(self) -> tuple:
        """(mass_f, mass_rho, |momentum|, energy)."""
        return self.mass_f, self.mass_rho, float(np.linalg.norm(self.momentum)), self.energy


def conservation_residuals(state: KineticFluidState) -> ConservationResiduals:
    """int a, int rho, int (b + (1+rho) u) and int [(1+rho)(theta + |u|^2/2) + (sqrt 6 / 2) omega]."""
    dv = state.grid.cell_volume
    axes = tuple(range(1, state.grid.dim + 1))
    rho = state.rho
    mom = np.sum(state.b + (1.0 + rho) * state.u, axis=axes) * dv
    energy = np.sum((1.0 + rho) * (state.theta + 0.5 * np.sum(state.u ** 2, axis=0))
                    + 0.5 * SQRT6 * state.omega) * dv
    return ConservationResiduals(mass_f=float(np.sum(state.a) * dv), mass_rho=float(np.sum(rho) * dv),
                                 momentum=mom, energy=float(energy))


def conservation_drift(states: Sequence[KineticFluidState]) -> np.ndarray:
    """max over components of |r(t) - r(0)| for each state, shape (len(states),)."""
    r0 = conservation_residuals(states[0]).as_array()
    return np.array([np.abs(conservation_residuals(s).as_array() - r0).max() for s in states])


# ---- rates and inequalities ----------------------------------------------------------


@dataclass(frozen=True)
class ExponentialFit:
    rate: float
    intercept: float
    residual: float


def fit_exponential(times, values) -> ExponentialFit:
    """Least-squares fit log(values) = intercept - rate * t.

    residual is the RMS deviation of log(values) from the fit, i.e. roughly
    the relative misfit.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.size < 2:
        raise ValueError("need at least two matching samples")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("exponential fit needs positive finite values")
    slope, icpt = np.polyfit(t, np.log(v), 1)
    res = np.log(v) - (icpt + slope * t)
    return ExponentialFit(rate=float(-slope), intercept=float(icpt), residual=float(np.sqrt(np.mean(res ** 2))))


def centered_derivative(times, values) -> np.ndarray:
    """Second-order centered differences on a possibly non-uniform grid (interior points)."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    return (h0 ** 2 * y[2:] - h1 ** 2 * y[:-2] + (h1 ** 2 - h0 ** 2) * y[1:-1]) / (h0 * h1 * (h0 + h1))


@dataclass(frozen=True)
class LyapunovReport:
    times: np.ndarray
    dEdt: np.ndarray
    D: np.ndarray
    ratios: np.ndarray
    lam: float

    @property
    def passed(self) -> bool:
        return self.lam > 0


def lyapunov_from_series(times, E, D) -> LyapunovReport:
    """Measured lambda = -max (dE/dt) / D over interior observation times."""
    t = np.asarray(times, dtype=float)
    E = np.asarray(E, dtype=float)
    D = np.asarray(D, dtype=float)
    if t.size < 3:
        raise ValueError("need at least three observation times")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    dE = centered_derivative(t, E)
    Di = D[1:-1]
    if np.all(E == 0) and np.all(D == 0):
        return LyapunovReport(t[1:-1], dE, Di, np.zeros_like(Di), math.inf)
    bad = (Di == 0) & (E[1:-1] != 0)
    if np.any(bad):
        raise ZeroDivisionError(f"dissipation vanishes at t={t[1:-1][bad][0]} while the energy does not")
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(Di > 0, dE / np.where(Di > 0, Di, 1.0), -np.inf)
    return LyapunovReport(t[1:-1], dE, Di, ratios, float(-np.max(ratios)))


def lyapunov_check(trajectory: Sequence[KineticFluidState], kind_E: FunctionalKind | str = "ENERGY_E",
                   kind_D: FunctionalKind | str = "DISSIPATION_D") -> LyapunovReport:
    times = [s.t for s in trajectory]
    E = [evaluate_functional(kind_E, s) for s in trajectory]
    D = [evaluate_functional(kind_D, s) for s in trajectory]
    return lyapunov_from_series(times, E, D)


@dataclass(frozen=True)
class InterpolationReport:
    p: float
    zeta: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs

    def holds(self, tol: float = 1e-10) -> bool:
        return self.ratio <= 1.0 + tol


def interpolation_check(field, p: float, grid: SpatialGrid) -> InterpolationReport:
    """||g||_p <= ||g||_2^zeta ||g||_6^(1-zeta), zeta = (6-p)/(2p), 2 <= p <= 6.

    Vector or kinetic collections (leading axes) use the pointwise Euclidean
    modulus, i.e. the L^p_x(l^2) norm.
    """
    if not 2 <= p <= 6:
        raise ValueError(f"p must lie in [2, 6], got {p}")
    zeta = (6.0 - p) / (2.0 * p)
    lhs = norm_Lp(field, p, grid)
    rhs = norm_Lp(field, 2, grid) ** zeta * norm_Lp(field, 6, grid) ** (1.0 - zeta)
    return InterpolationReport(p=float(p), zeta=zeta, lhs=lhs, rhs=rhs)


# ---- reports -------------------------------------------------------------------------


@dataclass
class FunctionalReport:
    """Time series of functionals along a run, with fits and conservation data."""

    times: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    conservation: list = field(default_factory=list)
    positivity: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    def add(self, t: float, values: dict, cons: np.ndarray | None = None, pos: float | None = None):
        if self.times and not t > self.times[-1]:
            raise ValueError("report times must be strictly increasing")
        self.times.append(float(t))
        for k, v in values.items():
            self.series.setdefault(k, []).append(float(v))
        if cons is not None:
            self.conservation.append(np.asarray(cons, dtype=float))
        if pos is not None:
            self.positivity.append(float(pos))

    def array(self, name) -> np.ndarray:
        return np.asarray(self.series[name])

    def fit(self, name, t_min=-math.inf, t_max=math.inf) -> ExponentialFit:
        t = np.asarray(self.times)
        sel = (t >= t_min) & (t <= t_max)
        res = fit_exponential(t[sel], self.array(name)[sel])
        self.fits[name] = res
        return res

    def envelope(self, name) -> np.ndarray | None:
        """exp(intercept - rate t) from the stored fit of `name`, or None."""
        f = self.fits.get(name)
        if f is None:
            return None
        return np.exp(f.intercept - f.rate * np.asarray(self.times))

    def conservation_drift(self) -> np.ndarray:
        c = np.asarray(self.conservation)
        return np.abs(c - c[0]).max(axis=1)


class FunctionalRecorder:
    """Observer for `run_simulation` that records functionals, conservation and positivity."""

    def __init__(self, kinds: Sequence[FunctionalKind | str] = ("ENERGY_E", "DISSIPATION_D", "HIGH_H", "HIGH_M"),
                 weights: EnergyWeights = EnergyWeights(), positivity: bool = True):
        self.kinds = [k if isinstance(k, FunctionalKind) else FunctionalKind(k, weights) for k in kinds]
        self.report = FunctionalReport()
        self.track_positivity = positivity

    def __call__(self, state: KineticFluidState) -> None:
        vals = {k.name: evaluate_functional(k, state) for k in self.kinds}
        cons = conservation_residuals(state).as_array()
        pos = positivity_min(state) if self.track_positivity else None
        self.report.add(state.t, vals, cons, pos)
