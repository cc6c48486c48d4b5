"""Whole-space decay of the linearized semigroup by continuous-k quadrature.

The solution of the linear problem with data U0(x) = g(x) D (spatial envelope
g times a constant state direction D) is, mode by mode,
U_hat(t, k) = exp(A(k) t) g_hat(k) D.  Spatial norms follow from Plancherel:
||d^m U(t)||^2 = (2 pi)^{-3} int |k|^{2m} |U_hat(t, k)|^2 dk, which is
discretized on a radial x angular product grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hermite import HermiteBasis, default_basis, macro_moments, reconstruct, _velocity_weights
from .linear_mode import ModeSource, evolve_series, fluid_slices, generator_matrix
from .params import PhysicalParams


class QuadratureError(RuntimeError):
    """The k-quadrature failed its refinement check."""


class OrthogonalityError(ValueError):
    """A source violates the required macroscopic orthogonality."""


# ---- quadrature --------------------------------------------------------------------


def lebedev26():
    """26-point octahedral rule on the unit sphere (exact for degree 7); weights sum to 4 pi."""
    pts, wts = [], []
    for i in range(3):
        for s in (1, -1):
            p = np.zeros(3)
            p[i] = s
            pts.append(p)
            wts.append(1.0 / 21.0)
    for i in range(3):
        for j in range(i + 1, 3):
            for si in (1, -1):
                for sj in (1, -1):
                    p = np.zeros(3)
                    p[i], p[j] = si / math.sqrt(2), sj / math.sqrt(2)
                    pts.append(p)
                    wts.append(4.0 / 105.0)
    for s1 in (1, -1):
        for s2 in (1, -1):
            for s3 in (1, -1):
                pts.append(np.array([s1, s2, s3]) / math.sqrt(3))
                wts.append(9.0 / 280.0)
    return np.array(pts), 4.0 * math.pi * np.array(wts)


def product_sphere_rule(n_theta: int):
    """Gauss-Legendre in cos(theta) times 2 n_theta uniform azimuths."""
    x, w = np.polynomial.legendre.leggauss(n_theta)
    n_phi = 2 * n_theta
    phi = 2 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    st = np.sqrt(1 - x * x)
    pts = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)), np.outer(x, np.ones(n_phi))], axis=-1)
    wts = np.outer(w, np.full(n_phi, 2 * math.pi / n_phi))
    return pts.reshape(-1, 3), wts.reshape(-1)


@dataclass(frozen=True)
class KQuadrature:
    """Product rule for int_{R^3} F(k) dk restricted to k_min <= |k| <= k_max.

    Radial nodes are log-spaced and integrated by the trapezoid rule in ln|k|
    (so the radial weight of node r is r^3 times the log step).  The angular
    rule is the 26-point octahedral set or a Gauss-Legendre product rule.
    """

    n_radial: int = 64
    k_min: float = 1e-3
    k_max: float = 20.0
    angular: str = "lebedev26"
    n_theta: int = 6
    r_cut: float = math.inf

    def __post_init__(self):
        if self.n_radial < 4 or not 0 < self.k_min < self.k_max:
            raise ValueError("need n_radial >= 4 and 0 < k_min < k_max")
        if self.angular not in ("lebedev26", "product"):
            raise ValueError(f"unknown angular rule {self.angular!r}")

    @property
    def radii(self) -> np.ndarray:
        return np.exp(np.linspace(math.log(self.k_min), math.log(self.k_max), self.n_radial))

    @property
    def radial_weights(self) -> np.ndarray:
        """Weights for int r^2 F(r) dr on [k_min, k_max]."""
        r = self.radii
        h = math.log(self.k_max / self.k_min) / (self.n_radial - 1)
        w = np.full(self.n_radial, h)
        w[0] = w[-1] = h / 2
        return np.where(r <= self.r_cut, w * r ** 3, 0.0)

    @property
    def directions(self):
        if self.angular == "lebedev26":
            return lebedev26()
        return product_sphere_rule(self.n_theta)

    def refined(self) -> KQuadrature:
        """Twice the radial density and a finer (product) angular rule."""
        return KQuadrature(2 * self.n_radial - 1, self.k_min, self.k_max, "product",
                           max(self.n_theta, 6) + 2, self.r_cut)

    def restricted(self, r_max: float) -> KQuadrature:
        """Same nodes with the weights beyond |k| = r_max dropped (low-frequency part)."""
        return KQuadrature(self.n_radial, self.k_min, self.k_max, self.angular, self.n_theta,
                           min(self.r_cut, r_max))


# ---- initial data -------------------------------------------------------------------


@dataclass(frozen=True)
class InitialProfile:
    """Isotropic Gaussian envelope exp(-|x|^2 / (2 sigma^2)) times a state direction.

    `direction` is a mode-state vector [f coefficients, rho, u, theta]; the
    default puts unit weight on psi_0, rho and theta.
    """

    sigma: float = 1.0
    direction: np.ndarray | None = None

    def state_direction(self, basis: HermiteBasis) -> np.ndarray:
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=complex)
            if d.size != basis.size + 5:
                raise ValueError("profile direction does not match the basis size")
            return d
        d = np.zeros(basis.size + 5, dtype=complex)
        ir, _, it = fluid_slices(basis)
        d[basis.i0] = d[ir] = d[it] = 1.0
        return d

    def envelope_hat(self, kabs):
        s2 = self.sigma ** 2
        return (2 * math.pi * s2) ** 1.5 * np.exp(-0.5 * s2 * np.asarray(kabs) ** 2)

    def envelope_norm_L1(self) -> float:
        return (2 * math.pi * self.sigma ** 2) ** 1.5

    def envelope_norm_L2(self) -> float:
        return (math.pi * self.sigma ** 2) ** 0.75


# ---- per-mode propagation ------------------------------------------------------------


class ModePropagator:
    """exp(A t) through an eigendecomposition, with an expm fallback.

    The eigenbasis is used when cond(V) <= cond_max; otherwise each request is
    delegated to scaling-and-squaring exponentials.
    """

    def __init__(self, A: np.ndarray, cond_max: float = 1e8):
        self.A = A
        lam, V = np.linalg.eig(A)
        cond = np.linalg.cond(V)
        self.ok = bool(np.isfinite(cond) and cond <= cond_max)
        if self.ok:
            self.lam, self.V, self.Vinv = lam, V, np.linalg.inv(V)

    def unforced(self, U0, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if not self.ok:
            return _expm_series(self.A, U0, times)
        c = self.Vinv @ U0
        return (self.V @ (np.exp(np.outer(self.lam, times)) * c[:, None])).T

    def windowed(self, S, t_on, t_off, times) -> np.ndarray:
        """int_0^t exp(A (t-s)) S 1[t_on <= s < t_off] ds at each time (zero data)."""
        times = np.asarray(times, dtype=float)
        if not self.ok:
            src = ModeSource(vector=S, t_on=t_on, t_off=t_off)
            return _expm_series(self.A, np.zeros_like(S), times, src)
        c = self.Vinv @ S
        out = np.zeros((len(times), S.size), dtype=complex)
        for j, t in enumerate(times):
            b = min(t, t_off)
            if b <= t_on:
                continue
            span = b - t_on
            x = self.lam * span
            with np.errstate(invalid="ignore", divide="ignore"):
                phi = np.where(np.abs(x) > 1e-12, np.expm1(x) / np.where(x == 0, 1, x), 1.0 + 0.5 * x) * span
            phi = phi * np.exp(self.lam * (t - b))
            out[j] = self.V @ (phi * c)
        return out


def _expm_series(A, U0, times, source=None):
    class _G:
        matrix = A

    return evolve_series(_G, U0, times, source)


def _mode_norms(quad: KQuadrature, params: PhysicalParams, basis: HermiteBasis, builder, times):
    """sum over quadrature nodes of w |U_hat(t,k)|^2 with U_hat from `builder(prop, k, |k|)`.

    Returns an array (n_radial, len(times)) of angular-integrated squared norms
    (angular weights applied, radial weights not yet applied).
    """
    dirs, wdir = quad.directions
    out = np.zeros((quad.n_radial, len(times)))
    active = quad.radial_weights > 0
    for i, r in enumerate(quad.radii):
        if not active[i]:
            continue
        acc = np.zeros(len(times))
        for d, w in zip(dirs, wdir):
            k = r * d
            prop = ModePropagator(generator_matrix(k, params, basis))
            U = builder(prop, k, r)
            acc += w * np.sum(np.abs(U) ** 2, axis=1)
        out[i] = acc
    return out


def synthesize_norm_table(profile: InitialProfile, times, orders=(0, 1, 2), quad: KQuadrature = KQuadrature(),
                          params: PhysicalParams = PhysicalParams(), basis: HermiteBasis | None = None) -> np.ndarray:
    """||grad^m A(t) U0||_{L^2} for every time (rows) and derivative order (columns)."""
    basis = basis or default_basis()
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    if any(m not in (0, 1, 2) for m in orders):
        raise ValueError("derivative orders must be 0, 1 or 2")
    D = profile.state_direction(basis)

    def builder(prop, k, r):
        return prop.unforced(profile.envelope_hat(r) * D, times)

    shells = _mode_norms(quad, params, basis, builder, times)
    w = quad.radial_weights
    table = np.empty((len(times), len(orders)))
    for j, m in enumerate(orders):
        table[:, j] = np.sqrt(np.sum((w * quad.radii ** (2 * m))[:, None] * shells, axis=0) / (2 * math.pi) ** 3)
    return table


def synthesize_linear_norm(profile: InitialProfile, t: float, m: int, quad: KQuadrature = KQuadrature(),
                           params: PhysicalParams = PhysicalParams(), basis: HermiteBasis | None = None,
                           refinement_tol: float | None = None) -> float:
    """||grad^m A(t) U0||_{L^2}; optionally cross-checked against a refined quadrature."""
    val = float(synthesize_norm_table(profile, [t], (m,), quad, params, basis)[0, 0])
    if refinement_tol is not None:
        fine = float(synthesize_norm_table(profile, [t], (m,), quad.refined(), params, basis)[0, 0])
        if abs(fine - val) > refinement_tol * abs(fine):
            raise QuadratureError(f"quadrature unresolved at t={t}: {val:.6e} vs refined {fine:.6e}")
    return val


# ---- fits ------------------------------------------------------------------------------


@dataclass
class PowerLawFit:
    """log(values) ~ intercept + exponent * log(1 + t); residual is the max |log deviation|."""

    exponent: float
    intercept: float
    residual: float


def fit_power_law(times, values) -> PowerLawFit:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 8 or times.size != values.size:
        raise ValueError("need at least 8 matching samples")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be increasing")
    if np.any(~(values > 0)):
        raise ValueError("values must be positive")
    x = np.log1p(times)
    y = np.log(values)
    slope, icpt = np.polyfit(x, y, 1)
    return PowerLawFit(float(slope), float(icpt), float(np.max(np.abs(y - (icpt + slope * x)))))


def window_exponents(times, values, windows):
    """Fitted exponents over each (t_lo, t_hi) window (samples inside, inclusive)."""
    times = np.asarray(times)
    values = np.asarray(values)
    out = []
    for lo, hi in windows:
        sel = (times >= lo) & (times <= hi)
        x = np.log1p(times[sel])
        y = np.log(values[sel])
        out.append(float(np.polyfit(x, y, 1)[0]))
    return out


# ---- forced (Duhamel) bound --------------------------------------------------------------


@dataclass(frozen=True)
class DuhamelSource:
    """Source div_v G - v.G/2 + h with G_i, h given as Hermite coefficient vectors.

    The spatial envelope is the profile's Gaussian; in time the source is
    switched on for t in [t_on, t_off).
    """

    G: np.ndarray
    h: np.ndarray
    t_on: float = 0.0
    t_off: float = math.inf

    def check_orthogonality(self, basis: HermiteBasis, tol: float = 1e-12):
        for i in range(3):
            m = macro_moments(self.G[i], basis, upsilon=False)
            if abs(m.a) > tol or np.max(np.abs(m.b)) > tol:
                raise OrthogonalityError(f"G_{i + 1} has a component along psi_0 or v psi_0")
        m = macro_moments(self.h, basis, upsilon=False)
        if abs(m.a) > tol or np.max(np.abs(m.b)) > tol or abs(m.omega) > tol:
            raise OrthogonalityError("h has a macroscopic component")

    def kinetic_vector(self, basis: HermiteBasis) -> np.ndarray:
        """Hermite coefficients of -sum_i RAISE_i G_i + h (exact: G, h must leave the top shell empty)."""
        out = np.asarray(self.h, dtype=complex).copy()
        for i in range(3):
            out -= basis.raise_ops[i] @ np.asarray(self.G[i], dtype=complex)
        return out

    def velocity_norm2(self, basis: HermiteBasis) -> float:
        """|G|^2_{L^2_v} + |nu^{-1/2} h|^2_{L^2_v}."""
        g2 = float(np.sum(np.abs(self.G) ** 2))
        w = _velocity_weights(basis)
        nu = 1.0 + np.sum(basis.velocity_nodes ** 2, axis=1)
        hv = reconstruct(np.asarray(self.h), basis)
        return g2 + float(np.sum(w * np.abs(hv) ** 2 / nu))


@dataclass
class DuhamelReport:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray = field(repr=False)
    max_ratio: float = 0.0
    late_trend: float = 0.0

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.ratio)) and self.late_trend <= 0.05)


def _window_integral(t, a, b, e):
    """int_a^{min(t,b)} (1 + t - s)^{-e} ds."""
    hi = min(t, b)
    if hi <= a:
        return 0.0
    lo_tau, hi_tau = t - hi, t - a
    if abs(e - 1.0) < 1e-14:
        return math.log1p(hi_tau) - math.log1p(lo_tau)
    return ((1 + hi_tau) ** (1 - e) - (1 + lo_tau) ** (1 - e)) / (1 - e)


def forced_response_norms(profile: InitialProfile, source: DuhamelSource, times, m: int = 0,
                          quad: KQuadrature = KQuadrature(), params: PhysicalParams = PhysicalParams(),
                          basis: HermiteBasis | None = None) -> np.ndarray:
    """||grad^m int_0^t A(t-s) (S(s), 0, 0, 0) ds||_{L^2} at each time."""
    basis = basis or default_basis()
    times = np.atleast_1d(np.asarray(times, dtype=float))
    S = np.zeros(basis.size + 5, dtype=complex)
    S[:basis.size] = source.kinetic_vector(basis)

    def builder(prop, k, r):
        return prop.windowed(profile.envelope_hat(r) * S, source.t_on, source.t_off, times)

    shells = _mode_norms(quad, params, basis, builder, times)
    w = quad.radial_weights * quad.radii ** (2 * m)
    return np.sqrt(np.sum(w[:, None] * shells, axis=0) / (2 * math.pi) ** 3)


def verify_duhamel_bound(profile: InitialProfile, source: DuhamelSource, t_grid, q: float = 2.0, m: int = 0,
                         quad: KQuadrature = KQuadrature(), params: PhysicalParams = PhysicalParams(),
                         basis: HermiteBasis | None = None) -> DuhamelReport:
    """Compare the squared forced response with the convolution bound.

    Left side: ||grad^m int_0^t A(t-s) S(s) ds||^2.  Right side:
    int_0^t (1+t-s)^{-3(1/q-1/2)-m} (||(G, nu^{-1/2} h)||_{Z_q}^2 + ||grad^m (G, nu^{-1/2} h)||_{Z_2}^2) ds.
    The ratio left/right is reported; it must stay bounded in t.
    """
    basis = basis or default_basis()
    if not 1 <= q <= 2:
        raise ValueError("q must lie in [1, 2]")
    source.check_orthogonality(basis)
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    lhs = forced_response_norms(profile, source, t_grid, m, quad, params, basis) ** 2
    vel = source.velocity_norm2(basis)
    if q == 1:
        env_q = profile.envelope_norm_L1()
    else:
        # ||g||_{L^q} of the Gaussian envelope
        s2 = profile.sigma ** 2
        env_q = (2 * math.pi * s2 / q) ** (1.5 / q)
    # ||grad^m g||_{L^2}^2 for the Gaussian: (2pi)^-3 int |k|^{2m} |g_hat|^2 dk in closed form
    s2 = profile.sigma ** 2
    grad_m2 = (math.pi * s2) ** 1.5 * math.gamma(1.5 + m) / math.gamma(1.5) / s2 ** m
    density = vel * (env_q ** 2 + grad_m2)
    e = 3 * (1 / q - 0.5) + m
    rhs = np.array([density * _window_integral(t, source.t_on, source.t_off, e) for t in t_grid])
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1), 0.0)
    late = t_grid >= t_grid[len(t_grid) // 2]
    trend = 0.0
    if np.count_nonzero(late & (ratio > 0)) >= 2:
        sel = late & (ratio > 0)
        trend = float(np.polyfit(np.log1p(t_grid[sel]), np.log(ratio[sel]), 1)[0])
    return DuhamelReport(times=t_grid, lhs=lhs, rhs=rhs, ratio=ratio,
                         max_ratio=float(np.max(ratio)) if ratio.size else 0.0, late_trend=trend)
