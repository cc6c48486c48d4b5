"""Per-wavenumber linearized kinetic-fluid dynamics.

For a plane wave exp(i k.x) the linearized system becomes a linear ODE
dU/dt = A(k) U on the state U = (f_hat, rho_hat, u_hat, theta_hat), with f_hat
expanded in the Hermite basis.  Coordinates are ordered as
[Hermite coefficients..., rho, u1, u2, u3, theta].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import IntegrationError, NotPositiveDefiniteError, TruncationError
from .hermite import SQRT2, SQRT6, HermiteBasis, macro_moments
from .params import PhysicalParams


def fluid_slices(basis: HermiteBasis):
    """Indices (rho, u[0:3], theta) of the fluid coordinates."""
    n = basis.size
    return n, np.arange(n + 1, n + 4), n + 4


@dataclass
class ModeState:
    """Fourier amplitude of the full perturbation at wavenumber k."""

    k: np.ndarray
    f: np.ndarray
    rho: complex
    u: np.ndarray
    theta: complex

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=float).reshape(3)
        self.f = np.asarray(self.f, dtype=complex)
        self.u = np.asarray(self.u, dtype=complex).reshape(3)
        self.rho = complex(self.rho)
        self.theta = complex(self.theta)
        if not (np.all(np.isfinite(self.f)) and np.all(np.isfinite(self.u))
                and np.isfinite(self.rho) and np.isfinite(self.theta)):
            raise ValueError("mode state has non-finite entries")

    @property
    def dim(self) -> int:
        return self.f.size + 5

    def vector(self) -> np.ndarray:
        return np.concatenate([self.f, [self.rho], self.u, [self.theta]])

    @classmethod
    def from_vector(cls, k, U) -> ModeState:
        U = np.asarray(U, dtype=complex)
        n = U.size - 5
        return cls(k=k, f=U[:n], rho=U[n], u=U[n + 1:n + 4], theta=U[n + 4])

    @classmethod
    def zeros(cls, k, basis: HermiteBasis) -> ModeState:
        return cls(k=k, f=np.zeros(basis.size, complex), rho=0, u=np.zeros(3), theta=0)


@dataclass(frozen=True)
class ModeGenerator:
    k: np.ndarray
    matrix: np.ndarray
    params: PhysicalParams
    basis: HermiteBasis

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def generator_matrix(k, params: PhysicalParams, basis: HermiteBasis) -> np.ndarray:
    k = np.asarray(k, dtype=float).reshape(3)
    n = basis.size
    ir, iu, it = fluid_slices(basis)
    A = np.zeros((n + 5, n + 5), dtype=complex)
    # kinetic block: -i k.v f + L f
    A[:n, :n] = -1j * np.tensordot(k, basis.mult_ops, axes=(0, 0))
    A[np.arange(n), np.arange(n)] += basis.collision_diag
    # sources u.v sqrt(M) and theta (|v|^2 - 3) sqrt(M)
    A[basis.i1, iu] += 1.0
    A[basis.i2, it] += SQRT2
    # continuity
    A[ir, iu] = -1j * k
    # momentum: viscosity, pressure (theta + rho), exchange b - u
    k2 = float(k @ k)
    mu1, mu2 = params.mu1, params.mu2
    A[np.ix_(iu, iu)] = -mu1 * k2 * np.eye(3) - (mu1 + mu2) * np.outer(k, k) - np.eye(3)
    A[iu, ir] = -1j * k
    A[iu, it] = -1j * k
    A[iu, basis.i1] += 1.0
    # temperature: conduction, compression, exchange sqrt(6) omega - 3 theta
    A[it, it] = -params.kappa * k2 - 3.0
    A[it, iu] = -1j * k
    A[it, basis.i2] += SQRT2
    return A


def assemble_generator(k, params: PhysicalParams | None = None, basis: HermiteBasis | None = None) -> ModeGenerator:
    """Generator A(k) of the linearized mode system."""
    from .hermite import default_basis

    params = params or PhysicalParams()
    basis = basis or default_basis()
    if basis.N < 3:
        raise TruncationError("the mode system needs N >= 3")
    k = np.asarray(k, dtype=float).reshape(3)
    return ModeGenerator(k=k, matrix=generator_matrix(k, params, basis), params=params, basis=basis)


# ---- evolution ---------------------------------------------------------------


@dataclass(frozen=True)
class ModeSource:
    """Forcing S(t) for the mode system.

    Either a constant vector switched on for t in [t_on, t_off), or an
    arbitrary callable t -> vector.
    """

    vector: np.ndarray | None = None
    t_on: float = 0.0
    t_off: float = math.inf
    func: Callable[[float], np.ndarray] | None = None

    def __call__(self, t):
        if self.func is not None:
            return np.asarray(self.func(t), dtype=complex)
        on = self.t_on <= t < self.t_off
        return np.asarray(self.vector, dtype=complex) * on

    @property
    def piecewise_constant(self) -> bool:
        return self.func is None


def _as_vector(state):
    return state.vector() if isinstance(state, ModeState) else np.asarray(state, dtype=complex)


def _expm_forced(A, U, S, dt):
    """exp(A dt) U + int_0^dt exp(A s) S ds via one augmented exponential."""
    n = A.shape[0]
    aug = np.zeros((n + 1, n + 1), dtype=complex)
    aug[:n, :n] = A * dt
    aug[:n, n] = S * dt
    E = sla.expm(aug)
    return E[:n, :n] @ U + E[:n, n]


def evolve_series(gen: ModeGenerator, state0, times, source: ModeSource | None = None,
                  *, rtol: float = 1e-10, atol: float = 1e-14, method: str = "auto") -> np.ndarray:
    """States at the given (non-decreasing, non-negative) times, shape (len(times), dim).

    method="auto" uses matrix exponentials for unforced and piecewise-constant
    forcing and an implicit Radau integrator for general forcing;
    method="rk" forces an explicit adaptive Runge-Kutta integration.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    U0 = _as_vector(state0)
    A = gen.matrix
    if method == "rk" or (method == "auto" and source is not None and not source.piecewise_constant):
        return _evolve_ivp(A, U0, times, source, rtol, atol, "DOP853" if method == "rk" else "Radau")
    if method not in ("auto", "expm"):
        raise ValueError(f"unknown method {method!r}")
    out = np.empty((len(times), U0.size), dtype=complex)
    if source is None:
        return _evolve_unforced(A, U0, times, out)
    # piecewise constant source: step through the switching instants
    t, U = 0.0, U0.copy()
    breaks = sorted({b for b in (source.t_on, source.t_off) if 0 < b < math.inf})
    for j, tj in enumerate(times):
        for b in [b for b in breaks if t < b <= tj] + [tj]:
            if b > t:
                S = source.vector * (source.t_on <= t < source.t_off)
                U = _expm_forced(A, U, np.asarray(S, complex), b - t) if np.any(S) else sla.expm(A * (b - t)) @ U
                t = b
        out[j] = U
    return out


def _evolve_unforced(A, U0, times, out):
    t_prev, U = 0.0, U0.copy()
    cache = {}
    for j, tj in enumerate(times):
        dt = tj - t_prev
        if dt > 0:
            key = round(dt, 14)
            if key not in cache:
                cache[key] = sla.expm(A * dt)
            U = cache[key] @ U
        out[j] = U
        t_prev = tj
    return out


def _evolve_ivp(A, U0, times, source, rtol, atol, method):
    """Integrate the real form [Re U, Im U] with scipy's adaptive solvers."""
    if times[-1] == 0:
        return np.tile(U0, (len(times), 1))
    n = A.shape[0]
    Ar = np.block([[A.real, -A.imag], [A.imag, A.real]])

    def rhs(t, y):
        dy = Ar @ y
        if source is not None:
            s = source(t)
            dy = dy + np.concatenate([s.real, s.imag])
        return dy

    y0 = np.concatenate([U0.real, U0.imag])
    kw = {"jac": Ar} if method == "Radau" else {}
    sol = solve_ivp(rhs, (0.0, times[-1]), y0, method=method, t_eval=times, rtol=rtol, atol=atol, **kw)
    if not sol.success:
        raise IntegrationError(f"mode integration failed: {sol.message}")
    return (sol.y[:n] + 1j * sol.y[n:]).T


def evolve_mode(gen: ModeGenerator, state0, t: float, source: ModeSource | None = None, **kw):
    """Solve dU/dt = A U + S up to time t; returns a ModeState when given one."""
    if t < 0:
        raise ValueError("t must be non-negative")
    U = evolve_series(gen, state0, [t], source, **kw)[0]
    if isinstance(state0, ModeState):
        return ModeState.from_vector(state0.k, U)
    return U


# ---- Lyapunov functional -------------------------------------------------------


@dataclass(frozen=True)
class LyapunovWeights:
    kappa1: float = 0.01
    kappa2: float = 0.01
    kappa3: float = 0.01

    def __post_init__(self):
        for name in ("kappa1", "kappa2", "kappa3"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")


def _pair(x, y):
    """(x | y) = sum x conj(y)."""
    return np.sum(np.asarray(x) * np.conj(np.asarray(y)))


def _micro_f(f, basis):
    g = np.array(f, dtype=complex, copy=True)
    g[basis.i0] = 0
    g[basis.i1] = 0
    g[basis.i2] -= g[basis.i2].mean()
    return g


def cross_term_E1(k, f, basis: HermiteBasis, kappa1: float) -> complex:
    """The kinetic cross functional of a mode (complex; E_M uses its real part)."""
    k = np.asarray(k, dtype=float)
    mac = macro_moments(f, basis)
    mic = macro_moments(_micro_f(f, basis), basis)
    a, b, omega = mac.a, mac.b, mac.omega
    total = 0j
    for i in range(3):
        for j in range(3):
            total += _pair(1j * k[i] * b[j] + 1j * k[j] * b[i], mic.Gamma[i, j])
    for i in range(3):
        total += _pair(1j * k[i] * omega, mic.Upsilon[i])
    total += kappa1 * _pair(a, 1j * (SQRT6 / 5.0) * np.dot(k, mic.Upsilon) - 1j * np.dot(k, b))
    return total / (1.0 + k @ k)


def mode_lyapunov_EM(state: ModeState, weights: LyapunovWeights = LyapunovWeights(),
                     basis: HermiteBasis | None = None) -> float:
    """E_M = |U|^2 + kappa2 Re E1 + kappa3 Re(u | i k rho) / (1 + |k|^2)."""
    from .hermite import default_basis

    if basis is None:
        basis = default_basis(_truncation_for_size(state.f.size))
    check_weights(weights, basis)
    k = state.k
    plain = float(np.sum(np.abs(state.f) ** 2) + abs(state.rho) ** 2
                  + np.sum(np.abs(state.u) ** 2) + abs(state.theta) ** 2)
    e1 = cross_term_E1(k, state.f, basis, weights.kappa1)
    e3 = _pair(state.u, 1j * k * state.rho) / (1.0 + k @ k)
    return plain + weights.kappa2 * float(np.real(e1)) + weights.kappa3 * float(np.real(e3))


@lru_cache(maxsize=None)
def _truncation_for_size(n):
    N = 0
    while math.comb(N + 3, 3) < n:
        N += 1
    if math.comb(N + 3, 3) != n:
        raise TruncationError(f"{n} is not the size of a total-degree Hermite basis")
    return N


def _moment_rows(basis: HermiteBasis):
    """Rows r with moment(c) = r @ c for Gamma_ij and Upsilon_i."""
    m = macro_moments(np.eye(basis.size), basis)
    return m.Gamma, m.Upsilon


@lru_cache(maxsize=512)
def _cross_matrix(kt, weights: LyapunovWeights, basis: HermiteBasis) -> np.ndarray:
    """C(k) with (cross terms of E_M) = Re(U^H C U)."""
    k = np.array(kt)
    n = basis.size
    dim = n + 5
    ir, iu, _ = fluid_slices(basis)
    eye = np.eye(dim, dtype=complex)
    micro = np.zeros((n, dim))
    micro[:, :n] = np.eye(n) - basis.macro_matrix
    gam, ups = _moment_rows(basis)
    gamma_rows = np.tensordot(gam, micro, axes=(2, 0))
    ups_rows = ups @ micro
    a_row = eye[basis.i0]
    b_rows = eye[basis.i1]
    om_row = eye[basis.i2].sum(axis=0) / math.sqrt(3.0)
    C = np.zeros((dim, dim), dtype=complex)

    def add(x_row, y_row, w):
        # w (x | y) with x = X.U, y = Y.U equals U^H [w conj(Y) X^T] U
        C[:, :] += w * np.outer(np.conj(y_row), x_row)

    w2 = weights.kappa2 / (1.0 + k @ k)
    for i in range(3):
        for j in range(3):
            add(1j * k[i] * b_rows[j] + 1j * k[j] * b_rows[i], gamma_rows[i, j], w2)
        add(1j * k[i] * om_row, ups_rows[i], w2)
    y = 1j * (SQRT6 / 5.0) * (k @ ups_rows) - 1j * (k @ b_rows)
    add(a_row, y, w2 * weights.kappa1)
    for j in range(3):
        add(eye[iu[j]], 1j * k[j] * eye[ir], weights.kappa3 / (1.0 + k @ k))
    return C


def lyapunov_matrix(k, weights: LyapunovWeights, basis: HermiteBasis) -> np.ndarray:
    """Hermitian H(k) with E_M(U) = U^H H U."""
    C = _cross_matrix(tuple(float(x) for x in np.asarray(k).reshape(3)), weights, basis)
    return np.eye(C.shape[0]) + 0.5 * (C + C.conj().T)


_CHECKED: dict = {}


def check_weights(weights: LyapunovWeights, basis: HermiteBasis, n_radii: int = 13, n_dirs: int = 6) -> float:
    """Smallest eigenvalue of H(k) over a sample of wavenumbers; raises if not positive.

    Results are cached per (weights, basis).
    """
    key = (weights, basis)
    if key in _CHECKED:
        return _CHECKED[key]
    rng = np.random.default_rng(12345)
    dirs = rng.standard_normal((n_dirs, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    lam = math.inf
    for r in np.logspace(-3, 3, n_radii):
        for d in dirs:
            lam = min(lam, float(np.linalg.eigvalsh(lyapunov_matrix(r * d, weights, basis))[0]))
    if not lam > 0:
        raise NotPositiveDefiniteError(f"E_M weights {weights} give a form with min eigenvalue {lam:.3e}")
    _CHECKED[key] = lam
    return lam


def lyapunov_series(gen: ModeGenerator, states: np.ndarray, weights: LyapunovWeights) -> np.ndarray:
    """E_M along an array of state vectors (rows)."""
    check_weights(weights, gen.basis)
    H = lyapunov_matrix(gen.k, weights, gen.basis)
    states = np.atleast_2d(states)
    return np.real(np.einsum("ti,ij,tj->t", states.conj(), H, states))


@dataclass
class ModeDecayFit:
    """Fit of E_M(t) <= E_M(0) exp(-c s) with s = |k|^2 t / (1 + |k|^2).

    c: envelope rate in s; rate_t: the equivalent exponential rate in t;
    residual: max over samples of E_M / (E_M(0) e^{-c s}) - 1, clipped at 0.
    """

    c: float
    rate_t: float
    residual: float
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def fit_mode_decay(gen: ModeGenerator, state0, t_grid, weights: LyapunovWeights = LyapunovWeights()) -> ModeDecayFit:
    """Least-squares envelope rate of E_M along the unforced evolution."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 8 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing with at least 8 points")
    k2 = float(gen.k @ gen.k)
    if k2 == 0:
        raise ValueError("the envelope variable |k|^2 t/(1+|k|^2) vanishes at k = 0")
    U0 = _as_vector(state0)
    times = np.concatenate([[0.0], t_grid]) if t_grid[0] > 0 else t_grid
    states = evolve_series(gen, U0, times)
    E = lyapunov_series(gen, states, weights)
    if not E[0] > 0:
        raise ValueError("E_M(0) = 0: nothing to fit")
    s = k2 * times / (1.0 + k2)
    y = np.log(np.maximum(E / E[0], np.finfo(float).tiny))
    c = float(-np.dot(s, y) / np.dot(s, s))
    resid = float(max(0.0, np.max(E / (E[0] * np.exp(-c * s)) - 1.0)))
    return ModeDecayFit(c=c, rate_t=c * k2 / (1.0 + k2), residual=resid, times=times, values=E)
