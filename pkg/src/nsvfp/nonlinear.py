"""Nonlinear kinetic-fluid perturbation dynamics on the periodic box.

State layout: Hermite coefficients f[alpha, x], density rho[x], velocity
u[3, x] (always three components) and temperature theta[x].  Only the first
`grid.dim` velocity components see spatial transport.  Internally the state
is stacked as one array [f..., rho, u1, u2, u3, theta] in the same order as
the per-mode generator of `linear_mode`, so the linear part of the dynamics
at wavenumber k is exactly A(k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import CFLError, IntegrationError, NonFiniteError, VacuumError
from .fourier import SpatialGrid
from .hermite import SQRT2, SQRT3, SQRT6, HermiteBasis, default_basis, kinetic_linear_terms, reconstruct
from .linear_mode import fluid_slices, generator_matrix
from .params import PhysicalParams

__all__ = [
    "KineticFluidState",
    "StepperConfig",
    "PhysicalParams",
    "Trajectory",
    "PicardReport",
    "compute_rhs",
    "linear_rhs",
    "step_imex",
    "run_simulation",
    "picard_step",
    "picard_sweep",
    "picard_iterations",
    "positivity_min",
    "admissible_data",
    "max_transport_speed",
]


# ---- state ---------------------------------------------------------------------------


@dataclass
class KineticFluidState:
    """Perturbation (f, rho, u, theta) on a periodic grid at time t."""

    f: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    grid: SpatialGrid
    basis: HermiteBasis
    t: float = 0.0

    def __post_init__(self):
        shp = self.grid.shape
        self.f = np.asarray(self.f, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.f.shape != (self.basis.size, *shp):
            raise ValueError(f"f has shape {self.f.shape}, expected {(self.basis.size, *shp)}")
        if self.rho.shape != shp or self.theta.shape != shp or self.u.shape != (3, *shp):
            raise ValueError("fluid fields do not match the grid")

    @classmethod
    def zeros(cls, grid: SpatialGrid, basis: HermiteBasis | None = None, t: float = 0.0):
        basis = basis or default_basis()
        return cls(f=grid.zeros(basis.size), rho=grid.zeros(), u=grid.zeros(3), theta=grid.zeros(),
                   grid=grid, basis=basis, t=t)

    @classmethod
    def from_stacked(cls, Y, grid: SpatialGrid, basis: HermiteBasis, t: float = 0.0):
        n = basis.size
        Y = np.asarray(Y, dtype=float)
        return cls(f=Y[:n].copy(), rho=Y[n].copy(), u=Y[n + 1:n + 4].copy(), theta=Y[n + 4].copy(),
                   grid=grid, basis=basis, t=t)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.f, self.rho[None], self.u, self.theta[None]])

    def copy(self) -> KineticFluidState:
        return KineticFluidState.from_stacked(self.stacked(), self.grid, self.basis, self.t)

    def scaled(self, c: float) -> KineticFluidState:
        return KineticFluidState.from_stacked(c * self.stacked(), self.grid, self.basis, self.t)

    @property
    def a(self):
        return self.f[self.basis.i0]

    @property
    def b(self):
        return self.f[self.basis.i1]

    @property
    def omega(self):
        return self.f[self.basis.i2].sum(axis=0) / SQRT3

    def check(self, vacuum_min: float = 0.1) -> None:
        Y = self.stacked()
        if not np.all(np.isfinite(Y)):
            raise NonFiniteError(f"non-finite state at t={self.t}")
        m = float(np.min(1.0 + self.rho))
        if m < vacuum_min:
            raise VacuumError(f"min(1 + rho) = {m:.3g} < {vacuum_min} at t={self.t}")


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 0.02
    scheme: str = "imex2"
    dealias: bool = True
    cfl_safety: float = 1.0
    vacuum_min: float = 0.1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in ("imex1", "imex2"):
            raise ValueError(f"scheme must be 'imex1' or 'imex2', got {self.scheme!r}")
        if not self.cfl_safety > 0:
            raise ValueError("CFL safety factor must be positive")
        if not 0 < self.vacuum_min < 1:
            raise ValueError("vacuum threshold must lie in (0, 1)")


# ---- spectral helpers ----------------------------------------------------------------


@lru_cache(maxsize=32)
def _symbols(grid: SpatialGrid):
    """(i k_j with Nyquist zeroed for j < dim, -|k|^2)."""
    ik = []
    for j in range(grid.dim):
        kj = np.where(np.abs(grid.k_index[j]) == grid.n // 2, 0.0, grid.k[j])
        ik.append(1j * kj)
    return np.array(ik), -grid.k2


def _fft(Y, grid):
    return np.fft.fftn(Y, axes=tuple(range(-grid.dim, 0)))


def _ifft(Yh, grid):
    return np.real(np.fft.ifftn(Yh, axes=tuple(range(-grid.dim, 0))))


def _active(grid: SpatialGrid, dealias: bool) -> np.ndarray:
    return grid.dealias_mask if dealias else ~grid.nyquist


def _project(Y, grid, dealias):
    return _ifft(np.where(_active(grid, dealias), _fft(Y, grid), 0.0), grid)


@lru_cache(maxsize=16)
def _mode_generators(grid: SpatialGrid, basis: HermiteBasis, params: PhysicalParams, dealias: bool):
    """A(k) for every active mode, shape (m, n+5, n+5), and the active-mode mask."""
    mask = _active(grid, dealias)
    ks = np.stack([kk[mask] for kk in grid.k], axis=-1)
    ks = np.pad(ks, ((0, 0), (0, 3 - grid.dim)))
    A = np.stack([generator_matrix(k, params, basis) for k in ks])
    return A, mask


@lru_cache(maxsize=16)
def _implicit_inverse(grid, basis, params, dealias, h):
    """(I - h A(k))^{-1} on every active mode."""
    A, _ = _mode_generators(grid, basis, params, dealias)
    eye = np.eye(A.shape[1])
    return np.linalg.inv(eye[None] - h * A)


def _apply_modes(M, Yh_active):
    return np.matmul(M, Yh_active.T[:, :, None])[:, :, 0].T


def max_transport_speed(basis: HermiteBasis) -> float:
    """Largest eigenvalue of the truncated multiplication-by-v_1 operator."""
    x = np.polynomial.hermite_e.hermeroots([0] * (basis.N + 1) + [1])
    return float(np.max(np.abs(x)))


# ---- right-hand side -----------------------------------------------------------------


def _split(Y, basis):
    n = basis.size
    return Y[:n], Y[n], Y[n + 1:n + 4], Y[n + 4]


def _fluid_derivatives(Y, grid, basis):
    """Spatial first derivatives of every component and the fluid second-order terms."""
    ik, mk2 = _symbols(grid)
    Yh = _fft(Y, grid)
    d = grid.dim
    dY = np.stack([_ifft(ik[j] * Yh, grid) for j in range(d)])
    n = basis.size
    uh = Yh[n + 1:n + 4]
    lap_u = _ifft(mk2 * uh, grid)
    lap_theta = _ifft(mk2 * Yh[n + 4], grid)
    divu_h = sum(ik[j] * uh[j] for j in range(d))
    grad_div = np.zeros((3, *grid.shape))
    for j in range(d):
        grad_div[j] = _ifft(ik[j] * divu_h, grid)
    return dY, lap_u, lap_theta, grad_div


def _grad3(dfield, d):
    """Pad a (d, ...) stack of derivatives to three components."""
    out = np.zeros((3, *dfield.shape[1:]))
    out[:d] = dfield
    return out


def _strain_sq(du, d):
    """|D(u)|^2 with D(u) = (grad u + grad u^T)/2; du[j, i] = d_j u_i."""
    g = np.zeros((3, 3, *du.shape[2:]))
    g[:d] = du
    s = 0.5 * (g + g.transpose(1, 0, *range(2, g.ndim)))
    return np.sum(s * s, axis=(0, 1))


def _rhs_stacked(Y, grid: SpatialGrid, basis: HermiteBasis, params: PhysicalParams) -> np.ndarray:
    n, d = basis.size, grid.dim
    f, rho, u, theta = _split(Y, basis)
    dY, lap_u, lap_theta, grad_div = _fluid_derivatives(Y, grid, basis)
    df = dY[:, :n]
    drho = _grad3(dY[:, n], d)
    du = dY[:, n + 1:n + 4]  # du[j, i] = d_j u_i
    dtheta = _grad3(dY[:, n + 4], d)
    divu = sum(du[j, j] for j in range(d))
    a = f[basis.i0]
    b = f[basis.i1]
    omega = f[basis.i2].sum(axis=0) / SQRT3
    inv = 1.0 / (1.0 + rho)

    out = np.empty_like(Y)
    # kinetic: -v.grad_x f + L f + u.RAISE(f + psi_0) + theta D(f + psi_0)
    ft = kinetic_linear_terms(f, u, theta, basis)
    ft += basis.collision_diag.reshape((-1,) + (1,) * d) * f
    for j in range(d):
        ft -= np.tensordot(basis.mult_ops[j], df[j], axes=(1, 0))
    out[:n] = ft
    # continuity
    adv = lambda g: sum(u[j] * g[j] for j in range(d))  # noqa: E731
    out[n] = -adv(drho) - (1.0 + rho) * divu
    # momentum
    for i in range(3):
        ui_grad = du[:, i]
        out[n + 1 + i] = (
            -adv(ui_grad)
            - (1.0 + theta) * inv * drho[i]
            - dtheta[i]
            + inv * (params.mu1 * lap_u[i] + (params.mu1 + params.mu2) * grad_div[i])
            + inv * (b[i] - u[i] * (1.0 + a))
        )
    # temperature
    usq = np.sum(u * u, axis=0)
    ub = np.sum(u * b, axis=0)
    exch = SQRT6 * omega - 3.0 * theta
    heat = (params.kappa * lap_theta + usq - 2.0 * ub + a * usq - 3.0 * a * theta
            + 2.0 * params.mu1 * _strain_sq(du, d) + params.mu2 * divu * divu)
    out[n + 4] = -adv(_grad3(dY[:, n + 4], d)) - theta * divu - divu + exch + inv * heat - rho * inv * exch
    return out


def compute_rhs(state: KineticFluidState, params: PhysicalParams = PhysicalParams(),
                dealias: bool = True, vacuum_min: float = 0.1) -> KineticFluidState:
    """Full nonlinear tendency d/dt (f, rho, u, theta).

    With `dealias` the state is 2/3-truncated before the pointwise products and
    the tendency is truncated again.
    """
    state.check(vacuum_min)
    grid, basis = state.grid, state.basis
    Y = state.stacked()
    if dealias:
        Y = _project(Y, grid, True)
    out = _rhs_stacked(Y, grid, basis, params)
    out = _project(out, grid, dealias)
    return KineticFluidState.from_stacked(out, grid, basis, state.t)


def linear_rhs(state: KineticFluidState, params: PhysicalParams = PhysicalParams(),
               dealias: bool = True) -> KineticFluidState:
    """The linearization A(k) applied mode by mode."""
    grid, basis = state.grid, state.basis
    A, mask = _mode_generators(grid, basis, params, dealias)
    Yh = _fft(state.stacked(), grid)
    out = np.zeros_like(Yh)
    out[:, mask] = _apply_modes(A, Yh[:, mask])
    return KineticFluidState.from_stacked(_ifft(out, grid), grid, basis, state.t)


# ---- IMEX stepping -------------------------------------------------------------------


def cfl_number(state: KineticFluidState, dt: float) -> float:
    speed = max_transport_speed(state.basis) + float(np.max(np.abs(state.u[:state.grid.dim]), initial=0.0))
    return speed * dt * state.grid.dim / state.grid.dx


def _nonlinear_hat(Y, grid, basis, params, A, mask, vacuum_min):
    """Fourier coefficients of RHS(Y) - A Y on the active modes."""
    if np.min(1.0 + Y[basis.size]) < vacuum_min:
        raise VacuumError(f"min(1 + rho) = {np.min(1.0 + Y[basis.size]):.3g} < {vacuum_min}")
    Yh = _fft(Y, grid)[:, mask]
    R = _fft(_rhs_stacked(Y, grid, basis, params), grid)[:, mask]
    return R - _apply_modes(A, Yh), Yh


def _from_active(Zh, grid, mask):
    full = np.zeros((Zh.shape[0], *grid.shape), dtype=complex)
    full[:, mask] = Zh
    return _ifft(full, grid)


def step_imex(state: KineticFluidState, config: StepperConfig = StepperConfig(),
              params: PhysicalParams = PhysicalParams()) -> KineticFluidState:
    """One step of size config.dt.

    The whole linearization A(k) (transport, collisions, exchange, viscosity,
    heat conduction) is treated implicitly mode by mode; the remainder
    RHS - A U is explicit.  imex1 is backward/forward Euler, imex2 the
    stiffly accurate ARS(2,2,2) scheme.
    """
    state.check(config.vacuum_min)
    c = cfl_number(state, config.dt)
    if c > config.cfl_safety:
        raise CFLError(f"CFL number {c:.3g} exceeds {config.cfl_safety}")
    grid, basis, dt = state.grid, state.basis, config.dt
    A, mask = _mode_generators(grid, basis, params, config.dealias)
    Y0 = state.stacked()
    if config.dealias:
        Y0 = _project(Y0, grid, True)
    vm = config.vacuum_min
    N1, Y0h = _nonlinear_hat(Y0, grid, basis, params, A, mask, vm)
    if config.scheme == "imex1":
        Minv = _implicit_inverse(grid, basis, params, config.dealias, dt)
        Yh = _apply_modes(Minv, Y0h + dt * N1)
    else:
        gam = 1.0 - 1.0 / SQRT2
        delta = 1.0 - 1.0 / (2.0 * gam)
        Minv = _implicit_inverse(grid, basis, params, config.dealias, gam * dt)
        Y2h = _apply_modes(Minv, Y0h + gam * dt * N1)
        Y2 = _from_active(Y2h, grid, mask)
        N2, _ = _nonlinear_hat(Y2, grid, basis, params, A, mask, vm)
        rhs = Y0h + dt * (delta * N1 + (1.0 - delta) * N2 + (1.0 - gam) * _apply_modes(A, Y2h))
        Yh = _apply_modes(Minv, rhs)
    out = KineticFluidState.from_stacked(_from_active(Yh, grid, mask), grid, basis, state.t + dt)
    try:
        out.check(vm)
    except NonFiniteError as exc:
        raise IntegrationError(str(exc)) from exc
    return out


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    final: KineticFluidState | None = None
    n_steps: int = 0


def run_simulation(initial: KineticFluidState, T_final: float, config: StepperConfig = StepperConfig(),
                   params: PhysicalParams = PhysicalParams(),
                   observers: Sequence[Callable[[KineticFluidState], None]] = (),
                   observe_every: float | None = None, keep_states: bool = False) -> Trajectory:
    """Advance to T_final, calling each observer at t=0, every `observe_every` and at the end.

    The step is shortened uniformly so an integer number of steps reaches
    T_final exactly.  Observers receive copies.
    """
    if T_final < 0:
        raise ValueError("T_final must be non-negative")
    initial.check(config.vacuum_min)
    n_steps = max(1, math.ceil(T_final / config.dt - 1e-9)) if T_final > 0 else 0
    cfg = replace(config, dt=T_final / n_steps) if n_steps else config
    every = n_steps if not observe_every else max(1, round(observe_every / cfg.dt))
    traj = Trajectory()

    def observe(s):
        snap = s.copy()
        traj.times.append(s.t)
        if keep_states:
            traj.states.append(snap)
        for obs in observers:
            obs(snap.copy() if keep_states else snap)

    state = initial.copy()
    if cfg.dealias:
        state = KineticFluidState.from_stacked(_project(state.stacked(), state.grid, True),
                                               state.grid, state.basis, state.t)
    observe(state)
    t0 = state.t
    for i in range(1, n_steps + 1):
        state = step_imex(state, cfg, params)
        state.t = t0 + i * cfg.dt
        if i % every == 0 or i == n_steps:
            observe(state)
    traj.final = state
    traj.n_steps = n_steps
    return traj


# ---- Picard iteration ----------------------------------------------------------------


def _frozen_rhs(X, P, grid, basis, params):
    """Linear-in-X part of the frozen-coefficient scheme, coefficients from P."""
    n, d = basis.size, grid.dim
    f, rho, u, theta = _split(X, basis)
    fp, rp, up, tp = _split(P, basis)
    dX, lap_u, lap_theta, grad_div = _fluid_derivatives(X, grid, basis)
    dP = np.stack([_ifft(s * _fft(P[n + 1:n + 4], grid), grid) for s in _symbols(grid)[0]])
    divup = sum(dP[j, j] for j in range(d))
    inv = 1.0 / (1.0 + rp)
    ap = fp[basis.i0]
    out = np.empty_like(X)
    ft = basis.collision_diag.reshape((-1,) + (1,) * d) * f
    for i in range(3):
        ft += up[i] * np.tensordot(basis.raise_ops[i], f, axes=(1, 0))
    ft += tp * np.tensordot(basis.laplace_op, f, axes=(1, 0))
    for j in range(d):
        ft -= np.tensordot(basis.mult_ops[j], dX[j, :n], axes=(1, 0))
    out[:n] = ft
    adv = lambda g: sum(up[j] * g[j] for j in range(d))  # noqa: E731
    drho = _grad3(dX[:, n], d)
    du = dX[:, n + 1:n + 4]
    dtheta = _grad3(dX[:, n + 4], d)
    divu = sum(du[j, j] for j in range(d))
    b = f[basis.i1]
    omega = f[basis.i2].sum(axis=0) / SQRT3
    out[n] = -adv(drho) - (1.0 + rp) * divu
    for i in range(3):
        out[n + 1 + i] = (
            inv * (params.mu1 * lap_u[i] + (params.mu1 + params.mu2) * grad_div[i])
            - adv(du[:, i]) - dtheta[i] - (1.0 + tp) * inv * drho[i]
            + inv * (b[i] - u[i] - u[i] * ap)
        )
    out[n + 4] = (inv * params.kappa * lap_theta - adv(dtheta) - theta * divup
                  + inv * (SQRT6 * omega - 3.0 * theta) - divu)
    return out


def _frozen_source(P, grid, basis, params):
    n, d = basis.size, grid.dim
    fp, rp, up, tp = _split(P, basis)
    dP = np.stack([_ifft(s * _fft(up, grid), grid) for s in _symbols(grid)[0]])
    divup = sum(dP[j, j] for j in range(d))
    ap, bp = fp[basis.i0], fp[basis.i1]
    out = np.zeros_like(P)
    out[basis.i1] = up
    out[basis.i2] = SQRT2 * tp
    usq = np.sum(up * up, axis=0)
    out[n + 4] = (usq - 2.0 * np.sum(up * bp, axis=0) + ap * usq - 3.0 * ap * tp
                  + 2.0 * params.mu1 * _strain_sq(dP, d) + params.mu2 * divup * divup) / (1.0 + rp)
    return out


@lru_cache(maxsize=8)
def _picard_preconditioner(grid, basis, params, h):
    """(I - h A0(k))^{-1} with A0 = A(k) minus the lagged kinetic sources."""
    A, mask = _mode_generators(grid, basis, params, True)
    A0 = A.copy()
    _, iu, it = fluid_slices(basis)
    A0[:, :basis.size, iu] = 0.0
    A0[:, :basis.size, it] = 0.0
    return np.linalg.inv(np.eye(A.shape[1])[None] - h * A0), mask


def picard_step(previous: KineticFluidState, iterate: KineticFluidState, dt: float,
                params: PhysicalParams = PhysicalParams(), tol: float = 1e-13,
                vacuum_min: float = 0.1) -> KineticFluidState:
    """One backward-Euler step of the frozen-coefficient linear scheme.

    `iterate` is the new-level unknown at time t; `previous` supplies the
    coefficients (rho, u, theta, a, b) of the old level at t + dt.  Kinetic
    sources u.v sqrt(M) and theta (|v|^2-3) sqrt(M) and the quadratic heating
    terms are lagged; everything else acts on the unknown.  Returns the
    new-level state at t + dt.  The linear system is solved by GMRES
    preconditioned with the exact constant-coefficient inverse.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid, basis = iterate.grid, iterate.basis
    if previous.grid != grid or previous.basis != basis:
        raise ValueError("previous and iterate live on different grids")
    previous.check(vacuum_min)
    P = _project(previous.stacked(), grid, True)
    X0 = _project(iterate.stacked(), grid, True)
    rhs = X0 + dt * _project(_frozen_source(P, grid, basis, params), grid, True)
    Minv, mask = _picard_preconditioner(grid, basis, params, dt)
    shape = X0.shape

    def matvec(x):
        X = x.reshape(shape)
        return (X - dt * _project(_frozen_rhs(X, P, grid, basis, params), grid, True)).ravel()

    def precond(x):
        Xh = _fft(x.reshape(shape), grid)
        out = np.zeros_like(Xh)
        out[:, mask] = _apply_modes(Minv, Xh[:, mask])
        return _ifft(out, grid).ravel()

    size = X0.size
    op = LinearOperator((size, size), matvec=matvec, dtype=float)
    pre = LinearOperator((size, size), matvec=precond, dtype=float)
    x0 = precond(rhs.ravel())
    sol, info = gmres(op, rhs.ravel(), x0=x0, M=pre, rtol=tol, atol=0.0, restart=50, maxiter=20)
    if info != 0:
        raise IntegrationError(f"Picard linear solve did not converge (info={info})")
    return KineticFluidState.from_stacked(sol.reshape(shape), grid, basis, iterate.t + dt)


def picard_sweep(previous: Sequence[KineticFluidState], initial: KineticFluidState, dt: float,
                 params: PhysicalParams = PhysicalParams()) -> list:
    """Next Picard iterate as a trajectory on the time levels of `previous`."""
    out = [initial.copy()]
    for j in range(1, len(previous)):
        out.append(picard_step(previous[j], out[-1], dt, params))
    return out


def _h1_grid(Y, grid):
    Yh = _fft(Y, grid) * grid.cell_volume
    w = 1.0 + grid.k2
    return float(np.sqrt(np.sum(w * np.abs(Yh) ** 2) / grid.volume))


@dataclass
class PicardReport:
    differences: np.ndarray
    ratios: np.ndarray
    iterates: list

    @property
    def contracting(self) -> bool:
        r = self.ratios
        return bool(np.all(r < 1.0) and np.all(np.diff(r) < 0))


def picard_iterations(initial: KineticFluidState, n_iter: int = 5, n_steps: int = 100, dt: float = 1e-2,
                      params: PhysicalParams = PhysicalParams()) -> PicardReport:
    """Run n_iter sweeps starting from the constant-in-time trajectory of the data.

    differences[n] = sup_t ||X^{n+1}(t) - X^n(t)||_{H^1}; ratios are successive
    quotients of the differences.
    """
    prev = [initial.copy() for _ in range(n_steps + 1)]
    for j, s in enumerate(prev):
        s.t = initial.t + j * dt
    iterates = [prev]
    diffs = []
    for _ in range(n_iter + 1):
        nxt = picard_sweep(prev, initial, dt, params)
        diffs.append(max(_h1_grid(a.stacked() - b.stacked(), initial.grid) for a, b in zip(nxt, prev)))
        iterates.append(nxt)
        prev = nxt
    d = np.array(diffs)
    return PicardReport(differences=d, ratios=d[1:] / d[:-1], iterates=iterates)


# ---- positivity and data -------------------------------------------------------------


def positivity_min(state: KineticFluidState, velocities: np.ndarray | None = None) -> float:
    """min over grid points and velocity samples of F = M + sqrt(M) f.

    Default samples are the Gauss-Hermite nodes of the basis.
    """
    basis = state.basis
    if velocities is None:
        v = basis.velocity_nodes
        vals = reconstruct(state.f, basis)
    else:
        from .hermite import eval_basis

        v = np.atleast_2d(np.asarray(velocities, dtype=float))
        phi = np.array([[eval_basis(a, vv, basis) for a in basis.indices] for vv in v])
        vals = np.tensordot(phi, state.f, axes=(1, 0))
    v2 = np.sum(v * v, axis=1)
    sqrtM = (2.0 * np.pi) ** -0.75 * np.exp(-0.25 * v2)
    sqrtM = sqrtM.reshape((-1,) + (1,) * state.grid.dim)
    return float(np.min(sqrtM * sqrtM + sqrtM * vals))


def _smooth_field(rng, grid, n_modes):
    """Random real trigonometric polynomial with wavenumbers |m_j| <= n_modes, max modulus ~1."""
    out = np.zeros(grid.shape)
    ranges = [range(-n_modes, n_modes + 1)] * grid.dim
    for m in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(grid.dim, -1).T:
        if not np.any(m):
            continue
        phase = sum(m[j] * grid.x[j] for j in range(grid.dim)) / grid.L
        w = 1.0 / (1.0 + float(m @ m))
        out += w * (rng.standard_normal() * np.cos(phase) + rng.standard_normal() * np.sin(phase))
    s = np.abs(out).max()
    return out / s if s > 0 else out


def admissible_data(grid: SpatialGrid, basis: HermiteBasis | None = None, amplitude: float = 1e-2,
                    seed: int = 0, n_modes: int = 2, max_degree: int = 2) -> KineticFluidState:
    """Smooth random data of the given amplitude with all four conserved integrals zero.

    The mean of a and rho is removed, then b and omega receive constant shifts
    that cancel the momentum and energy integrals exactly (up to roundoff).
    Kinetic data stop at Hermite degree `max_degree`; higher degrees make
    F = M + sqrt(M) f negative at the outer quadrature nodes.
    """
    basis = basis or default_basis()
    rng = np.random.default_rng(seed)
    f = grid.zeros(basis.size)
    for i, deg in enumerate(basis.degree):
        if deg <= max_degree:
            f[i] = amplitude * 0.5 ** deg * _smooth_field(rng, grid, n_modes)
    rho = amplitude * _smooth_field(rng, grid, n_modes)
    u = np.stack([amplitude * _smooth_field(rng, grid, n_modes) for _ in range(3)])
    theta = amplitude * _smooth_field(rng, grid, n_modes)
    f[basis.i0] -= f[basis.i0].mean()
    rho -= rho.mean()
    mom = np.mean(f[basis.i1] + (1.0 + rho) * u, axis=tuple(range(1, grid.dim + 1)))
    f[basis.i1] -= mom.reshape((3,) + (1,) * grid.dim)
    omega = f[basis.i2].sum(axis=0) / SQRT3
    energy = np.mean((1.0 + rho) * (theta + 0.5 * np.sum(u * u, axis=0)) + 0.5 * SQRT6 * omega)
    # omega -> omega - delta needs c_{2e_i} -> c_{2e_i} - delta / sqrt(3)
    f[basis.i2] -= (2.0 / SQRT6) * energy / SQRT3
    return KineticFluidState(f=f, rho=rho, u=u, theta=theta, grid=grid, basis=basis)
