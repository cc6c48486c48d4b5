"""Periodic spatial grids, spectral transforms and norms.

A field on a grid is a numpy array whose last `d` axes are the spatial axes;
leading axes (vector components, Hermite indices) are carried along.  The
forward transform approximates g_hat(k) = int exp(-i x.k) g(x) dx over the
box, so Plancherel reads int |g|^2 dx = |box|^{-1} sum_k |g_hat(k)|^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NonFiniteError


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on [0, 2 pi L)^dim with n points per axis."""

    dim: int = 1
    n: int = 64
    L: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"points per axis must be even and >= 8, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"box scale L must be positive, got {self.L}")

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def period(self) -> float:
        return 2.0 * math.pi * self.L

    @property
    def dx(self) -> float:
        return self.period / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @property
    def volume(self) -> float:
        return self.period ** self.dim

    @cached_property
    def x(self):
        """Coordinate arrays, one per axis, each of full grid shape."""
        x1 = np.arange(self.n) * self.dx
        return np.meshgrid(*([x1] * self.dim), indexing="ij")

    @cached_property
    def k(self):
        """Wavenumber arrays (integers / L), one per axis, each of full grid shape."""
        k1 = np.fft.fftfreq(self.n, 1.0 / self.n) / self.L
        return np.meshgrid(*([k1] * self.dim), indexing="ij")

    @cached_property
    def k_index(self):
        """Integer mode numbers per axis in FFT ordering."""
        m = np.fft.fftfreq(self.n, 1.0 / self.n).astype(int)
        return np.meshgrid(*([m] * self.dim), indexing="ij")

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(kk ** 2 for kk in self.k)

    @cached_property
    def nyquist(self) -> np.ndarray:
        """True on modes sitting on the Nyquist plane of any axis."""
        return np.any([np.abs(m) == self.n // 2 for m in self.k_index], axis=0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: |m_j| <= K with 3K < n on every axis."""
        K = -(-self.n // 3) - 1
        return np.all([np.abs(m) <= K for m in self.k_index], axis=0)

    def zeros(self, *leading, dtype=float):
        return np.zeros((*leading, *self.shape), dtype=dtype)

    def check(self, field):
        field = np.asarray(field)
        if field.shape[field.ndim - self.dim:] != self.shape:
            raise ValueError(f"field shape {field.shape} does not end with grid shape {self.shape}")
        return field


def _axes(grid):
    return tuple(range(-grid.dim, 0))


def transform(field, grid: SpatialGrid, direction: str = "forward") -> np.ndarray:
    """Forward: samples -> g_hat(k).  Inverse: g_hat(k) -> samples (complex)."""
    field = grid.check(field)
    if direction == "forward":
        return np.fft.fftn(field, axes=_axes(grid)) * grid.cell_volume
    if direction == "inverse":
        return np.fft.ifftn(field, axes=_axes(grid)) / grid.cell_volume
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def to_real(field, grid: SpatialGrid) -> np.ndarray:
    """Inverse transform returning the real part (for conjugate-symmetric data)."""
    return np.real(transform(field, grid, "inverse"))


def derivative_symbol(multi_index, grid: SpatialGrid) -> np.ndarray:
    """prod_j (i k_j)^{alpha_j}; odd derivatives vanish on the Nyquist plane."""
    alpha = tuple(int(a) for a in multi_index)
    if len(alpha) != grid.dim or min(alpha, default=0) < 0:
        raise ValueError(f"multi-index {alpha} does not match grid dimension {grid.dim}")
    if sum(alpha) > 3:
        raise ValueError(f"derivative order {sum(alpha)} exceeds 3")
    sym = np.ones(grid.shape, dtype=complex)
    for j, a in enumerate(alpha):
        if a:
            kj = grid.k[j].astype(complex)
            if a % 2:
                kj = np.where(np.abs(grid.k_index[j]) == grid.n // 2, 0.0, kj)
            sym = sym * (1j * kj) ** a
    return sym


def derivative(field, multi_index, grid: SpatialGrid) -> np.ndarray:
    """Spectral derivative d^alpha of real samples."""
    field = grid.check(field)
    ghat = np.fft.fftn(field, axes=_axes(grid))
    out = np.fft.ifftn(ghat * derivative_symbol(multi_index, grid), axes=_axes(grid))
    return np.real(out) if np.isrealobj(field) else out


def gradient(field, grid: SpatialGrid) -> np.ndarray:
    """Stack of first derivatives along a new leading axis of length dim."""
    eye = np.eye(grid.dim, dtype=int)
    return np.stack([derivative(field, e, grid) for e in eye])


def multi_indices(order: int, dim: int):
    """All spatial multi-indices of exactly the given order."""
    out = []

    def rec(prefix, left, slots):
        if slots == 1:
            out.append(tuple(prefix + [left]))
            return
        for a in range(left, -1, -1):
            rec(prefix + [a], left - a, slots - 1)

    rec([], order, dim)
    return out


@dataclass(frozen=True)
class FrequencySplitSpec:
    """Sharp low/high cutoff: low keeps |k| <= r0/2, high keeps |k| > r0/2."""

    r0: float
    mode: str = "sharp"

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError("cutoff radius must be positive")
        if self.mode != "sharp":
            raise ValueError(f"only the sharp cutoff is implemented, got {self.mode!r}")


def low_mask(spec: FrequencySplitSpec, grid: SpatialGrid) -> np.ndarray:
    return np.sqrt(grid.k2) <= 0.5 * spec.r0


def frequency_split(field, spec: FrequencySplitSpec, grid: SpatialGrid):
    """Return (low, high) with low + high == field."""
    field = grid.check(field)
    ghat = np.fft.fftn(field, axes=_axes(grid))
    low = np.fft.ifftn(np.where(low_mask(spec, grid), ghat, 0.0), axes=_axes(grid))
    if np.isrealobj(field):
        low = np.real(low)
    return low, field - low


def _pointwise_modulus(field, grid):
    field = np.asarray(field)
    if field.ndim == grid.dim:
        return np.abs(field)
    lead = tuple(range(field.ndim - grid.dim))
    return np.sqrt(np.sum(np.abs(field) ** 2, axis=lead))


def norm_Lp(field, p, grid: SpatialGrid) -> float:
    """L^p norm over the box by the periodic trapezoid rule.

    Vector-valued fields (extra leading axes) use the pointwise Euclidean modulus.
    """
    field = grid.check(field)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    g = _pointwise_modulus(field, grid)
    if np.isinf(p):
        return float(g.max())
    return float((np.sum(g ** p) * grid.cell_volume) ** (1.0 / p))


def norm_Zq(f_coeffs, fluid, q, grid: SpatialGrid, fluid_exponent: float = 1.0) -> float:
    """Mixed norm ||f||_{L^2_v(L^q_x)} + ||(rho, u, theta)||_{L^r_x}.

    f_coeffs has the Hermite index on axis 0, so the velocity L^2 norm becomes
    an l^2 sum over coefficients.  `fluid` is an array with components on the
    leading axis (or None).  The fluid exponent r defaults to 1.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    total = 0.0
    if f_coeffs is not None:
        f_coeffs = grid.check(f_coeffs)
        per = [norm_Lp(f_coeffs[i], q, grid) for i in range(f_coeffs.shape[0])]
        total += math.sqrt(sum(v * v for v in per))
    if fluid is not None:
        total += norm_Lp(fluid, fluid_exponent, grid)
    return total


def dealias(field, grid: SpatialGrid) -> np.ndarray:
    """Zero every Fourier coefficient outside the 2/3-rule mask."""
    field = grid.check(field)
    ghat = np.fft.fftn(field, axes=_axes(grid))
    out = np.fft.ifftn(np.where(grid.dealias_mask, ghat, 0.0), axes=_axes(grid))
    return np.real(out) if np.isrealobj(field) else out


def dealias_product(a, b, grid: SpatialGrid) -> np.ndarray:
    """Pointwise product of the 2/3-truncated factors, truncated again.

    With both factors restricted to |m| <= K, 3K < n, the product's aliased
    images land outside the mask, so the result equals the exact convolution
    restricted to the retained modes.
    """
    a = grid.check(a)
    b = grid.check(b)
    if a.shape[a.ndim - grid.dim:] != b.shape[b.ndim - grid.dim:]:
        raise ValueError("grid mismatch between factors")
    out = dealias(dealias(a, grid) * dealias(b, grid), grid)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("non-finite product")
    return out


def sobolev_shells(field, grid: SpatialGrid, orders=(0, 1, 2)) -> dict:
    """sum_{|alpha| = m} ||d^alpha g||^2 for each order m, summed over leading axes.

    The sum runs over multi-indices, so a mixed derivative such as d1 d2 is
    counted once (unlike the full tensor norm ||grad^m g||^2).
    """
    field = grid.check(field)
    ghat = np.fft.fftn(field, axes=_axes(grid)) * grid.cell_volume
    power = np.abs(ghat) ** 2
    lead = tuple(range(power.ndim - grid.dim))
    if lead:
        power = power.sum(axis=lead)
    out = {}
    for m in orders:
        weight = np.zeros(grid.shape)
        for alpha in multi_indices(m, grid.dim):
            w = np.ones(grid.shape)
            for j, a in enumerate(alpha):
                if a:
                    kj = grid.k[j]
                    if a % 2:
                        kj = np.where(np.abs(grid.k_index[j]) == grid.n // 2, 0.0, kj)
                    w = w * kj ** (2 * a)
            weight += w
        out[m] = float(np.sum(weight * power) / grid.volume)
    return out


def gradient_tensor_norm(field, grid: SpatialGrid, order: int) -> float:
    """||grad^m g||_{L^2}, the full tensor norm: sum over ordered index tuples, i.e. |k|^{2m}."""
    field = grid.check(field)
    ghat = np.fft.fftn(field, axes=_axes(grid)) * grid.cell_volume
    power = np.abs(ghat) ** 2
    lead = tuple(range(power.ndim - grid.dim))
    if lead:
        power = power.sum(axis=lead)
    k2 = grid.k2
    if order % 2:
        k2 = np.where(grid.nyquist, 0.0, k2)
    return float(np.sqrt(np.sum(k2 ** order * power) / grid.volume))
