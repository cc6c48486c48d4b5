"""Weighted Hermite velocity basis and the velocity-side operators.

Functions of v in R^3 are expanded as f(v) = sum_a c_a psi_a(v) with

    psi_a(v) = prod_i He_{a_i}(v_i) / sqrt(a_i!) * sqrt(M(v)),
    M(v) = (2 pi)^{-3/2} exp(-|v|^2 / 2),

over all multi-indices with total degree |a| <= N.  In this basis the
linearized Fokker-Planck operator is diagonal with eigenvalue -|a|, and the
macroscopic projections onto sqrt(M), v sqrt(M) and (|v|^2 - 3) sqrt(M) live
in the degree shells 0, 1 and 2.

Coefficient arrays carry the Hermite index on axis 0; any trailing axes
(spatial grid points, time samples, ...) are broadcast through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial import hermite_e

from .errors import NonFiniteError, TruncationError

LADDER_KINDS = ("MULT_V", "D_V", "LOWER", "RAISE")

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT6 = math.sqrt(6.0)


def _multi_indices(N):
    """All 3D multi-indices with |a| <= N, graded by degree."""
    out = []
    for deg in range(N + 1):
        for a1 in range(deg, -1, -1):
            for a2 in range(deg - a1, -1, -1):
                out.append((a1, a2, deg - a1 - a2))
    return out


class HermiteBasis:
    """Total-degree truncated Hermite basis with a tensor Gauss-Hermite rule.

    N is the maximal total degree and Q the number of quadrature nodes per
    velocity axis (defaults to N + 4).
    """

    def __init__(self, N: int = 8, Q: int | None = None):
        N = int(N)
        if N < 2:
            raise TruncationError(f"truncation N={N} must be >= 2")
        Q = N + 4 if Q is None else int(Q)
        if Q < N + 4:
            raise TruncationError(f"quadrature order Q={Q} must be >= N+4={N + 4}")
        self.N = N
        self.Q = Q
        self.indices = np.array(_multi_indices(N), dtype=int)
        self._lookup = {tuple(a): i for i, a in enumerate(map(tuple, self.indices))}
        self.degree = self.indices.sum(axis=1)

    def __repr__(self):
        return f"HermiteBasis(N={self.N}, Q={self.Q})"

    def __eq__(self, other):
        return isinstance(other, HermiteBasis) and (self.N, self.Q) == (other.N, other.Q)

    def __hash__(self):
        return hash((self.N, self.Q))

    @property
    def size(self) -> int:
        return len(self.indices)

    def index(self, alpha) -> int:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != 3 or min(alpha) < 0:
            raise TruncationError(f"invalid multi-index {alpha}")
        try:
            return self._lookup[alpha]
        except KeyError:
            raise TruncationError(f"multi-index {alpha} exceeds truncation N={self.N}") from None

    def has(self, alpha) -> bool:
        return tuple(alpha) in self._lookup

    def unit(self, alpha, dtype=float) -> np.ndarray:
        c = np.zeros(self.size, dtype=dtype)
        c[self.index(alpha)] = 1.0
        return c

    def zeros(self, *trailing, dtype=float) -> np.ndarray:
        return np.zeros((self.size, *trailing), dtype=dtype)

    def shell(self, deg: int) -> np.ndarray:
        return np.flatnonzero(self.degree == deg)

    def extended(self, extra: int) -> HermiteBasis:
        """Basis with truncation N + extra (quadrature grown to match)."""
        return _basis(self.N + extra, max(self.Q + extra, self.N + extra + 4))

    def embed(self, c, target: HermiteBasis) -> np.ndarray:
        """Copy coefficients into another basis; modes absent there are dropped."""
        c = np.asarray(c)
        out = np.zeros((target.size, *c.shape[1:]), dtype=c.dtype)
        src, dst = _embedding(self, target)
        out[dst] = c[src]
        return out

    # ---- quadrature ------------------------------------------------------

    @cached_property
    def nodes_1d(self):
        """Gauss-Hermite nodes and weights for the weight exp(-v^2/2)."""
        x, w = hermite_e.hermegauss(self.Q)
        return x, w

    @cached_property
    def velocity_nodes(self) -> np.ndarray:
        """Tensor grid of velocity nodes, shape (Q^3, 3)."""
        x, _ = self.nodes_1d
        grid = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
        return grid.reshape(-1, 3)

    @cached_property
    def _phi_1d(self) -> np.ndarray:
        """phi_n(x_j) = He_n(x_j) e^{-x_j^2/4} (2 pi)^{-1/4} / sqrt(n!), shape (N+1, Q)."""
        x, _ = self.nodes_1d
        out = np.empty((self.N + 1, self.Q))
        out[0] = 1.0
        if self.N >= 1:
            out[1] = x
        for n in range(1, self.N):
            out[n + 1] = x * out[n] - n * out[n - 1]
        norms = np.sqrt([math.factorial(n) for n in range(self.N + 1)])
        return out / norms[:, None] * np.exp(-x * x / 4.0) * (2.0 * np.pi) ** -0.25

    @cached_property
    def synthesis(self) -> np.ndarray:
        """Matrix S with f(v_nodes) = S @ c, shape (Q^3, size)."""
        p = self._phi_1d
        a = self.indices
        s = p[a[:, 0]][:, :, None, None] * p[a[:, 1]][:, None, :, None] * p[a[:, 2]][:, None, None, :]
        return s.reshape(self.size, -1).T.copy()

    @cached_property
    def analysis(self) -> np.ndarray:
        """Matrix A with c = A @ f(v_nodes): Gauss-Hermite projection, shape (size, Q^3)."""
        x, w = self.nodes_1d
        w1 = w * np.exp(x * x / 2.0)
        w3 = (w1[:, None, None] * w1[None, :, None] * w1[None, None, :]).reshape(-1)
        return (self.synthesis * w3[:, None]).T.copy()

    # ---- operator matrices -----------------------------------------------

    @cached_property
    def raise_ops(self) -> np.ndarray:
        """RAISE_i: psi_a -> sqrt(a_i+1) psi_{a+e_i}, Galerkin-truncated; shape (3, n, n)."""
        ops = np.zeros((3, self.size, self.size))
        for j, a in enumerate(self.indices):
            for i in range(3):
                b = a.copy()
                b[i] += 1
                if b.sum() <= self.N:
                    ops[i, self._lookup[tuple(b)], j] = math.sqrt(a[i] + 1)
        return ops

    @cached_property
    def lower_ops(self) -> np.ndarray:
        """LOWER_i: psi_a -> sqrt(a_i) psi_{a-e_i}; the transpose of RAISE_i."""
        return np.ascontiguousarray(self.raise_ops.transpose(0, 2, 1))

    @cached_property
    def mult_ops(self) -> np.ndarray:
        """Multiplication by v_i."""
        return self.lower_ops + self.raise_ops

    @cached_property
    def dv_ops(self) -> np.ndarray:
        """Velocity derivative d/dv_i."""
        return 0.5 * (self.lower_ops - self.raise_ops)

    @cached_property
    def laplace_op(self) -> np.ndarray:
        """D = sum_i RAISE_i^2, i.e. f -> Delta_v(sqrt(M) f) / sqrt(M)."""
        r = self.raise_ops
        return sum(r[i] @ r[i] for i in range(3))

    @cached_property
    def collision_diag(self) -> np.ndarray:
        return -self.degree.astype(float)

    def ladder(self, kind: str) -> np.ndarray:
        try:
            return {
                "MULT_V": self.mult_ops,
                "D_V": self.dv_ops,
                "LOWER": self.lower_ops,
                "RAISE": self.raise_ops,
            }[kind]
        except KeyError:
            raise ValueError(f"unknown ladder kind {kind!r}; expected one of {LADDER_KINDS}") from None

    # ---- macro indices -----------------------------------------------------

    @cached_property
    def i0(self) -> int:
        return self.index((0, 0, 0))

    @cached_property
    def i1(self) -> np.ndarray:
        return np.array([self.index(e) for e in np.eye(3, dtype=int)])

    @cached_property
    def i2(self) -> np.ndarray:
        return np.array([self.index(2 * e) for e in np.eye(3, dtype=int)])

    @cached_property
    def macro_matrix(self) -> np.ndarray:
        """Orthogonal projector P onto span{psi_0, psi_{e_i}, sum_i psi_{2e_i}}."""
        p = np.zeros((self.size, self.size))
        p[self.i0, self.i0] = 1.0
        p[self.i1, self.i1] = 1.0
        p[np.ix_(self.i2, self.i2)] = 1.0 / 3.0
        return p


@lru_cache(maxsize=None)
def _basis(N, Q):
    return HermiteBasis(N, Q)


@lru_cache(maxsize=None)
def _embedding(src: HermiteBasis, dst: HermiteBasis):
    s, d = [], []
    for i, a in enumerate(map(tuple, src.indices)):
        j = dst._lookup.get(a)
        if j is not None:
            s.append(i)
            d.append(j)
    return np.array(s, dtype=int), np.array(d, dtype=int)


def default_basis(N: int = 8, Q: int | None = None) -> HermiteBasis:
    """Cached basis instance (bases are immutable, so sharing is safe)."""
    return _basis(int(N), int(N) + 4 if Q is None else int(Q))


def _apply(op, c):
    c = np.asarray(c)
    return np.tensordot(op, c, axes=(1, 0))


# ---- module-level operations ---------------------------------------------


def eval_basis(alpha, v, basis: HermiteBasis | None = None):
    """Evaluate psi_alpha at velocities v (shape (..., 3))."""
    alpha = tuple(int(a) for a in alpha)
    if basis is not None:
        basis.index(alpha)
    if len(alpha) != 3 or min(alpha) < 0:
        raise TruncationError(f"invalid multi-index {alpha}")
    v = np.asarray(v, dtype=float)
    out = (2.0 * np.pi) ** -0.75 * np.exp(-0.25 * np.sum(v * v, axis=-1))
    for i, n in enumerate(alpha):
        coef = np.zeros(n + 1)
        coef[n] = 1.0 / math.sqrt(math.factorial(n))
        out = out * hermite_e.hermeval(v[..., i], coef)
    return out


def project_function(f, basis: HermiteBasis) -> np.ndarray:
    """Hermite coefficients <f, psi_a> by tensor Gauss-Hermite quadrature.

    `f` is either a callable taking velocities of shape (..., 3) or an array of
    samples on `basis.velocity_nodes` (leading axis Q^3, trailing axes free).
    """
    if callable(f):
        samples = np.asarray(f(basis.velocity_nodes))
    else:
        samples = np.asarray(f)
    if samples.shape[0] != basis.Q ** 3:
        raise ValueError(f"expected {basis.Q ** 3} velocity samples, got {samples.shape[0]}")
    if not np.all(np.isfinite(samples)):
        raise NonFiniteError("non-finite velocity samples")
    return np.tensordot(basis.analysis, samples, axes=(1, 0))


def reconstruct(c, basis: HermiteBasis) -> np.ndarray:
    """Values of f at the velocity nodes, shape (Q^3, ...)."""
    return np.tensordot(basis.synthesis, np.asarray(c), axes=(1, 0))


def apply_collision_L(c, basis: HermiteBasis) -> np.ndarray:
    c = np.asarray(c)
    d = basis.collision_diag.reshape((-1,) + (1,) * (c.ndim - 1))
    return d * c


def apply_ladder(kind: str, axis: int, c, basis: HermiteBasis) -> np.ndarray:
    """Apply one of MULT_V, D_V, LOWER, RAISE along velocity axis 0, 1 or 2."""
    ops = basis.ladder(kind)
    if axis not in (0, 1, 2):
        raise ValueError(f"velocity axis must be 0, 1 or 2, got {axis}")
    return _apply(ops[axis], c)


def kinetic_linear_terms(c, u, theta, basis: HermiteBasis) -> np.ndarray:
    """Velocity-side forcing of the kinetic equation except transport and L.

    Returns u . RAISE(c + psi_0) + theta * D(c + psi_0).  The psi_0 pieces are
    the sources u.v sqrt(M) and theta (|v|^2 - 3) sqrt(M); the rest is the
    drift -u.grad_v f + u.v f / 2 and the heating term theta Delta_v(sqrt(M) f)/sqrt(M).
    u has shape (3, ...) and theta shape (...) matching the trailing axes of c.
    """
    c = np.asarray(c)
    g = c.astype(np.result_type(c, u, theta), copy=True)
    g[basis.i0] += 1.0
    r = basis.raise_ops
    out = sum(np.asarray(u)[i] * _apply(r[i], g) for i in range(3))
    return out + np.asarray(theta) * _apply(basis.laplace_op, g)


@dataclass(frozen=True)
class MacroMoments:
    a: np.ndarray
    b: np.ndarray
    omega: np.ndarray
    Gamma: np.ndarray
    Upsilon: np.ndarray | None


def macro_moments(c, basis: HermiteBasis, upsilon: bool = True) -> MacroMoments:
    """Moments a, b, omega, Gamma_ij and Upsilon_i of the function with coefficients c."""
    c = np.asarray(c)
    if upsilon and basis.N < 3:
        raise TruncationError("Upsilon needs degree-3 coefficients (N >= 3)")
    a = c[basis.i0]
    b = c[basis.i1]
    c2 = c[basis.i2]
    omega = c2.sum(axis=0) / SQRT3
    gamma = np.empty((3, 3) + c.shape[1:], dtype=c.dtype)
    for i in range(3):
        for j in range(3):
            if i == j:
                gamma[i, i] = SQRT2 * c2[i]
            else:
                e = np.zeros(3, dtype=int)
                e[i] += 1
                e[j] += 1
                gamma[i, j] = c[basis.index(e)] - a
    ups = None
    if upsilon:
        ups = np.empty((3,) + c.shape[1:], dtype=c.dtype)
        for i in range(3):
            e3 = np.zeros(3, dtype=int)
            e3[i] = 3
            acc = c[basis.index(e3)] + (2.0 / SQRT6) * b[i]
            for j in range(3):
                if j != i:
                    e = np.zeros(3, dtype=int)
                    e[i] = 1
                    e[j] = 2
                    acc = acc + c[basis.index(e)] / SQRT3
            ups[i] = acc
    return MacroMoments(a=a, b=b, omega=omega, Gamma=gamma, Upsilon=ups)


def macro_part(c, basis: HermiteBasis) -> np.ndarray:
    c = np.asarray(c)
    out = np.zeros_like(c)
    out[basis.i0] = c[basis.i0]
    out[basis.i1] = c[basis.i1]
    out[basis.i2] = c[basis.i2].mean(axis=0)
    return out


def decompose_macro_micro(c, basis: HermiteBasis):
    """Split c into its macroscopic projection and the remainder."""
    macro = macro_part(c, basis)
    return macro, np.asarray(c) - macro


def _abs2(x):
    return np.real(x * np.conj(x))


def nu_norm(c, basis: HermiteBasis, route: str = "exact") -> float:
    """Squared nu-norm sum_i |d_{v_i} f|^2 + |(1+|v|^2)^{1/2} f|^2, summed over trailing axes.

    route="exact" applies the ladders in a basis one degree larger so nothing is
    truncated; route="galerkin" applies them inside the basis itself (equal to
    exact when the top shell of c is empty); route="quadrature" integrates the
    reconstructed function and its velocity gradient on the Gauss-Hermite grid.
    """
    c = np.asarray(c)
    if route == "exact":
        big = basis.extended(1)
        ce = basis.embed(c, big)
        return _nu_sum(ce, big)
    if route == "galerkin":
        return _nu_sum(c, basis)
    if route == "quadrature":
        return _nu_quadrature(c, basis)
    raise ValueError(f"unknown nu_norm route {route!r}")


def _nu_sum(c, basis):
    total = float(np.sum(_abs2(c)))
    for i in range(3):
        total += float(np.sum(_abs2(_apply(basis.dv_ops[i], c))))
        total += float(np.sum(_abs2(_apply(basis.mult_ops[i], c))))
    return total


@lru_cache(maxsize=None)
def _gradient_synthesis(basis: HermiteBasis):
    """Matrices G_i with d f/d v_i (nodes) = G_i @ c, from polynomial differentiation."""
    x, _ = basis.nodes_1d
    n1 = basis.N + 1
    phi = np.empty((n1, basis.Q))
    dphi = np.empty((n1, basis.Q))
    gauss = np.exp(-x * x / 4.0) * (2.0 * np.pi) ** -0.25
    for n in range(n1):
        coef = np.zeros(n + 1)
        coef[n] = 1.0 / math.sqrt(math.factorial(n))
        he = hermite_e.hermeval(x, coef)
        dhe = hermite_e.hermeval(x, hermite_e.hermeder(coef)) if n else 0.0 * x
        phi[n] = he * gauss
        dphi[n] = (dhe - 0.5 * x * he) * gauss
    a = basis.indices
    mats = []
    for i in range(3):
        f = [dphi if k == i else phi for k in range(3)]
        s = f[0][a[:, 0]][:, :, None, None] * f[1][a[:, 1]][:, None, :, None] * f[2][a[:, 2]][:, None, None, :]
        mats.append(s.reshape(basis.size, -1).T.copy())
    return mats


def _velocity_weights(basis):
    x, w = basis.nodes_1d
    w1 = w * np.exp(x * x / 2.0)
    return (w1[:, None, None] * w1[None, :, None] * w1[None, None, :]).reshape(-1)


def _nu_quadrature(c, basis):
    w = _velocity_weights(basis)
    v2 = np.sum(basis.velocity_nodes ** 2, axis=1)
    w = w.reshape((-1,) + (1,) * (np.ndim(c) - 1))
    v2 = v2.reshape(w.shape)
    f = reconstruct(c, basis)
    total = np.sum(w * (1.0 + v2) * _abs2(f))
    for g in _gradient_synthesis(basis):
        total += np.sum(w * _abs2(np.tensordot(g, c, axes=(1, 0))))
    return float(total)


def velocity_derivative(c, beta, basis: HermiteBasis):
    """Exact d^beta/dv^beta of f, returned in a basis |beta| degrees larger.

    Returns (coefficients, basis) so that callers can continue with exact
    nu-norms in the enlarged basis.
    """
    beta = tuple(int(b) for b in beta)
    order = sum(beta)
    big = basis.extended(order)
    out = basis.embed(c, big)
    for i, m in enumerate(beta):
        for _ in range(m):
            out = _apply(big.dv_ops[i], out)
    return out, big


def collision_quadratic_form(c, basis: HermiteBasis) -> float:
    """-<f, Lf> = sum_a |a| |c_a|^2, summed over trailing axes."""
    c = np.asarray(c)
    d = basis.degree.reshape((-1,) + (1,) * (c.ndim - 1))
    return float(np.sum(d * _abs2(c)))


def micro_basis(basis: HermiteBasis) -> np.ndarray:
    """Orthonormal columns spanning the range of I - P."""
    q = np.eye(basis.size) - basis.macro_matrix
    w, v = np.linalg.eigh(q)
    return v[:, w > 0.5]


def nu_gram(basis: HermiteBasis) -> np.ndarray:
    """Gram matrix G with |f|_nu^2 = c^T G c (exact, no truncation)."""
    big = basis.extended(1)
    src, dst = _embedding(basis, big)
    g = np.eye(big.size)
    for i in range(3):
        g = g + big.dv_ops[i].T @ big.dv_ops[i] + big.mult_ops[i].T @ big.mult_ops[i]
    return g[np.ix_(dst, dst)]


def micro_coercivity_constant(basis: HermiteBasis) -> float:
    """inf over micro f of -<f, Lf> / |f|_nu^2 via a generalized eigenproblem."""
    from scipy.linalg import eigh

    z = micro_basis(basis)
    lam = z.T @ np.diag(basis.degree.astype(float)) @ z
    g = z.T @ nu_gram(basis) @ z
    return float(eigh(lam, g, eigvals_only=True)[0])
