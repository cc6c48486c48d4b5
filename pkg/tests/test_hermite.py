import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsvfp.errors import NonFiniteError, TruncationError
from nsvfp.hermite import (
    HermiteBasis,
    apply_collision_L,
    apply_ladder,
    collision_quadratic_form,
    decompose_macro_micro,
    default_basis,
    eval_basis,
    kinetic_linear_terms,
    macro_moments,
    micro_coercivity_constant,
    nu_norm,
    project_function,
    reconstruct,
    velocity_derivative,
)
from oracles import HermiteOracle, random_coefficients

N = 8


@pytest.fixture(scope="module")
def basis():
    return default_basis(N)


@pytest.fixture(scope="module")
def oracle(basis):
    return HermiteOracle(basis.indices, basis.Q)


# ---- basis construction and evaluation -----------------------------------


def test_basis_size_and_grading():
    b = HermiteBasis(8)
    assert b.size == math.comb(8 + 3, 3)
    assert np.all(np.diff(b.degree) >= 0)
    assert b.Q == 12


@pytest.mark.parametrize("N,Q", [(1, None), (8, 11)])
def test_basis_rejects_bad_truncation(N, Q):
    with pytest.raises(TruncationError):
        HermiteBasis(N, Q)


def test_eval_basis_values():
    assert eval_basis((0, 0, 0), [0, 0, 0]) == pytest.approx((2 * np.pi) ** -0.75, rel=1e-14)
    assert eval_basis((0, 0, 0), [0, 0, 0]) == pytest.approx(0.251976, abs=1e-5)
    assert eval_basis((1, 0, 0), [1, 0, 0]) == pytest.approx(np.exp(-0.25) * (2 * np.pi) ** -0.75, rel=1e-14)
    assert eval_basis((1, 0, 0), [1, 0, 0]) == pytest.approx(0.196238, abs=1e-5)


def test_eval_basis_out_of_range(basis):
    with pytest.raises(TruncationError):
        eval_basis((5, 4, 0), [0, 0, 0], basis)


def test_gram_matrix_identity_degree4():
    b = HermiteBasis(4, 12)
    v = b.velocity_nodes
    vals = np.array([eval_basis(a, v) for a in b.indices])
    x, w = np.polynomial.hermite_e.hermegauss(12)
    wt = w * np.exp(x * x / 2)
    w3 = (wt[:, None, None] * wt[None, :, None] * wt[None, None, :]).ravel()
    gram = (vals * w3) @ vals.T
    assert np.abs(gram - np.eye(b.size)).max() < 1e-10


def test_synthesis_matches_eval_basis(basis):
    v = basis.velocity_nodes
    for a in [(0, 0, 0), (2, 1, 0), (0, 0, 8), (3, 3, 2)]:
        assert np.allclose(basis.synthesis[:, basis.index(a)], eval_basis(a, v), atol=1e-14)


# ---- projection -----------------------------------------------------------


def test_project_maxwellian(basis):
    c = project_function(lambda v: eval_basis((0, 0, 0), v), basis)
    assert c[basis.i0] == pytest.approx(1.0, abs=1e-13)
    rest = np.delete(c, basis.i0)
    assert np.abs(rest).max() < 1e-12


def test_project_velocity_moment(basis):
    c = project_function(lambda v: v[..., 0] * eval_basis((0, 0, 0), v), basis)
    assert c[basis.index((1, 0, 0))] == pytest.approx(1.0, abs=1e-13)


def test_project_energy_direction(basis):
    def f(v):
        return (np.sum(v * v, axis=-1) - 3) / np.sqrt(6) * eval_basis((0, 0, 0), v)

    c = project_function(f, basis)
    assert np.allclose(c[basis.i2], 1 / np.sqrt(3), atol=1e-12)
    mask = np.ones(basis.size, bool)
    mask[basis.i2] = False
    assert np.abs(c[mask]).max() < 1e-12


def test_project_rejects_nonfinite(basis):
    samples = np.zeros(basis.Q ** 3)
    samples[3] = np.nan
    with pytest.raises(NonFiniteError):
        project_function(samples, basis)


def test_parseval_roundtrip(basis):
    rng = np.random.default_rng(0)
    c = random_coefficients(rng, basis, N)
    vals = reconstruct(c, basis)
    back = project_function(vals, basis)
    assert np.allclose(back, c, atol=1e-12)
    x, w = basis.nodes_1d
    wt = w * np.exp(x * x / 2)
    w3 = (wt[:, None, None] * wt[None, :, None] * wt[None, None, :]).ravel()
    assert np.sum(w3 * vals ** 2) == pytest.approx(np.sum(c ** 2), rel=1e-10)


# ---- collision and ladders ---------------------------------------------------


def test_collision_examples(basis):
    assert np.all(apply_collision_L(basis.unit((0, 0, 0)), basis) == 0)
    out = apply_collision_L(basis.unit((1, 0, 0)), basis)
    assert out[basis.index((1, 0, 0))] == -1
    assert np.count_nonzero(out) == 1
    out = apply_collision_L(basis.unit((2, 0, 0)), basis)
    assert out[basis.index((2, 0, 0))] == -2


def test_collision_matches_oracle(basis, oracle):
    rng = np.random.default_rng(1)
    for _ in range(5):
        c = random_coefficients(rng, basis, N - 2)
        assert np.abs(apply_collision_L(c, basis) - oracle.collision(c)).max() < 1e-9
        q = collision_quadratic_form(c, basis)
        assert q == pytest.approx(-np.dot(c, oracle.collision(c)), abs=1e-10)


def test_ladder_examples(basis):
    e0 = basis.unit((0, 0, 0))
    e1 = basis.unit((1, 0, 0))
    r = apply_ladder("RAISE", 0, e0, basis)
    assert r[basis.index((1, 0, 0))] == 1 and np.count_nonzero(r) == 1
    lo = apply_ladder("LOWER", 0, e1, basis)
    assert lo[basis.i0] == 1 and np.count_nonzero(lo) == 1
    m = apply_ladder("MULT_V", 0, e1, basis)
    assert m[basis.index((2, 0, 0))] == pytest.approx(np.sqrt(2))
    assert m[basis.i0] == pytest.approx(1.0)
    assert np.count_nonzero(m) == 2


def test_ladder_unknown_kind(basis):
    with pytest.raises(ValueError):
        apply_ladder("SIDEWAYS", 0, basis.unit((0, 0, 0)), basis)


@pytest.mark.parametrize("kind", ["MULT_V", "D_V", "LOWER", "RAISE"])
@pytest.mark.parametrize("axis", [0, 1, 2])
def test_ladders_match_oracle(basis, oracle, kind, axis):
    rng = np.random.default_rng(2 + axis)
    c = random_coefficients(rng, basis, N - 2)
    assert np.abs(apply_ladder(kind, axis, c, basis) - oracle.ladder(kind, axis, c)).max() < 1e-9


def test_galerkin_closure_drops_top_degree(basis):
    top = basis.unit((N, 0, 0))
    assert np.all(apply_ladder("RAISE", 0, top, basis) == 0)


def test_ladder_acts_on_trailing_axes(basis):
    rng = np.random.default_rng(3)
    c = np.stack([random_coefficients(rng, basis, N) for _ in range(4)], axis=1)
    out = apply_ladder("MULT_V", 1, c, basis)
    for j in range(4):
        assert np.allclose(out[:, j], apply_ladder("MULT_V", 1, c[:, j], basis))


# ---- kinetic terms ------------------------------------------------------------


def test_kinetic_terms_examples(basis):
    z = basis.zeros()
    out = kinetic_linear_terms(z, np.array([1.0, 0, 0]), 0.0, basis)
    assert out[basis.index((1, 0, 0))] == 1 and np.count_nonzero(out) == 1
    out = kinetic_linear_terms(z, np.zeros(3), 1.0, basis)
    assert np.allclose(out[basis.i2], np.sqrt(2))
    assert np.count_nonzero(out) == 3
    heating = kinetic_linear_terms(basis.unit((0, 0, 0)), np.zeros(3), 1.0, basis) - out
    assert np.allclose(heating[basis.i2], np.sqrt(2))
    assert np.count_nonzero(np.round(heating, 14)) == 3


def test_kinetic_terms_match_oracle(basis, oracle):
    rng = np.random.default_rng(4)
    for _ in range(3):
        c = random_coefficients(rng, basis, N - 2)
        u = rng.standard_normal(3)
        th = rng.standard_normal()
        assert np.abs(kinetic_linear_terms(c, u, th, basis) - oracle.kinetic_terms(c, u, th)).max() < 1e-9


def test_heating_operator_matches_oracle(basis, oracle):
    rng = np.random.default_rng(5)
    c = random_coefficients(rng, basis, N - 2)
    assert np.abs(basis.laplace_op @ c - oracle.heating(c)).max() < 1e-9


# ---- moments and projection ---------------------------------------------------


def test_moment_examples(basis):
    m = macro_moments(basis.unit((0, 0, 0)), basis)
    assert m.a == 1 and np.all(m.b == 0) and m.omega == 0
    m = macro_moments(basis.unit((2, 0, 0)), basis)
    assert m.omega == pytest.approx(1 / np.sqrt(3))
    assert m.Gamma[0, 0] == pytest.approx(np.sqrt(2))
    m = macro_moments(basis.unit((1, 0, 0)), basis)
    assert np.allclose(m.b, [1, 0, 0])
    assert m.Upsilon[0] == pytest.approx(2 / np.sqrt(6))


def test_upsilon_needs_degree_three():
    b = HermiteBasis(2)
    with pytest.raises(TruncationError):
        macro_moments(b.unit((0, 0, 0)), b)
    m = macro_moments(b.unit((0, 0, 0)), b, upsilon=False)
    assert m.Upsilon is None


def test_moments_match_oracle(basis, oracle):
    rng = np.random.default_rng(6)
    c = random_coefficients(rng, basis, N - 2)
    m = macro_moments(c, basis)
    a, b, omega, gamma, ups = oracle.moments(c)
    assert abs(m.a - a) < 1e-10
    assert np.abs(m.b - b).max() < 1e-10
    assert abs(m.omega - omega) < 1e-10
    assert np.abs(m.Gamma - gamma).max() < 1e-10
    assert np.abs(m.Upsilon - ups).max() < 1e-10


def test_decompose_examples(basis):
    macro, micro = decompose_macro_micro(basis.unit((0, 0, 0)), basis)
    assert np.all(micro == 0)
    c = basis.unit((2, 0, 0))
    macro, micro = decompose_macro_micro(c, basis)
    assert np.allclose(macro[basis.i2], 1 / 3)
    assert np.allclose(macro + micro, c)
    assert abs(macro_moments(micro, basis).omega) < 1e-15


def test_decompose_matches_oracle(basis, oracle):
    rng = np.random.default_rng(7)
    c = random_coefficients(rng, basis, N - 2)
    macro, micro = decompose_macro_micro(c, basis)
    assert np.abs(macro - oracle.macro(c)).max() < 1e-10
    m = macro_moments(micro, basis)
    assert abs(m.a) < 1e-14 and np.abs(m.b).max() < 1e-14 and abs(m.omega) < 1e-14


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_projection_idempotent(seed):
    b = default_basis(N)
    c = random_coefficients(np.random.default_rng(seed), b, N)
    macro, micro = decompose_macro_micro(c, b)
    macro2, micro2 = decompose_macro_micro(macro, b)
    assert np.array_equal(macro + micro, c) or np.allclose(macro + micro, c, atol=1e-15)
    assert np.allclose(macro2, macro, atol=1e-15)
    assert np.abs(micro2).max() < 1e-15
    assert abs(np.dot(macro, micro)) < 1e-13


# ---- nu-norm ----------------------------------------------------------------


def test_nu_norm_examples(basis):
    assert nu_norm(basis.zeros(), basis) == 0
    assert nu_norm(basis.unit((0, 0, 0)), basis) == pytest.approx(4.75, abs=1e-12)


def test_nu_norm_routes_agree(basis, oracle):
    rng = np.random.default_rng(8)
    c = random_coefficients(rng, basis, N - 2)
    exact = nu_norm(c, basis)
    assert abs(exact - nu_norm(c, basis, "galerkin")) < 1e-8
    assert abs(exact - nu_norm(c, basis, "quadrature")) < 1e-8
    assert abs(exact - oracle.nu_norm(c)) < 1e-8


def test_nu_norm_exact_for_full_degree(basis):
    # top shell occupied: the exact route still matches the quadrature definition
    rng = np.random.default_rng(9)
    c = random_coefficients(rng, basis, N)
    big = HermiteOracle(basis.extended(1).indices, basis.Q + 1)
    assert abs(nu_norm(c, basis) - big.nu_norm(basis.embed(c, basis.extended(1)))) < 1e-8


def test_velocity_derivative_exact(basis):
    c = basis.unit((N, 0, 0))
    d, big = velocity_derivative(c, (1, 0, 0), basis)
    assert d[big.index((N + 1, 0, 0))] == pytest.approx(-0.5 * np.sqrt(N + 1))
    assert d[big.index((N - 1, 0, 0))] == pytest.approx(0.5 * np.sqrt(N))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_nu_norm_dominates_l2(seed):
    b = default_basis(N)
    c = random_coefficients(np.random.default_rng(seed), b, N, decay=0.9)
    assert nu_norm(c, b) >= np.sum(c ** 2)


# ---- coercivity --------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_macro_coercivity(seed):
    b = default_basis(N)
    c = random_coefficients(np.random.default_rng(seed), b, N, decay=0.9)
    m = macro_moments(c, b)
    lhs = collision_quadratic_form(c, b)
    rhs = np.sum(m.b ** 2) + 2 * m.omega ** 2
    assert lhs >= rhs - 1e-12
    _, micro = decompose_macro_micro(c, b)
    assert lhs - rhs == pytest.approx(collision_quadratic_form(micro, b), abs=1e-12)


def test_micro_coercivity_constant_is_attained_lower_bound(basis):
    lam0 = micro_coercivity_constant(basis)
    assert lam0 > 0.1
    rng = np.random.default_rng(10)
    for _ in range(50):
        _, micro = decompose_macro_micro(random_coefficients(rng, basis, N, decay=1.0), basis)
        assert collision_quadratic_form(micro, basis) / nu_norm(micro, basis) >= lam0 - 1e-12
