import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsvfp.diagnostics import (
    KIND_NAMES,
    EnergyWeights,
    FunctionalKind,
    FunctionalRecorder,
    FunctionalReport,
    centered_derivative,
    conservation_drift,
    conservation_residuals,
    cross_e0_first_order,
    evaluate_functional,
    fit_exponential,
    interpolation_check,
    lyapunov_check,
    lyapunov_from_series,
)
from nsvfp.fourier import FrequencySplitSpec, SpatialGrid, frequency_split
from nsvfp.hermite import default_basis
from nsvfp.nonlinear import KineticFluidState, StepperConfig, admissible_data, run_simulation

G1 = SpatialGrid(1, 32)
G3 = SpatialGrid(3, 8)
B4 = default_basis(4)
B8 = default_basis(8)


def random_state(seed, grid=G1, basis=B4, amplitude=1e-2, max_degree=4):
    return admissible_data(grid, basis, amplitude=amplitude, seed=seed, max_degree=max_degree)


@pytest.mark.parametrize("name", KIND_NAMES)
def test_zero_state_gives_zero(name):
    assert evaluate_functional(name, KineticFluidState.zeros(G1, B4)) == 0.0


def test_sobolev_plain_of_sine_density():
    s = KineticFluidState.zeros(G3, B4)
    s.rho = np.sin(G3.x[0])
    assert evaluate_functional("SOBOLEV_PLAIN", s) == pytest.approx(12 * math.pi ** 3, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_energy_equivalent_to_plain_sobolev(seed):
    s = random_state(seed, G3)
    e = evaluate_functional("ENERGY_E", s)
    p = evaluate_functional("SOBOLEV_PLAIN", s)
    assert abs(e - p) <= 0.2 * p


def test_vanishing_weights_give_plain_sum():
    s = random_state(7, G3)
    kind = FunctionalKind("ENERGY_E", EnergyWeights.uniform(0.0))
    assert evaluate_functional(kind, s) == evaluate_functional("SOBOLEV_PLAIN", s)


def _high_projection(state, r0):
    spec = FrequencySplitSpec(r0)
    Y = state.stacked()
    high = np.array([frequency_split(Y[i], spec, state.grid)[1] for i in range(Y.shape[0])])
    return KineticFluidState.from_stacked(high, state.grid, state.basis)


@pytest.mark.parametrize("seed", range(3))
def test_high_cross_functional_is_first_order_cross_on_high_part(seed):
    s = random_state(seed, G3, amplitude=1.0)
    for r0 in (2.0, 3.0):
        kind = FunctionalKind("CROSS_E0_HIGH", EnergyWeights(r0=r0))
        a = evaluate_functional(kind, s)
        b = cross_e0_first_order(_high_projection(s, r0))
        assert a == pytest.approx(b, rel=1e-12, abs=1e-14)


def test_unknown_kind_and_small_basis_rejected():
    with pytest.raises(ValueError):
        FunctionalKind("ENERGY_X")
    with pytest.raises(ValueError):
        evaluate_functional("ENERGY_E", KineticFluidState.zeros(G1, default_basis(2)))
    with pytest.raises(ValueError):
        EnergyWeights.uniform(0.2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), c=st.floats(-10, 10), name=st.sampled_from(KIND_NAMES))
def test_functionals_are_quadratic(seed, c, name):
    s = random_state(seed, amplitude=1.0)
    v = evaluate_functional(name, s)
    assert evaluate_functional(name, s.scaled(c)) == pytest.approx(c * c * v, rel=1e-10, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), name=st.sampled_from(["DISSIPATION_D", "HIGH_H", "HIGH_M", "ENERGY_E",
                                                                 "SOBOLEV_PLAIN", "D1_SECOND"]))
def test_dissipative_and_energy_kinds_nonnegative(seed, name):
    assert evaluate_functional(name, random_state(seed, amplitude=1.0)) >= 0


# ---- conservation ----------------------------------------------------------------------


def test_conservation_of_equilibrium_and_admissible_data():
    assert np.all(conservation_residuals(KineticFluidState.zeros(G1, B4)).as_array() == 0)
    r = conservation_residuals(random_state(3, G3, B8))
    assert np.abs(r.as_array()).max() < 1e-12
    assert len(r.scalars()) == 4


def test_conservation_of_uniform_shift():
    s = KineticFluidState.zeros(G1, B4)
    s.rho[:] = 0.1
    r = conservation_residuals(s)
    assert r.mass_rho == pytest.approx(0.1 * G1.volume)
    assert r.energy == 0.0


def test_conservation_along_trajectory():
    s = random_state(5, SpatialGrid(1, 64), B8, max_degree=2)
    traj = run_simulation(s, 2.0, StepperConfig(dt=0.02), observe_every=0.5, keep_states=True)
    drift = conservation_drift(traj.states)
    assert np.all(drift < 1e-6 * (1 + np.asarray(traj.times)))


# ---- fits and Lyapunov ----------------------------------------------------------------------


def test_fit_exponential_examples():
    t = np.linspace(0, 5, 30)
    f = fit_exponential(t, np.exp(-2 * t))
    assert f.rate == pytest.approx(2.0, abs=1e-6)
    assert f.residual < 1e-12
    assert fit_exponential(t, np.full(30, 4.0)).rate == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_exponential(t, -np.ones(30))


def test_centered_derivative_exact_for_quadratics():
    t = np.array([0.0, 0.3, 0.5, 1.2, 2.0])
    d = centered_derivative(t, 3 * t ** 2 - t)
    assert np.allclose(d, 6 * t[1:-1] - 1, atol=1e-12)


def test_lyapunov_series_examples():
    t = np.linspace(0, 4, 81)
    rep = lyapunov_from_series(t, np.exp(-t), 2 * np.exp(-t))
    assert rep.lam == pytest.approx(0.5, rel=1e-3)
    t = t[::10]
    assert rep.passed
    z = lyapunov_from_series(t, np.zeros(9), np.zeros(9))
    assert z.passed and math.isinf(z.lam)
    with pytest.raises(ZeroDivisionError):
        lyapunov_from_series(t, np.exp(-t), np.zeros(9))
    with pytest.raises(ValueError):
        lyapunov_from_series(t[::-1], np.exp(-t), np.exp(-t))


def test_equilibrium_trajectory_is_vacuous_pass():
    traj = run_simulation(KineticFluidState.zeros(G1, B4), 0.3, StepperConfig(dt=0.05), observe_every=0.1,
                          keep_states=True)
    assert lyapunov_check(traj.states).passed


def _lambda(amplitude):
    grid = SpatialGrid(1, 32)
    rec = FunctionalRecorder(kinds=("ENERGY_E", "DISSIPATION_D"), positivity=False)
    run_simulation(admissible_data(grid, B8, amplitude=amplitude, seed=0), 6.0, StepperConfig(dt=0.04),
                   observers=[rec], observe_every=0.2)
    return lyapunov_from_series(rec.report.times, rec.report.array("ENERGY_E"), rec.report.array("DISSIPATION_D"))


def test_lyapunov_rate_positive_and_stable_in_amplitude():
    a, b = _lambda(1e-2), _lambda(1e-3)
    assert a.lam > 0 and b.lam > 0
    assert abs(a.lam - b.lam) < 0.05 * b.lam


# ---- interpolation ----------------------------------------------------------------------


def test_interpolation_endpoints_are_equalities():
    g = np.random.default_rng(0).standard_normal(G1.shape)
    for p, z in ((2, 1.0), (6, 0.0)):
        rep = interpolation_check(g, p, G1)
        assert rep.zeta == z
        assert rep.ratio == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ValueError):
        interpolation_check(g, 7, G1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), p=st.floats(2, 6))
def test_interpolation_inequality_holds(seed, p):
    g = np.random.default_rng(seed).standard_normal((3, *G3.shape))
    assert interpolation_check(g, p, G3).holds(1e-10)


# ---- reports ----------------------------------------------------------------------


def test_report_requires_increasing_times_and_fits_envelope():
    rep = FunctionalReport()
    rep.add(0.0, {"E": 1.0})
    with pytest.raises(ValueError):
        rep.add(0.0, {"E": 0.5})
    assert rep.envelope("E") is None
    for t in (1.0, 2.0, 3.0):
        rep.add(t, {"E": math.exp(-0.5 * t)})
    f = rep.fit("E")
    assert f.rate == pytest.approx(0.5)
    assert np.allclose(rep.envelope("E"), rep.array("E"))
