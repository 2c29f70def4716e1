import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import duffing_second_order

from uqprop.dynamics import (
    DuffingParams,
    KeplerSdeParams,
    NonFiniteStateError,
    SdeModel,
    circular_state,
    duffing_closed_form,
    duffing_model,
    integrate,
    kepler_planar_sde,
    linear_model,
    ou_model,
    ou_moments,
)
from uqprop.plasma import (
    DenseOutput,
    NoiseMomentSet,
    gaussian_increment_moments,
    gaussian_moments,
    moment_rows,
    plasma_run,
    plasma_run_bifidelity,
    plasma_step,
    recenter,
    state_covariance,
    state_mean,
    state_moments,
)


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))


# -- Gaussian moment tables ------------------------------------------------------


def test_increment_moments():
    h = 0.3
    assert gaussian_increment_moments((2,), h) == pytest.approx(h)
    assert gaussian_increment_moments((4,), h) == pytest.approx(3 * h * h)
    assert gaussian_increment_moments((6,), h) == pytest.approx(15 * h**3)
    assert gaussian_increment_moments((2, 2), h) == pytest.approx(h * h)
    assert gaussian_increment_moments((1, 2), h) == 0.0
    assert gaussian_increment_moments((0, 0), h) == 1.0
    with pytest.raises(ValueError):
        gaussian_increment_moments((2,), 0.0)


@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(-0.9, 0.9))
def test_isserlis_moments(s1, s2, rho):
    c = rho * s1 * s2
    cov = np.array([[s1 * s1, c], [c, s2 * s2]])
    ms = NoiseMomentSet.gaussian([0.0, 0.0], cov, 4)
    assert ms.moment((1, 0)) == 0.0 and ms.moment((2, 1)) == 0.0
    assert ms.moment((2, 0)) == pytest.approx(s1**2, rel=1e-14)
    assert ms.moment((1, 1)) == pytest.approx(c, rel=1e-14)
    assert ms.moment((4, 0)) == pytest.approx(3 * s1**4, rel=1e-14)
    assert ms.moment((2, 2)) == pytest.approx(s1**2 * s2**2 + 2 * c * c, rel=1e-13)
    assert ms.moment((3, 1)) == pytest.approx(3 * s1**2 * c, rel=1e-13)


def test_gaussian_moments_of_independent_block():
    got = gaussian_moments(np.diag([2.0, 0.5, 1.0]), 4)
    ms = NoiseMomentSet(4, got, np.zeros(3))
    assert ms.moment((2, 2, 0)) == pytest.approx(1.0)
    assert ms.moment((0, 0, 4)) == pytest.approx(3.0)


# -- state statistics ------------------------------------------------------------


def test_deterministic_set_moments_are_products_of_the_state():
    ms = NoiseMomentSet.deterministic([2.0, -3.0], 3)
    assert state_moments(ms, (2, 1)) == pytest.approx(-12.0)
    np.testing.assert_array_equal(state_mean(ms), [2.0, -3.0])
    np.testing.assert_array_equal(state_covariance(ms), np.zeros((2, 2)))


@given(st.integers(0, 10_000))
def test_recenter_keeps_the_distribution(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 2))
    ms = NoiseMomentSet.gaussian(rng.normal(size=2), a @ a.T, 3)
    moved = recenter(ms, rng.normal(size=2) * 3)
    for e in ms.space.exponents:
        assert state_moments(moved, e) == pytest.approx(state_moments(ms, e), rel=1e-9, abs=1e-9)
    np.testing.assert_allclose(state_covariance(moved), state_covariance(ms), atol=1e-10)


# -- Duffing oracle ----------------------------------------------------------------


@pytest.mark.parametrize("a, b", [(2.75, 0.2), (2.5, 0.3)])
def test_duffing_matches_hand_recursions(a, b):
    p = DuffingParams(a, b, 0.1)
    x0 = [0.1, 0.1]
    sets = plasma_run(duffing_model(p), x0, 0.0, 50.0, 1.0, 2, "map", output_times="all")
    cf = duffing_closed_form(x0, p, 50)
    assert len(sets) == 51
    for k, ms in enumerate(sets):
        np.testing.assert_array_equal(ms.central, cf["central"][k])
        assert np.max(np.abs(ms.moments[1:] - cf["noise"][k])) <= 1e-12 * max(1.0, np.abs(cf["noise"][k]).max())


def test_duffing_agrees_with_direct_second_order_propagation():
    p = DuffingParams(2.75, 0.2, 0.1)
    ms = plasma_run(duffing_model(p), [0.1, 0.1], 0.0, 20.0, 1.0, 2, "map")[-1]
    mean, cov = duffing_second_order([0.1, 0.1], p.a, p.b, p.sigma, 20)
    assert _rel(state_mean(ms), mean) <= 1e-12
    assert _rel(state_covariance(ms), cov) <= 1e-11


# -- linear SDEs -----------------------------------------------------------------


def test_ou_euler_maruyama_variance_and_bias():
    sets = plasma_run(ou_model(1.0, 0.5), [1.0], 0.0, 2.0, 1e-3, 2, "euler_maruyama")
    mean, var = ou_moments(1.0, 1.0, 0.5, 2.0)
    ms = sets[-1]
    # the scheme's own mean is (1 - h)^N exactly
    assert state_mean(ms)[0] == pytest.approx((1 - 1e-3) ** 2000, rel=1e-12)
    assert abs(state_covariance(ms)[0, 0] - var) / var <= 1e-3
    assert abs(state_mean(ms)[0] - mean) / mean <= 1.1e-3


def test_ou_rk4_is_accurate():
    ms = plasma_run(ou_model(1.0, 0.5), [1.0], 0.0, 2.0, 1e-3, 2, "rk4")[-1]
    mean, var = ou_moments(1.0, 1.0, 0.5, 2.0)
    assert abs(state_mean(ms)[0] - mean) / mean <= 1e-6
    assert abs(state_covariance(ms)[0, 0] - var) / var <= 1e-6


def test_gaussian_initial_condition_on_linear_sde():
    A = np.array([[0.0, 1.0], [-1.0, -0.2]])
    G = np.array([[0.0], [0.3]])
    P0 = np.array([[0.04, 0.01], [0.01, 0.09]])
    m0 = np.array([1.0, 0.0])

    # reference: linear moment equations with a fine RK4
    def rates(s, t):
        m = np.array(s[:2])
        P = np.array(s[2:]).reshape(2, 2)
        return list(A @ m) + list((A @ P + P @ A.T + G @ G.T).ravel())

    ref = np.array(integrate(rates, list(m0) + list(P0.ravel()), 0.0, 3.0, 1e-3, "rk4"))
    errs = []
    for h in (0.02, 0.01):
        ms = plasma_run(linear_model(A, G), NoiseMomentSet.gaussian(m0, P0, 2), 0.0, 3.0, h, 2, "rk4")[-1]
        np.testing.assert_allclose(state_mean(ms), ref[:2], rtol=1e-6, atol=1e-9)
        errs.append(_rel(state_covariance(ms), ref[2:].reshape(2, 2)))
    # noise held constant over a step: second-order convergence of the covariance
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] > 3.5


def test_noise_free_model_tracks_the_flow():
    model = SdeModel(lambda s, t: [s[1], -s[0] - 0.1 * s[0] ** 3], n=2)
    sets = plasma_run(model, [1.0, 0.0], 0.0, 2.0, 0.01, 2, "rk4")
    flow = integrate(model.drift, [1.0, 0.0], 0.0, 2.0, 0.01, "rk4")
    np.testing.assert_allclose(sets[-1].central, flow, rtol=1e-14)
    assert np.all(sets[-1].moments[1:] == 0.0)


def test_custom_stepper_matches_named_one():
    model = ou_model(1.0, 0.5)

    def em(model, x, t, h, w):
        return [xi + h * ri for xi, ri in zip(x, model.pseudo_rate(x, t, w))]

    a = plasma_run(model, [1.0], 0.0, 0.5, 0.01, 2, em)[-1]
    b = plasma_run(model, [1.0], 0.0, 0.5, 0.01, 2, "euler_maruyama")[-1]
    np.testing.assert_array_equal(a.moments, b.moments)


# -- run control and errors -------------------------------------------------------------


def test_zero_length_interval_returns_initial_set():
    out = plasma_run(ou_model(1.0, 0.5), [1.0], 0.0, 0.0, 0.1)
    assert len(out) == 1 and out[0].central[0] == 1.0


def test_output_times_and_rows():
    sets = plasma_run(ou_model(1.0, 0.5), [1.0], 0.0, 1.0, 0.25, 2, "rk4", output_times=[0.5, 1.0])
    assert [s.time for s in sets] == [0.5, 1.0]
    header, rows = moment_rows(sets)
    assert header == ["time_s", "r0", "value"] and len(rows) == 2 * 3
    with pytest.raises(ValueError):
        plasma_run(ou_model(1.0, 0.5), [1.0], 0.0, 1.0, 0.25, output_times=[0.3])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blow_up_is_reported_with_time():
    model = SdeModel(lambda s, t: [s[0] ** 3], n=1)
    with pytest.raises(NonFiniteStateError) as err:
        plasma_run(model, [1e120], 0.0, 1.0, 0.5, 2, "euler_maruyama")
    assert err.value.t == pytest.approx(0.5)


def test_step_validation():
    ms = NoiseMomentSet.deterministic([1.0], 2)
    with pytest.raises(ValueError):
        plasma_step(ou_model(1.0, 0.5), ms, 0.0)
    with pytest.raises(ValueError):
        plasma_step(ou_model(1.0, 0.5), ms, 0.1, "map")


# -- dense output and the bi-fidelity driver -------------------------------------


def test_dense_output_is_exact_on_cubics():
    t = np.linspace(0.0, 2.0, 5)
    states = np.column_stack([t**3 - t, 2 * t**2])
    rates = np.column_stack([3 * t**2 - 1, 4 * t])
    d = DenseOutput(t, states, rates)
    for s in np.linspace(0.0, 2.0, 17):
        np.testing.assert_allclose(d(s), [s**3 - s, 2 * s**2], atol=1e-13)
        np.testing.assert_allclose(d.derivative(s), [3 * s**2 - 1, 4 * s], atol=1e-12)
    with pytest.raises(ValueError):
        d(2.5)


def test_bifidelity_equals_direct_run_on_linear_sde():
    model = ou_model(1.0, 0.5)
    a = plasma_run_bifidelity(model, model.drift, [1.0], 0.0, 2.0, 1e-2, 2, "rk4")[-1]
    b = plasma_run(model, [1.0], 0.0, 2.0, 1e-2, 2, "rk4")[-1]
    assert _rel(state_mean(a), state_mean(b)) <= 1e-12
    assert _rel(state_covariance(a), state_covariance(b)) <= 1e-12


def test_bifidelity_with_same_model_tracks_direct_run():
    mu = 3.986e5
    model = kepler_planar_sde(KeplerSdeParams(mu, 2e-4))
    x0 = circular_state(mu, 7000.0)
    a = plasma_run_bifidelity(model, model.drift, x0, 0.0, 3000.0, 10.0, 2, "rk4")[-1]
    b = plasma_run(model, x0, 0.0, 3000.0, 10.0, 2, "rk4")[-1]
    assert _rel(state_mean(a), state_mean(b)) <= 1e-9
    assert _rel(np.diag(state_covariance(a)), np.diag(state_covariance(b))) <= 1e-3


def test_bifidelity_recentres_gaussian_start():
    model = ou_model(1.0, 0.5)
    ic = NoiseMomentSet(2, [1.0, 0.2, 0.05], [1.0])  # nonzero first moment
    out = plasma_run_bifidelity(model, model.drift, ic, 0.0, 0.0, 0.1)
    assert out[0].central[0] == pytest.approx(1.2)
    assert out[0].moment((1,)) == pytest.approx(0.0, abs=1e-15)
    assert state_covariance(out[0])[0, 0] == pytest.approx(0.05 - 0.04)
