import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uqprop.da import TaylorPoly, da_space
from uqprop.nonlinearity import DegenerateMapError, jacobian, nli, split_direction


def _vars(n, k=2):
    s = da_space(n, k)
    return [TaylorPoly.variable(s, i) for i in range(n)]


def _quadratic(c: float, beta: float):
    (dx,) = _vars(1)
    u = beta * dx
    return [u + 0.5 * c * u * u]


def _linear_map(rng, m, n):
    A = rng.normal(size=(m, n))
    b = rng.normal(size=m)
    beta = rng.uniform(0.1, 3.0, size=n)
    dx = _vars(n)
    y = [b[i] + sum(A[i, j] * beta[j] * dx[j] for j in range(n)) for i in range(m)]
    return y, beta, A


def test_linear_maps_have_zero_index():
    rng = np.random.default_rng(3)
    for _ in range(100):
        m, n = rng.integers(1, 6, size=2)
        y, beta, A = _linear_map(rng, int(m), int(n))
        assert nli(y, beta) <= 1e-14
        jac = jacobian(y, beta)
        np.testing.assert_allclose(jac.jbar, A, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("c", np.logspace(-4, 2, 7))
@pytest.mark.parametrize("beta", np.logspace(-3, 1, 5))
def test_scalar_quadratic_family(c, beta):
    for sign in (1.0, -1.0):
        nu = nli(_quadratic(sign * c, beta), [beta])
        assert abs(nu - c * beta) <= 1e-12 * c * beta


def test_scalar_jacobian_entries():
    jac = jacobian(_quadratic(0.7, 0.2), [0.2])
    assert jac.jbar[0, 0] == pytest.approx(1.0, abs=1e-15)
    assert jac.lin[0, 0, 0] == pytest.approx(0.7 * 0.2, rel=1e-14)


def test_two_dimensional_example():
    a, b1, b2 = 0.8, 0.5, 2.0
    dx1, dx2 = _vars(2)
    y = [b1 * dx1 + 0.5 * a * b1 * dx1 * dx1, b2 * dx2]
    assert nli(y, [b1, b2]) == pytest.approx(abs(a) / np.sqrt(2.0), rel=1e-14)


def test_higher_order_maps_are_truncated():
    s = da_space(1, 4)
    dx = TaylorPoly.variable(s, 0)
    y2 = [dx + 0.3 * dx * dx]
    y4 = [dx + 0.3 * dx * dx + 5.0 * dx**3 + 2.0 * dx**4]
    assert nli(y4, [1.0]) == pytest.approx(nli(y2, [1.0]), rel=1e-15)


@given(st.integers(0, 10_000))
def test_invariant_under_output_rotation(seed):
    rng = np.random.default_rng(seed)
    n = 3
    dx = _vars(n)
    beta = rng.uniform(0.1, 2.0, size=n)
    A = rng.normal(size=(n, n))
    C = rng.normal(size=(n, n, n))
    y = [sum(A[i, j] * dx[j] for j in range(n)) + sum(C[i, j, k] * dx[j] * dx[k] for j in range(n) for k in range(n)) for i in range(n)]
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    yr = [sum(q[i, j] * y[j] for j in range(n)) for i in range(n)]
    # the box bound is not rotation invariant entry-wise, but both norms of
    # Jbar and of the Jacobian polynomial are; compare Jbar and the exact
    # Frobenius norm of the linear parts
    ja, jb = jacobian(y, beta), jacobian(yr, beta)
    assert np.linalg.norm(ja.jbar) == pytest.approx(np.linalg.norm(jb.jbar), rel=1e-12)
    assert np.linalg.norm(ja.lin) == pytest.approx(np.linalg.norm(jb.lin), rel=1e-12)


@given(st.floats(1e-3, 10.0), st.floats(1e-3, 10.0))
def test_linear_in_beta(c, beta):
    assert nli(_quadratic(c, 2.0 * beta), [2.0 * beta]) == pytest.approx(2.0 * nli(_quadratic(c, beta), [beta]), rel=1e-12)


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_monotone_in_coefficients(c1, c2, bump):
    dx1, dx2 = _vars(2)
    base = [dx1 + c1 * dx1 * dx2, dx2 + c2 * dx1 * dx1]
    more = [dx1 + (c1 + bump) * dx1 * dx2, dx2 + c2 * dx1 * dx1]
    assert nli(more, [1.0, 1.0]) >= nli(base, [1.0, 1.0]) - 1e-15
    assert nli(base, [1.0, 1.0]) >= 0.0


def test_errors():
    (dx,) = _vars(1)
    with pytest.raises(ValueError):
        nli([dx + dx * dx], [0.0])
    with pytest.raises(DegenerateMapError):
        nli([dx * dx], [1.0])
    s1 = da_space(1, 1)
    with pytest.raises(ValueError):
        nli([TaylorPoly.variable(s1, 0)], [1.0])


def test_split_direction_picks_dominant_variable():
    dx1, dx2 = _vars(2)
    y = [dx1 + 0.1 * dx1 * dx1, dx2 + 3.0 * dx2 * dx2]
    assert split_direction(jacobian(y, [1.0, 1.0])) == 1
