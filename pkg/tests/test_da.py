import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import poly_compose, poly_mul, random_poly

from uqprop.da import (
    SingularExpansionError,
    TaylorPoly,
    UncertaintyDomain,
    atan2,
    binomial,
    compose,
    cos,
    da_space,
    dimension,
    enumerate_multi_indices,
    evaluate,
    exp,
    intrinsic,
    log,
    partial,
    sin,
    sqrt,
    sub_indices,
)


def _tp(terms: dict, n: int, k: int) -> TaylorPoly:
    return TaylorPoly.from_terms(n, k, terms)


def _same(p: TaylorPoly, terms: dict) -> bool:
    return p.terms() == {e: float(c) for e, c in terms.items()}


# -- multi-indices -------------------------------------------------------------


def test_dimension_of_six_variables_second_order():
    assert dimension(6, 2) == 28


@given(st.integers(1, 6), st.integers(0, 6))
def test_dimension_matches_enumeration(n, k):
    idx = enumerate_multi_indices(n, k)
    assert len(idx) == dimension(n, k) == math.comb(n + k, k)
    assert len(set(idx)) == len(idx)
    degrees = [sum(e) for e in idx]
    assert degrees == sorted(degrees)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=4))
def test_sub_indices_and_binomial(r):
    subs = list(sub_indices(r))
    assert len(subs) == math.prod(v + 1 for v in r)
    # sum of multinomial-style binomials over all sub-indices is 2^|r|
    assert sum(binomial(r, rp) for rp in subs) == 2 ** sum(r)


# -- exact algebra against the brute-force oracle ----------------------------


def test_multiplication_matches_oracle_exactly():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n, k = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        a, b = random_poly(rng, n, k), random_poly(rng, n, k)
        assert _same(_tp(a, n, k) * _tp(b, n, k), poly_mul(a, b, k))


def test_composition_matches_oracle_exactly():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n, k = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        m = int(rng.integers(1, 4))
        f = random_poly(rng, m, k, -3, 3)
        g = [random_poly(rng, n, k, -2, 2, 0.4) for _ in range(m)]
        got = compose(_tp(f, m, k), [_tp(gi, n, k) for gi in g])
        assert _same(got, poly_compose(f, g, n, k))


int_coeffs = st.integers(-5, 5)


@st.composite
def int_polys(draw, count=3):
    n = draw(st.integers(1, 3))
    k = draw(st.integers(1, 4))
    space = da_space(n, k)
    out = []
    for _ in range(count):
        c = np.array(draw(st.lists(int_coeffs, min_size=space.dim, max_size=space.dim)), dtype=float)
        out.append(TaylorPoly(space, c))
    return out


@given(int_polys())
def test_ring_axioms_exact(ps):
    a, b, c = ps
    assert np.array_equal(((a * b) * c).coeffs, (a * (b * c)).coeffs)
    assert np.array_equal((a * (b + c)).coeffs, (a * b + a * c).coeffs)
    assert np.array_equal((a * b).coeffs, (b * a).coeffs)
    assert np.array_equal((a - a).coeffs, np.zeros(a.space.dim))


@given(int_polys(count=2))
def test_product_rule(ps):
    a, b = ps
    for v in range(a.nvars):
        lhs = partial(a * b, v)
        rhs = partial(a, v) * b + a * partial(b, v)
        # the truncated product drops top-degree terms of `a * b`, so compare
        # below the top order only
        top = a.order - 1
        assert np.array_equal(lhs.truncate(top).coeffs, rhs.truncate(top).coeffs)


def test_partial_of_monomial():
    p = _tp({(2, 1): 3.0, (0, 1): 1.0}, 2, 3)
    assert partial(p, 0).terms() == {(1, 1): 6.0}
    assert partial(p, 1).terms() == {(2, 0): 3.0, (0, 0): 1.0}


# -- elementary functions --------------------------------------------------------


@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0), st.integers(2, 8))
def test_intrinsic_identities(a0, b0, k):
    space = da_space(2, k)
    x = TaylorPoly.variable(space, 0, a0) + 0.3 * TaylorPoly.variable(space, 1)
    y = TaylorPoly.variable(space, 1, b0)
    one = np.zeros(space.dim)
    one[0] = 1.0
    np.testing.assert_allclose((sin(y) * sin(y) + cos(y) * cos(y)).coeffs, one, atol=1e-13)
    # the series of 1/x, log x and sqrt x grow like a0**-j: scale by that
    inv = 1.0 / x
    scale = np.abs(inv.coeffs).max() * np.abs(x.coeffs).max()
    np.testing.assert_allclose(exp(log(x)).coeffs, x.coeffs, atol=1e-14 * scale * max(1.0, a0))
    np.testing.assert_allclose((sqrt(x) * sqrt(x)).coeffs, x.coeffs, atol=1e-14 * scale * max(1.0, a0))
    np.testing.assert_allclose((x * inv).coeffs, one, atol=1e-14 * scale)
    theta = atan2(sin(y) * x, cos(y) * x)
    np.testing.assert_allclose(theta.coeffs, y.coeffs, atol=1e-14 * scale)


def test_series_matches_taylor_coefficients():
    s = da_space(1, 6)
    x = TaylorPoly.variable(s, 0, 0.0)
    np.testing.assert_allclose(exp(x).coeffs, [1 / math.factorial(j) for j in range(7)], rtol=1e-15)
    np.testing.assert_allclose(log(1.0 + x).coeffs, [0, 1, -1 / 2, 1 / 3, -1 / 4, 1 / 5, -1 / 6], rtol=1e-15)
    np.testing.assert_allclose(sin(x).coeffs, [0, 1, 0, -1 / 6, 0, 1 / 120, 0], rtol=1e-15)


def test_truncation_error_shrinks_with_order():
    errs = []
    for k in (2, 4, 6):
        s = da_space(1, k)
        f = exp(sin(TaylorPoly.variable(s, 0, 0.4)))
        errs.append(abs(evaluate(f, [0.1]) - math.exp(math.sin(0.5))))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-8


@pytest.mark.parametrize(
    "fn, value",
    [("sqrt", 0.0), ("log", 0.0), ("log", -1.0), ("reciprocal", 0.0), ("sqrt", -2.0)],
)
def test_singular_expansions_raise(fn, value):
    p = TaylorPoly.variable(da_space(1, 3), 0, value)
    with pytest.raises(SingularExpansionError):
        intrinsic(p, fn)


def test_atan2_at_origin_raises():
    p = TaylorPoly.variable(da_space(1, 2), 0, 0.0)
    with pytest.raises(SingularExpansionError):
        atan2(p, 0.0)


def test_mixed_algebras_rejected():
    a = TaylorPoly.variable(da_space(2, 2), 0)
    b = TaylorPoly.variable(da_space(2, 3), 0)
    with pytest.raises(ValueError):
        a + b


def test_serialisation_round_trip():
    rng = np.random.default_rng(0)
    s = da_space(3, 3)
    p = TaylorPoly(s, rng.normal(size=s.dim))
    q = TaylorPoly.from_dict(p.to_dict())
    assert q.space is s
    assert np.array_equal(p.coeffs, q.coeffs)


# -- uncertainty domain ----------------------------------------------------------


@given(st.integers(1, 5), st.integers(0, 10_000), st.floats(1.0, 5.0))
def test_domain_round_trip(n, seed, zeta):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    cov = a @ a.T + 0.1 * np.eye(n)
    mean = rng.normal(size=n)
    dom = UncertaintyDomain(mean, cov, zeta)
    dx = rng.uniform(-1, 1, size=(4, n))
    x = dom.from_deviation(dx)
    np.testing.assert_allclose(dom.to_deviation(x), dx, atol=1e-9)
    polys = dom.to_polys(2)
    vals = np.stack([evaluate(p, dx) for p in polys], axis=1)
    np.testing.assert_allclose(vals, x, atol=1e-12 * (1 + np.abs(x).max()))
    np.testing.assert_allclose(dom.beta, zeta * np.sqrt(np.linalg.eigvalsh(cov)), rtol=1e-10)


def test_domain_rejects_indefinite_covariance():
    with pytest.raises(ValueError):
        UncertaintyDomain(np.zeros(2), np.diag([1.0, -1.0]))
