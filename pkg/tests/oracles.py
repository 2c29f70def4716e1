"""Independent reference implementations used by the tests.

Polynomials are plain ``{exponent tuple: int}`` dictionaries so the
arithmetic is exact and shares no code with the package.
"""

from __future__ import annotations

import itertools

import numpy as np


def random_poly(rng: np.random.Generator, n: int, k: int, lo: int = -4, hi: int = 4, density: float = 0.6) -> dict:
    out = {}
    for e in itertools.product(range(k + 1), repeat=n):
        if sum(e) <= k and rng.random() < density:
            c = int(rng.integers(lo, hi + 1))
            if c:
                out[e] = c
    return out


def poly_mul(a: dict, b: dict, k: int) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            if sum(e) <= k:
                out[e] = out.get(e, 0) + ca * cb
    return {e: c for e, c in out.items() if c}


def poly_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0) + c
    return {e: c for e, c in out.items() if c}


def poly_compose(f: dict, g: list, n_out: int, k: int) -> dict:
    """``f(g_1, ..., g_n)`` truncated at total degree ``k``."""
    one = {(0,) * n_out: 1}
    out: dict = {}
    for e, c in f.items():
        term = dict(one)
        for gi, p in zip(g, e):
            for _ in range(p):
                term = poly_mul(term, gi, k)
        out = poly_add(out, {ee: c * cc for ee, cc in term.items()})
    return out


def duffing_second_order(x0, a: float, b: float, sigma: float, steps: int):
    """Mean and covariance of the noisy Duffing map to second order, by
    direct propagation of the linearised-plus-quadratic state deviation.

    The deviation ``d_k = x_k - c_k`` about the noise-free orbit ``c_k`` is
    tracked through its first two raw moments; third-order terms are dropped
    exactly as a second-order truncated expansion does.
    """
    c = np.array(x0, dtype=float)
    m1 = np.zeros(2)
    m2 = np.zeros((2, 2))
    for _ in range(steps):
        xc, yc = c
        # y' = -b x + a y - y^3 + s w ; x' = y
        jac = np.array([[0.0, 1.0], [-b, a - 3.0 * yc * yc]])
        hess_y = -3.0 * yc  # coefficient of dy^2 in the second component
        new_m1 = jac @ m1
        new_m1[1] += hess_y * m2[1, 1]
        new_m2 = jac @ m2 @ jac.T
        new_m2[1, 1] += sigma**2
        c = np.array([yc, -b * xc + a * yc - yc**3])
        m1, m2 = new_m1, new_m2
    mean = c + m1
    cov = m2 - np.outer(m1, m1)
    return mean, cov
