"""Conversions between Cartesian, Keplerian and modified equinoctial elements.

Keplerian elements are ``(a, e, i, raan, argp, nu)``.  Modified equinoctial
elements are ``(p, f, g, h, k, L)`` with true longitude ``L``; the
``mee_mean`` set replaces ``L`` by the mean longitude.  Every function works
on floats, arrays and Taylor polynomials; angles are not wrapped so that
polynomial expansions stay smooth.
"""

from __future__ import annotations

import numpy as np

from uqprop.da.taylor import atan2, const_part, cos, sin, sqrt

SETS = ("cartesian", "keplerian", "mee", "mee_mean")


class SingularElementsError(ValueError):
    """The requested element set is undefined for this geometry."""


def _cross(a, b):
    return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _min_const(x) -> float:
    return float(np.min(const_part(x)))


def keplerian_to_cartesian(kep, mu: float):
    a, e, inc, raan, argp, nu = kep
    p = a * (1.0 - e * e)
    cn, sn = cos(nu), sin(nu)
    r = p / (1.0 + e * cn)
    k = np.sqrt(mu) / sqrt(p)
    xp, yp = r * cn, r * sn
    vxp, vyp = -k * sn, k * (e + cn)
    cO, sO, cw, sw, ci, si = cos(raan), sin(raan), cos(argp), sin(argp), cos(inc), sin(inc)
    r11 = cO * cw - sO * sw * ci
    r12 = -cO * sw - sO * cw * ci
    r21 = sO * cw + cO * sw * ci
    r22 = -sO * sw + cO * cw * ci
    r31 = sw * si
    r32 = cw * si
    return [
        r11 * xp + r12 * yp,
        r21 * xp + r22 * yp,
        r31 * xp + r32 * yp,
        r11 * vxp + r12 * vyp,
        r21 * vxp + r22 * vyp,
        r31 * vxp + r32 * vyp,
    ]


def cartesian_to_keplerian(cart, mu: float):
    r, v = list(cart[:3]), list(cart[3:6])
    h = _cross(r, v)
    rn = sqrt(_dot(r, r))
    v2 = _dot(v, v)
    vxh = _cross(v, h)
    ev = [vxh[i] / mu - r[i] / rn for i in range(3)]
    e2 = _dot(ev, ev)
    if _min_const(e2) < 1e-20:
        raise SingularElementsError("eccentricity is zero: argument of periapsis undefined")
    node = [-h[1], h[0], 0.0]
    nn2 = node[0] * node[0] + node[1] * node[1]
    hn = sqrt(_dot(h, h))
    if _min_const(nn2) < 1e-20 * _min_const(hn * hn):
        raise SingularElementsError("inclination is zero: ascending node undefined")
    a = 1.0 / (2.0 / rn - v2 / mu)
    e = sqrt(e2)
    inc = atan2(sqrt(nn2), h[2])
    raan = atan2(h[0], -h[1])
    nxe = _cross(node, ev)
    argp = atan2(_dot(nxe, h) / hn, _dot(node, ev))
    exr = _cross(ev, r)
    nu = atan2(_dot(exr, h) / hn, _dot(ev, r))
    return [a, e, inc, raan, argp, nu]


def keplerian_to_mee(kep):
    a, e, inc, raan, argp, nu = kep
    lp = raan + argp
    t = sin(inc) / (1.0 + cos(inc))  # tan(i / 2)
    return [a * (1.0 - e * e), e * cos(lp), e * sin(lp), t * cos(raan), t * sin(raan), lp + nu]


def _eq_frame(h, k):
    s2 = 1.0 + h * h + k * k
    fh = [(1.0 - k * k + h * h) / s2, 2.0 * k * h / s2, -2.0 * k / s2]
    gh = [2.0 * k * h / s2, (1.0 + k * k - h * h) / s2, 2.0 * h / s2]
    return fh, gh


def cartesian_to_mee(cart, mu: float):
    r, v = list(cart[:3]), list(cart[3:6])
    hv = _cross(r, v)
    hn = sqrt(_dot(hv, hv))
    hz1 = 1.0 + hv[2] / hn
    if _min_const(hz1) <= 1e-12:
        raise SingularElementsError("retrograde equatorial orbit: equinoctial elements undefined")
    hh = -(hv[1] / hn) / hz1
    kk = (hv[0] / hn) / hz1
    p = _dot(hv, hv) / mu
    rn = sqrt(_dot(r, r))
    vxh = _cross(v, hv)
    ev = [vxh[i] / mu - r[i] / rn for i in range(3)]
    fh, gh = _eq_frame(hh, kk)
    f = _dot(ev, fh)
    g = _dot(ev, gh)
    big_l = atan2(_dot(r, gh), _dot(r, fh))
    return [p, f, g, hh, kk, big_l]


def mee_to_cartesian(mee, mu: float):
    p, f, g, h, k, big_l = mee
    cl, sl = cos(big_l), sin(big_l)
    w = 1.0 + f * cl + g * sl
    r = p / w
    fh, gh = _eq_frame(h, k)
    x1, y1 = r * cl, r * sl
    c = np.sqrt(mu) / sqrt(p)
    vx1 = -c * (g + sl)
    vy1 = c * (f + cl)
    return [x1 * fh[i] + y1 * gh[i] for i in range(3)] + [vx1 * fh[i] + vy1 * gh[i] for i in range(3)]


def _beta(f, g):
    return 1.0 / (1.0 + sqrt(1.0 - f * f - g * g))


def true_to_mean_longitude(mee):
    """Replace ``L`` by the mean longitude via the eccentric longitude."""
    p, f, g, h, k, big_l = mee
    cl, sl = cos(big_l), sin(big_l)
    r_over_a = (1.0 - f * f - g * g) / (1.0 + f * cl + g * sl)
    x1, y1 = r_over_a * cl, r_over_a * sl
    b = _beta(f, g)
    # solve the 2x2 system for (cos K, sin K)
    u, w_ = x1 + f, y1 + g
    a11, a12, a21, a22 = 1.0 - g * g * b, f * g * b, f * g * b, 1.0 - f * f * b
    det = a11 * a22 - a12 * a21
    ck = (a22 * u - a12 * w_) / det
    sk = (a11 * w_ - a21 * u) / det
    kk = atan2(sk, ck)
    kk = kk + _unwrap_offset(kk, big_l)
    lam = kk + g * cos(kk) - f * sin(kk)
    return [p, f, g, h, k, lam]


def _unwrap_offset(angle, ref):
    # multiple of 2 pi bringing `angle` next to `ref` (constant parts only)
    d = np.asarray(const_part(ref)) - np.asarray(const_part(angle))
    off = 2.0 * np.pi * np.round(d / (2.0 * np.pi))
    return float(off) if np.ndim(off) == 0 else off


def mean_to_true_longitude(mee, iterations: int = 12):
    """Solve ``lambda = K + g cos K - f sin K`` for ``K`` and return ``L``."""
    p, f, g, h, k, lam = mee
    kk = lam
    for _ in range(iterations):
        ck, sk = cos(kk), sin(kk)
        res = kk + g * ck - f * sk - lam
        kk = kk - res / (1.0 - g * sk - f * ck)
    ck, sk = cos(kk), sin(kk)
    b = _beta(f, g)
    x1 = (1.0 - g * g * b) * ck + f * g * b * sk - f
    y1 = (1.0 - f * f * b) * sk + f * g * b * ck - g
    big_l = atan2(y1, x1)
    big_l = big_l + _unwrap_offset(big_l, kk)
    return [p, f, g, h, k, big_l]


def convert(state, src: str, dst: str, mu: float):
    """Convert a 6-element state between ``SETS``."""
    if src not in SETS or dst not in SETS:
        raise ValueError(f"element sets must be among {SETS}")
    s = list(state)
    if src == dst:
        return s
    # go through Cartesian unless a direct route exists
    if src == "keplerian" and dst in ("mee", "mee_mean"):
        m = keplerian_to_mee(s)
        return true_to_mean_longitude(m) if dst == "mee_mean" else m
    if src == "mee" and dst == "mee_mean":
        return true_to_mean_longitude(s)
    if src == "mee_mean" and dst == "mee":
        return mean_to_true_longitude(s)
    if src == "keplerian":
        cart = keplerian_to_cartesian(s, mu)
    elif src == "mee":
        cart = mee_to_cartesian(s, mu)
    elif src == "mee_mean":
        cart = mee_to_cartesian(mean_to_true_longitude(s), mu)
    else:
        cart = s
    if dst == "cartesian":
        return cart
    if dst == "keplerian":
        return cartesian_to_keplerian(cart, mu)
    m = cartesian_to_mee(cart, mu)
    return true_to_mean_longitude(m) if dst == "mee_mean" else m
