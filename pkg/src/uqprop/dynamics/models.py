"""Built-in dynamical models.

All functions work on lists of floats, numpy arrays or Taylor polynomials.
Units are km, s and rad unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uqprop.da.taylor import TaylorPoly, const_part, cos, sin, sqrt
from uqprop.dynamics.base import SdeModel, SingularStateError
from uqprop.dynamics.elements import _eq_frame, mee_to_cartesian

# ---------------------------------------------------------------------------
# Duffing map


@dataclass(frozen=True)
class DuffingParams:
    a: float = 2.75
    b: float = 0.2
    sigma: float = 0.1

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def duffing_step(state, params: DuffingParams, noise=0.0):
    """``(x, y) -> (y, -b x + a y - y^3 + sigma w)``."""
    x, y = state
    y_new = -params.b * x + params.a * y - y * y * y
    if not (isinstance(noise, (int, float)) and noise == 0):
        y_new = y_new + params.sigma * noise
    return [y, y_new]


def duffing_model(params: DuffingParams) -> SdeModel:
    """The Duffing map as a unit-step model.

    Drift and diffusion match the map written in increment form with
    ``h = 1``; ``discrete_step`` applies the map itself so the central
    sequence is the nominal orbit bit-for-bit.
    """

    def drift(s, t):
        x, y = s
        return [y - x, -params.b * x + (params.a - 1.0) * y - y * y * y]

    def diffusion(s, t):
        return [[0], [params.sigma]]

    def step(s, t, w):
        return duffing_step(s, params, w[0])

    return SdeModel(drift, n=2, m=1, diffusion=diffusion, name="duffing", discrete_step=step)


def duffing_closed_form(x0, params: DuffingParams, steps: int) -> dict:
    """Second-order moment recursions of the noisy Duffing map.

    Written out by hand for expansion order 2 and unit-variance noise, from
    a deterministic initial condition.  Returns arrays indexed by step
    (``0..steps``): ``central`` (k, 2), ``noise`` (k, 5) holding
    ``E[dW^(1,0)], E[dW^(0,1)], E[dW^(2,0)], E[dW^(1,1)], E[dW^(0,2)]``,
    ``state`` (k, 5) with the matching raw state moments, and ``cov`` (k, 2, 2).
    """
    a, b, s = params.a, params.b, params.sigma
    central = np.zeros((steps + 1, 2))
    noise = np.zeros((steps + 1, 5))
    central[0] = x0
    for k in range(1, steps + 1):
        xc, yc = central[k - 1]
        e10, e01, e20, e11, e02 = noise[k - 1]
        c = a - 3.0 * yc**2
        noise[k] = [
            e01,
            -b * e10 + c * e01 - 3.0 * yc * e02,
            e02,
            -b * e11 + c * e02,
            b**2 * e20 - 2.0 * b * c * e11 + c**2 * e02 + s**2,
        ]
        central[k] = duffing_step([xc, yc], params)
    xk, yk = central[:, 0], central[:, 1]
    e10, e01, e20, e11, e02 = noise.T
    state = np.stack(
        [
            xk + e10,
            yk + e01,
            xk**2 + 2.0 * xk * e10 + e20,
            xk * yk + yk * e10 + xk * e01 + e11,
            yk**2 + 2.0 * yk * e01 + e02,
        ],
        axis=1,
    )
    cov = np.empty((steps + 1, 2, 2))
    cov[:, 0, 0] = state[:, 2] - state[:, 0] ** 2
    cov[:, 0, 1] = cov[:, 1, 0] = state[:, 3] - state[:, 0] * state[:, 1]
    cov[:, 1, 1] = state[:, 4] - state[:, 1] ** 2
    return {"central": central, "noise": noise, "state": state, "cov": cov}


# ---------------------------------------------------------------------------
# linear test SDEs


def ou_model(a: float, sigma: float) -> SdeModel:
    """Scalar Ornstein-Uhlenbeck process ``dx = -a x dt + sigma dW``."""

    def drift(s, t):
        return [-a * s[0]]

    def diffusion(s, t):
        return [[sigma]]

    return SdeModel(drift, n=1, m=1, diffusion=diffusion, name="ou")


def ou_moments(x0: float, a: float, sigma: float, t) -> tuple:
    """Exact mean and variance of the OU process from a deterministic start."""
    t = np.asarray(t, dtype=float)
    return x0 * np.exp(-a * t), sigma**2 * (1.0 - np.exp(-2.0 * a * t)) / (2.0 * a)


def linear_model(A, G) -> SdeModel:
    """``dx = A x dt + G dW`` with constant matrices."""
    A = np.asarray(A, dtype=float)
    G = np.asarray(G, dtype=float)
    n, m = G.shape

    def drift(s, t):
        return [sum(A[i, j] * s[j] for j in range(n) if A[i, j] != 0) + 0.0 for i in range(n)]

    def diffusion(s, t):
        return [[0 if G[i, j] == 0 else float(G[i, j]) for j in range(m)] for i in range(n)]

    return SdeModel(drift, n=n, m=m, diffusion=diffusion, name="linear")


# ---------------------------------------------------------------------------
# orbital models


def _check_positive(value, what: str) -> None:
    c = const_part(value)
    if np.ndim(c) == 0 and not c > 0:
        raise SingularStateError(f"{what} must be positive (got {float(c):.3e})")


@dataclass(frozen=True)
class KeplerSdeParams:
    mu: float = 3.986e5
    sigma_w: float = 2e-4

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.sigma_w < 0:
            raise ValueError("sigma_w must be non-negative")


def kepler_planar_sde(params: KeplerSdeParams) -> SdeModel:
    """Planar two-body motion with noise ``-sigma_w / v`` on both velocity rates."""
    mu, sw = params.mu, params.sigma_w

    def drift(s, t):
        x, y, vx, vy = s
        r2 = x * x + y * y
        _check_positive(r2, "radius")
        r = sqrt(r2)
        k = -mu / (r2 * r)
        return [vx, vy, k * x, k * y]

    def diffusion(s, t):
        vx, vy = s[2], s[3]
        v2 = vx * vx + vy * vy
        _check_positive(v2, "speed")
        g = -sw / sqrt(v2)
        return [[0, 0], [0, 0], [g, 0], [0, g]]

    return SdeModel(drift, n=4, m=2, diffusion=diffusion, name="kepler_planar")


def circular_state(mu: float, radius: float) -> np.ndarray:
    """Planar state at periapsis of a circular orbit of given radius."""
    return np.array([radius, 0.0, 0.0, np.sqrt(mu / radius)])


@dataclass(frozen=True)
class GravityParams:
    mu: float = 3.986004418e5
    r_e: float = 6378.137
    j2: float = 1.0826269e-3


def gravity_accel(r, params: GravityParams, j2: bool = True):
    """Point-mass plus (optionally) J2 acceleration for position ``r``."""
    x, y, z = r
    r2 = x * x + y * y + z * z
    _check_positive(r2, "radius")
    rn = sqrt(r2)
    inv_r3 = 1.0 / (r2 * rn)
    k = -params.mu * inv_r3
    ax, ay, az = k * x, k * y, k * z
    if j2 and params.j2 != 0.0:
        inv_r2 = 1.0 / r2
        zz = z * z * inv_r2
        c = -1.5 * params.j2 * params.mu * params.r_e**2 * inv_r3 * inv_r2
        cxy = c * (1.0 - 5.0 * zz)
        ax = ax + cxy * x
        ay = ay + cxy * y
        az = az + c * (3.0 - 5.0 * zz) * z
    return [ax, ay, az]


def orbit_drift(params: GravityParams, j2: bool = True, thrust: float = 0.0):
    """Drift of a 6-D Cartesian state with optional J2 and tangential thrust."""

    def drift(s, t):
        vx, vy, vz = s[3], s[4], s[5]
        ax, ay, az = gravity_accel(s[:3], params, j2)
        if thrust:
            v2 = vx * vx + vy * vy + vz * vz
            _check_positive(v2, "speed")
            k = thrust / sqrt(v2)
            ax, ay, az = ax + k * vx, ay + k * vy, az + k * vz
        return [vx, vy, vz, ax, ay, az]

    return drift


def two_body_model(mu: float) -> SdeModel:
    return SdeModel(orbit_drift(GravityParams(mu=mu, j2=0.0), j2=False), n=6, name="two_body")


def j2_model(params: GravityParams) -> SdeModel:
    return SdeModel(orbit_drift(params, j2=True), n=6, name="j2")


@dataclass(frozen=True)
class ThrustSdeParams:
    """Units: km, s, rad.  ``a_t`` in km/s^2, ``sigma_at`` in km/s^1.5,
    angle dispersions in rad s^0.5."""

    mu: float = 3.986004418e5
    r_e: float = 6378.137
    j2: float = 1.0826269e-3
    a_t: float = 1e-7
    sigma_at: float = 5e-9
    sigma_alpha: float = np.deg2rad(5.0)
    sigma_beta: float = np.deg2rad(5.0)

    def __post_init__(self):
        if self.a_t < 0:
            raise ValueError("thrust magnitude must be non-negative")
        if min(self.sigma_at, self.sigma_alpha, self.sigma_beta) < 0:
            raise ValueError("dispersions must be non-negative")

    @property
    def gravity(self) -> GravityParams:
        return GravityParams(self.mu, self.r_e, self.j2)


def thrust_jacobian(v, a_t: float):
    """Columns of d(thrust vector)/d(magnitude, in-plane angle, out-of-plane angle).

    Returned as a 3x3 nested list ``J[i][j]``.
    """
    vx, vy, vz = v
    vxy2 = vx * vx + vy * vy
    _check_positive(vxy2, "in-plane speed")
    v2 = vxy2 + vz * vz
    vn = sqrt(v2)
    vxy = sqrt(vxy2)
    inv_v = 1.0 / vn
    inv = inv_v / vxy
    return [
        [vx * inv_v, -a_t * vy * inv_v, -a_t * vx * vz * inv],
        [vy * inv_v, a_t * vx * inv_v, -a_t * vy * vz * inv],
        [vz * inv_v, 0, a_t * vxy * inv_v],
    ]


def thrust_sde(params: ThrustSdeParams, j2: bool = True) -> SdeModel:
    """Tangential-thrust orbit with thrust-dispersion noise on three channels.

    ``j2=False`` drops the oblateness term from the drift (the diffusion is
    unchanged), giving the cheaper companion model.
    """
    drift = orbit_drift(params.gravity, j2=j2, thrust=params.a_t)
    sig = (params.sigma_at, params.sigma_alpha, params.sigma_beta)

    def diffusion(s, t):
        jac = thrust_jacobian(s[3:6], params.a_t)
        low = [[0 if (isinstance(jij, (int, float)) and jij == 0) else jij * sj for jij, sj in zip(row, sig)] for row in jac]
        return [[0, 0, 0], [0, 0, 0], [0, 0, 0]] + low

    return SdeModel(drift, n=6, m=3, diffusion=diffusion, name="thrust_j2" if j2 else "thrust_2body")


# ---------------------------------------------------------------------------
# the same thrust model written in modified equinoctial elements


def j2_accel(r, params: GravityParams):
    """Oblateness acceleration alone."""
    x, y, z = r
    r2 = x * x + y * y + z * z
    _check_positive(r2, "radius")
    inv_r2 = 1.0 / r2
    inv_r5 = inv_r2 * inv_r2 / sqrt(r2)
    zz = z * z * inv_r2
    c = -1.5 * params.j2 * params.mu * params.r_e**2 * inv_r5
    cxy = c * (1.0 - 5.0 * zz)
    return [cxy * x, cxy * y, c * (3.0 - 5.0 * zz) * z]


class _MeeGeometry:
    """Quantities shared by the Gauss equations at one MEE state."""

    def __init__(self, s, mu: float):
        p, f, g, h, k, big_l = s
        _check_positive(p, "semi-latus rectum")
        self.p, self.f, self.g, self.h, self.k = p, f, g, h, k
        self.cl, self.sl = cos(big_l), sin(big_l)
        self.w = 1.0 + f * self.cl + g * self.sl
        self.s2 = 1.0 + h * h + k * k
        self.q = sqrt(p) / np.sqrt(mu)
        self.hsk = h * self.sl - k * self.cl
        fh, gh = _eq_frame(h, k)
        self.rhat = [self.cl * a + self.sl * b for a, b in zip(fh, gh)]
        self.that = [self.cl * b - self.sl * a for a, b in zip(fh, gh)]
        self.nhat = [2.0 * k / self.s2, -2.0 * h / self.s2, (1.0 - h * h - k * k) / self.s2]
        self.cart = mee_to_cartesian(s, mu)

    def project(self, a):
        """Radial, transverse and normal components of a Cartesian vector."""
        dot = lambda u: u[0] * a[0] + u[1] * a[1] + u[2] * a[2]  # noqa: E731
        return dot(self.rhat), dot(self.that), dot(self.nhat)

    def rates(self, ar, at, an):
        """Element rates due to a perturbing acceleration in RTN components."""
        q, w, f, g, cl, sl = self.q, self.w, self.f, self.g, self.cl, self.sl
        qw = q / w
        return [
            2.0 * self.p * qw * at,
            q * ar * sl + qw * (((w + 1.0) * cl + f) * at - self.hsk * g * an),
            -q * ar * cl + qw * (((w + 1.0) * sl + g) * at + self.hsk * f * an),
            0.5 * qw * self.s2 * cl * an,
            0.5 * qw * self.s2 * sl * an,
            qw * self.hsk * an,
        ]


def mee_gauss_rates(s, accel_fn, mu: float):
    """Rates of ``(p, f, g, h, k, L)`` under a Cartesian perturbation.

    ``accel_fn(cart)`` returns the perturbing acceleration for the Cartesian
    state; the Keplerian motion of ``L`` is included.
    """
    geo = _MeeGeometry(s, mu)
    out = geo.rates(*geo.project(accel_fn(geo.cart)))
    out[5] = out[5] + np.sqrt(mu) * sqrt(geo.p) * (geo.w / geo.p) ** 2
    return out


def thrust_sde_mee(params: ThrustSdeParams, j2: bool = True) -> SdeModel:
    """:func:`thrust_sde` in modified equinoctial elements with true longitude.

    The drift applies the Gauss equations to the J2 (optional) and thrust
    accelerations; the diffusion maps every thrust-dispersion column the
    same way.  The Ito correction of the change of variables is neglected
    (it is of order ``(a_t sigma)^2``).
    """
    gp = params.gravity
    mu, a_t = params.mu, params.a_t
    sig = (params.sigma_at, params.sigma_alpha, params.sigma_beta)

    def perturbation(cart):
        vx, vy, vz = cart[3:6]
        v2 = vx * vx + vy * vy + vz * vz
        _check_positive(v2, "speed")
        kt = a_t / sqrt(v2)
        acc = [kt * vx, kt * vy, kt * vz]
        if j2 and gp.j2 != 0.0:
            acc = [ai + bi for ai, bi in zip(acc, j2_accel(cart[:3], gp))]
        return acc

    def drift(s, t):
        return mee_gauss_rates(s, perturbation, mu)

    def diffusion(s, t):
        geo = _MeeGeometry(s, mu)
        jac = thrust_jacobian(geo.cart[3:6], a_t)
        cols = []
        for j in range(3):
            col = [jac[i][j] * sig[j] for i in range(3)]
            cols.append(geo.rates(*geo.project(col)))
        return [[cols[j][i] for j in range(3)] for i in range(6)]

    return SdeModel(drift, n=6, m=3, diffusion=diffusion, name="thrust_mee_j2" if j2 else "thrust_mee_2body")


def is_poly(x) -> bool:
    return isinstance(x, TaylorPoly)
