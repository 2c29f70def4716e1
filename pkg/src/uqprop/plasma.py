"""Polynomial propagation of the raw moments of an SDE solution.

The state is split into a deterministic central sequence and an effective
noise ``dW_k``.  Each step expands ``dW_k`` as a polynomial in the previous
effective noise and the Wiener increment of the step (one integration step
in the Taylor algebra with ``n + m`` variables), then maps the moments
``E[dW_{k-1}^r]`` to ``E[dW_k^r]`` for every multi-index ``|r| <= N`` using
independence of the new increment and Gaussian increment moments.

A second driver keeps the moments about a precomputed reference trajectory
and only expands the relative dynamics of a cheaper drift.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from uqprop.da.multiindex import binomial, sub_indices
from uqprop.da.taylor import DASpace, TaylorPoly, da_space
from uqprop.dynamics.base import NonFiniteStateError, SdeModel, rk4_step, time_grid

Stepper = Callable[[SdeModel, list, float, float, list], list]


# ---------------------------------------------------------------------------
# moment containers


@dataclass
class NoiseMomentSet:
    """Raw moments of the effective noise about a central state.

    ``moments[i]`` is ``E[dW^r]`` for the ``i``-th multi-index of
    ``da_space(n, order)``; ``moments[0] == 1``.
    """

    order: int
    moments: np.ndarray
    central: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.central = np.asarray(self.central, dtype=float)
        self.moments = np.asarray(self.moments, dtype=float)
        if self.moments.shape != (self.space.dim,):
            raise ValueError("moment vector does not match (n, order)")

    @property
    def n(self) -> int:
        return self.central.size

    @property
    def space(self) -> DASpace:
        return da_space(self.central.size, self.order)

    def moment(self, r: Sequence[int]) -> float:
        r = tuple(int(v) for v in r)
        if sum(r) > self.order:
            raise ValueError(f"|r| = {sum(r)} exceeds the moment order {self.order}")
        return float(self.moments[self.space.index[r]])

    @classmethod
    def deterministic(cls, x0, order: int, t0: float = 0.0) -> "NoiseMomentSet":
        x0 = np.asarray(x0, dtype=float)
        mom = np.zeros(da_space(x0.size, order).dim)
        mom[0] = 1.0
        return cls(order, mom, x0, t0)

    @classmethod
    def gaussian(cls, mean, cov, order: int, t0: float = 0.0) -> "NoiseMomentSet":
        """Central state ``mean`` with zero-mean Gaussian noise of covariance ``cov``."""
        mean = np.asarray(mean, dtype=float)
        return cls(order, gaussian_moments(cov, order), mean, t0)

    def copy(self) -> "NoiseMomentSet":
        return NoiseMomentSet(self.order, self.moments.copy(), self.central.copy(), self.time)

    def rows(self) -> list[list]:
        """``[time, *r, value]`` rows for export."""
        return [[self.time, *map(int, e), float(v)] for e, v in zip(self.space.exponents, self.moments)]


def gaussian_moments(cov, order: int) -> np.ndarray:
    """Raw moments ``E[z^r]`` of ``z ~ N(0, cov)`` for all ``|r| <= order``."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    space = da_space(n, order)
    memo = {(0,) * n: 1.0}

    def mom(r):
        if r in memo:
            return memo[r]
        i = next(k for k, v in enumerate(r) if v > 0)
        rp = list(r)
        rp[i] -= 1
        total = 0.0
        for j in range(n):
            if rp[j] > 0 and cov[i, j] != 0.0:
                rr = list(rp)
                rr[j] -= 1
                total += cov[i, j] * rp[j] * mom(tuple(rr))
        memo[r] = total
        return total

    return np.array([mom(tuple(int(v) for v in e)) for e in space.exponents])


def _double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def gaussian_increment_moments(s: Sequence[int], h: float) -> float:
    """``E[dW^s]`` for independent components ``dW_j ~ N(0, h)``."""
    if not h > 0:
        raise ValueError("h must be positive")
    out = 1.0
    for sj in s:
        if sj % 2:
            return 0.0
        if sj:
            out *= _double_factorial(sj - 1) * h ** (sj // 2)
    return out


# ---------------------------------------------------------------------------
# state statistics


def state_moments(ms: NoiseMomentSet, r: Sequence[int]) -> float:
    """Raw state moment ``E[X^r]`` from the noise moments by the binomial theorem."""
    r = tuple(int(v) for v in r)
    if sum(r) > ms.order:
        raise ValueError(f"|r| = {sum(r)} exceeds the moment order {ms.order}")
    total = 0.0
    for rp in sub_indices(r):
        c = 1.0
        for ci, ri, rpi in zip(ms.central, r, rp):
            if ri - rpi:
                c *= ci ** (ri - rpi)
        total += binomial(r, rp) * c * ms.moments[ms.space.index[rp]]
    return total


def state_mean(ms: NoiseMomentSet) -> np.ndarray:
    return ms.central + ms.moments[1 : 1 + ms.n]


def state_covariance(ms: NoiseMomentSet) -> np.ndarray:
    """Covariance ``E[dW_i dW_j] - E[dW_i] E[dW_j]``."""
    if ms.order < 2:
        raise ValueError("covariance needs moments of order >= 2")
    n = ms.n
    idx = ms.space.index
    first = ms.moments[1 : 1 + n]
    cov = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            e = [0] * n
            e[i] += 1
            e[j] += 1
            cov[i, j] = cov[j, i] = ms.moments[idx[tuple(e)]] - first[i] * first[j]
    return cov


def recenter(ms: NoiseMomentSet, new_central) -> NoiseMomentSet:
    """Same distribution, moments taken about ``new_central``."""
    new_central = np.asarray(new_central, dtype=float)
    shift = ms.central - new_central
    shifted = NoiseMomentSet(ms.order, ms.moments, shift, ms.time)
    mom = np.array([state_moments(shifted, e) for e in ms.space.exponents])
    return NoiseMomentSet(ms.order, mom, new_central, ms.time)


# ---------------------------------------------------------------------------
# per-algebra lookup tables


@dataclass(frozen=True)
class _StepTables:
    big: DASpace
    small: DASpace
    noise_degree: np.ndarray  # |s| of each monomial of the big algebra
    prev_index: np.ndarray  # position of r' in the small algebra
    s_exponents: np.ndarray  # s part of each monomial
    small_in_big: np.ndarray  # position of (r, 0) in the big algebra


@functools.lru_cache(maxsize=None)
def _tables(n: int, m: int, order: int) -> _StepTables:
    big = da_space(n + m, order)
    small = da_space(n, order)
    ex = big.exponents
    prev = small.lookup(ex[:, :n])
    sm = np.concatenate([small.exponents, np.zeros((small.dim, m), dtype=np.int64)], axis=1)
    return _StepTables(big, small, ex[:, n:].sum(axis=1), prev, ex[:, n:], big.lookup(sm))


@functools.lru_cache(maxsize=256)
def _increment_weights(n: int, m: int, order: int, h: float) -> np.ndarray:
    tab = _tables(n, m, order)
    return np.array([gaussian_increment_moments(s, h) for s in tab.s_exponents])


@functools.lru_cache(maxsize=256)
def _rescale(n: int, m: int, order: int, h: float) -> np.ndarray:
    return (1.0 / h) ** _tables(n, m, order).noise_degree.astype(float)


def _update_moments(dw: list[TaylorPoly], prev: np.ndarray, n: int, m: int, order: int, h: float) -> np.ndarray:
    # E[dW_k^r] = sum over monomials w^s x^r' of coeff * E[dw^s] * E[dW_{k-1}^r']
    tab = _tables(n, m, order)
    big, small = tab.big, tab.small
    weights = _increment_weights(n, m, order, h) * prev[tab.prev_index]
    dwc = [p.coeffs for p in dw]
    prods = [None] * small.dim
    prods[0] = np.zeros(big.dim)
    prods[0][0] = 1.0
    out = np.empty(small.dim)
    out[0] = 1.0
    for idx in range(1, small.dim):
        prods[idx] = big.mul(prods[small.parent[idx]], dwc[small.parent_var[idx]])
        out[idx] = prods[idx] @ weights
    return out


# ---------------------------------------------------------------------------
# steppers of the pseudo-ODE  x' = u(x, t) + G(x, t) w


def _em_pseudo(model: SdeModel, x, t, h, w):
    rate = model.pseudo_rate(x, t, w)
    return [xi + h * ri for xi, ri in zip(x, rate)]


def _rk4_pseudo(model: SdeModel, x, t, h, w):
    return rk4_step(lambda s, tt: model.pseudo_rate(s, tt, w), x, t, h)


_STEPPERS = {"euler_maruyama": _em_pseudo, "em": _em_pseudo, "rk4": _rk4_pseudo}


def _resolve(integ):
    if callable(integ):
        return integ, True
    if integ == "map":
        return None, False
    try:
        return _STEPPERS[integ], True
    except KeyError:
        raise ValueError(f"unknown integrator {integ!r}") from None


def _check(polys, t):
    for p in polys:
        if not p.is_finite():
            raise NonFiniteStateError(t, "non-finite Taylor coefficients")


def plasma_step(
    model: SdeModel,
    ms: NoiseMomentSet,
    h: float,
    integ: str | Stepper = "euler_maruyama",
    substeps: int = 1,
) -> NoiseMomentSet:
    """Advance the noise moments over one moment-update interval ``h``.

    ``integ`` is ``"euler_maruyama"``, ``"rk4"``, ``"map"`` (use the model's
    ``discrete_step``; its noise argument already is the increment) or a
    callable ``(model, x, t, h, w) -> x``.  With ``substeps > 1`` the
    interval is covered by that many integration steps and rescaled once.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if abs(ms.moments[0] - 1.0) > 1e-12:
        raise ValueError("moment set is not normalized")
    n, m, order = model.n, model.m, ms.order
    big = da_space(n + m, order)
    x = [TaylorPoly.variable(big, i, ms.central[i]) for i in range(n)]
    w = [TaylorPoly.variable(big, n + j) for j in range(m)]
    stepper, scaled = _resolve(integ)
    t = ms.time
    if stepper is None:
        if model.discrete_step is None:
            raise ValueError("model has no discrete map")
        x = model.discrete_step(x, t, w)
    else:
        hs = h / substeps
        for k in range(substeps):
            x = stepper(model, x, t + k * hs, hs, w)
    x = [p if isinstance(p, TaylorPoly) else TaylorPoly.constant(big, p) for p in x]
    t_new = t + h
    _check(x, t_new)
    if scaled and m:
        sc = _rescale(n, m, order, h)
        x = [TaylorPoly(big, p.coeffs * sc) for p in x]
    central = np.array([p.coeffs[0] for p in x])
    dw = [p.with_const(0.0) for p in x]
    mom = _update_moments(dw, ms.moments, n, m, order, h) if m or order else ms.moments.copy()
    if not np.all(np.isfinite(mom)):
        raise NonFiniteStateError(t_new, "non-finite moments")
    return NoiseMomentSet(order, mom, central, t_new)


def _as_moment_set(ic, order: int, t0: float) -> NoiseMomentSet:
    if isinstance(ic, NoiseMomentSet):
        if ic.order != order:
            raise ValueError("initial moment set has a different order")
        out = ic.copy()
        out.time = t0
        return out
    return NoiseMomentSet.deterministic(ic, order, t0)


def _outputs(grid: np.ndarray, output_times) -> set:
    if output_times is None:
        return {len(grid) - 1}
    if isinstance(output_times, str) and output_times == "all":
        return set(range(len(grid)))
    keep = set()
    for to in np.atleast_1d(output_times):
        k = int(np.argmin(np.abs(grid - to)))
        if not np.isclose(grid[k], to, rtol=0, atol=1e-9 * max(1.0, abs(to))):
            raise ValueError(f"output time {to} is not on the step grid")
        keep.add(k)
    return keep


def plasma_run(
    model: SdeModel,
    ic,
    t0: float,
    tf: float,
    h: float,
    order: int = 2,
    integ: str | Stepper = "euler_maruyama",
    substeps: int = 1,
    output_times=None,
) -> list[NoiseMomentSet]:
    """Repeated :func:`plasma_step` over ``t0, t0 + h, ..., tf``.

    ``ic`` is a deterministic state or a :class:`NoiseMomentSet`.  Returns the
    moment sets at ``output_times`` (grid points, or ``"all"``); by default
    only the final one.  The last step is shortened if ``h`` does not divide
    the interval.
    """
    ms = _as_moment_set(ic, order, t0)
    if tf == t0:
        return [ms]
    grid = time_grid(t0, tf, h)
    keep = _outputs(grid, output_times)
    out = [ms.copy()] if 0 in keep else []
    for k in range(1, len(grid)):
        ms = plasma_step(model, ms, grid[k] - grid[k - 1], integ, substeps)
        ms.time = grid[k]
        if k in keep:
            out.append(ms)
    return out


# ---------------------------------------------------------------------------
# reference trajectory and the relative-dynamics driver


@dataclass
class DenseOutput:
    """Cubic Hermite interpolant through integrator nodes and their rates."""

    times: np.ndarray
    states: np.ndarray
    rates: np.ndarray

    def _locate(self, t: float) -> int:
        t0, tf = self.times[0], self.times[-1]
        tol = 1e-9 * max(1.0, abs(tf - t0))
        if t < t0 - tol or t > tf + tol:
            raise ValueError(f"time {t} outside the dense-output range [{t0}, {tf}]")
        return int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))

    def __call__(self, t: float) -> np.ndarray:
        k = self._locate(t)
        ta, tb = self.times[k], self.times[k + 1]
        dt = tb - ta
        s = (t - ta) / dt
        if s == 0.0:
            return self.states[k].copy()
        if s == 1.0:
            return self.states[k + 1].copy()
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * self.states[k] + h10 * dt * self.rates[k] + h01 * self.states[k + 1] + h11 * dt * self.rates[k + 1]

    def derivative(self, t: float) -> np.ndarray:
        k = self._locate(t)
        ta, tb = self.times[k], self.times[k + 1]
        dt = tb - ta
        s = (t - ta) / dt
        d00 = 6 * s * s - 6 * s
        d10 = 3 * s * s - 4 * s + 1
        d01 = -d00
        d11 = 3 * s * s - 2 * s
        return (d00 * self.states[k] + d01 * self.states[k + 1]) / dt + d10 * self.rates[k] + d11 * self.rates[k + 1]

    @classmethod
    def integrate(cls, drift, x0, t0: float, tf: float, h: float) -> "DenseOutput":
        """RK4 solution of ``x' = drift(x, t)`` stored on the step grid."""
        grid = time_grid(t0, tf, h)
        states = np.empty((len(grid), len(x0)))
        rates = np.empty_like(states)
        x = [float(v) for v in x0]
        states[0] = x
        rates[0] = drift(x, grid[0])
        for k in range(1, len(grid)):
            x = rk4_step(drift, x, grid[k - 1], grid[k] - grid[k - 1])
            states[k] = x
            rates[k] = drift(x, grid[k])
            if not np.all(np.isfinite(states[k])):
                raise NonFiniteStateError(grid[k])
        return cls(grid, states, rates)


def _relative_rate(model: SdeModel, lf_drift, ref: DenseOutput, w):
    def rate(dx, t):
        xi = ref(t)
        x = [xi[i] + dx[i] for i in range(len(dx))]
        u = lf_drift(x, t)
        u = [ui - ui.coeffs[0] if isinstance(ui, TaylorPoly) else 0.0 * ui for ui in u]
        if model.m:
            gw = model.apply_noise(x, t, w)
            u = [ui + gi for ui, gi in zip(u, gw)]
        return u

    return rate


def plasma_run_bifidelity(
    hf: SdeModel,
    lf_drift,
    ic,
    t0: float,
    tf: float,
    h: float,
    order: int = 2,
    integ: str = "rk4",
    substeps: int = 1,
    output_times=None,
    reference: DenseOutput | None = None,
) -> list[NoiseMomentSet]:
    """Moments about an expensive-drift reference, with cheap relative dynamics.

    The reference ``xi(t)`` is the noise-free solution of ``hf.drift`` from
    the initial mean (RK4 on the same grid).  Each step integrates only the
    nilpotent part of ``lf_drift`` around ``xi`` plus the full diffusion of
    ``hf``; the returned sets have ``central = xi(t_k)``.
    """
    ms = _as_moment_set(ic, order, t0)
    mean0 = state_mean(ms)
    if np.any(ms.moments[1 : 1 + ms.n] != 0.0):
        ms = recenter(ms, mean0)
    if tf == t0:
        return [ms]
    if reference is None:
        reference = DenseOutput.integrate(hf.drift, mean0, t0, tf, h / substeps)
    grid = time_grid(t0, tf, h)
    keep = _outputs(grid, output_times)
    out = [ms.copy()] if 0 in keep else []
    n, m = hf.n, hf.m
    big = da_space(n + m, order)
    if integ not in ("rk4", "euler_maruyama", "em"):
        raise ValueError(f"unknown integrator {integ!r}")
    step = rk4_step if integ == "rk4" else (lambda f, x, t, hh: [xi + hh * fi for xi, fi in zip(x, f(x, t))])
    for k in range(1, len(grid)):
        hk = grid[k] - grid[k - 1]
        dx = [TaylorPoly.variable(big, i) for i in range(n)]
        w = [TaylorPoly.variable(big, n + j) for j in range(m)]
        rate = _relative_rate(hf, lf_drift, reference, w)
        hs = hk / substeps
        for j in range(substeps):
            dx = step(rate, dx, grid[k - 1] + j * hs, hs)
        _check(dx, grid[k])
        if m:
            sc = _rescale(n, m, order, hk)
            dx = [TaylorPoly(big, p.coeffs * sc) for p in dx]
        mom = _update_moments(dx, ms.moments, n, m, order, hk) if m else ms.moments.copy()
        ms = NoiseMomentSet(order, mom, reference(grid[k]), grid[k])
        if k in keep:
            out.append(ms)
    return out


def moment_rows(sets: Sequence[NoiseMomentSet]) -> tuple[list[str], list[list]]:
    """Header and rows (time, multi-index, value) for a list of moment sets."""
    n = sets[0].n
    header = ["time_s"] + [f"r{i}" for i in range(n)] + ["value"]
    rows = [row for ms in sets for row in ms.rows()]
    return header, rows
