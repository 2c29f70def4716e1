"""Stochastic model container and explicit one-step integrators.

States are plain lists of components.  A component may be a float, a numpy
array (one entry per sample path) or a :class:`~uqprop.da.TaylorPoly`, so the
same model code serves pointwise, vectorized and Taylor-algebra evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from uqprop.da.taylor import TaylorPoly

State = list


class NonFiniteStateError(FloatingPointError):
    """Integration produced NaN or infinite values at time ``t``."""

    def __init__(self, t: float, msg: str = "non-finite state"):
        super().__init__(f"{msg} at t = {t:.6g}")
        self.t = t


class SingularStateError(ValueError):
    """A model was evaluated where it is singular (zero radius, zero speed...)."""


def _is_zero(v) -> bool:
    return isinstance(v, (int, float)) and v == 0


@dataclass
class SdeModel:
    """``dX = u(X, t) dt + G(X, t) dW`` with ``m`` independent Wiener channels.

    ``diffusion`` returns the ``n x m`` matrix as nested lists; entries that
    are the literal number ``0`` are skipped when the noise is applied.
    ``discrete_step`` optionally replaces the integrator altogether for
    models defined as maps (``x_k = step(x_{k-1}, t, w)``).
    """

    drift: Callable[[State, float], State]
    n: int
    m: int = 0
    diffusion: Callable[[State, float], list] | None = None
    name: str = "model"
    discrete_step: Callable[[State, float, State], State] | None = None

    def apply_noise(self, x: State, t: float, w: Sequence) -> State:
        """``G(x, t) @ w`` as a state list."""
        out = [0.0] * self.n
        if self.diffusion is None or self.m == 0:
            return out
        g = self.diffusion(x, t)
        for i in range(self.n):
            acc = 0.0
            for j in range(self.m):
                gij = g[i][j]
                if _is_zero(gij):
                    continue
                acc = acc + gij * w[j]
            out[i] = acc
        return out

    def diffusion_matrix(self, x: State, t: float) -> np.ndarray:
        """Numeric ``G`` for a real state."""
        if self.diffusion is None or self.m == 0:
            return np.zeros((self.n, 0))
        g = self.diffusion(x, t)
        return np.array([[float(gij.const if isinstance(gij, TaylorPoly) else gij) for gij in row] for row in g])

    def pseudo_rate(self, x: State, t: float, w: Sequence) -> State:
        """``u(x, t) + G(x, t) w`` with ``w`` held fixed over the step."""
        u = self.drift(x, t)
        if self.m == 0:
            return list(u)
        gw = self.apply_noise(x, t, w)
        return [ui + gi for ui, gi in zip(u, gw)]


def _axpy(x: State, h: float, k: State) -> State:
    return [xi + h * ki for xi, ki in zip(x, k)]


def check_finite(x: State, t: float) -> None:
    for xi in x:
        if isinstance(xi, TaylorPoly):
            ok = xi.is_finite()
        else:
            ok = bool(np.all(np.isfinite(xi)))
        if not ok:
            raise NonFiniteStateError(t)


def rk4_step(rate: Callable[[State, float], State], x: State, t: float, h: float) -> State:
    """One classical Runge-Kutta step of ``x' = rate(x, t)``."""
    if not h > 0:
        raise ValueError("step size must be positive")
    k1 = rate(x, t)
    k2 = rate(_axpy(x, 0.5 * h, k1), t + 0.5 * h)
    k3 = rate(_axpy(x, 0.5 * h, k2), t + 0.5 * h)
    k4 = rate(_axpy(x, h, k3), t + h)
    return [xi + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d) for xi, a, b, c, d in zip(x, k1, k2, k3, k4)]


def euler_step(rate: Callable[[State, float], State], x: State, t: float, h: float) -> State:
    if not h > 0:
        raise ValueError("step size must be positive")
    return _axpy(x, h, rate(x, t))


def em_step(model: SdeModel, x: State, t: float, h: float, dw: Sequence | None = None) -> State:
    """Euler-Maruyama: ``x + h u(x, t) + G(x, t) dw``."""
    if not h > 0:
        raise ValueError("step size must be positive")
    u = model.drift(x, t)
    out = _axpy(x, h, u)
    if dw is not None and model.m:
        gw = model.apply_noise(x, t, dw)
        out = [oi + gi for oi, gi in zip(out, gw)]
    return out


def rk4_ode_step(model: SdeModel, x: State, t: float, h: float) -> State:
    """Deterministic RK4 step of the drift only."""
    return rk4_step(model.drift, x, t, h)


def integrate(rate, x0: State, t0: float, tf: float, h: float, method: str = "rk4", check: bool = True) -> State:
    """Fixed-step integration of ``x' = rate(x, t)`` with a shortened last step."""
    step = rk4_step if method == "rk4" else euler_step
    x, t = list(x0), t0
    n = int(np.ceil((tf - t0) / h - 1e-9))
    for k in range(n):
        hk = min(h, tf - t)
        x = step(rate, x, t, hk)
        t = t0 + (k + 1) * h if k + 1 < n else tf
        if check:
            check_finite(x, t)
    return x


def time_grid(t0: float, tf: float, h: float) -> np.ndarray:
    """Grid ``t0, t0 + h, ...`` ending exactly at ``tf`` (last step may be shorter)."""
    if tf < t0:
        raise ValueError("tf must not precede t0")
    if not h > 0:
        raise ValueError("step size must be positive")
    n = int(np.ceil((tf - t0) / h - 1e-9))
    grid = t0 + h * np.arange(n + 1, dtype=float)
    grid[-1] = tf
    return grid
