"""Truncated multivariate Taylor polynomials.

Coefficients are kept in a dense float64 vector whose positions follow the
graded ordering of :func:`uqprop.da.multiindex.enumerate_multi_indices`.
Everything that depends only on ``(nvars, order)`` -- the exponent table,
the product lookup, derivative maps -- lives in a cached :class:`DASpace`
so that polynomials of the same algebra share it by identity.

Polynomials are immutable: every operation returns a new object.
"""

from __future__ import annotations

import functools
import math
from numbers import Real
from typing import Sequence

import numpy as np

from uqprop.da.multiindex import dimension, enumerate_multi_indices


class SingularExpansionError(ArithmeticError):
    """Raised when an intrinsic is expanded outside its domain."""


class DASpace:
    """Lookup tables for the algebra of order-``order`` polynomials in
    ``nvars`` variables.  Use :func:`da_space` rather than the constructor."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        self.dim = dimension(nvars, order)
        exps = enumerate_multi_indices(nvars, order)
        self.exponents = np.array(exps, dtype=np.int64).reshape(self.dim, nvars)
        self.degrees = self.exponents.sum(axis=1)
        self.index = {e: i for i, e in enumerate(exps)}
        self._code_base = order + 1
        codes = self._codes(self.exponents)
        self._sorted_codes_order = np.argsort(codes)
        self._sorted_codes = codes[self._sorted_codes_order]

        # product table: every pair (i, j) whose degrees add up to <= order
        ii, jj = np.meshgrid(np.arange(self.dim), np.arange(self.dim), indexing="ij")
        keep = (self.degrees[ii] + self.degrees[jj]) <= order
        self.mul_i = ii[keep]
        self.mul_j = jj[keep]
        self.mul_k = self.lookup(self.exponents[self.mul_i] + self.exponents[self.mul_j])

        # parent chain used to build monomials incrementally
        self.parent = np.zeros(self.dim, dtype=np.int64)
        self.parent_var = np.full(self.dim, -1, dtype=np.int64)
        for idx in range(1, self.dim):
            e = list(exps[idx])
            var = next(v for v, ev in enumerate(e) if ev > 0)
            e[var] -= 1
            self.parent[idx] = self.index[tuple(e)]
            self.parent_var[idx] = var

        # d/d(var): src -> dst with factor e_var
        self.deriv = []
        for var in range(nvars):
            src = np.nonzero(self.exponents[:, var] > 0)[0]
            shifted = self.exponents[src].copy()
            shifted[:, var] -= 1
            self.deriv.append((src, self.lookup(shifted), self.exponents[src, var].astype(float)))

    def _codes(self, exps: np.ndarray) -> np.ndarray:
        weights = self._code_base ** np.arange(self.nvars, dtype=np.int64)
        return exps @ weights

    def lookup(self, exps: np.ndarray) -> np.ndarray:
        """Positions of rows of ``exps`` (each with degree <= order)."""
        pos = np.searchsorted(self._sorted_codes, self._codes(np.asarray(exps, dtype=np.int64)))
        return self._sorted_codes_order[pos]

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.bincount(self.mul_k, weights=a[self.mul_i] * b[self.mul_j], minlength=self.dim)

    def monomials(self, points: np.ndarray) -> np.ndarray:
        """Values of every monomial at ``points`` (shape ``(npts, nvars)``)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty((pts.shape[0], self.dim))
        out[:, 0] = 1.0
        for idx in range(1, self.dim):
            out[:, idx] = out[:, self.parent[idx]] * pts[:, self.parent_var[idx]]
        return out

    def __repr__(self) -> str:
        return f"DASpace(nvars={self.nvars}, order={self.order}, dim={self.dim})"


@functools.lru_cache(maxsize=None)
def da_space(nvars: int, order: int) -> DASpace:
    """Shared :class:`DASpace` for ``(nvars, order)``."""
    return DASpace(int(nvars), int(order))


def _is_scalar(x) -> bool:
    return isinstance(x, Real) and not isinstance(x, bool)


class TaylorPoly:
    """A truncated Taylor polynomial in ``space.nvars`` variables.

    Arithmetic with other polynomials of the same space and with real
    scalars is supported through the usual operators; products are
    truncated at ``space.order``.
    """

    __slots__ = ("space", "coeffs")
    __array_ufunc__ = None  # let numpy scalars defer to our reflected operators

    def __init__(self, space: DASpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    # -- construction -------------------------------------------------
    @classmethod
    def constant(cls, space: DASpace, value: float) -> "TaylorPoly":
        c = np.zeros(space.dim)
        c[0] = value
        return cls(space, c)

    @classmethod
    def variable(cls, space: DASpace, var: int, center: float = 0.0, scale: float = 1.0) -> "TaylorPoly":
        if not 0 <= var < space.nvars:
            raise IndexError(f"variable {var} out of range for {space.nvars} variables")
        c = np.zeros(space.dim)
        c[0] = center
        c[1 + var] = scale
        return cls(space, c)

    @classmethod
    def from_terms(cls, nvars: int, order: int, terms: dict) -> "TaylorPoly":
        """Build from ``{exponent tuple: coefficient}``; terms above ``order`` are dropped."""
        space = da_space(nvars, order)
        c = np.zeros(space.dim)
        for e, v in terms.items():
            e = tuple(int(x) for x in e)
            if len(e) != nvars:
                raise ValueError(f"exponent {e} does not have {nvars} entries")
            if sum(e) <= order:
                c[space.index[e]] += v
        return cls(space, c)

    # -- basic properties ---------------------------------------------
    @property
    def nvars(self) -> int:
        return self.space.nvars

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def const(self) -> float:
        """Constant part (value at the expansion point)."""
        return float(self.coeffs[0])

    def nilpotent(self) -> "TaylorPoly":
        c = self.coeffs.copy()
        c[0] = 0.0
        return TaylorPoly(self.space, c)

    def with_const(self, value: float) -> "TaylorPoly":
        c = self.coeffs.copy()
        c[0] = value
        return TaylorPoly(self.space, c)

    def coeff(self, exponents: Sequence[int]) -> float:
        e = tuple(int(x) for x in exponents)
        if sum(e) > self.order:
            return 0.0
        return float(self.coeffs[self.space.index[e]])

    def terms(self) -> dict:
        nz = np.nonzero(self.coeffs)[0]
        return {tuple(int(x) for x in self.space.exponents[i]): float(self.coeffs[i]) for i in nz}

    def truncate(self, order: int) -> "TaylorPoly":
        """Zero every coefficient of degree above ``order`` (space unchanged)."""
        c = np.where(self.space.degrees <= order, self.coeffs, 0.0)
        return TaylorPoly(self.space, c)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    # -- arithmetic ---------------------------------------------------
    def _check(self, other: "TaylorPoly") -> None:
        if other.space is not self.space:
            raise ValueError(f"incompatible algebras: {self.space} vs {other.space}")

    def __add__(self, other):
        if isinstance(other, TaylorPoly):
            self._check(other)
            return TaylorPoly(self.space, self.coeffs + other.coeffs)
        if _is_scalar(other):
            c = self.coeffs.copy()
            c[0] += other
            return TaylorPoly(self.space, c)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, TaylorPoly):
            self._check(other)
            return TaylorPoly(self.space, self.coeffs - other.coeffs)
        if _is_scalar(other):
            c = self.coeffs.copy()
            c[0] -= other
            return TaylorPoly(self.space, c)
        return NotImplemented

    def __rsub__(self, other):
        if _is_scalar(other):
            c = -self.coeffs
            c[0] += other
            return TaylorPoly(self.space, c)
        return NotImplemented

    def __neg__(self):
        return TaylorPoly(self.space, -self.coeffs)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, TaylorPoly):
            self._check(other)
            return TaylorPoly(self.space, self.space.mul(self.coeffs, other.coeffs))
        if _is_scalar(other):
            return TaylorPoly(self.space, self.coeffs * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorPoly):
            return self * reciprocal(other)
        if _is_scalar(other):
            return TaylorPoly(self.space, self.coeffs / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if _is_scalar(other):
            return reciprocal(self) * other
        return NotImplemented

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and not isinstance(p, bool):
            p = int(p)
            if p < 0:
                return reciprocal(self) ** (-p)
            return _int_power(self, p)
        if _is_scalar(p):
            if float(p).is_integer():
                return self ** int(p)
            return power(self, float(p))
        return NotImplemented

    # -- misc ------------------------------------------------------------
    def __call__(self, point):
        return evaluate(self, point)

    def __repr__(self) -> str:
        parts = []
        for e, v in self.terms().items():
            mono = "*".join(f"dx{i + 1}" + (f"^{p}" if p > 1 else "") for i, p in enumerate(e) if p)
            parts.append(f"{v:+.6g}" + (f"*{mono}" if mono else ""))
        body = " ".join(parts) if parts else "0"
        return f"TaylorPoly[n={self.nvars}, k={self.order}]({body})"

    def to_dict(self) -> dict:
        return {
            "nvars": self.nvars,
            "order": self.order,
            "terms": [list(e) + [v] for e, v in self.terms().items()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaylorPoly":
        n = int(data["nvars"])
        terms = {tuple(row[:n]): float(row[n]) for row in data["terms"]}
        return cls.from_terms(n, int(data["order"]), terms)


def _int_power(a: TaylorPoly, p: int) -> TaylorPoly:
    result = TaylorPoly.constant(a.space, 1.0)
    base = a
    while p:
        if p & 1:
            result = result * base
        p >>= 1
        if p:
            base = base * base
    return result


# ---------------------------------------------------------------------------
# intrinsic functions: compose the univariate series of fn about the
# constant part with the nilpotent part (Horner in the nilpotent part)


def _compose_series(a: TaylorPoly, fcoef: Sequence[float]) -> TaylorPoly:
    space = a.space
    nil = a.coeffs.copy()
    nil[0] = 0.0
    res = np.zeros(space.dim)
    res[0] = fcoef[space.order]
    for j in range(space.order - 1, -1, -1):
        res = space.mul(res, nil)
        res[0] += fcoef[j]
    return TaylorPoly(space, res)


def _gen_binom(p: float, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= (p - i) / (i + 1)
    return out


def reciprocal(a: TaylorPoly) -> TaylorPoly:
    a0 = a.const
    if a0 == 0.0:
        raise SingularExpansionError("reciprocal of a polynomial with zero constant part")
    inv = 1.0 / a0
    return _compose_series(a, [(-1.0) ** j * inv ** (j + 1) for j in range(a.order + 1)])


def power(a: TaylorPoly, p: float) -> TaylorPoly:
    """``a ** p`` for real ``p``; needs a positive constant part unless p is an integer."""
    if float(p).is_integer():
        return a ** int(p)
    a0 = a.const
    if a0 <= 0.0:
        raise SingularExpansionError(f"non-integer power {p} of a non-positive constant part {a0}")
    return _compose_series(a, [_gen_binom(p, j) * a0 ** (p - j) for j in range(a.order + 1)])


def _sqrt(a: TaylorPoly) -> TaylorPoly:
    if a.const <= 0.0:
        raise SingularExpansionError(f"sqrt expanded at non-positive value {a.const}")
    return power(a, 0.5)


def _exp(a: TaylorPoly) -> TaylorPoly:
    e0 = math.exp(a.const)
    return _compose_series(a, [e0 / math.factorial(j) for j in range(a.order + 1)])


def _log(a: TaylorPoly) -> TaylorPoly:
    a0 = a.const
    if a0 <= 0.0:
        raise SingularExpansionError(f"log expanded at non-positive value {a0}")
    coef = [math.log(a0)] + [(-1.0) ** (j + 1) / (j * a0**j) for j in range(1, a.order + 1)]
    return _compose_series(a, coef)


def _sin(a: TaylorPoly) -> TaylorPoly:
    s, c = math.sin(a.const), math.cos(a.const)
    cycle = (s, c, -s, -c)
    return _compose_series(a, [cycle[j % 4] / math.factorial(j) for j in range(a.order + 1)])


def _cos(a: TaylorPoly) -> TaylorPoly:
    s, c = math.sin(a.const), math.cos(a.const)
    cycle = (c, -s, -c, s)
    return _compose_series(a, [cycle[j % 4] / math.factorial(j) for j in range(a.order + 1)])


def _atan_nilpotent(z: TaylorPoly) -> TaylorPoly:
    coef = [0.0 if j % 2 == 0 else (-1.0) ** ((j - 1) // 2) / j for j in range(z.order + 1)]
    return _compose_series(z, coef)


def _atan2(y, x) -> TaylorPoly:
    space = y.space if isinstance(y, TaylorPoly) else x.space
    if not isinstance(y, TaylorPoly):
        y = TaylorPoly.constant(space, y)
    if not isinstance(x, TaylorPoly):
        x = TaylorPoly.constant(space, x)
    y0, x0 = y.const, x.const
    if x0 == 0.0 and y0 == 0.0:
        raise SingularExpansionError("atan2 expanded at the origin")
    # atan2(y, x) = atan2(y0, x0) + atan((x0*y - y0*x) / (x0*x + y0*y))
    z = (x0 * y - y0 * x) / (x0 * x + y0 * y)
    z = z.with_const(0.0)
    return math.atan2(y0, x0) + _atan_nilpotent(z)


_INTRINSICS = {
    "reciprocal": reciprocal,
    "sqrt": _sqrt,
    "exp": _exp,
    "log": _log,
    "sin": _sin,
    "cos": _cos,
}


def intrinsic(a: TaylorPoly, fn: str, arg=None) -> TaylorPoly:
    """Apply an elementary function to ``a``.

    ``fn`` is one of ``reciprocal, sqrt, exp, log, sin, cos, power_int, pow,
    atan2``.  ``power_int`` and ``pow`` take the exponent in ``arg``;
    ``atan2`` computes ``atan2(a, arg)``.
    """
    if fn in _INTRINSICS:
        return _INTRINSICS[fn](a)
    if fn == "power_int":
        if not float(arg).is_integer():
            raise ValueError("power_int needs an integer exponent")
        return a ** int(arg)
    if fn == "pow":
        return power(a, float(arg))
    if fn == "atan2":
        return _atan2(a, arg)
    raise ValueError(f"unknown intrinsic {fn!r}")


# ---------------------------------------------------------------------------
# generic elementary functions: TaylorPoly in, TaylorPoly out; otherwise numpy


def sqrt(x):
    return _sqrt(x) if isinstance(x, TaylorPoly) else np.sqrt(x)


def exp(x):
    return _exp(x) if isinstance(x, TaylorPoly) else np.exp(x)


def log(x):
    return _log(x) if isinstance(x, TaylorPoly) else np.log(x)


def sin(x):
    return _sin(x) if isinstance(x, TaylorPoly) else np.sin(x)


def cos(x):
    return _cos(x) if isinstance(x, TaylorPoly) else np.cos(x)


def atan2(y, x):
    if isinstance(y, TaylorPoly) or isinstance(x, TaylorPoly):
        return _atan2(y, x)
    return np.arctan2(y, x)


def const_part(x):
    """Constant part of a polynomial, or the value itself for reals."""
    return x.const if isinstance(x, TaylorPoly) else x


# ---------------------------------------------------------------------------
# algebra-level operations


def identity_vars(n: int, k: int, center: Sequence[float], scale: Sequence[float]) -> list[TaylorPoly]:
    """First-order polynomials ``center_i + scale_i * dx_i`` in ``_kD_n``."""
    center = np.asarray(center, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if center.shape != (n,) or scale.shape != (n,):
        raise ValueError("center and scale must both have length n")
    if np.any(scale < 0):
        raise ValueError("scale factors must be non-negative")
    space = da_space(n, k)
    return [TaylorPoly.variable(space, i, center[i], scale[i]) for i in range(n)]


def arith(a: TaylorPoly, b, op: str) -> TaylorPoly:
    """Binary arithmetic by name: ``add``, ``sub``, ``mul`` or ``scale``."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "scale":
        if not _is_scalar(b):
            raise TypeError("scale needs a real factor")
        return a * b
    raise ValueError(f"unknown operation {op!r}")


def _pure_scaling(f_space: DASpace, g: Sequence[TaylorPoly]) -> np.ndarray | None:
    # factors s_i when g_i == s_i * dx_i in f's own algebra, else None
    if any(gi.space is not f_space for gi in g):
        return None
    factors = np.empty(len(g))
    for i, gi in enumerate(g):
        c = gi.coeffs
        s = c[1 + i]
        if c[0] != 0.0 or np.count_nonzero(c) > (1 if s != 0.0 else 0):
            return None
        factors[i] = s
    return factors


def compose(f: TaylorPoly, g: Sequence[TaylorPoly]) -> TaylorPoly:
    """Substitute ``g`` into ``f`` (``f(g_1, ..., g_n)``), truncated.

    All ``g_i`` must share one algebra; the result lives there.  When the
    ``g_i`` carry constant parts the truncated result is only a faithful
    Taylor expansion if ``f`` is exact (e.g. a polynomial of degree
    ``<= order``); that is the caller's responsibility.
    """
    if len(g) != f.nvars:
        raise ValueError(f"compose needs {f.nvars} arguments, got {len(g)}")
    target = g[0].space
    if any(gi.space is not target for gi in g):
        raise ValueError("all substituted polynomials must share one algebra")
    factors = _pure_scaling(f.space, g)
    if factors is not None:
        scale = np.prod(factors[None, :] ** f.space.exponents, axis=1)
        return TaylorPoly(f.space, f.coeffs * scale)
    fs = f.space
    nz = np.nonzero(f.coeffs)[0]
    if nz.size == 0:
        return TaylorPoly(target, np.zeros(target.dim))
    top = int(nz.max())
    mono = np.zeros((top + 1, target.dim))
    mono[0, 0] = 1.0
    gcoef = [gi.coeffs for gi in g]
    for idx in range(1, top + 1):
        mono[idx] = target.mul(mono[fs.parent[idx]], gcoef[fs.parent_var[idx]])
    return TaylorPoly(target, f.coeffs[: top + 1] @ mono)


def partial(f: TaylorPoly, var: int) -> TaylorPoly:
    """Formal partial derivative with respect to variable ``var``."""
    if not 0 <= var < f.nvars:
        raise IndexError(f"variable {var} out of range for {f.nvars} variables")
    src, dst, fac = f.space.deriv[var]
    c = np.zeros(f.space.dim)
    c[dst] = f.coeffs[src] * fac
    return TaylorPoly(f.space, c)


def evaluate(f: TaylorPoly, point) -> float | np.ndarray:
    """Value of ``f`` at a point of shape ``(nvars,)`` or points ``(npts, nvars)``."""
    pts = np.asarray(point, dtype=float)
    if pts.shape[-1] != f.nvars:
        raise ValueError(f"point must have {f.nvars} components")
    vals = f.space.monomials(pts.reshape(-1, f.nvars)) @ f.coeffs
    return float(vals[0]) if pts.ndim == 1 else vals


def evaluate_vector(polys: Sequence[TaylorPoly], points) -> np.ndarray:
    """Evaluate several polynomials of one algebra; returns ``(npts, len(polys))``."""
    space = polys[0].space
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    coef = np.stack([p.coeffs for p in polys])
    return space.monomials(pts) @ coef.T


def constants(polys: Sequence[TaylorPoly]) -> np.ndarray:
    return np.array([p.const for p in polys])
