"""Multi-index helpers.

A multi-index is an n-tuple of non-negative integers.  The functions here
work on plain tuples so they can be used as dictionary keys and compared
directly; the dense Taylor-polynomial storage in :mod:`uqprop.da.taylor`
uses the same graded ordering produced by :func:`enumerate_multi_indices`.
"""

from __future__ import annotations

import math
from typing import Iterator, Sequence

MultiIndex = tuple[int, ...]


def order(r: Sequence[int]) -> int:
    """Total degree ``|r|``."""
    return sum(r)


def factorial(r: Sequence[int]) -> int:
    """Multi-index factorial ``r! = prod(r_i!)`` (with ``0! = 1``)."""
    out = 1
    for ri in r:
        out *= math.factorial(ri)
    return out


def binomial(r: Sequence[int], rp: Sequence[int]) -> int:
    """Component-wise binomial coefficient ``prod(C(r_i, r'_i))``."""
    if len(r) != len(rp):
        raise ValueError("multi-indices must have the same length")
    out = 1
    for ri, rpi in zip(r, rp):
        out *= math.comb(ri, rpi)
    return out


def power(a: Sequence[float], r: Sequence[int]) -> float:
    """Monomial ``a^r = prod(a_i ** r_i)``."""
    out = 1.0
    for ai, ri in zip(a, r):
        if ri:
            out *= ai**ri
    return out


def is_le(rp: Sequence[int], r: Sequence[int]) -> bool:
    """True when ``rp <= r`` component-wise."""
    return all(a <= b for a, b in zip(rp, r))


def sub_indices(r: Sequence[int]) -> Iterator[MultiIndex]:
    """All ``r'`` with ``0 <= r' <= r`` component-wise."""
    if not r:
        yield ()
        return
    for head in range(r[0] + 1):
        for tail in sub_indices(r[1:]):
            yield (head,) + tail


def _compositions(total: int, nvars: int) -> Iterator[MultiIndex]:
    # exponents of degree exactly `total`, first variable varies slowest
    if nvars == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, nvars - 1):
            yield (head,) + tail


def enumerate_multi_indices(nvars: int, max_order: int) -> list[MultiIndex]:
    """All multi-indices over ``nvars`` variables with ``|r| <= max_order``.

    The result is graded: degree 0 first, then degree 1 as
    ``e_1, e_2, ..., e_n``, and so on.  Its length is ``C(nvars + max_order,
    max_order)``.
    """
    if nvars < 1:
        raise ValueError("nvars must be >= 1")
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    out: list[MultiIndex] = []
    for d in range(max_order + 1):
        out.extend(_compositions(d, nvars))
    return out


def dimension(n: int, k: int) -> int:
    """Number of monomials of degree ``<= k`` in ``n`` variables.

    Equal to ``(n + k)! / (n! k!)``.  Raises :class:`OverflowError` when the
    count does not fit in a signed 64-bit integer, since no dense store can
    hold that many coefficients anyway.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if k < 0:
        raise ValueError("k must be >= 0")
    value = math.comb(n + k, k)
    if value > 2**63 - 1:
        raise OverflowError(f"dimension({n}, {k}) exceeds the int64 range")
    return value
