"""Nonlinearity index of a polynomial map over a scaled domain.

The Jacobian of ``y(dx)`` with respect to the physical deviation
``beta * dx`` is truncated to first order, ``J = Jbar + dJ(dx)``.  Each entry
of ``dJ`` is bounded over the unit box by the sum of the absolute values of
its linear coefficients, and the index is the Frobenius-norm ratio of that
bound matrix to ``Jbar``.  Linear maps score exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from uqprop.da.taylor import TaylorPoly, da_space


class DegenerateMapError(ValueError):
    """The constant Jacobian vanishes, so the index is undefined."""


@dataclass(frozen=True)
class JacobianPolyMatrix:
    """First-order Jacobian: ``J_ij(dx) = jbar[i, j] + sum_p lin[i, j, p] dx_p``."""

    jbar: np.ndarray
    lin: np.ndarray

    def bound(self) -> np.ndarray:
        return np.abs(self.lin).sum(axis=2)

    def to_polys(self) -> list[list[TaylorPoly]]:
        m, n, nv = self.lin.shape
        space = da_space(nv, 1)
        rows = []
        for i in range(m):
            row = []
            for j in range(n):
                c = np.zeros(space.dim)
                c[0] = self.jbar[i, j]
                c[1:] = self.lin[i, j]
                row.append(TaylorPoly(space, c))
            rows.append(row)
        return rows


def _active_columns(beta: np.ndarray, active) -> np.ndarray:
    if active is None:
        if np.any(beta <= 0):
            raise ValueError("scale factors must be positive (pass `active` to skip zero directions)")
        return np.arange(beta.size)
    idx = np.asarray(active)
    if idx.dtype == bool:
        idx = np.nonzero(idx)[0]
    if np.any(beta[idx] <= 0):
        raise ValueError("active directions must have positive scale factors")
    return idx


def jacobian(polys: Sequence[TaylorPoly], beta, active=None) -> JacobianPolyMatrix:
    """Jacobian of ``polys`` w.r.t. ``beta * dx``, truncated to first order.

    Parameters
    ----------
    polys : sequence of TaylorPoly
        The map ``y(dx)``; order must be at least 2.
    beta : array_like
        Scale factors of the deviation variables.
    active : array_like of int or bool, optional
        Columns (deviation variables) to keep.  Defaults to all, in which case
        every ``beta`` must be positive.

    Returns
    -------
    JacobianPolyMatrix
        ``jbar`` has shape ``(m, len(active))`` and ``lin`` ``(m, len(active),
        nvars)``; the last axis indexes the deviation variable ``p``.
    """
    beta = np.asarray(beta, dtype=float)
    space = polys[0].space
    n = space.nvars
    if beta.shape != (n,):
        raise ValueError(f"beta must have {n} entries")
    if space.order < 2:
        raise ValueError("the map must be expanded to at least second order")
    cols = _active_columns(beta, active)
    coef = np.stack([p.coeffs for p in polys])
    m = coef.shape[0]
    jbar = coef[:, 1 + cols] / beta[cols]
    # second-order coefficient of dx_j dx_p feeds d/d(dx_j) linearly in dx_p
    lin = np.zeros((m, cols.size, n))
    for a, j in enumerate(cols):
        for p in range(n):
            e = [0] * n
            e[j] += 1
            e[p] += 1
            k = space.index[tuple(e)]
            lin[:, a, p] = coef[:, k] * (2.0 if p == j else 1.0)
        lin[:, a, :] /= beta[j]
    return JacobianPolyMatrix(jbar=jbar, lin=lin)


def nli_from_jacobian(jac: JacobianPolyMatrix) -> float:
    den = np.linalg.norm(jac.jbar)
    if den == 0.0:
        raise DegenerateMapError("constant Jacobian is zero")
    return float(np.linalg.norm(jac.bound()) / den)


def nli(polys: Sequence[TaylorPoly], beta, active=None) -> float:
    """Nonlinearity index of ``polys`` over the box scaled by ``beta``."""
    return nli_from_jacobian(jacobian(polys, beta, active))


def split_direction(jac: JacobianPolyMatrix, active=None) -> int:
    """Deviation variable contributing most to the Jacobian bound."""
    score = np.abs(jac.lin).sum(axis=(0, 1))
    if active is not None:
        mask = np.zeros(score.size, dtype=bool)
        idx = np.asarray(active)
        mask[idx] = True
        score = np.where(mask, score, -1.0)
    return int(np.argmax(score))
