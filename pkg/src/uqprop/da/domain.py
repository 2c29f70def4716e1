"""Gaussian uncertainty sets expressed as first-order polynomials."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from uqprop.da.taylor import TaylorPoly, da_space


def sym_eig(cov: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric PSD matrix.

    Tiny negative eigenvalues (above ``-tol * trace``) are clipped to zero;
    anything more negative raises ``ValueError``.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14 * max(np.abs(cov).max(), 1.0)):
        raise ValueError("covariance is not symmetric")
    lam, vec = np.linalg.eigh(0.5 * (cov + cov.T))
    floor = -tol * max(np.trace(cov), 0.0) - 1e-300
    if lam.min() < floor:
        raise ValueError(f"covariance is not positive semi-definite (min eigenvalue {lam.min():.3e})")
    return np.clip(lam, 0.0, None), vec


@dataclass
class UncertaintyDomain:
    """Mean/covariance pair mapped onto the unit box of deviation variables.

    The state is written ``x = mean + V (beta * dx)`` with ``V, lam`` the
    eigenvectors/eigenvalues of ``cov`` and ``beta = zeta * sqrt(lam)``, so
    ``dx`` in ``[-1, 1]`` spans ``zeta`` standard deviations for a Gaussian.
    """

    mean: np.ndarray
    cov: np.ndarray
    zeta: float = 3.0
    eigvals: np.ndarray = field(init=False)
    eigvecs: np.ndarray = field(init=False)
    beta: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError("mean and covariance sizes differ")
        self.eigvals, self.eigvecs = sym_eig(self.cov)
        self.beta = self.zeta * np.sqrt(self.eigvals)

    @property
    def n(self) -> int:
        return self.mean.size

    def to_polys(self, order: int) -> list[TaylorPoly]:
        """First-order polynomials ``mean + V diag(beta) dx`` in ``order``-th order algebra."""
        space = da_space(self.n, order)
        lin = self.eigvecs * self.beta[None, :]
        out = []
        for i in range(self.n):
            c = np.zeros(space.dim)
            c[0] = self.mean[i]
            c[1 : 1 + self.n] = lin[i]
            out.append(TaylorPoly(space, c))
        return out

    def to_deviation(self, x: np.ndarray) -> np.ndarray:
        """Map physical points ``(..., n)`` to deviation coordinates ``dx``.

        Directions with ``beta = 0`` carry no spread and map to zero.
        """
        y = (np.asarray(x, dtype=float) - self.mean) @ self.eigvecs
        safe = np.where(self.beta > 0, self.beta, 1.0)
        return np.where(self.beta > 0, y / safe, 0.0)

    def from_deviation(self, dx: np.ndarray) -> np.ndarray:
        return self.mean + (np.asarray(dx, dtype=float) * self.beta) @ self.eigvecs.T
