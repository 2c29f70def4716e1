"""Adaptive Gaussian-mixture propagation.

Each kernel is turned into a first-order polynomial over its eigen-scaled
box, pushed through the map in the Taylor algebra, and tested with the
nonlinearity index.  Kernels that are too nonlinear are split in three along
the deviation direction that dominates the Jacobian bound, and the children
are processed the same way.  Accepted kernels get their image moments from
the unscented transform of the propagated polynomial; weights never change.
"""

from __future__ import annotations

import functools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from uqprop.da.domain import UncertaintyDomain, sym_eig
from uqprop.da.taylor import TaylorPoly, evaluate_vector
from uqprop.nonlinearity import jacobian, nli_from_jacobian, split_direction

MapFn = Callable[[list], list]


class KernelPropagationError(RuntimeError):
    """Failure while mapping one kernel; ``kernel_id`` names the kernel."""

    def __init__(self, kernel_id, cause):
        super().__init__(f"kernel {kernel_id}: {cause}")
        self.kernel_id = kernel_id
        self.__cause__ = cause


# ---------------------------------------------------------------------------
# data types


@dataclass
class GaussKernel:
    """Weighted Gaussian component, optionally carrying its polynomial image.

    ``kid`` is a tuple path: the root index followed by the child index at
    each split, so sorting by ``kid`` gives a deterministic order.
    """

    weight: float
    mean: np.ndarray
    cov: np.ndarray
    poly: list | None = None
    kid: tuple = (0,)
    depth: int = 0
    nli: float | None = None

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError("kernel mean and covariance sizes differ")
        if not 0.0 < self.weight <= 1.0 + 1e-12:
            raise ValueError(f"kernel weight {self.weight} outside (0, 1]")

    def to_dict(self) -> dict:
        return {
            "id": list(self.kid),
            "depth": self.depth,
            "weight": self.weight,
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
            "nli": self.nli,
            "poly": None if self.poly is None else [p.to_dict() for p in self.poly],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussKernel":
        poly = None if d.get("poly") is None else [TaylorPoly.from_dict(p) for p in d["poly"]]
        return cls(
            weight=float(d["weight"]),
            mean=np.array(d["mean"], dtype=float),
            cov=np.array(d["cov"], dtype=float),
            poly=poly,
            kid=tuple(d["id"]),
            depth=int(d.get("depth", 0)),
            nli=d.get("nli"),
        )


@dataclass
class Manifold:
    """Sequence of kernels on one side (``initial`` or ``propagated``) of a map."""

    kernels: list
    side: str = "initial"
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.kernels)

    def __iter__(self):
        return iter(self.kernels)

    @property
    def weights(self) -> np.ndarray:
        return np.array([k.weight for k in self.kernels])

    @classmethod
    def single(cls, mean, cov) -> "Manifold":
        return cls([GaussKernel(1.0, mean, cov)], "initial")

    def to_dict(self) -> dict:
        return {"side": self.side, "info": self.info, "kernels": [k.to_dict() for k in self.kernels]}

    @classmethod
    def from_dict(cls, d: dict) -> "Manifold":
        return cls([GaussKernel.from_dict(k) for k in d["kernels"]], d.get("side", "initial"), d.get("info", {}))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "Manifold":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class SplitLibrary3:
    """Symmetric three-way split of N(0, 1): weights ``[w, w0, w]`` at
    offsets ``[-m, 0, m]`` with common standard deviation ``sigma``."""

    w: float
    m: float
    sigma: float
    penalty: float
    l2_error: float

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.w, 1.0 - 2.0 * self.w, self.w])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([-self.m, 0.0, self.m])

    @property
    def mixture_variance(self) -> float:
        return 2.0 * self.w * (self.m**2 + self.sigma**2) + (1.0 - 2.0 * self.w) * self.sigma**2


@dataclass
class AdaptConfig:
    """Settings of the split-until-linear recursion.

    ``ut_kappa=None`` selects ``3 - n`` (or 0 when that is not positive
    definite).  ``order`` is the expansion order of the kernel polynomials
    and ``split_penalty`` the variance penalty of the split library.
    """

    eps_nu: float
    n_max: int = 20
    alpha_min: float = 1e-6
    zeta: float = 3.0
    ut_kappa: float | None = None
    order: int = 2
    split_penalty: float = 1e-3

    def __post_init__(self):
        if not self.eps_nu > 0:
            raise ValueError("eps_nu must be positive")
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if not 0.0 <= self.alpha_min < 1.0:
            raise ValueError("alpha_min must lie in [0, 1)")
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        if self.order < 2:
            raise ValueError("order must be >= 2 for the nonlinearity test")


# ---------------------------------------------------------------------------
# split library


def _gauss_overlap(a, b, var):
    # integral of N(x; a, .) N(x; b, .) with summed variance `var`
    return np.exp(-0.5 * (a - b) ** 2 / var) / np.sqrt(2.0 * np.pi * var)


def split_l2_distance(w: float, m: float, sigma: float) -> float:
    """Closed-form L2 distance between N(0, 1) and the three-way split."""
    wts = np.array([w, 1.0 - 2.0 * w, w])
    mus = np.array([-m, 0.0, m])
    s2 = sigma**2
    pp = 1.0 / np.sqrt(4.0 * np.pi)
    pq = np.sum(wts * _gauss_overlap(mus, 0.0, 1.0 + s2))
    qq = np.sum(wts[:, None] * wts[None, :] * _gauss_overlap(mus[:, None], mus[None, :], 2.0 * s2))
    return float(pp - 2.0 * pq + qq)


def _best_w_m(sigma: float) -> tuple[float, float, float]:
    def obj(z):
        return split_l2_distance(z[0], z[1], sigma)

    best = None
    for w0, m0 in ((0.2, 1.0), (0.3, 1.5), (0.1, 0.5)):
        res = optimize.minimize(
            obj, [w0, m0], method="L-BFGS-B", bounds=[(1e-6, 0.5 - 1e-6), (0.0, 5.0)], options={"ftol": 1e-15, "gtol": 1e-12}
        )
        if best is None or res.fun < best.fun:
            best = res
    return float(best.x[0]), float(best.x[1]), float(best.fun)


@functools.lru_cache(maxsize=None)
def build_split_library(lambda_penalty: float = 1e-3) -> SplitLibrary3:
    """Three-component split minimizing L2 distance plus ``lambda * sigma**2``.

    The inner problem fits weight and offset for a fixed component spread;
    the outer one picks the spread.  Results are cached per penalty.
    """
    if lambda_penalty < 0:
        raise ValueError("penalty must be non-negative")

    def outer(sigma):
        return _best_w_m(sigma)[2] + lambda_penalty * sigma**2

    res = optimize.minimize_scalar(outer, bounds=(1e-3, 0.999), method="bounded", options={"xatol": 1e-10})
    if not res.success:
        raise RuntimeError(f"split library optimization failed: {res.message} (objective {res.fun:.3e})")
    sigma = float(res.x)
    w, m, l2 = _best_w_m(sigma)
    return SplitLibrary3(w=w, m=m, sigma=sigma, penalty=float(lambda_penalty), l2_error=l2)


# ---------------------------------------------------------------------------
# kernel operations


def sqrtm_psd(cov: np.ndarray) -> np.ndarray:
    lam, vec = sym_eig(cov)
    return (vec * np.sqrt(lam)) @ vec.T


def split_kernel(kernel: GaussKernel, direction, lib: SplitLibrary3 | None = None) -> list[GaussKernel]:
    """Split ``kernel`` in three along ``P^{1/2} direction``.

    ``direction`` is a unit vector; passing an eigenvector of the covariance
    splits along that principal axis.
    """
    lib = lib or build_split_library()
    d = np.asarray(direction, dtype=float)
    if d.shape != kernel.mean.shape:
        raise ValueError("direction has the wrong size")
    nrm = np.linalg.norm(d)
    if not np.isclose(nrm, 1.0, rtol=1e-9):
        raise ValueError("direction must be a unit vector")
    a = sqrtm_psd(kernel.cov) @ d
    child_cov = kernel.cov - (1.0 - lib.sigma**2) * np.outer(a, a)
    child_cov = 0.5 * (child_cov + child_cov.T)
    out = []
    for i, (wi, mi) in enumerate(zip(lib.weights, lib.offsets)):
        out.append(
            GaussKernel(
                weight=kernel.weight * wi,
                mean=kernel.mean + mi * a,
                cov=child_cov.copy(),
                kid=kernel.kid + (i,),
                depth=kernel.depth + 1,
            )
        )
    return out


def default_kappa(n: int, kappa: float | None = None) -> float:
    if kappa is None:
        kappa = 3.0 - n
        if n + kappa <= 0:
            kappa = 0.0
    return float(kappa)


def ut_sigma(mean, cov, kappa: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric ``2n + 1`` sigma points and weights.

    Returns ``points`` of shape ``(2n + 1, n)`` (centre first, then ``+`` and
    ``-`` offsets) and ``weights`` summing to one.
    """
    mean = np.asarray(mean, dtype=float)
    n = mean.size
    kappa = default_kappa(n, kappa)
    if n + kappa <= 0:
        raise ValueError("n + kappa must be positive")
    lam, vec = sym_eig(cov)
    cols = vec * np.sqrt((n + kappa) * lam)
    pts = np.vstack([mean, mean + cols.T, mean - cols.T])
    wts = np.full(2 * n + 1, 0.5 / (n + kappa))
    wts[0] = kappa / (n + kappa)
    return pts, wts


def weighted_moments(values: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = weights @ values
    dev = values - mu
    cov = (dev * weights[:, None]).T @ dev
    return mu, 0.5 * (cov + cov.T)


def ut_transform(polys: Sequence[TaylorPoly], kernel: GaussKernel, kappa: float | None = None, zeta: float = 3.0):
    """UT mean and covariance of ``polys`` over ``kernel``.

    ``polys`` are functions of the kernel's deviation variables, i.e. they
    were built on ``UncertaintyDomain(kernel.mean, kernel.cov, zeta)``.
    """
    if polys[0].nvars != kernel.mean.size:
        raise ValueError("polynomial variable count does not match the kernel dimension")
    dom = UncertaintyDomain(kernel.mean, kernel.cov, zeta)
    pts, wts = ut_sigma(kernel.mean, kernel.cov, kappa)
    vals = evaluate_vector(polys, dom.to_deviation(pts))
    return weighted_moments(vals, wts)


def mixture_moments(kernels) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of a Gaussian mixture."""
    ks = list(kernels)
    w = np.array([k.weight for k in ks])
    mus = np.stack([k.mean for k in ks])
    mean = w @ mus
    second = sum(k.weight * (k.cov + np.outer(k.mean, k.mean)) for k in ks)
    cov = second - np.outer(mean, mean)
    return mean, 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# recursion


def _active(beta: np.ndarray) -> np.ndarray:
    top = beta.max() if beta.size else 0.0
    return np.nonzero(beta > 1e-12 * top)[0] if top > 0 else np.array([], dtype=int)


def _process(kernel: GaussKernel, map_fn: MapFn, cfg: AdaptConfig):
    dom = UncertaintyDomain(kernel.mean, kernel.cov, cfg.zeta)
    x = dom.to_polys(cfg.order)
    try:
        y = list(map_fn(x))
        if not all(isinstance(p, TaylorPoly) and p.is_finite() for p in y):
            raise FloatingPointError("map returned non-finite or non-polynomial output")
    except Exception as exc:  # noqa: BLE001 - re-raised with the kernel id
        raise KernelPropagationError(kernel.kid, exc) from exc
    act = _active(dom.beta)
    if act.size == 0:
        return x, y, 0.0, None
    jac = jacobian(y, dom.beta, act)
    nu = nli_from_jacobian(jac)
    p = split_direction(jac, act)
    return x, y, nu, dom.eigvecs[:, p]


def adaptive_propagate(initial, map_fn: MapFn, cfg: AdaptConfig, workers: int | None = None):
    """Split-until-linear propagation of a Gaussian mixture through ``map_fn``.

    Parameters
    ----------
    initial : Manifold or sequence of GaussKernel
        Input mixture; weights must sum to one.
    map_fn : callable
        Takes the list of state polynomials and returns the image polynomials.
    cfg : AdaptConfig
    workers : int, optional
        Threads used to process each generation of pending kernels.

    Returns
    -------
    (Manifold, Manifold)
        Refined initial mixture (kernels carry their domain polynomials) and
        propagated mixture (kernels carry image polynomials and UT moments),
        aligned and sorted by kernel id.  ``info['root_nli']`` lists the index
        of each input kernel before any split.
    """
    kernels = list(initial)
    wsum = sum(k.weight for k in kernels)
    if abs(wsum - 1.0) > 1e-12:
        raise ValueError(f"initial weights sum to {wsum!r}, not 1")
    lib = build_split_library(cfg.split_penalty)
    pending = []
    for i, k in enumerate(kernels):
        pending.append(GaussKernel(k.weight, k.mean, k.cov, kid=(i,), depth=0))
    accepted_in, accepted_out = [], []
    root_nli = {}
    n_splits = 0
    pool = ThreadPoolExecutor(workers) if workers and workers > 1 else None
    try:
        while pending:
            if pool is not None:
                results = list(pool.map(lambda k: _process(k, map_fn, cfg), pending))
            else:
                results = [_process(k, map_fn, cfg) for k in pending]
            nxt = []
            for k, (x, y, nu, direction) in zip(pending, results):
                if k.depth == 0:
                    root_nli[k.kid] = nu
                done = nu <= cfg.eps_nu or k.depth >= cfg.n_max or k.weight < cfg.alpha_min or direction is None
                if done:
                    kin = GaussKernel(k.weight, k.mean, k.cov, poly=x, kid=k.kid, depth=k.depth, nli=nu)
                    mu, cov = ut_transform(y, kin, cfg.ut_kappa, cfg.zeta)
                    accepted_in.append(kin)
                    accepted_out.append(GaussKernel(k.weight, mu, cov, poly=y, kid=k.kid, depth=k.depth, nli=nu))
                else:
                    n_splits += 1
                    nxt.extend(split_kernel(k, direction, lib))
            pending = nxt
    finally:
        if pool is not None:
            pool.shutdown()
    order = sorted(range(len(accepted_in)), key=lambda i: accepted_in[i].kid)
    info = {"root_nli": [root_nli[k] for k in sorted(root_nli)], "n_splits": n_splits, "n_kernels": len(order)}
    m_in = Manifold([accepted_in[i] for i in order], "initial", dict(info))
    m_out = Manifold([accepted_out[i] for i in order], "propagated", dict(info))
    return m_in, m_out


def propagated_mixture(m_in: Manifold, polys_per_kernel, kappa=None, zeta: float = 3.0) -> Manifold:
    """UT moments of new polynomials over the kernels of ``m_in``."""
    out = []
    for k, polys in zip(m_in.kernels, polys_per_kernel):
        mu, cov = ut_transform(polys, k, kappa, zeta)
        out.append(GaussKernel(k.weight, mu, cov, poly=list(polys), kid=k.kid, depth=k.depth, nli=k.nli))
    return Manifold(out, "propagated", dict(m_in.info))


def gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Log-density of N(mean, cov) at rows of ``x``; singular directions are ignored."""
    lam, vec = sym_eig(cov)
    keep = lam > 1e-12 * lam.max()
    y = (np.atleast_2d(x) - mean) @ vec[:, keep]
    maha = np.sum(y**2 / lam[keep], axis=1)
    return -0.5 * (maha + np.sum(np.log(lam[keep])) + keep.sum() * math.log(2.0 * math.pi))


def evaluate_manifold(m_in: Manifold, m_out: Manifold, samples: np.ndarray, zeta: float = 3.0) -> np.ndarray:
    """Map initial-state samples through the polynomial manifold.

    Each sample is assigned to the kernel with the largest weighted
    likelihood and its image polynomial is evaluated there.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    scores = np.stack([math.log(k.weight) + gaussian_logpdf(samples, k.mean, k.cov) for k in m_in.kernels], axis=1)
    owner = np.argmax(scores, axis=1)
    out = np.empty((samples.shape[0], len(m_out.kernels[0].poly)))
    for idx, (kin, kout) in enumerate(zip(m_in.kernels, m_out.kernels)):
        sel = owner == idx
        if np.any(sel):
            dom = UncertaintyDomain(kin.mean, kin.cov, zeta)
            out[sel] = evaluate_vector(kout.poly, dom.to_deviation(samples[sel]))
    return out


def mixture_rows(manifold: Manifold) -> tuple[list[str], list[list[float]]]:
    """Header and rows (id, weight, mean, covariance upper triangle) for export."""
    n = manifold.kernels[0].mean.size
    iu = np.triu_indices(n)
    header = ["kernel_id", "weight"] + [f"mean_{i}" for i in range(n)] + [f"cov_{i}_{j}" for i, j in zip(*iu)]
    rows = []
    for k in manifold.kernels:
        rows.append([".".join(map(str, k.kid)), k.weight, *k.mean.tolist(), *k.cov[iu].tolist()])
    return header, rows
