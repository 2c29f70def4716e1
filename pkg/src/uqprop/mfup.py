"""Multifidelity propagation of a Gaussian mixture.

The initial mixture is refined and propagated through a cheap map; each
kernel's image polynomial then keeps its nilpotent part while its constant
part is replaced by an accurate propagation of the kernel mean (a
deterministic flow, or the PLASMA mean when process noise is present).  In
the stochastic case the kernel covariances are inflated by the
process-noise covariance of that kernel.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from uqprop.dynamics.base import SdeModel
from uqprop.gmm import (
    AdaptConfig,
    GaussKernel,
    KernelPropagationError,
    Manifold,
    adaptive_propagate,
    mixture_rows,
    ut_transform,
)
from uqprop.plasma import plasma_run, plasma_run_bifidelity, state_covariance, state_mean


@dataclass
class PlasmaConfig:
    """Time span and PLASMA settings for the per-kernel noise runs.

    ``lf_drift`` switches to the bi-fidelity driver (relative dynamics of
    ``lf_drift`` around the noise-free trajectory of the SDE drift).
    """

    t0: float
    tf: float
    h: float
    order: int = 2
    integ: str = "rk4"
    substeps: int = 1
    lf_drift: Callable | None = None


@dataclass
class KernelRecord:
    kid: tuple
    mu_lf: np.ndarray
    mu_hf: np.ndarray  # accurate kernel-mean propagation (HF flow or PLASMA mean)
    p_pn: np.ndarray | None = None

    @property
    def shift(self) -> float:
        return float(np.linalg.norm(self.mu_hf - self.mu_lf))


@dataclass
class MfResult:
    gmm: Manifold  # corrected propagated mixture
    lf: Manifold  # uncorrected propagated mixture
    initial: Manifold  # refined initial mixture
    records: list[KernelRecord] = field(default_factory=list)

    @property
    def shifts(self) -> np.ndarray:
        return np.array([r.shift for r in self.records])

    def kernel_rows(self) -> tuple[list[str], list[list]]:
        """Per-kernel LF constant part, corrected centre and shift."""
        n = self.records[0].mu_lf.size
        header = ["kernel_id"] + [f"mu_lf_{i}" for i in range(n)] + [f"mu_hf_{i}" for i in range(n)] + ["shift"]
        rows = [[".".join(map(str, r.kid)), *r.mu_lf.tolist(), *r.mu_hf.tolist(), r.shift] for r in self.records]
        return header, rows

    def mixture_rows(self):
        return mixture_rows(self.gmm)


def _fan_out(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _guarded(fn):
    def run(kernel):
        try:
            return fn(kernel)
        except KernelPropagationError:
            raise
        except Exception as exc:  # noqa: BLE001 - re-raised with the kernel id
            raise KernelPropagationError(kernel.kid, exc) from exc

    return run


def _recentred(m_in: Manifold, m_lf: Manifold, centres, cfg: AdaptConfig, extra_cov=None) -> Manifold:
    out = []
    for i, (kin, klf) in enumerate(zip(m_in.kernels, m_lf.kernels)):
        polys = [p.with_const(c) for p, c in zip(klf.poly, centres[i])]
        mu, cov = ut_transform(polys, kin, cfg.ut_kappa, cfg.zeta)
        if extra_cov is not None:
            cov = cov + extra_cov[i]
        out.append(GaussKernel(klf.weight, mu, cov, poly=polys, kid=klf.kid, depth=klf.depth, nli=klf.nli))
    return Manifold(out, "propagated", dict(m_lf.info))


def mf_deterministic(lf_map, hf_prop, initial, cfg: AdaptConfig, workers: int | None = None) -> MfResult:
    """Correct an LF mixture propagation with HF flows of the kernel means.

    Parameters
    ----------
    lf_map : callable
        Polynomial map (list of TaylorPoly -> list of TaylorPoly) of the LF model.
    hf_prop : callable
        ``x0 -> x(t_f)`` for real states under the HF model.
    initial : Manifold or sequence of GaussKernel
    cfg : AdaptConfig
    workers : int, optional
        Threads for the LF refinement and the per-kernel HF runs.
    """
    m_in, m_lf = adaptive_propagate(initial, lf_map, cfg, workers)
    hf = _fan_out(_guarded(lambda k: np.asarray(hf_prop(k.mean), dtype=float)), m_in.kernels, workers)
    records = [KernelRecord(k.kid, np.array([p.const for p in k.poly]), mu) for k, mu in zip(m_lf.kernels, hf)]
    gmm = _recentred(m_in, m_lf, hf, cfg)
    return MfResult(gmm, m_lf, m_in, records)


def mf_stochastic(lf_map, hf_sde: SdeModel, initial, cfg: AdaptConfig, plasma_cfg: PlasmaConfig, workers: int | None = None) -> MfResult:
    """LF mixture propagation corrected and inflated by per-kernel PLASMA runs.

    Each refined kernel mean is propagated from a deterministic start; its
    PLASMA mean becomes the new constant part and its covariance is added
    to the kernel covariance.  Weights are those of the LF refinement.
    """
    m_in, m_lf = adaptive_propagate(initial, lf_map, cfg, workers)
    pc = plasma_cfg

    def noise_run(kernel):
        if pc.lf_drift is None:
            sets = plasma_run(hf_sde, kernel.mean, pc.t0, pc.tf, pc.h, pc.order, pc.integ, pc.substeps)
        else:
            sets = plasma_run_bifidelity(hf_sde, pc.lf_drift, kernel.mean, pc.t0, pc.tf, pc.h, pc.order, pc.integ, pc.substeps)
        ms = sets[-1]
        return state_mean(ms), state_covariance(ms)

    runs = _fan_out(_guarded(noise_run), m_in.kernels, workers)
    centres = [mu for mu, _ in runs]
    p_pn = [cov for _, cov in runs]
    records = [
        KernelRecord(k.kid, np.array([p.const for p in k.poly]), mu, cov) for k, (mu, cov) in zip(m_lf.kernels, runs)
    ]
    gmm = _recentred(m_in, m_lf, centres, cfg, p_pn)
    return MfResult(gmm, m_lf, m_in, records)
