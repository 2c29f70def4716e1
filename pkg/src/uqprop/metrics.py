"""Accuracy indices comparing an estimated distribution with a reference."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    """The reference makes the requested relative metric meaningless."""


def relative_error(est, ref) -> np.ndarray:
    """Element-wise ``|est - ref| / |ref|`` (``nan`` where ``ref == 0``)."""
    est = np.asarray(est, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if est.shape != ref.shape:
        raise ValueError("shape mismatch")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ref != 0.0, np.abs(est - ref) / np.abs(ref), np.nan)


def eps_mu(est_mean, ref_mean) -> float:
    """Largest component of the relative mean error.

    Components whose reference value is exactly zero are left out with a
    warning.
    """
    rel = relative_error(est_mean, ref_mean)
    zero = np.isnan(rel)
    if zero.all():
        raise UndefinedMetricError("every reference mean component is zero")
    if zero.any():
        log.warning("eps_mu: skipping zero reference components %s", np.nonzero(zero)[0].tolist())
    return float(np.max(rel[~zero]))


def eps_lambda(est_cov, ref_cov) -> float:
    """Relative error of the largest covariance eigenvalue."""
    lam_est = np.linalg.eigvalsh(np.asarray(est_cov, dtype=float))[-1]
    lam_ref = np.linalg.eigvalsh(np.asarray(ref_cov, dtype=float))[-1]
    if lam_ref == 0.0:
        raise UndefinedMetricError("reference covariance has a zero largest eigenvalue")
    return float(abs(lam_est - lam_ref) / lam_ref)


def cartesian_scale(length_unit: float, mu: float) -> np.ndarray:
    """Units for a 6-D Cartesian state such that ``length_unit = 1`` and ``mu = 1``."""
    if length_unit <= 0 or mu <= 0:
        raise ValueError("length unit and mu must be positive")
    v_unit = np.sqrt(mu / length_unit)
    return np.array([length_unit] * 3 + [v_unit] * 3)


def rmse(predicted, actual, scale=None) -> float:
    """Root mean square error over all samples and components.

    ``scale`` divides every component before comparison (e.g.
    :func:`cartesian_scale`); rows are paired by position.
    """
    p = np.atleast_2d(np.asarray(predicted, dtype=float))
    a = np.atleast_2d(np.asarray(actual, dtype=float))
    if p.shape != a.shape:
        raise ValueError(f"sample sets differ in shape: {p.shape} vs {a.shape}")
    d = p - a
    if scale is not None:
        d = d / np.asarray(scale, dtype=float)
    return float(np.sqrt(np.mean(d * d)))


@dataclass
class ErrorReport:
    eps_mu: float
    eps_lambda: float
    rmse: float | None = None
    mean_rel: np.ndarray = field(default=None, repr=False)
    cov_rel: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {"eps_mu": self.eps_mu, "eps_lambda": self.eps_lambda, "rmse": self.rmse}
        if self.mean_rel is not None:
            out["mean_rel"] = self.mean_rel.tolist()
        if self.cov_rel is not None:
            out["cov_rel"] = self.cov_rel.tolist()
        return out


def error_report(est_mean, est_cov, ref_mean, ref_cov, predicted=None, actual=None, scale=None) -> ErrorReport:
    """All indices at once; ``rmse`` only when paired samples are given."""
    r = rmse(predicted, actual, scale) if predicted is not None else None
    return ErrorReport(
        eps_mu(est_mean, ref_mean),
        eps_lambda(est_cov, ref_cov),
        r,
        relative_error(est_mean, ref_mean),
        relative_error(est_cov, ref_cov),
    )
