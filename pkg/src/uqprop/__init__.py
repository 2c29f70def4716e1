"""Moment and Gaussian-mixture propagation of uncertainty through (stochastic) dynamics.

Subpackages and modules
-----------------------
da            truncated Taylor algebra and Gaussian uncertainty domains
nonlinearity  nonlinearity index of polynomial maps
gmm           adaptive splitting of Gaussian mixtures
plasma        polynomial propagation of SDE moments
mfup          multifidelity mixture propagation
dynamics      models, integrators and element sets
mc            reproducible Monte Carlo reference
metrics       accuracy indices
runner        scenario files and command line
"""

__version__ = "0.1.0"

from uqprop.da import TaylorPoly, UncertaintyDomain, da_space, dimension
from uqprop.gmm import AdaptConfig, GaussKernel, Manifold, adaptive_propagate, build_split_library, mixture_moments
from uqprop.mc import McConfig, sample_moments, simulate_paths
from uqprop.mfup import MfResult, PlasmaConfig, mf_deterministic, mf_stochastic
from uqprop.nonlinearity import jacobian, nli
from uqprop.plasma import (
    DenseOutput,
    NoiseMomentSet,
    SdeModel,
    gaussian_increment_moments,
    plasma_run,
    plasma_run_bifidelity,
    plasma_step,
    state_covariance,
    state_mean,
    state_moments,
)

__all__ = [
    "AdaptConfig",
    "DenseOutput",
    "GaussKernel",
    "Manifold",
    "McConfig",
    "MfResult",
    "NoiseMomentSet",
    "PlasmaConfig",
    "SdeModel",
    "TaylorPoly",
    "UncertaintyDomain",
    "adaptive_propagate",
    "build_split_library",
    "da_space",
    "dimension",
    "gaussian_increment_moments",
    "jacobian",
    "mf_deterministic",
    "mf_stochastic",
    "mixture_moments",
    "nli",
    "plasma_run",
    "plasma_run_bifidelity",
    "plasma_step",
    "sample_moments",
    "simulate_paths",
    "state_covariance",
    "state_mean",
    "state_moments",
]
