"""Dynamical models, integrators and orbital element conversions."""

from uqprop.dynamics.base import (
    NonFiniteStateError,
    SdeModel,
    SingularStateError,
    check_finite,
    em_step,
    euler_step,
    integrate,
    rk4_ode_step,
    rk4_step,
    time_grid,
)
from uqprop.dynamics.elements import SingularElementsError, convert
from uqprop.dynamics.models import (
    DuffingParams,
    GravityParams,
    KeplerSdeParams,
    ThrustSdeParams,
    circular_state,
    duffing_closed_form,
    duffing_model,
    duffing_step,
    gravity_accel,
    j2_accel,
    j2_model,
    kepler_planar_sde,
    linear_model,
    mee_gauss_rates,
    orbit_drift,
    ou_model,
    ou_moments,
    thrust_jacobian,
    thrust_sde,
    thrust_sde_mee,
    two_body_model,
)

__all__ = [
    "DuffingParams",
    "GravityParams",
    "KeplerSdeParams",
    "NonFiniteStateError",
    "SdeModel",
    "SingularElementsError",
    "SingularStateError",
    "ThrustSdeParams",
    "check_finite",
    "circular_state",
    "convert",
    "duffing_closed_form",
    "duffing_model",
    "duffing_step",
    "em_step",
    "euler_step",
    "gravity_accel",
    "integrate",
    "j2_accel",
    "j2_model",
    "kepler_planar_sde",
    "linear_model",
    "mee_gauss_rates",
    "orbit_drift",
    "ou_model",
    "ou_moments",
    "rk4_ode_step",
    "rk4_step",
    "thrust_jacobian",
    "thrust_sde",
    "thrust_sde_mee",
    "time_grid",
    "two_body_model",
]
