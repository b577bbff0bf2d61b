"""Spectral stability toolkit for viscous strong-detonation waves.

Pipeline: solve the traveling-wave connection, bound unstable spectrum with
the energy-estimate radius, then count Evans-function zeros inside the
resulting half-disk by winding number.  ea = 0 selects the explicit
Heaviside-ignition organizing center.
"""

from .model import (
    ModelParams,
    EndStates,
    InvalidParameterError,
    BeyondCJError,
    burned_states,
    ignition,
    ignition_deriv,
    nondimensionalize,
    q_max,
    validate,
)
from .profile import (
    ProfileSolution,
    analytic_seed,
    continue_profiles,
    end_linearizations,
    solve_profile,
    tw_rhs,
)

__version__ = "0.1.0"
