"""Numerical toolkit for peakons of the Camassa-Holm equation

    u_t + u u_x + d_x (1 - d_xx)^{-1} (u^2 + u_x^2 / 2) = 0:

exact multipeakon dynamics, a positive-momentum field solver, localized
energy audits, modulation tracking and characteristic diagnostics.
"""

from .grid import DomainError, Grid, GridField, ResolutionError
from .kernels import (apply_helmholtz, bump_mass, green_convolve, helmholtz_solve,
                      mollifier_kernel, peakon_profile, weight_psi)
from .measures import (AtomicMomentum, SampledMomentum, check_Yplus, field_from_atoms,
                       h1_norm, momentum_of_field)
from .multipeakon import (CollisionError, PeakonState, asymptotic_speeds, evolve,
                          exact_invariants, hamiltonian, rhs)
from .field_solver import BlowUpError, FieldTrajectory, SolverSettings, evolve_field
from .modulation import ModulationLost, locate, orthogonality_residual, track, verify_n0
from .characteristics import flow, flow_jacobian, jump_at, track_jump, transport_check
from .config import ConfigError, parse_config
from .scenarios import run_scenario

__version__ = "0.1.0"
