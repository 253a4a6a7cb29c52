"""Numerical laboratory for quasilinear parabolic flows and the two-phase
Mullins-Sekerka problem in the plane."""

from .errors import *  # noqa: F401,F403
from .geometry import (
    CircleSpec,
    Container,
    EllipseSpec,
    FourierSpec,
    ReferenceCurve,
    bundle_distance,
    build_reference_curve,
    level_function,
    signed_distance_project,
    tube_and_ball,
)
from .hanzawa import HeightField, curvature, hanzawa_extension, realize_interface, reparameterize, split_curvature
from .elliptic import dirichlet_energy, dtn_jump, solve_two_phase
from .stepper import (
    NormSuite,
    QuasilinearProblem,
    WeightedGrid,
    compute_mu0,
    continue_solution,
    picard_window,
    sigma_factor,
    spectral_shift,
    weighted_norm,
)
from .models import MsState, make_second_order, ms_equilibrium_residual, ms_problem, ms_state, ms_vector_field
from .dynamics import (
    evolve,
    exponential_rate,
    fit_equilibrium,
    linearize_at,
    ljapunov_trace,
    maybe_reparameterize,
    omega_limit_report,
)

__version__ = "0.1.0"
