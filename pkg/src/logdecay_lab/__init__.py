"""Discrete laboratory for boundary-damped waves: spectrum, resolvent, decay and Carleman checks."""
from .domain import (
    BoundaryClass,
    CoefficientField,
    DampingProfile,
    GridDomain,
    build_interval,
    build_rectangle,
    validate_coefficients,
)
from .errors import *  # noqa: F401,F403
from .estimators import BandEstimator, LogDecayEstimator, ResolventGrowthEstimator
from .operator import (
    ResolventSolver,
    StateVector,
    WaveGenerator,
    apply_generator,
    assemble_generator,
    energy,
    h_norm,
    imaginary_part_identity,
    solve_resolvent,
)
from .resolvent import fit_growth, probe_band, resolvent_norm, sweep_imaginary_axis
from .semigroup import decay_fit, evolve, graph_norm, remove_equilibrium, step_midpoint
from .spectrum import band_fit, band_margin, eigen_full, eigen_window

__version__ = "0.1.0"
