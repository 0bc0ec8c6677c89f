"""Segregated multi-peak solutions of a two-component nonlinear Schrödinger
system: ground state, interaction kernels, peak geometry, the reduced
displacement system and a finite-difference refinement."""

from .admissibility import Triplet, derive_exponents, enumerate_triplets, is_admissible
from .ground_state import ProblemParams, solve_ground_state
from .interaction_kernels import compute_constants
from .peak_geometry import build_configuration, solve_scales, solve_scales_for_ell

__all__ = [
    "ProblemParams", "Triplet", "build_configuration", "compute_constants",
    "derive_exponents", "enumerate_triplets", "is_admissible", "solve_ground_state",
    "solve_scales", "solve_scales_for_ell",
]
__version__ = "0.1.0"
