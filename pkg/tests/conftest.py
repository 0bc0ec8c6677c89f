import numpy as np
import pytest

from multipeak.admissibility import Triplet, derive_exponents
from multipeak.ground_state import ProblemParams, solve_ground_state
from multipeak.interaction_kernels import compute_constants
from multipeak.peak_geometry import build_configuration, solve_scales_for_ell

REFERENCE = ProblemParams(2, 3.0, 2.0, 2.0, 2.5, 2.0)
TRIPLET = Triplet(5, 3, 8)


@pytest.fixture(scope="session")
def params():
    return REFERENCE


@pytest.fixture(scope="session")
def dx(params):
    return derive_exponents(params)


@pytest.fixture(scope="session")
def profile(params):
    return solve_ground_state(params)


@pytest.fixture(scope="session")
def profile_1d():
    return solve_ground_state(ProblemParams(1, 3.0))


@pytest.fixture(scope="session")
def kernels(profile, params):
    return compute_constants(profile, params, 8, check=True)


@pytest.fixture(scope="session")
def triplet():
    return TRIPLET


@pytest.fixture(scope="session")
def scales10(kernels, triplet, params):
    return solve_scales_for_ell(kernels, triplet, 10.0, inner_weight=params.p)


@pytest.fixture(scope="session")
def config10(triplet, scales10):
    return build_configuration(triplet, scales10)


@pytest.fixture(scope="session")
def coupled10(params, scales10):
    return params.with_lambda(scales10.Lambda)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)
