import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multipeak.errors import SubcriticalityViolation
from multipeak.ground_state import (ProblemParams, RadialProfile, decay_envelope_constant,
                                    eval_profile, ode_residual, solve_ground_state,
                                    soliton_1d, tail_model)
from oracles import shooting_height


def test_one_dimensional_profile_is_the_sech_soliton(profile_1d):
    r = profile_1d.grid
    mask = r <= 20
    assert np.max(np.abs(profile_1d.U_values[mask] - soliton_1d(3.0, r[mask]))) < 1e-8
    assert profile_1d.shoot_height == pytest.approx(math.sqrt(2), abs=1e-9)


def test_three_dimensional_height_matches_rk4_oracle():
    prof = solve_ground_state(ProblemParams(3, 3.0))
    oracle = shooting_height(3, 3.0)
    assert abs(prof.shoot_height - oracle) / oracle < 1e-6
    assert prof.shoot_height == pytest.approx(4.3374, abs=1e-4)


def test_value_and_slope_at_origin(profile_1d, profile):
    U, dU = eval_profile(profile_1d, 0.0)
    assert U == pytest.approx(math.sqrt(2), abs=1e-9)
    assert dU == 0.0
    assert eval_profile(profile, 0.0)[1] == 0.0


def test_profile_is_positive_and_strictly_decreasing(profile):
    assert np.all(profile.U_values > 0)
    assert np.all(np.diff(profile.U_values) < 0)
    assert np.all(profile.U_prime_values <= 0)


def test_ode_residual_is_below_ten_tolerances(profile):
    assert np.max(np.abs(ode_residual(profile))) < 10 * 2e-3


def test_tail_decay_rate_and_envelope(profile):
    r = profile.grid
    w = (r >= 0.6 * profile.R_max) & (r <= 0.8 * profile.R_max)
    ratio = profile.U_prime_values[w] / profile.U_values[w]
    assert np.max(np.abs(ratio + 1)) < 0.02
    scaled = np.sqrt(r[w]) * np.exp(r[w]) * profile.U_values[w]
    assert np.ptp(scaled) / profile.c_N < 0.01


def test_decay_envelope_holds_everywhere(profile):
    C = decay_envelope_constant(profile)
    r = profile.grid
    bound = C * np.exp(-r) * (1 + r) ** -0.5
    assert np.all(profile.U_values + np.abs(profile.U_prime_values) <= bound * (1 + 1e-12))


def test_beyond_grid_uses_tail_model_exactly(profile):
    r = profile.R_max + 5
    assert eval_profile(profile, r) == tuple(float(v) for v in tail_model(profile, r))


def test_supercritical_exponent_rejected():
    with pytest.raises(SubcriticalityViolation):
        solve_ground_state(ProblemParams(3, 5.0))
    with pytest.raises(SubcriticalityViolation):
        solve_ground_state(ProblemParams(2, 1.0))


def test_short_domain_rejected(params):
    with pytest.raises(ValueError):
        solve_ground_state(params, R_max=20)


def test_csv_round_trip(profile):
    text = profile.to_csv()
    assert text.splitlines()[1] == "r,U,Uprime"
    again = RadialProfile.from_csv(text)
    assert np.array_equal(again.U_values, profile.U_values)
    assert again.c_N == profile.c_N


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 60.0, allow_nan=False))
def test_interpolant_stays_between_neighbouring_nodes(profile, r):
    U, dU = eval_profile(profile, r)
    assert U > 0 and dU <= 1e-12
    if r < profile.R_max:
        i = int(r / profile.step)
        lo, hi = profile.U_values[min(i + 1, profile.grid.size - 1)], profile.U_values[i]
        assert lo - 1e-12 <= U <= hi + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(1.2, 7.0), st.floats(-20.0, 20.0))
def test_closed_form_soliton_solves_the_1d_equation(p, x):
    h = 1e-4
    u = soliton_1d(p, x)
    upp = (soliton_1d(p, x + h) - 2 * u + soliton_1d(p, x - h)) / h**2
    assert abs(-upp + u - u**p) < 1e-5 * max(1.0, u)
