import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multipeak.ansatz_field import (FieldPair, error_field, eval_ansatz, linearized_coefficients,
                                    log_error_prediction, peak_weight, point_configuration,
                                    project_error, project_error_parts, projections_csv,
                                    row_scales, sample_ansatz, star_norm, star_sample_points)
from multipeak.ground_state import eval_profile
from multipeak.interaction_kernels import fit_rate_law, psi0
from multipeak.peak_geometry import build_configuration, solve_scales_for_ell
from multipeak.polygon import rotate


def test_single_peak_is_one_bubble(profile, params):
    conf = point_configuration(np.array([[1.5, -2.0]]), np.zeros((0, 2)))
    pts = np.random.default_rng(1).uniform(-10, 10, (200, 2))
    u1, u2 = eval_ansatz(conf, profile, pts)
    r = np.linalg.norm(pts - [1.5, -2.0], axis=1)
    assert np.array_equal(u1, eval_profile(profile, r)[0])
    assert np.all(u2 == 0)
    E = error_field(conf, params, profile, pts, Lambda=0.0)
    assert np.max(np.abs(E.E1)) == 0.0 and np.max(np.abs(E.E2)) == 0.0


def test_inner_error_decays_with_separation(profile, params):
    ds = [8.0, 10.0, 12.0]
    sups = []
    for d in ds:
        conf = point_configuration(np.array([[0.0, 0.0], [d, 0.0]]), np.zeros((0, 2)))
        x = np.linspace(-5, d + 5, 4001)
        E = error_field(conf, params, profile, np.column_stack([x, 0 * x]), Lambda=0.0)
        sups.append(np.max(np.abs(E.I1)))
    slope, _, _ = fit_rate_law(ds, sups, log_term=False)
    assert slope == pytest.approx(-min(params.p - 1, 1), abs=0.1)


def test_ansatz_at_peaks(config10, profile, scales10):
    U0 = profile.shoot_height
    u1, u2 = eval_ansatz(config10, profile, config10.peaks1)
    assert np.all(u1 >= U0)
    assert np.all(u1 <= U0 + 4 * profile(scales10.ell - 2))
    assert np.all(u2 <= 3 * 8 * profile(scales10.ellbar - 2))


def test_sampled_ansatz_symmetry_and_bounds(config10, profile):
    fp = sample_ansatz(config10, profile, 60.0, 0.5)
    assert fp.reflection_defect() < 1e-12
    for u in (fp.u1, fp.u2):
        assert u.min() > 0 and u.max() <= profile.shoot_height + 1


def test_ansatz_rotation_invariance(config10, profile):
    pts = np.random.default_rng(2).uniform(-60, 60, (500, 2))
    a1, a2 = eval_ansatz(config10, profile, pts)
    b1, b2 = eval_ansatz(config10, profile, rotate(pts, 8, 1))
    assert np.max(np.abs(a1 - b1)) < 1e-6 and np.max(np.abs(a2 - b2)) < 1e-6


def test_star_norm_basic_values(config10):
    pts = star_sample_points(config10, np.random.default_rng(3).uniform(-50, 50, (300, 2)))
    zero = np.zeros(len(pts))
    assert star_norm(zero, zero, config10, 0.05, pts).total == 0.0
    w = peak_weight(config10, pts, 0.05)
    assert star_norm(w, w, config10, 0.05, pts).total == pytest.approx(1.0, rel=1e-14)
    assert len(pts) == 300 + 9 * 88


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-6), st.floats(0.01, 0.5))
def test_star_norm_homogeneous(config10, c, eta):
    pts = np.random.default_rng(4).uniform(-50, 50, (200, 2))
    g = np.sin(pts[:, 0]) * np.exp(-0.01 * pts[:, 1] ** 2)
    one = star_norm(g, 2 * g, config10, eta, pts)
    scaled = star_norm(c * g, 2 * c * g, config10, eta, pts)
    assert scaled.value1 == pytest.approx(abs(c) * one.value1, rel=1e-12)
    assert scaled.value2 == pytest.approx(abs(c) * one.value2, rel=1e-12)


def test_projection_equilibria(config10, coupled10, profile):
    sc = row_scales(config10, coupled10, profile)
    top = project_error_parts(config10, coupled10, profile, ("z", 0, 0), check=True)
    assert top.check_change < 1e-3
    # the inner and outer parts are each of order ΛΨ1 and cancel
    assert abs(top.inner[0]) / sc["psi1"] > 1
    assert abs(top.total[0]) / sc["psi1"] < 0.1
    for j in (2, 3, 4):
        v = project_error(config10, coupled10, profile, ("y", j, 0), [1.0, 0.0])
        assert abs(v) / sc["psi0"] < 0.05


def test_axis_peaks_have_no_transverse_force(config10, coupled10, profile):
    sc = row_scales(config10, coupled10, profile)
    for lab in (("y", 1, 0), ("y", 3, 0), ("z", 0, 0)):
        e2 = project_error(config10, coupled10, profile, lab, [0.0, 1.0])
        e1 = project_error(config10, coupled10, profile, lab, [1.0, 0.0])
        assert abs(e2) < 1e-8 * max(abs(e1), sc["psi0"])


def test_projection_modulus_is_rotation_invariant(config10, coupled10, profile):
    a = project_error_parts(config10, coupled10, profile, ("y", 3, 0)).total
    b = project_error_parts(config10, coupled10, profile, ("y", 3, 1)).total
    scale = psi0(profile, config10.scales.ell)
    assert abs(np.linalg.norm(a) - np.linalg.norm(b)) < 1e-6 * scale


def test_outer_force_on_ray_peaks_is_exponentially_small(kernels, triplet, params, profile):
    ells = [10.0, 12.0, 14.0]
    ratios = []
    for ell in ells:
        sc = solve_scales_for_ell(kernels, triplet, ell, inner_weight=params.p)
        conf = build_configuration(triplet, sc)
        proj = project_error_parts(conf, params.with_lambda(sc.Lambda), profile, ("y", 2, 0))
        ratios.append(np.linalg.norm(proj.outer) / psi0(profile, ell))
    delta = -fit_rate_law(ells, ratios, log_term=False)[0]
    assert delta > 0
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


def test_response_step_limit(config10, coupled10, profile):
    with pytest.raises(ValueError):
        linearized_coefficients(config10, coupled10, profile, delta=0.1)


def test_error_prediction_formula(params, dx, triplet):
    mu, ell, lam, eta = triplet.mu, 12.0, 800.0, 0.05
    expected = math.log(lam * math.exp(-(dx.c - eta) * mu * ell) + math.exp(-(1 - eta) * ell))
    assert log_error_prediction(params, dx, mu, ell, lam, eta) == pytest.approx(expected, rel=1e-13)


def test_csv_schemas():
    fp = FieldPair(np.array([-1.0, 0.0, 1.0]), np.ones((3, 3)), np.zeros((3, 3)), 1.0)
    lines = fp.to_csv().splitlines()
    assert lines[0] == "x1,x2,u1,u2,E1,E2" and len(lines) == 10
    text = projections_csv([("y2", "e1", 2.0, 4.0)])
    assert text.splitlines() == ["peak_id,dir,value,scale,normalized", "y2,e1,2.0,4.0,0.5"]
