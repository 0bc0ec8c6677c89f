import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multipeak.admissibility import Triplet
from multipeak.errors import ConstraintViolation, InadmissibleTriplet, NoConvergence
from multipeak.peak_geometry import (PeakLabel, ScaleSolution, build_configuration,
                                     distance_report, dominant_neighbors, expansion_ratio,
                                     full_parameters, predicted_rho2, scale_residuals,
                                     separation_limits, solve_scales, solve_scales_for_ell)
from multipeak.polygon import edge_frame, rotate


@pytest.fixture(scope="module")
def scales_ladder(kernels, triplet):
    return [solve_scales(kernels, triplet, lam) for lam in (1e6, 1e8, 1e10)]


def test_scale_residuals_vanish(scales_ladder):
    for sc in scales_ladder:
        assert max(abs(r) for r in sc.residuals) < 1e-10


def test_expansion_ratio_tends_to_one(dx, triplet, scales_ladder):
    ratios = [expansion_ratio(dx, triplet, sc) for sc in scales_ladder]
    assert all(r > 1 for r in ratios)
    assert ratios[0] > ratios[1] > ratios[2]


def test_scale_ratios(triplet, scales_ladder):
    # ellbar - mu ell and ellbar' - ell stay bounded
    for sc in scales_ladder:
        assert abs(sc.ellbar - triplet.mu * sc.ell) < 3
        assert abs(sc.ellbar_prime - sc.ell) < 3


def test_small_coupling_rejected(kernels, triplet):
    with pytest.raises(NoConvergence):
        solve_scales(kernels, triplet, 10.0)


def test_inadmissible_triplet_rejected(kernels):
    with pytest.raises(InadmissibleTriplet):
        solve_scales(kernels, Triplet(4, 2, 8), 1e8)


def test_prescribed_ell_reproduces_coupling(kernels, triplet, params):
    sc = solve_scales_for_ell(kernels, triplet, 12.0, inner_weight=params.p)
    assert max(abs(r) for r in sc.residuals) < 1e-10
    again = solve_scales(kernels, triplet, sc.Lambda, inner_weight=params.p)
    assert again.ell == pytest.approx(12.0, rel=1e-9)


def test_scale_csv(scales_ladder):
    lines = scales_ladder[0].to_csv().splitlines()
    assert lines[0] == "name,value"
    assert [ln.split(",")[0] for ln in lines[-3:]] == [
        "residual_geometric", "residual_inner_balance", "residual_outer_balance"]


def test_peak_counts(config10, triplet):
    k, m, n = triplet.k, triplet.m, triplet.n
    assert len(config10.peaks1) == k * (m + n) == 64
    assert len(config10.peaks2) == k * n == 24
    assert len(config10.to_csv().splitlines()) == 1 + 88


def test_anchor_identities(config10, scales10, triplet):
    s = math.sin(math.pi / 8)
    y1 = config10.point("y", 1)
    assert np.allclose(y1, [scales10.ellbar_prime / (2 * s), 0.0], atol=1e-12)
    top = config10.point("z", 0)
    assert np.linalg.norm(top) == pytest.approx(triplet.m * scales10.ell + scales10.ellbar_prime / (2 * s), rel=1e-14)
    z2n = top + 2 * triplet.n * scales10.ellbar * edge_frame(8).tangent
    assert np.allclose(z2n, rotate(top, 8, 1), atol=1e-12 * np.linalg.norm(top))


def test_y1_position_example():
    sc = ScaleSolution(12.0, 9.0, 10.0, 1e6, (0.0, 0.0, 0.0))
    conf = build_configuration(Triplet(5, 3, 8), sc)
    assert np.linalg.norm(conf.point("y", 1)) == pytest.approx(13.0656296, abs=1e-7)


def _same_set(a, b, tol=1e-9):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return bool(np.all(d.min(axis=1) < tol) and np.all(d.min(axis=0) < tol))


def test_rotation_and_reflection_invariance(config10):
    for pts in (config10.peaks1, config10.peaks2):
        assert _same_set(rotate(pts, 8, 1), pts)
        mirror = pts.copy()
        mirror[:, 1] *= -1
        assert _same_set(mirror, pts)


def test_outer_edge_alternates_components(config10, triplet):
    start = config10.point("z", 0, 0)
    frame = edge_frame(triplet.k)
    on_edge = []
    for comp, pts in ((1, config10.peaks1), (2, config10.peaks2)):
        for x in pts:
            rel = x[:2] - start
            t = rel @ frame.tangent
            if abs(rel @ frame.normal) < 1e-9 and -1e-9 <= t:
                on_edge.append((t, comp))
    on_edge.sort()
    comps = [c for t, c in on_edge if t <= 2 * triplet.n * config10.scales.ellbar + 1e-6]
    assert len(comps) == 2 * triplet.n + 1
    assert all(a != b for a, b in zip(comps, comps[1:]))


def test_constraint_violations(triplet, scales10):
    with pytest.raises(ConstraintViolation, match="alpha_2"):
        build_configuration(triplet, scales10, alpha=[0, 1.5, 0, 0, 0, 0])
    beta = np.zeros(5)
    beta[0] = 0.3
    with pytest.raises(ConstraintViolation, match="beta_1"):
        build_configuration(triplet, scales10, beta=beta)


@pytest.fixture(scope="module")
def config_1e8(kernels, triplet):
    return build_configuration(triplet, solve_scales(kernels, triplet, 1e8))


def test_distance_witnesses(config_1e8):
    sc = config_1e8.scales
    rep = distance_report(config_1e8)
    assert rep.rho == pytest.approx(sc.ellbar, rel=1e-8)
    assert any({str(a), str(b)} == {"z0@0", "z1@0"} for a, b in rep.witnesses)
    assert rep.rho2 == pytest.approx(predicted_rho2(sc, 8), rel=1e-8)
    assert any({str(a), str(b)} == {"z1@0", "z5@7"} for a, b in rep.witnesses2)
    # the closest pair in Π1 is the inner-polygon side ellbar', just below ell
    assert rep.rho1 == pytest.approx(sc.ellbar_prime, rel=1e-8)
    assert sc.ellbar_prime < sc.ell


def test_separation_ratios(config_1e8, triplet):
    lim_z2, lim_z1 = separation_limits(triplet)
    assert lim_z2 > 1 and lim_z1 > 1
    sc = config_1e8.scales
    ym = config_1e8.point("y", triplet.m)
    d2 = np.linalg.norm(config_1e8.point("z", 2) - ym) / sc.ell
    d1 = np.linalg.norm(config_1e8.point("z", 1) - ym) / sc.ellbar
    assert d2 == pytest.approx(lim_z2, rel=0.02)
    assert d1 == pytest.approx(lim_z1, rel=0.02)


def _labels(config, params, kind, index):
    comp, row = config.locate(kind, index)
    return {str(l) for l in dominant_neighbors(config, params, comp, row)}


def test_dominant_neighbours(config_1e8, params):
    p = params.with_lambda(config_1e8.scales.Lambda)
    assert _labels(config_1e8, p, "y", 1) == {"y2@0", "y1@1", "y1@7"}
    assert _labels(config_1e8, p, "y", 3) == {"y2@0", "y4@0"}
    assert _labels(config_1e8, p, "z", 0) == {"y5@0", "z1@0", "z5@7"}


def test_peak_label_format():
    assert str(PeakLabel(1, 3, "y", 2)) == "y2@3"


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6),
       st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=2),
       st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3))
def test_perturbed_distances_stay_in_predicted_bands(config10, triplet, alpha, beta, gamma_raw):
    sc = config10.scales
    gamma = np.asarray(gamma_raw) / sc.ellbar
    a, b, g = full_parameters(triplet, alpha, beta, gamma)
    conf = build_configuration(triplet, sc, a, b, g)
    rep = distance_report(conf)
    mu = triplet.mu
    assert abs(rep.rho1 - sc.ell) <= 2
    assert abs(rep.rho - mu * sc.ell) <= 3
    assert abs(rep.rho2 - 2 * mu * math.cos(math.pi / 8) * sc.ell) <= 3
    assert _same_set(rotate(conf.peaks1, 8, 1), conf.peaks1)


@settings(max_examples=20, deadline=None)
@given(st.floats(8.5, 30.0))
def test_residual_definition_consistent(kernels, triplet, ell):
    sc = solve_scales_for_ell(kernels, triplet, ell)
    res = scale_residuals(kernels, triplet, sc.Lambda, sc.ell, sc.ellbar, sc.ellbar_prime)
    assert max(abs(r) for r in res) < 1e-10
