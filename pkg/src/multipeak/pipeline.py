"""Stage functions behind the command line: each writes its CSV files into an
output directory and returns a process exit code."""

from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import config as configmod
from .admissibility import (Triplet, derive_exponents, enumerate_triplets, is_admissible,
                            mu_window, triplets_csv)
from .ansatz_field import (linearized_coefficients, outer_radius, project_error_parts,
                           projections_csv, row_scales, sample_ansatz, with_free_vector,
                           free_vector)
from .errors import (EmptyWindow, HypothesisViolation, InadmissibleTriplet, LineSearchStall,
                     MaxIterExceeded, MultipeakError, NoConvergence, QuadratureDivergence,
                     SignViolation, StepTooLarge, SubcriticalityViolation)
from .ground_state import solve_ground_state
from .interaction_kernels import compute_constants
from .pde_refine import DiscreteSystem, newton_refine, positivity_check, track_peaks
from .peak_geometry import build_configuration, solve_scales, solve_scales_for_ell
from .polygon import edge_frame

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2
EXIT_WINDOW = 3
EXIT_SCALES = 4
EXIT_VERIFY = 5
EXIT_REFINE = 6

# which exit code each library failure maps to
ERROR_CODES = (
    (HypothesisViolation, EXIT_HYPOTHESIS),
    (SubcriticalityViolation, EXIT_HYPOTHESIS),
    (EmptyWindow, EXIT_WINDOW),
    (InadmissibleTriplet, EXIT_WINDOW),
    (NoConvergence, EXIT_SCALES),
    (QuadratureDivergence, EXIT_SCALES),
    (SignViolation, EXIT_SCALES),
    (StepTooLarge, EXIT_VERIFY),
    (MaxIterExceeded, EXIT_REFINE),
    (LineSearchStall, EXIT_REFINE),
)

# thresholds of the verification report
PROJECTION_VERTEX_TOL = 0.1
PROJECTION_TOL = 0.05
STENCIL_TOL = 0.10
CONTINUATION_STEPS = (0.25, 0.5, 1.0)


def exit_code_for(exc):
    for kind, code in ERROR_CODES:
        if isinstance(exc, kind):
            return code
    return EXIT_SCALES if isinstance(exc, MultipeakError) else EXIT_CONFIG


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _fail(exc, stage):
    print(f"{stage}: {type(exc).__name__}: {exc}", file=sys.stderr)
    return exit_code_for(exc)


def selected_triplet(cfg, dx):
    if cfg.triplets == "auto":
        return enumerate_triplets(dx, cfg.k, max(cfg.count, 1))[0]
    return Triplet(cfg.m, cfg.n, cfg.k)


@dataclass(frozen=True)
class Construction:
    cfg: configmod.RunConfig
    params: object
    dx: object
    triplet: Triplet
    profile: object
    kernels: object
    scales: object
    configuration: object

    @property
    def coupled(self):
        return self.params.with_lambda(self.scales.Lambda)


def inner_weight(cfg):
    return cfg.p if cfg.balance == "projection" else 1.0


def construct(cfg):
    """Profile, kernel constants, balanced scales and the unperturbed peaks."""
    params = cfg.params
    dx = derive_exponents(params)
    triplet = selected_triplet(cfg, dx)
    if not is_admissible(dx, triplet.m, triplet.n, triplet.k):
        lo, hi = mu_window(dx, triplet.k)
        raise InadmissibleTriplet(
            f"mu={triplet.mu:.6g} of ({triplet.m},{triplet.n},{triplet.k}) is outside ({lo:.6g}, {hi:.6g})")
    profile = solve_ground_state(params, R_max=cfg.R_max, tol=cfg.ground_tol)
    kernels = compute_constants(profile, params, triplet.k, check=True)
    w = inner_weight(cfg)
    if cfg.Lambda > 0:
        scales = solve_scales(kernels, triplet, cfg.Lambda, inner_weight=w)
    else:
        scales = solve_scales_for_ell(kernels, triplet, cfg.ell, inner_weight=w)
    configuration = build_configuration(triplet, scales, N=cfg.N)
    return Construction(cfg, params, dx, triplet, profile, kernels, scales, configuration)


def cmd_triplets(cfg, out_dir):
    try:
        dx = derive_exponents(cfg.params)
        rows = list(enumerate_triplets(dx, cfg.k, cfg.count))
        if cfg.triplets == "explicit":
            explicit = Triplet(cfg.m, cfg.n, cfg.k)
            mu_window(dx, explicit.k)
            if explicit not in rows:
                rows.insert(0, explicit)
    except MultipeakError as exc:
        return _fail(exc, "triplets")
    _write(out_dir, "triplets.csv", triplets_csv(dx, rows))
    return EXIT_OK


def cmd_construct(cfg, out_dir, built=None):
    try:
        built = built or construct(cfg)
    except MultipeakError as exc:
        return _fail(exc, "construct")
    _write(out_dir, "profile.csv", built.profile.to_csv())
    _write(out_dir, "constants.csv", built.kernels.to_csv())
    _write(out_dir, "scales.csv", built.scales.to_csv())
    _write(out_dir, "peaks.csv", built.configuration.to_csv())
    return EXIT_OK


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool


def _abs_check(name, measured, tolerance):
    measured = float(measured)
    return Check(name, measured, 0.0, tolerance, bool(abs(measured) <= tolerance))


def _rel_check(name, measured, expected, tolerance=STENCIL_TOL):
    measured, expected = float(measured), float(expected)
    ok = abs(measured - expected) <= tolerance * abs(expected)
    return Check(name, measured, expected, tolerance, bool(ok))


def projection_checks(built):
    """Normalized force on y_{m+1}, interior y_j and odd z peaks of the
    unperturbed configuration, with the table of raw projections."""
    conf, params, prof = built.configuration, built.coupled, built.profile
    m, n = built.triplet.m, built.triplet.n
    scale = row_scales(conf, params, prof)
    frame = edge_frame(built.triplet.k)
    checks, rows = [], []

    top = project_error_parts(conf, params, prof, ("z", 0, 0)).total
    rows.append((f"y{m + 1}", "e1", float(top[0]), scale["psi1"]))
    checks.append(_abs_check(f"projection y{m + 1} inner+outer / Lambda Psi1",
                             top[0] / scale["psi1"], PROJECTION_VERTEX_TOL))
    for j in range(2, m + 1):
        v = project_error_parts(conf, params, prof, ("y", j, 0)).total
        rows.append((f"y{j}", "e1", float(v[0]), scale["psi0"]))
        checks.append(_abs_check(f"projection y{j} / Psi0", v[0] / scale["psi0"], PROJECTION_TOL))
    for h in range(1, n + 1):
        v = project_error_parts(conf, params, prof, ("z", 2 * h - 1, 0)).total
        for tag, direction in (("t", frame.tangent), ("n", frame.normal)):
            value = float(np.dot(v, direction))
            rows.append((f"z{2 * h - 1}", tag, value, scale["psi2"]))
        checks.append(_abs_check(f"projection z{2 * h - 1} / Lambda Psi2",
                                 float(np.linalg.norm(v)) / scale["psi2"], PROJECTION_TOL))
    return checks, rows


def _edge_stencil(h, top, boundary_fold):
    """Columns and weights of the second difference at edge index h over
    unknowns 1..top: index 0 is dropped (it couples to α) and index top+1 is
    either dropped or folded onto top-1 by the mirror about the edge middle."""
    terms = {}
    for j, w in ((h - 1, 1.0), (h, -2.0), (h + 1, 1.0)):
        if j == top + 1 and boundary_fold:
            j = top - 1
        if 1 <= j <= top:
            terms[j] = terms.get(j, 0.0) + w
    return sorted(terms.items())


def stencil_checks(table, kernels, triplet):
    """Compare measured response entries with the leading-order stencils.

    Row y_i in α follows (1, -2, 1).  Row z_h follows c·(1, -2, 1) in β
    (tangent) and in γ (normal), with c3, c4 for even h and c5, c6 for odd h.
    The α rows are also checked for shape alone (diagonal over mean
    off-diagonal equal to -2), which holds whatever the overall factor is.
    """
    m, n = triplet.m, triplet.n
    c = kernels.constants()
    checks = []
    for i in range(2, m):
        row = f"y{i}.e1"
        left, mid, right = (table.entry(row, f"alpha{j}") for j in (i - 1, i, i + 1))
        checks.append(_rel_check(f"alpha stencil shape {row} (diag/off)", 2 * mid / (left + right), -2.0))
        checks.append(_rel_check(f"alpha stencil coefficient {row}", 0.5 * (left + right), 1.0))
    for h in range(1, n):
        coef = c["c3"] if h % 2 == 0 else c["c5"]
        label = "c3" if h % 2 == 0 else "c5"
        for j, w in _edge_stencil(h, n - 1, False):
            checks.append(_rel_check(f"beta stencil {label} z{h}.t beta{j}",
                                     table.entry(f"z{h}.t", f"beta{j}"), w * coef))
    for h in range(1, n + 1):
        coef = c["c4"] if h % 2 == 0 else c["c6"]
        label = "c4" if h % 2 == 0 else "c6"
        for j, w in _edge_stencil(h, n, True):
            checks.append(_rel_check(f"gamma stencil {label} z{h}.n gamma{j}",
                                     table.entry(f"z{h}.n", f"gamma{j}"), w * coef))
    return checks


def symmetry_checks(built, seed, samples=4, size=0.05):
    """Random small parameter vectors keep the peak count and the x2 mirror."""
    conf = built.configuration
    rng = np.random.default_rng(seed)
    checks = []
    base = free_vector(conf)
    expected = conf.peaks1.shape[0] + conf.peaks2.shape[0]
    for i in range(samples):
        trial = with_free_vector(conf, base + rng.uniform(-size, size, base.size))
        worst = 0.0
        for pts in (trial.peaks1, trial.peaks2):
            mirror = pts.copy()
            mirror[:, 1] *= -1
            d = np.linalg.norm(pts[:, None, :] - mirror[None, :, :], axis=-1)
            worst = max(worst, float(d.min(axis=1).max()))
        count = trial.peaks1.shape[0] + trial.peaks2.shape[0]
        checks.append(Check(f"random perturbation {i} mirror defect", worst, 0.0, 1e-9,
                            bool(worst <= 1e-9 and count == expected)))
    return checks


def report_csv(checks):
    lines = ["check,measured,expected,tolerance,status"]
    for ch in checks:
        lines.append(f"{ch.name},{ch.measured!r},{ch.expected!r},{ch.tolerance!r},"
                     f"{'PASS' if ch.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def cmd_verify(cfg, out_dir, seed=0, built=None):
    try:
        built = built or construct(cfg)
        checks, rows = projection_checks(built)
        table = linearized_coefficients(built.configuration, built.coupled, built.profile,
                                        delta=cfg.delta)
        checks += stencil_checks(table, built.kernels, built.triplet)
        checks += symmetry_checks(built, seed)
    except MultipeakError as exc:
        return _fail(exc, "verify")
    _write(out_dir, "projections.csv", projections_csv(rows))
    _write(out_dir, "response.csv", table.to_csv())
    _write(out_dir, "verify_report.csv", report_csv(checks))
    failed = [ch for ch in checks if not ch.passed]
    if failed:
        print(f"verify: {len(failed)} of {len(checks)} checks failed; first: {failed[0].name} "
              f"(measured {failed[0].measured:.4g}, expected {failed[0].expected:.4g})",
              file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def grid_half_width(cfg, configuration):
    if cfg.L > 0:
        return cfg.L
    return math.ceil((outer_radius(configuration) + 12.0) / cfg.h) * cfg.h


def refine(built):
    """Newton from the ansatz; with continuation, Λ is raised in three steps
    when the direct attempt fails."""
    cfg = built.cfg
    L = grid_half_width(cfg, built.configuration)
    seed = sample_ansatz(built.configuration, built.profile, L, cfg.h)
    Lambda = built.scales.Lambda

    def solve(lam, start):
        system = DiscreteSystem(built.params.with_lambda(lam), lam, L, cfg.h)
        return system, newton_refine(system, start, tol=cfg.newton_tol, max_iter=cfg.max_iter)

    try:
        system, (fields, report) = solve(Lambda, seed)
    except (MaxIterExceeded, LineSearchStall):
        if not cfg.continuation:
            raise
        start = seed
        for factor in CONTINUATION_STEPS:
            system, (fields, report) = solve(factor * Lambda, start)
            start = fields
    return system, seed, fields, report


def cmd_refine(cfg, out_dir, built=None):
    try:
        built = built or construct(cfg)
        system, seed, fields, report = refine(built)
    except MultipeakError as exc:
        return _fail(exc, "refine")
    conf = built.configuration
    n = system.size
    u = np.concatenate([system.interior(fields.u1), system.interior(fields.u2)])
    r = system.residual(u)
    pos = positivity_check(fields, peaks1=conf.peaks1, peaks2=conf.peaks2)
    tracked = track_peaks(fields, conf.peaks1, conf.peaks2, 0.5 * built.profile.shoot_height)
    extra = (f"min_u_nonnegative,{pos.nonnegative!r}\n"
             f"peaks_found,{tracked.count1 + tracked.count2}\n"
             f"peaks_matched,{tracked.matched1 + tracked.matched2}\n"
             f"max_peak_offset,{tracked.max_offset!r}\n"
             f"grid_half_width,{system.L!r}\nh,{system.h!r}\nLambda,{system.Lambda!r}\n")
    _write(out_dir, "solve_report.csv", report.to_csv() + extra)
    _write(out_dir, "fields.csv", fields.to_csv(system.embed(r[:n]), system.embed(r[n:])))
    _write(out_dir, "seed.csv", seed.to_csv())
    return EXIT_OK


def cmd_all(cfg, out_dir, seed=0):
    """Every stage in order.  A verification failure does not stop the
    refinement; the first nonzero code is returned."""
    code = cmd_triplets(cfg, out_dir)
    if code:
        return code
    try:
        built = construct(cfg)
    except MultipeakError as exc:
        return _fail(exc, "construct")
    codes = [cmd_construct(cfg, out_dir, built), cmd_verify(cfg, out_dir, seed, built),
             cmd_refine(cfg, out_dir, built)]
    return next((c for c in codes if c), EXIT_OK)
