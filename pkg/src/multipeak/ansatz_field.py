"""Superposed peaks, the error they leave in the system, and its projections
onto the translation modes of each peak.

Points are arrays of shape (M, N).  Peaks sit in the (x1, x2) plane, so for
N >= 3 only the planar coordinates and the transverse radius matter; box
integrals use the same transverse radial weight as the kernel quadrature.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from math import log

import numpy as np

from .errors import QuadratureDivergence, StepTooLarge
from .ground_state import eval_profile
from .interaction_kernels import psi0, psi1, psi2
from .peak_geometry import (PeakConfiguration, PeakLabel, ScaleSolution, build_configuration,
                            dominant_neighbors, full_parameters, split_free_vector)
from .polygon import edge_frame
from .quadrature import panel_rule, transverse_rule

CHUNK = 20000
PANEL_LENGTH = 2.0
# far peaks whose tails at the box are this many e-folds below the nearest
# neighbour's are dropped from projection integrals
TAIL_EFOLDS = 30.0
PROJECTION_CHECK_TOL = 1e-3
RICHARDSON_TOL = 0.10


def point_configuration(peaks1, peaks2, Lambda=1.0, N=2):
    """A configuration made of explicit peak lists, for fixtures and tests."""
    def embed(pts):
        pts = np.asarray(pts, dtype=float)
        if pts.size == 0:
            return np.zeros((0, N))
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), N))
        out[:, : pts.shape[1]] = pts
        return out

    p1, p2 = embed(peaks1), embed(peaks2)
    nan = float("nan")
    scales = ScaleSolution(nan, nan, nan, float(Lambda), (0.0, 0.0, 0.0))
    return PeakConfiguration(
        triplet=None, scales=scales, alpha=np.zeros(0), beta=np.zeros(0), gamma=np.zeros(0),
        peaks1=p1, peaks2=p2,
        labels1=tuple(PeakLabel(1, 0, "p", i) for i in range(len(p1))),
        labels2=tuple(PeakLabel(2, 0, "p", i) for i in range(len(p2))),
        N=N)


def _as_points(points, N):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] < N:
        pts = np.hstack([pts, np.zeros((pts.shape[0], N - pts.shape[1]))])
    return pts


def _bubbles(profile, points, peaks):
    """Matrix U(|x - p|) of shape (points, peaks)."""
    if len(peaks) == 0:
        return np.zeros((len(points), 0))
    d = np.linalg.norm(points[:, None, :] - peaks[None, :, :], axis=-1)
    U, _ = eval_profile(profile, d.ravel())
    return U.reshape(d.shape)


def _bubble_gradients(profile, points, peak):
    """U(|x - s|) and its planar gradient at each point."""
    diff = points - peak
    r = np.linalg.norm(diff, axis=1)
    U, dU = eval_profile(profile, r)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(r > 0, dU / np.where(r > 0, r, 1.0), 0.0)
    return U, scale[:, None] * diff[:, :2]


def _inner_error(Uq, p):
    """Σ U_q^p - (Σ U_q)^p computed around the largest term.

    With D the largest bubble and R the sum of the others,
    (D + R)^p - D^p = D^p expm1(p log1p(R / D)), which keeps full relative
    accuracy when R is many orders of magnitude below D.
    """
    if Uq.shape[1] == 0:
        return np.zeros(Uq.shape[0])
    idx = np.argmax(Uq, axis=1)
    rows = np.arange(Uq.shape[0])
    D = Uq[rows, idx]
    others = Uq.copy()
    others[rows, idx] = 0.0
    R = others.sum(axis=1)
    S = (others**p).sum(axis=1)
    out = np.zeros_like(D)
    pos = D > 0
    out[pos] = S[pos] - D[pos] ** p * np.expm1(p * np.log1p(R[pos] / D[pos]))
    return out


@dataclass(frozen=True)
class ErrorField:
    E1: np.ndarray
    E2: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    O1: np.ndarray
    O2: np.ndarray


def _chunks(n):
    for start in range(0, n, CHUNK):
        yield slice(start, min(n, start + CHUNK))


def eval_ansatz(config, profile, points):
    """u1(x) = Σ_{Π1} U(|x - p|) and u2(x) = Σ_{Π2} U(|x - p|)."""
    pts = _as_points(points, config.N)
    u1 = np.empty(len(pts))
    u2 = np.empty(len(pts))
    for sl in _chunks(len(pts)):
        u1[sl] = _bubbles(profile, pts[sl], config.peaks1).sum(axis=1)
        u2[sl] = _bubbles(profile, pts[sl], config.peaks2).sum(axis=1)
    return u1, u2


def _error_on(config, params, profile, pts, Lambda, peaks1=None, peaks2=None):
    peaks1 = config.peaks1 if peaks1 is None else peaks1
    peaks2 = config.peaks2 if peaks2 is None else peaks2
    B1 = _bubbles(profile, pts, peaks1)
    B2 = _bubbles(profile, pts, peaks2)
    u1, u2 = B1.sum(axis=1), B2.sum(axis=1)
    p = params.p
    I1 = _inner_error(B1, p)
    I2 = _inner_error(B2, p)
    O1 = Lambda * u1**params.a1 * u2**params.a2
    O2 = Lambda * u1**params.b1 * u2**params.b2
    return I1, I2, O1, O2


def error_field(config, params, profile, points, Lambda=None):
    """Inner and outer parts of the error left by the ansatz.

    Since every bubble solves its own equation exactly, the residual of the
    system at the ansatz is I_i + O_i with I_i = Σ U^p(x - p) - U_i^p and
    O_1 = Λ U_1^{a1} U_2^{a2}, O_2 = Λ U_1^{b1} U_2^{b2}.  ``Lambda``
    defaults to the coupling stored with the configuration's scales.
    """
    Lambda = config.scales.Lambda if Lambda is None else Lambda
    pts = _as_points(points, config.N)
    parts = [np.empty(len(pts)) for _ in range(4)]
    for sl in _chunks(len(pts)):
        for arr, val in zip(parts, _error_on(config, params, profile, pts[sl], Lambda)):
            arr[sl] = val
    I1, I2, O1, O2 = parts
    return ErrorField(I1 + O1, I2 + O2, I1, I2, O1, O2)


@dataclass(frozen=True)
class StarNorm:
    eta: float
    value1: float
    value2: float

    @property
    def total(self):
        return max(self.value1, self.value2)


def peak_weight(config, points, eta):
    """Σ_{p∈Π} exp(-η|x - p|)."""
    pts = _as_points(points, config.N)
    allp = config.all_peaks
    out = np.empty(len(pts))
    for sl in _chunks(len(pts)):
        d = np.linalg.norm(pts[sl, None, :] - allp[None, :, :], axis=-1)
        out[sl] = np.exp(-eta * d).sum(axis=1)
    return out


def star_sample_points(config, grid_points, radius=0.25):
    """Grid points plus 8 points on a small circle around every peak."""
    grid_points = _as_points(grid_points, config.N)
    angles = np.arange(8) * np.pi / 4
    ring = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    extra = []
    for peak in config.all_peaks:
        pts = np.tile(peak, (8, 1))
        pts[:, :2] += ring
        extra.append(pts)
    return np.vstack([grid_points] + extra + [config.all_peaks])


def star_norm(values1, values2, config, eta, points):
    """sup |g_i(x)| / Σ_{p∈Π} e^{-η|x - p|} over the sample points."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    w = peak_weight(config, points, eta)
    v1 = float(np.max(np.abs(values1) / w)) if np.size(values1) else 0.0
    v2 = float(np.max(np.abs(values2) / w)) if np.size(values2) else 0.0
    return StarNorm(eta, v1, v2)


def _box_rule(center, half, N, density):
    nodes = int(np.ceil(2 * half / PANEL_LENGTH)) * density
    x1, w1 = panel_rule(center[0] - half, center[0] + half, nodes, density)
    x2, w2 = panel_rule(center[1] - half, center[1] + half, nodes, density)
    rho, wr = transverse_rule(N - 2, half, nodes // 2)
    X1, X2, R = np.meshgrid(x1, x2, rho, indexing="ij")
    W = (w1[:, None, None] * w2[None, :, None] * wr[None, None, :]).ravel()
    pts = np.zeros((W.size, N))
    pts[:, 0] = X1.ravel()
    pts[:, 1] = X2.ravel()
    if N >= 3:
        pts[:, 2] = R.ravel()
    return pts, W


def _resolve(config, peak):
    if isinstance(peak, PeakLabel):
        return config.locate(peak.kind, peak.index, peak.orbit)
    if isinstance(peak, tuple) and len(peak) == 2 and isinstance(peak[0], int):
        return peak
    return config.locate(*peak)


def projection_box(config, params, comp, row):
    """Half-width of the square around a peak used for its projections."""
    own = config.peaks1 if comp == 1 else config.peaks2
    s = own[row]
    if config.triplet is None:
        others = np.vstack([config.peaks1, config.peaks2])
        d = np.linalg.norm(others - s, axis=1)
        d = d[d > 0]
        return 0.6 * float(d.min()) + 3.0 if d.size else 15.0
    labs = dominant_neighbors(config, params, comp, row)
    far = max(float(np.linalg.norm(config.point(l.kind, l.index, l.orbit) - s)) for l in labs)
    return 0.6 * far + 3.0


@dataclass(frozen=True)
class Projection:
    """Planar vectors ∫ I_i ∇U(x - s) dx and ∫ O_i ∇U(x - s) dx."""

    inner: np.ndarray
    outer: np.ndarray
    half_width: float
    check_change: float = float("nan")

    @property
    def total(self):
        return self.inner + self.outer


def _projection(config, params, profile, comp, row, Lambda, half, density):
    own = config.peaks1 if comp == 1 else config.peaks2
    s = own[row]
    pts, W = _box_rule(s[:2], half, config.N, density)
    allp = config.all_peaks
    dist = np.linalg.norm(allp - s, axis=1)
    nearest = float(np.min(dist[dist > 0])) if np.any(dist > 0) else 0.0
    cutoff = nearest + np.sqrt(2) * half + TAIL_EFOLDS
    keep1 = np.linalg.norm(config.peaks1 - s, axis=1) <= cutoff
    keep2 = np.linalg.norm(config.peaks2 - s, axis=1) <= cutoff
    inner = np.zeros(2)
    outer = np.zeros(2)
    for sl in _chunks(len(pts)):
        I1, I2, O1, O2 = _error_on(config, params, profile, pts[sl], Lambda,
                                   config.peaks1[keep1], config.peaks2[keep2])
        _, grad = _bubble_gradients(profile, pts[sl], s)
        wI = W[sl] * (I1 if comp == 1 else I2)
        wO = W[sl] * (O1 if comp == 1 else O2)
        inner += wI @ grad
        outer += wO @ grad
    return inner, outer


def project_error_parts(config, params, profile, peak, Lambda=None, density=16, check=False):
    """Inner and outer projections of the error onto the translations of one peak.

    ``peak`` is a PeakLabel, a (kind, index, orbit) triple or a
    (component, row) pair.  With ``check`` the quadrature is repeated with
    doubled node density; a change above 1e-3 of |inner| + |outer| raises
    QuadratureDivergence.
    """
    Lambda = config.scales.Lambda if Lambda is None else Lambda
    comp, row = _resolve(config, peak)
    half = projection_box(config, params, comp, row)
    inner, outer = _projection(config, params, profile, comp, row, Lambda, half, density)
    change = float("nan")
    if check:
        i2, o2 = _projection(config, params, profile, comp, row, Lambda, half, 2 * density)
        size = np.linalg.norm(i2) + np.linalg.norm(o2)
        change = float(np.linalg.norm(i2 + o2 - inner - outer) / max(size, 1e-300))
        if change > PROJECTION_CHECK_TOL:
            raise QuadratureDivergence(f"projection changed by {change:.3e} under node doubling")
    return Projection(inner, outer, half, change)


def project_error(config, params, profile, peak, direction, Lambda=None, check=False):
    """∫ E_i(x) ⟨∇U(x - s), direction⟩ dx for the peak s of component i."""
    proj = project_error_parts(config, params, profile, peak, Lambda, check=check)
    return float(np.dot(proj.total, np.asarray(direction, dtype=float)[:2]))


@dataclass(frozen=True)
class ResponseRow:
    name: str
    kind: str
    index: int
    direction: np.ndarray
    scale_name: str


def response_rows(triplet):
    """Equations of the reduced system in order: e1 at y_1..y_m and z_0,
    tangent at z_1..z_{n-1}, normal at z_1..z_n."""
    frame = edge_frame(triplet.k)
    e1 = np.array([1.0, 0.0])
    rows = [ResponseRow(f"y{j}.e1", "y", j, e1, "psi0") for j in range(1, triplet.m + 1)]
    rows.append(ResponseRow("z0.e1", "z", 0, e1, "psi1"))
    for h in range(1, triplet.n):
        rows.append(ResponseRow(f"z{h}.t", "z", h, frame.tangent, "psi1" if h % 2 == 0 else "psi2"))
    for h in range(1, triplet.n + 1):
        rows.append(ResponseRow(f"z{h}.n", "z", h, frame.normal, "psi1" if h % 2 == 0 else "psi2"))
    return rows


def parameter_names(triplet):
    m, n = triplet.m, triplet.n
    return ([f"alpha{j}" for j in range(1, m + 2)] + [f"beta{h}" for h in range(1, n)]
            + [f"gamma{h}" for h in range(1, n + 1)])


def row_scales(config, params, profile):
    """Ψ0(ell), ΛΨ1(ellbar), ΛΨ2(ellbar) for the current scales."""
    sc = config.scales
    return {
        "psi0": psi0(profile, sc.ell),
        "psi1": sc.Lambda * psi1(profile, params, config.triplet.k, sc.ellbar),
        "psi2": sc.Lambda * psi2(params, profile, sc.ellbar),
    }


def free_vector(config):
    """(α_1..α_{m+1}, β_1..β_{n-1}, γ_1..γ_n) of a configuration."""
    n = config.triplet.n
    return np.concatenate([config.alpha, config.beta[: n - 1], config.gamma[:n]])


def with_free_vector(config, x):
    a, b, g = split_free_vector(config.triplet, x)
    alpha, beta, gamma = full_parameters(config.triplet, a, b, g)
    return build_configuration(config.triplet, config.scales, alpha, beta, gamma, N=config.N)


def reduced_projections(config, params, profile, density=16):
    """Raw projections for every reduced equation, in ``response_rows`` order."""
    rows = response_rows(config.triplet)
    cache = {}
    out = np.empty(len(rows))
    for i, r in enumerate(rows):
        key = (r.kind, r.index)
        if key not in cache:
            cache[key] = project_error_parts(config, params, profile, (r.kind, r.index, 0),
                                             density=density).total
        out[i] = float(np.dot(cache[key], r.direction))
    return out


@dataclass(frozen=True)
class ResponseTable:
    """Derivatives of the normalized reduced projections with respect to the
    free parameters, with the normalization used for each row."""

    rows: tuple
    columns: tuple
    matrix: np.ndarray
    scales: np.ndarray
    base: np.ndarray
    delta: float
    richardson_change: float = 0.0
    extras: dict = field(default_factory=dict)

    def entry(self, row, column):
        return float(self.matrix[self.rows.index(row), self.columns.index(column)])

    def to_csv(self):
        out = io.StringIO()
        out.write("row," + ",".join(self.columns) + "\n")
        for name, line in zip(self.rows, self.matrix):
            out.write(name + "," + ",".join(repr(float(v)) for v in line) + "\n")
        return out.getvalue()


def linearized_coefficients(config, params, profile, delta=0.02, check=True, density=16):
    """Central-difference response of each reduced projection to each free
    parameter, normalized by Ψ0(ell), ΛΨ1(ellbar) or ΛΨ2(ellbar).

    γ multiplies ellbar in the peak positions, so its step is delta/ellbar
    (a displacement of ``delta``).  With ``check`` the derivatives are also
    taken with step 2·delta; a relative change above 10% of the largest
    entry raises StepTooLarge.
    """
    if not 0 < delta <= 0.05:
        raise ValueError("delta must lie in (0, 0.05]")
    triplet = config.triplet
    rows = response_rows(triplet)
    cols = parameter_names(triplet)
    scales_map = row_scales(config, params, profile)
    scales = np.array([scales_map[r.scale_name] for r in rows])
    x0 = free_vector(config)
    base = reduced_projections(config, params, profile, density) / scales
    n_alpha_beta = triplet.m + triplet.n

    def derivative(step_factor):
        J = np.empty((len(rows), len(cols)))
        for j in range(len(cols)):
            h = delta * step_factor
            if j >= n_alpha_beta:
                h /= config.scales.ellbar
            e = np.zeros_like(x0)
            e[j] = h
            plus = reduced_projections(with_free_vector(config, x0 + e), params, profile, density)
            minus = reduced_projections(with_free_vector(config, x0 - e), params, profile, density)
            J[:, j] = (plus - minus) / (2 * h) / scales
        return J

    J = derivative(1.0)
    change = 0.0
    if check:
        J2 = derivative(2.0)
        change = float(np.max(np.abs(J2 - J)) / np.max(np.abs(J)))
        if change > RICHARDSON_TOL:
            raise StepTooLarge(f"derivatives changed by {change:.1%} when the step was doubled")
    return ResponseTable(tuple(r.name for r in rows), tuple(cols), J, scales, base,
                         delta, change)


def projections_csv(entries):
    """Rows of (peak_id, dir, value, scale) as text with a normalized column."""
    out = io.StringIO()
    out.write("peak_id,dir,value,scale,normalized\n")
    for peak_id, direction, value, scale in entries:
        out.write(f"{peak_id},{direction},{value!r},{scale!r},{value / scale!r}\n")
    return out.getvalue()


@dataclass(frozen=True)
class FieldPair:
    """Two fields on the uniform grid [-L, L]^2 with step h (x1 along rows)."""

    x: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    h: float
    meta: dict = field(default_factory=dict)

    @property
    def L(self):
        return float(-self.x[0])

    @property
    def shape(self):
        return (self.x.size, self.x.size)

    def points(self, N=2):
        X1, X2 = np.meshgrid(self.x, self.x, indexing="ij")
        pts = np.zeros((X1.size, N))
        pts[:, 0] = X1.ravel()
        pts[:, 1] = X2.ravel()
        return pts

    def reflection_defect(self):
        """Largest change of either field under x2 -> -x2."""
        return float(max(np.max(np.abs(self.u1 - self.u1[:, ::-1])),
                         np.max(np.abs(self.u2 - self.u2[:, ::-1]))))

    def to_csv(self, E1=None, E2=None):
        E1 = np.zeros(self.shape) if E1 is None else E1
        E2 = np.zeros(self.shape) if E2 is None else E2
        X1, X2 = np.meshgrid(self.x, self.x, indexing="ij")
        out = io.StringIO()
        out.write("x1,x2,u1,u2,E1,E2\n")
        for row in zip(X1.ravel(), X2.ravel(), self.u1.ravel(), self.u2.ravel(),
                       np.ravel(E1), np.ravel(E2)):
            out.write(",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()


def uniform_axis(L, h):
    count = int(round(L / h))
    if abs(count * h - L) > 1e-9 * L:
        raise ValueError("L must be a multiple of h")
    return np.arange(-count, count + 1) * h


def sample_ansatz(config, profile, L, h):
    """The ansatz on the grid [-L, L]^2 with step h."""
    x = uniform_axis(L, h)
    fp = FieldPair(x, np.zeros((x.size, x.size)), np.zeros((x.size, x.size)), h)
    u1, u2 = eval_ansatz(config, profile, fp.points(config.N))
    return FieldPair(x, u1.reshape(fp.shape), u2.reshape(fp.shape), h, {"source": "ansatz"})


def outer_radius(config):
    return float(np.max(np.linalg.norm(config.all_peaks, axis=1)))


def log_error_prediction(params, dx, mu, ell, Lambda, eta):
    """log(Λ e^{-(c-η)μ ell} + e^{-(min{p-1,1}-η) ell})."""
    r = min(params.p - 1, 1.0)
    return float(np.logaddexp(log(Lambda) - (dx.c - eta) * mu * ell, -(r - eta) * ell))
