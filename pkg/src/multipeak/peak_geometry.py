"""Peak configurations on the two nested k-gons and the scales that balance them.

Component 1 owns the k rays y_1..y_m and the even edge points z_0, z_2, ...,
z_{2n-2}; component 2 owns the odd edge points z_1, ..., z_{2n-1}.  All of
them are repeated under the rotation R_k.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from math import cos, log, pi, sin

import numpy as np
from scipy.optimize import brentq

from .admissibility import derive_exponents, is_admissible
from .errors import ConstraintViolation, InadmissibleTriplet, NoConvergence
from .interaction_kernels import psi0, psi1
from .polygon import edge_frame, rotate

SCALE_TOL = 1e-10
MIN_SEED_ELL = 8.0
SYMMETRY_TOL = 1e-12
# same-component distances and shifted cross-component distances within this
# band of the smallest one count as dominant neighbours
DOMINANCE_BAND = 0.15


@dataclass(frozen=True)
class ScaleSolution:
    ell: float
    ellbar: float
    ellbar_prime: float
    Lambda: float
    residuals: tuple
    inner_weight: float = 1.0
    iterations: int = 0

    def to_csv(self):
        out = io.StringIO()
        out.write("name,value\n")
        for name in ("ell", "ellbar", "ellbar_prime", "Lambda", "inner_weight"):
            out.write(f"{name},{getattr(self, name)!r}\n")
        for name, value in zip(("geometric", "inner_balance", "outer_balance"), self.residuals):
            out.write(f"residual_{name},{value!r}\n")
        return out.getvalue()


def scale_residuals(kernels, triplet, Lambda, ell, ellbar, ellbar_prime, inner_weight=1.0):
    """Relative residuals of the polygon closure and the two force balances."""
    m, n, k = triplet.m, triplet.n, triplet.k
    s = sin(pi / k)
    prof, params = kernels.profile, kernels.params
    p0 = psi0(prof, ell)
    geometric = (2 * m * ell * s + ellbar_prime - 2 * n * ellbar) / ellbar
    inner = (p0 - 2 * psi0(prof, ellbar_prime) * s) / p0
    outer = (inner_weight * p0 - Lambda * psi1(prof, params, k, ellbar)) / p0
    return geometric, inner, outer


def _log_psi0(kernels, t):
    return log(psi0(kernels.profile, t))


def _log_psi1(kernels, k, t):
    return log(psi1(kernels.profile, kernels.params, k, t))


def _inner_partner(kernels, k, ell):
    """ellbar' solving Ψ0(ell) = 2 sin(π/k) Ψ0(ellbar')."""
    target = _log_psi0(kernels, ell) - log(2 * sin(pi / k))

    def f(t):
        return _log_psi0(kernels, t) - target

    shift = log(2 * sin(pi / k))
    guess = ell + shift
    lo, hi = max(2.0, guess - 3.0), guess + 3.0
    return brentq(f, lo, hi, xtol=1e-14, rtol=1e-15)


def _check_triplet(kernels, triplet):
    dx = derive_exponents(kernels.params)
    if triplet.k != kernels.k:
        raise ValueError(f"kernel table is for k={kernels.k}, triplet has k={triplet.k}")
    if not is_admissible(dx, triplet.m, triplet.n, triplet.k):
        raise InadmissibleTriplet(f"({triplet.m},{triplet.n},{triplet.k}) is not admissible")
    return dx


def solve_scales(kernels, triplet, Lambda, inner_weight=1.0, max_iter=50):
    """Solve closure and balancing for (ell, ellbar, ellbar') at coupling Λ.

    ``inner_weight`` multiplies Ψ0(ell) in the outer balance.  With 1 the
    balance is Ψ0(ell) = ΛΨ1(ellbar); with p it matches the projections of
    the error onto the translation modes of the vertex peak.

    Newton on the logarithms of the two balances, with a finite-difference
    Jacobian and a halving line search.
    """
    dx = _check_triplet(kernels, triplet)
    m, n, k = triplet.m, triplet.n, triplet.k
    mu = triplet.mu
    s = sin(pi / k)
    ell0 = log(Lambda) / (dx.a * mu - 1)
    if ell0 < MIN_SEED_ELL:
        raise NoConvergence(
            f"seed ell={ell0:.3g} is below {MIN_SEED_ELL}; Λ={Lambda:.3g} is too small")
    log_lam = log(Lambda)
    log_w = log(inner_weight)

    def F(z):
        ell, ellbar, ellbar_p = z
        lp0 = _log_psi0(kernels, ell)
        return np.array([
            (2 * m * ell * s + ellbar_p - 2 * n * ellbar) / ellbar,
            lp0 - log(2 * s) - _log_psi0(kernels, ellbar_p),
            log_w + lp0 - log_lam - _log_psi1(kernels, k, ellbar),
        ])

    z = np.array([ell0, mu * ell0, ell0])
    fz = F(z)
    for it in range(1, max_iter + 1):
        J = np.empty((3, 3))
        for j in range(3):
            h = 1e-6 * max(1.0, abs(z[j]))
            e = np.zeros(3)
            e[j] = h
            J[:, j] = (F(z + e) - F(z - e)) / (2 * h)
        step = np.linalg.solve(J, -fz)
        t = 1.0
        while True:
            trial = z + t * step
            if np.all(trial > 2.0):
                ft = F(trial)
                if np.linalg.norm(ft) < np.linalg.norm(fz) or t < 1e-3:
                    break
            t *= 0.5
            if t < 1e-6:
                raise NoConvergence("line search failed in the scale solve")
        z, fz = trial, ft
        res = scale_residuals(kernels, triplet, Lambda, *z, inner_weight=inner_weight)
        if max(abs(r) for r in res) < 0.1 * SCALE_TOL:
            return ScaleSolution(float(z[0]), float(z[1]), float(z[2]), float(Lambda),
                                 tuple(float(r) for r in res), inner_weight, it)
    raise NoConvergence(f"scale solve did not converge in {max_iter} iterations")


def solve_scales_for_ell(kernels, triplet, ell, inner_weight=1.0):
    """The balanced configuration with a prescribed ray spacing ``ell``; Λ is
    the output instead of the input."""
    _check_triplet(kernels, triplet)
    m, n, k = triplet.m, triplet.n, triplet.k
    s = sin(pi / k)
    ellbar_p = _inner_partner(kernels, k, ell)
    ellbar = (2 * m * ell * s + ellbar_p) / (2 * n)
    Lambda = inner_weight * psi0(kernels.profile, ell) / psi1(kernels.profile, kernels.params, k, ellbar)
    res = scale_residuals(kernels, triplet, Lambda, ell, ellbar, ellbar_p, inner_weight)
    return ScaleSolution(float(ell), float(ellbar), float(ellbar_p), float(Lambda),
                         tuple(float(r) for r in res), inner_weight, 0)


def expansion_ratio(dx, triplet, scales):
    """(aμ - 1) ell / log Λ, which tends to 1 as Λ grows."""
    return (dx.a * triplet.mu - 1) * scales.ell / log(scales.Lambda)


@dataclass(frozen=True)
class PeakLabel:
    component: int
    orbit: int
    kind: str      # "y" or "z"
    index: int

    def __str__(self):
        return f"{self.kind}{self.index}@{self.orbit}"


@dataclass(frozen=True)
class PeakConfiguration:
    triplet: object
    scales: ScaleSolution
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    peaks1: np.ndarray
    peaks2: np.ndarray
    labels1: tuple
    labels2: tuple
    N: int = 2
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.alpha, self.beta, self.gamma, self.peaks1, self.peaks2):
            arr.setflags(write=False)
        for comp, labels in ((1, self.labels1), (2, self.labels2)):
            for row, lab in enumerate(labels):
                self._index[(lab.kind, lab.index, lab.orbit)] = (comp, row)

    @property
    def all_peaks(self):
        return np.vstack([self.peaks1, self.peaks2])

    @property
    def all_labels(self):
        return self.labels1 + self.labels2

    def locate(self, kind, index, orbit=0):
        """(component, row) of y_index or z_index in the given R_k orbit."""
        return self._index[(kind, index, orbit % self.triplet.k)]

    def point(self, kind, index, orbit=0):
        comp, row = self.locate(kind, index, orbit)
        return (self.peaks1 if comp == 1 else self.peaks2)[row]

    def export_index(self, label):
        """Column j of the peak table: j for y_j, m+1+h for z_{2h}, h for z_{2h-1}."""
        if label.kind == "y":
            return label.index
        if label.component == 1:
            return self.triplet.m + 1 + label.index // 2
        return (label.index + 1) // 2

    def to_csv(self):
        out = io.StringIO()
        out.write("component,i,j," + ",".join(f"x{d + 1}" for d in range(self.N)) + "\n")
        for comp, pts, labels in ((1, self.peaks1, self.labels1), (2, self.peaks2, self.labels2)):
            for x, lab in zip(pts, labels):
                out.write(f"{comp},{lab.orbit},{self.export_index(lab)}," + ",".join(repr(float(v)) for v in x) + "\n")
        return out.getvalue()


def full_parameters(triplet, alpha, beta_free, gamma_free):
    """Expand the independent parameters (β_1..β_{n-1}, γ_1..γ_n) to the
    full edge families of length 2n-1 using β_{2n-h} = -β_h, γ_{2n-h} = γ_h."""
    n = triplet.n
    beta_free = np.asarray(beta_free, dtype=float)
    gamma_free = np.asarray(gamma_free, dtype=float)
    if beta_free.size != n - 1 or gamma_free.size != n:
        raise ValueError("expected n-1 free beta values and n free gamma values")
    beta = np.zeros(2 * n - 1)
    gamma = np.zeros(2 * n - 1)
    for h in range(1, n):
        beta[h - 1] = beta_free[h - 1]
        beta[2 * n - h - 1] = -beta_free[h - 1]
        gamma[h - 1] = gamma_free[h - 1]
        gamma[2 * n - h - 1] = gamma_free[h - 1]
    gamma[n - 1] = gamma_free[n - 1]
    return np.asarray(alpha, dtype=float), beta, gamma


def free_parameter_count(triplet):
    return triplet.m + 2 * triplet.n


def split_free_vector(triplet, x):
    """Split a reduced vector (α_1..α_{m+1}, β_1..β_{n-1}, γ_1..γ_n)."""
    m, n = triplet.m, triplet.n
    x = np.asarray(x, dtype=float)
    return x[: m + 1], x[m + 1: m + n], x[m + n: m + 2 * n]


def _check_constraints(triplet, scales, alpha, beta, gamma):
    m, n = triplet.m, triplet.n
    if alpha.shape != (m + 1,) or beta.shape != (2 * n - 1,) or gamma.shape != (2 * n - 1,):
        raise ConstraintViolation("alpha needs m+1 entries, beta and gamma need 2n-1")
    if np.any(np.abs(alpha) > 1):
        j = int(np.argmax(np.abs(alpha))) + 1
        raise ConstraintViolation(f"|alpha_{j}| = {abs(alpha[j - 1]):.3g} exceeds 1")
    edge = np.abs(beta) + scales.ellbar * np.abs(gamma)
    if np.any(edge > 1):
        h = int(np.argmax(edge)) + 1
        raise ConstraintViolation(f"|beta_{h}| + ellbar |gamma_{h}| = {edge[h - 1]:.3g} exceeds 1")
    for h in range(1, n + 1):
        if abs(beta[h - 1] + beta[2 * n - h - 1]) > SYMMETRY_TOL:
            raise ConstraintViolation(f"beta_{h} != -beta_{2 * n - h}")
        if abs(gamma[h - 1] - gamma[2 * n - h - 1]) > SYMMETRY_TOL:
            raise ConstraintViolation(f"gamma_{h} != gamma_{2 * n - h}")


def anchor_points(triplet, scales, alpha, beta, gamma):
    """Planar positions of y_1..y_m and z_0..z_{2n-1} before rotation."""
    m, n, k = triplet.m, triplet.n, triplet.k
    frame = edge_frame(k)
    e1 = np.array([1.0, 0.0])
    y1 = scales.ellbar_prime / (2 * frame.sin_k) * e1
    ys = [y1 + (j - 1) * scales.ell * e1 + alpha[j - 1] * e1 for j in range(1, m + 1)]
    y_top = y1 + m * scales.ell * e1
    zs = [y_top + alpha[m] * e1]
    for h in range(1, 2 * n):
        zs.append(y_top + h * scales.ellbar * frame.tangent
                  + beta[h - 1] * frame.tangent + scales.ellbar * gamma[h - 1] * frame.normal)
    return np.array(ys), np.array(zs)


def build_configuration(triplet, scales, alpha=None, beta=None, gamma=None, N=2):
    """Peaks of both components; zero parameters when omitted."""
    m, n, k = triplet.m, triplet.n, triplet.k
    alpha = np.zeros(m + 1) if alpha is None else np.asarray(alpha, dtype=float)
    beta = np.zeros(2 * n - 1) if beta is None else np.asarray(beta, dtype=float)
    gamma = np.zeros(2 * n - 1) if gamma is None else np.asarray(gamma, dtype=float)
    _check_constraints(triplet, scales, alpha, beta, gamma)
    ys, zs = anchor_points(triplet, scales, alpha, beta, gamma)

    pts1, lab1, pts2, lab2 = [], [], [], []
    for i in range(k):
        for j in range(1, m + 1):
            pts1.append(rotate(ys[j - 1], k, i))
            lab1.append(PeakLabel(1, i, "y", j))
        for h in range(0, 2 * n, 2):
            pts1.append(rotate(zs[h], k, i))
            lab1.append(PeakLabel(1, i, "z", h))
    for i in range(k):
        for h in range(1, 2 * n, 2):
            pts2.append(rotate(zs[h], k, i))
            lab2.append(PeakLabel(2, i, "z", h))

    def embed(pts):
        out = np.zeros((len(pts), N))
        out[:, :2] = np.array(pts)
        return out

    return PeakConfiguration(triplet=triplet, scales=scales, alpha=alpha, beta=beta,
                             gamma=gamma, peaks1=embed(pts1), peaks2=embed(pts2),
                             labels1=tuple(lab1), labels2=tuple(lab2), N=N)


def _pairwise(a, b):
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


@dataclass(frozen=True)
class DistanceReport:
    rho1: float
    rho: float
    rho2: float
    witnesses1: tuple
    witnesses: tuple
    witnesses2: tuple


def _minimisers(D, labels_a, labels_b, same, rel=1e-9):
    if same:
        D = D.copy()
        np.fill_diagonal(D, np.inf)
    dmin = float(D.min())
    rows, cols = np.nonzero(D <= dmin * (1 + rel))
    pairs = []
    for r, c in zip(rows, cols):
        if same and r > c:
            continue
        pairs.append((labels_a[r], labels_b[c]))
    return dmin, tuple(pairs)


def distance_report(config):
    """Smallest distances within Π1, across components, and within Π2, each
    with every pair that attains it (relative slack 1e-9)."""
    p1, p2 = config.peaks1, config.peaks2
    rho1, w1 = _minimisers(_pairwise(p1, p1), config.labels1, config.labels1, True)
    rho, w = _minimisers(_pairwise(p1, p2), config.labels1, config.labels2, False)
    rho2, w2 = _minimisers(_pairwise(p2, p2), config.labels2, config.labels2, True)
    return DistanceReport(rho1, rho, rho2, w1, w, w2)


def modified_distances(config, params, component, row):
    """Interaction-weighted distance from one peak to every other peak.

    Same component: |p - q|.  Across components the coupling Λ and the
    decay exponent of the weaker factor enter as a|p - q| - log Λ (from Π1)
    or b|p - q| - log Λ (from Π2).  Returns (distances, labels) with the
    peak itself removed.
    """
    dx = derive_exponents(params)
    own = config.peaks1 if component == 1 else config.peaks2
    other = config.peaks2 if component == 1 else config.peaks1
    own_labels = config.labels1 if component == 1 else config.labels2
    other_labels = config.labels2 if component == 1 else config.labels1
    p = own[row]
    d_same = np.linalg.norm(own - p, axis=1)
    d_same[row] = np.inf
    factor = dx.a if component == 1 else dx.b
    d_cross = factor * np.linalg.norm(other - p, axis=1) - log(config.scales.Lambda)
    return np.concatenate([d_same, d_cross]), own_labels + other_labels


def dominant_neighbors(config, params, component, row, band=DOMINANCE_BAND):
    """Peaks whose modified distance is within a relative ``band`` of the
    smallest one, as a set of labels."""
    d, labels = modified_distances(config, params, component, row)
    dmin = float(np.min(d))
    keep = d <= dmin + band * abs(dmin)
    return {labels[i] for i in np.nonzero(keep)[0]}


def separation_limits(triplet):
    """Limits of |z*_2 - y*_m| / ell and |z*_1 - y*_m| / ellbar."""
    mu = triplet.mu
    s = sin(pi / triplet.k)
    return (np.sqrt(1 + 4 * mu**2 - 4 * mu * s), np.sqrt(1 + mu**-2 - 2 * s / mu))


def predicted_rho2(scales, k):
    return 2 * cos(pi / k) * scales.ellbar
