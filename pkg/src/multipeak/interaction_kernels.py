"""Pairwise interaction functions between peaks and their limit constants.

Every integral over R^N is reduced to two active coordinates plus a radial
integral over the remaining transverse directions:

* axial integrals depend on x only through (x1, |x'|) with x' in R^{N-1};
* planar integrals depend on (x1, x2, |x''|) with x'' in R^{N-2}.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from math import pi, sin

import numpy as np

from .errors import QuadratureDivergence, SignViolation
from .ground_state import eval_profile
from .polygon import edge_frame
from .quadrature import panel_rule, transverse_rule

DEFAULT_NODES = 160
DEFAULT_RADIAL_NODES = 80
DEFAULT_BOX = 30.0
DIVERGENCE_TOL = 1e-3


def box_half_width(distance):
    return max(DEFAULT_BOX, 0.5 * distance + 15.0)


@dataclass(frozen=True)
class AxialGrid:
    x1: np.ndarray
    rho: np.ndarray
    weight: np.ndarray

    @property
    def radius(self):
        return np.hypot(self.x1, self.rho)


@dataclass(frozen=True)
class PlanarGrid:
    x1: np.ndarray
    x2: np.ndarray
    rho: np.ndarray
    weight: np.ndarray

    @property
    def radius(self):
        return np.sqrt(self.x1**2 + self.x2**2 + self.rho**2)


def axial_grid(N, half_width, nodes=DEFAULT_NODES, radial_nodes=DEFAULT_RADIAL_NODES):
    x1, w1 = panel_rule(-half_width, half_width, nodes)
    if N == 1:
        return AxialGrid(x1, np.zeros_like(x1), w1)
    rho, wr = transverse_rule(N - 1, half_width, radial_nodes)
    X, R = np.meshgrid(x1, rho, indexing="ij")
    return AxialGrid(X.ravel(), R.ravel(), np.outer(w1, wr).ravel())


def planar_grid(N, half_width, nodes=DEFAULT_NODES, radial_nodes=DEFAULT_RADIAL_NODES,
                center=(0.0, 0.0)):
    if N < 2:
        raise ValueError("planar integrals need N >= 2")
    x1, w1 = panel_rule(center[0] - half_width, center[0] + half_width, nodes)
    x2, w2 = panel_rule(center[1] - half_width, center[1] + half_width, nodes)
    rho, wr = transverse_rule(N - 2, half_width, radial_nodes)
    X1, X2, R = np.meshgrid(x1, x2, rho, indexing="ij")
    W = w1[:, None, None] * w2[None, :, None] * wr[None, None, :]
    return PlanarGrid(X1.ravel(), X2.ravel(), R.ravel(), W.ravel())


def _checked(compute, nodes, radial_nodes, check, label):
    value = compute(nodes, radial_nodes)
    if check:
        finer = compute(2 * nodes, 2 * radial_nodes)
        change = abs(finer - value) / max(abs(finer), 1e-300)
        if change > DIVERGENCE_TOL:
            raise QuadratureDivergence(
                f"{label}: node doubling changed the value by {change:.3e} (relative)"
            )
    return value


def _radial_derivative_component(profile, r, coord):
    """U'(r) * coord / r, the partial derivative of U(|x|) along ``coord``."""
    _, dU = eval_profile(profile, r)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r > 0, dU * coord / np.where(r > 0, r, 1.0), 0.0)
    return out


def psi0(profile, t, nodes=DEFAULT_NODES, radial_nodes=DEFAULT_RADIAL_NODES, check=False):
    """Interaction between two peaks of the same component at distance t.

    Equal to -(1/p) ∫ U(x - t e1) ∂1(U^p)(x) dx = -∫ U(x - t e1) U^{p-1} ∂1U dx.
    """
    if t < 2:
        raise ValueError("psi0 requires t >= 2")
    p = profile.p
    L = box_half_width(t)

    def compute(n, nr):
        g = axial_grid(profile.N, L, n, nr)
        r0 = g.radius
        U0, _ = eval_profile(profile, r0)
        dU1 = _radial_derivative_component(profile, r0, g.x1)
        Ut, _ = eval_profile(profile, np.hypot(g.x1 - t, g.rho))
        return float(np.sum(-g.weight * Ut * U0 ** (p - 1) * dU1))

    return _checked(compute, nodes, radial_nodes, check, f"psi0(t={t})")


def pair_interaction(profile, displacement, nodes=DEFAULT_NODES,
                     radial_nodes=DEFAULT_RADIAL_NODES):
    """Vector (1/p) ∫ U(x + d) ∇U^p(x) dx for a planar displacement d = p - q.

    The quadrature box is aligned with d, so the component normal to d
    cancels by the mirror symmetry of the nodes.
    """
    d = np.asarray(displacement, dtype=float)[:2]
    dist = float(np.hypot(*d))
    e = d / dist
    e_perp = np.array([-e[1], e[0]])
    p = profile.p
    g = planar_grid(max(profile.N, 2), box_half_width(dist), nodes, radial_nodes)
    r0 = g.radius
    U0, _ = eval_profile(profile, r0)
    d1 = _radial_derivative_component(profile, r0, g.x1)
    d2 = _radial_derivative_component(profile, r0, g.x2)
    Ud, _ = eval_profile(profile, np.sqrt((g.x1 + dist) ** 2 + g.x2**2 + g.rho**2))
    base = g.weight * Ud * U0 ** (p - 1)
    along = float(np.sum(base * d1))
    across = float(np.sum(base * d2))
    return along * e + across * e_perp


def mixed_pair_integral(profile, power_far, power_near, displacement,
                        nodes=DEFAULT_NODES, radial_nodes=DEFAULT_RADIAL_NODES):
    """Vector ∫ U^{power_far}(x + d) ∇U^{power_near + 1}(x) dx in the plane."""
    d = np.asarray(displacement, dtype=float)[:2]
    dist = float(np.hypot(*d))
    e = d / dist
    e_perp = np.array([-e[1], e[0]])
    g = planar_grid(max(profile.N, 2), box_half_width(dist), nodes, radial_nodes)
    r0 = g.radius
    U0, _ = eval_profile(profile, r0)
    d1 = _radial_derivative_component(profile, r0, g.x1)
    d2 = _radial_derivative_component(profile, r0, g.x2)
    Ud, _ = eval_profile(profile, np.sqrt((g.x1 + dist) ** 2 + g.x2**2 + g.rho**2))
    base = g.weight * (power_near + 1) * Ud**power_far * U0**power_near
    return float(np.sum(base * d1)) * e + float(np.sum(base * d2)) * e_perp


def psi1(profile, params, k, lbar, nodes=DEFAULT_NODES,
         radial_nodes=DEFAULT_RADIAL_NODES, check=False):
    """Outer interaction felt by the vertex peak from its two neighbours of
    the other component at distance lbar along the edge directions."""
    if lbar < 2:
        raise ValueError("psi1 requires lbar >= 2")
    if k < 6:
        raise ValueError("psi1 requires k >= 6")
    frame = edge_frame(k)
    t, ts = frame.tangent, frame.tangent_mirror
    a1, a2 = params.a1, params.a2
    L = box_half_width(lbar)

    def compute(n, nr):
        g = planar_grid(max(profile.N, 2), L, n, nr)
        r0 = g.radius
        U0, _ = eval_profile(profile, r0)
        dU1 = _radial_derivative_component(profile, r0, g.x1)
        rs = np.sqrt((g.x1 - lbar * ts[0]) ** 2 + (g.x2 - lbar * ts[1]) ** 2 + g.rho**2)
        rt = np.sqrt((g.x1 - lbar * t[0]) ** 2 + (g.x2 - lbar * t[1]) ** 2 + g.rho**2)
        Us, _ = eval_profile(profile, rs)
        Ut, _ = eval_profile(profile, rt)
        return float(np.sum(g.weight * (Us + Ut) ** a2 * U0**a1 * dU1))

    return _checked(compute, nodes, radial_nodes, check, f"psi1(lbar={lbar})")


def psi2(params, profile, lbar):
    """Closed-form scale of the outer interaction on second-component peaks."""
    b1 = params.b1
    return float(lbar ** (-0.5 * (profile.N - 1) * b1) * np.exp(-b1 * lbar))


@dataclass(frozen=True)
class KernelTable:
    params: object
    profile: object
    k: int
    c0: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    quadrature_spec: dict = field(default_factory=dict)
    c1_by_parts: float = float("nan")
    node_doubling_change: dict = field(default_factory=dict)
    box_doubling_change: dict = field(default_factory=dict)

    def constants(self):
        return {f"c{i}": getattr(self, f"c{i}") for i in range(7)}

    def to_csv(self):
        out = io.StringIO()
        out.write("name,value,quadrature_nodes,box_side\n")
        nodes = self.quadrature_spec.get("nodes")
        side = self.quadrature_spec.get("box_side")
        for name, value in self.constants().items():
            out.write(f"{name},{value!r},{nodes},{side!r}\n")
        return out.getvalue()


def _constant_integrals(profile, params, k, L, nodes, radial_nodes):
    N = profile.N
    cN = profile.c_N
    p, a1, a2, b1, b2 = params.p, params.a1, params.a2, params.b1, params.b2
    frame = edge_frame(k)
    t, ts, nv, ns = frame.tangent, frame.tangent_mirror, frame.normal, frame.normal_mirror

    ax = axial_grid(N, L, nodes, radial_nodes)
    U_ax, _ = eval_profile(profile, ax.radius)
    s = ax.x1
    ch, sh = np.cosh(s), np.sinh(s)
    w = ax.weight

    out = {}
    out["c0"] = cN / p * float(np.sum(w * np.exp(s) * U_ax**p))

    pl = planar_grid(max(N, 2), L, nodes, radial_nodes)
    r0 = pl.radius
    U_pl, _ = eval_profile(profile, r0)
    dU1 = _radial_derivative_component(profile, r0, pl.x1)
    proj_t = pl.x1 * t[0] + pl.x2 * t[1]
    proj_ts = pl.x1 * ts[0] + pl.x2 * ts[1]
    proj_n = pl.x1 * nv[0] + pl.x2 * nv[1]
    proj_ns = pl.x1 * ns[0] + pl.x2 * ns[1]
    et, ets = np.exp(proj_t), np.exp(proj_ts)
    both = et + ets
    wp = pl.weight

    c1 = cN**a2 * float(np.sum(wp * both**a2 * U_pl**a1 * dU1))
    out["c1"] = c1
    out["c1_by_parts"] = a2 / (a1 + 1) * frame.sin_k * cN**a2 * float(
        np.sum(wp * both**a2 * U_pl ** (a1 + 1)))
    gamma_integral = cN**a2 * float(np.sum(
        wp * both ** (a2 - 1) * (ets * proj_ns + et * proj_n) * U_pl**a1 * dU1))
    out["c2"] = a2 * gamma_integral / c1

    two_ch = 2.0 * ch
    pref_a = a2 * cN**a2 / (2.0 * c1 * (a1 + 1))
    out["c3"] = pref_a * float(np.sum(
        w * ((a2 - 1) * (2 * sh) ** 2 + two_ch**2) * two_ch ** (a2 - 2) * U_ax ** (a1 + 1)))
    out["c4"] = -pref_a * float(np.sum(w * two_ch**a2 * U_ax ** (a1 + 1)))
    pref_b = b1 * cN**b1 / (2.0 * (b2 + 1))
    out["c5"] = pref_b * float(np.sum(
        w * ((b1 - 1) * (2 * sh) ** 2 + two_ch**2) * two_ch ** (b1 - 2) * U_ax ** (b2 + 1)))
    out["c6"] = -pref_b * float(np.sum(w * two_ch**b1 * U_ax ** (b2 + 1)))
    return out


SIGNS = {"c0": 1, "c1": 1, "c3": 1, "c4": -1, "c5": 1, "c6": -1}


def compute_constants(profile, params, k, nodes=DEFAULT_NODES,
                      radial_nodes=DEFAULT_RADIAL_NODES, L=DEFAULT_BOX, check=True):
    """Limit constants c0..c6 of the interaction expansions.

    With ``check`` the integrals are repeated with doubled node counts and
    with a doubled box; the relative changes are stored on the table and a
    change above 1e-3 raises QuadratureDivergence.
    """
    base = _constant_integrals(profile, params, k, L, nodes, radial_nodes)
    node_change, box_change = {}, {}
    if check:
        finer = _constant_integrals(profile, params, k, L, 2 * nodes, 2 * radial_nodes)
        wider = _constant_integrals(profile, params, k, 2 * L, 2 * nodes, 2 * radial_nodes)
        for name in base:
            node_change[name] = abs(finer[name] - base[name]) / abs(finer[name])
            box_change[name] = abs(wider[name] - base[name]) / abs(wider[name])
            if node_change[name] > DIVERGENCE_TOL:
                raise QuadratureDivergence(
                    f"{name}: node doubling changed the value by {node_change[name]:.3e}")
    for name, sign in SIGNS.items():
        if np.sign(base[name]) != sign:
            raise SignViolation(f"{name}={base[name]:.6g} has the wrong sign")
    return KernelTable(
        params=params, profile=profile, k=k,
        c0=base["c0"], c1=base["c1"], c2=base["c2"], c3=base["c3"],
        c4=base["c4"], c5=base["c5"], c6=base["c6"],
        quadrature_spec={"nodes": nodes, "radial_nodes": radial_nodes, "box_side": 2 * L},
        c1_by_parts=base["c1_by_parts"],
        node_doubling_change=node_change,
        box_doubling_change=box_change,
    )


def fit_rate_law(ts, values, log_term=True):
    """Least-squares fit of log(values) = A + B t (+ C log t).

    Returns (B, C, A); C is 0 when ``log_term`` is false.
    """
    ts = np.asarray(ts, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    cols = [np.ones_like(ts), ts] + ([np.log(ts)] if log_term else [])
    coef = np.linalg.lstsq(np.column_stack(cols), y, rcond=None)[0]
    return float(coef[1]), float(coef[2]) if log_term else 0.0, float(coef[0])


def power_sum_defect(values, gamma):
    """For nonnegative t_i return (|(Σt)^γ - Σt^γ|, Σ_{i≠j} t_i^{γ-1} t_j)."""
    t = np.asarray(values, dtype=float)
    lhs = abs(t.sum() ** gamma - np.sum(t**gamma))
    with np.errstate(divide="ignore", invalid="ignore"):
        powered = np.where(t > 0, t ** (gamma - 1), 0.0)
    cross = float(powered.sum() * t.sum() - np.sum(powered * t))
    return float(lhs), cross


def combined_c3_c4_integral(profile, params, k, L=DEFAULT_BOX, nodes=DEFAULT_NODES,
                            radial_nodes=DEFAULT_RADIAL_NODES, c1=None):
    """c3 + c4 evaluated as one integral of the difference of integrands."""
    N, cN, a1, a2 = profile.N, profile.c_N, params.a1, params.a2
    if c1 is None:
        c1 = compute_constants(profile, params, k, nodes, radial_nodes, L, check=False).c1
    ax = axial_grid(N, L, nodes, radial_nodes)
    U, _ = eval_profile(profile, ax.radius)
    ch, sh = np.cosh(ax.x1), np.sinh(ax.x1)
    two_ch = 2 * ch
    integrand = ((a2 - 1) * (2 * sh) ** 2 + two_ch**2) * two_ch ** (a2 - 2) - two_ch**a2
    return a2 * cN**a2 / (2 * c1 * (a1 + 1)) * float(np.sum(ax.weight * integrand * U ** (a1 + 1)))


def sin_pi_over(k):
    return sin(pi / k)
