"""Positive radial ground state of -ΔU + U = U^p in R^N.

The profile is found in two stages.  Bisection on the central height U(0)
classifies each trial by what goes wrong first: U hitting zero means the
height is too large, U' turning positive means it is too small.  Because
the decaying solution is unstable under outward integration, bisection
alone only resolves the profile out to r ~ 15.  The bracket midpoint then
seeds a two-sided match: an outward shot from the origin and an inward
shot from R_max started on the exact decaying solution of the linearized
equation (a modified Bessel function) are joined at an interior radius.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root
from scipy.special import kve

from .errors import NonConvergence, SubcriticalityViolation

GRID_STEP = 0.01
DEFAULT_R_MAX = 50.0
_RTOL = 1e-13
_ATOL = 1e-300
_R_START = 1e-5


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, exponents and coupling strength of the two-component system."""

    N: int
    p: float
    a1: float = 2.0
    a2: float = 2.0
    b1: float = 2.5
    b2: float = 2.0
    Lambda: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        for name in ("a1", "a2", "b1", "b2", "Lambda"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def check_subcritical(self):
        check_subcritical(self.N, self.p)

    def with_lambda(self, Lambda):
        return ProblemParams(self.N, self.p, self.a1, self.a2, self.b1, self.b2, Lambda)


def check_subcritical(N, p):
    if not p > 1:
        raise SubcriticalityViolation(f"exponent p={p} must exceed 1")
    if N >= 3 and not p < (N + 2) / (N - 2):
        raise SubcriticalityViolation(
            f"exponent p={p} is not below the critical value {(N + 2) / (N - 2)} for N={N}"
        )


@dataclass(frozen=True)
class RadialProfile:
    N: int
    p: float
    grid: np.ndarray
    U_values: np.ndarray
    U_prime_values: np.ndarray
    c_N: float
    shoot_height: float
    step: float = field(default=GRID_STEP)

    def __post_init__(self):
        for arr in (self.grid, self.U_values, self.U_prime_values):
            arr.setflags(write=False)

    @property
    def R_max(self):
        return float(self.grid[-1])

    def __call__(self, r):
        return eval_profile(self, r)[0]

    def to_csv(self):
        out = io.StringIO()
        out.write(f"# N={self.N} p={self.p!r} cN={self.c_N!r}\n")
        out.write("r,U,Uprime\n")
        for r, u, du in zip(self.grid, self.U_values, self.U_prime_values):
            out.write(f"{float(r)!r},{float(u)!r},{float(du)!r}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text):
        lines = text.strip().splitlines()
        meta = dict(item.split("=") for item in lines[0].lstrip("# ").split())
        if lines[1].strip() != "r,U,Uprime":
            raise ValueError("unexpected profile header")
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
        step = float(data[1, 0] - data[0, 0])
        return cls(
            N=int(meta["N"]),
            p=float(meta["p"]),
            grid=data[:, 0].copy(),
            U_values=data[:, 1].copy(),
            U_prime_values=data[:, 2].copy(),
            c_N=float(meta["cN"]),
            shoot_height=float(data[0, 1]),
            step=round(step, 12),
        )


def _rhs(N, p):
    def f(r, y):
        u, du = y
        return [du, -(N - 1) * du / r + u - np.abs(u) ** (p - 1) * u]

    return f


def _series_start(N, p, height):
    curvature = (height - height**p) / N
    return [height + 0.5 * curvature * _R_START**2, curvature * _R_START]


def classify_height(N, p, height, R_max):
    """Return +1 if ``height`` overshoots, -1 if it undershoots, 0 if neither
    failure is seen before R_max."""
    if height <= 1.0:
        return -1

    def hits_zero(r, y):
        return y[0]

    hits_zero.terminal = True
    hits_zero.direction = -1

    def turns_up(r, y):
        return y[1]

    turns_up.terminal = True
    turns_up.direction = 1

    sol = solve_ivp(
        _rhs(N, p),
        (_R_START, R_max),
        _series_start(N, p, height),
        method="DOP853",
        rtol=1e-12,
        atol=1e-300,
        events=(hits_zero, turns_up),
    )
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    return 0


def bracket_height(N, p, R_max, rel_tol, max_widen=60):
    lo, hi = 1.0, 10.0 ** (p + 1)
    widen = 0
    while classify_height(N, p, hi, R_max) <= 0:
        lo, hi = hi, hi * 10.0
        widen += 1
        if widen > max_widen or not np.isfinite(hi):
            raise NonConvergence("could not find an overshooting central height")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        verdict = classify_height(N, p, mid, R_max)
        if verdict == 0:
            return mid, mid
        if verdict > 0:
            hi = mid
        else:
            lo = mid
    return lo, hi


def _bessel_tail(N, r):
    """Decaying solution g of g'' + (N-1)g'/r = g, scaled by e^r, with its
    derivative; normalized so r^{(N-1)/2} e^r g(r) -> 1."""
    nu = (N - 2) / 2.0
    norm = np.sqrt(2.0 / np.pi)
    g = norm * r ** (-nu) * kve(nu, r)
    dg = -norm * r ** (-nu) * kve(nu + 1, r)
    return g, dg


def _matched_profile(N, p, height0, R_max, match_radius):
    f = _rhs(N, p)
    g_end, dg_end = _bessel_tail(N, R_max)
    scale_end = np.exp(-R_max)

    def outward(height):
        return solve_ivp(f, (_R_START, match_radius), _series_start(N, p, height),
                         method="DOP853", rtol=_RTOL, atol=_ATOL, dense_output=True)

    def inward(amp):
        y0 = [amp * g_end * scale_end, amp * dg_end * scale_end]
        return solve_ivp(f, (R_max, match_radius), y0,
                         method="DOP853", rtol=_RTOL, atol=_ATOL, dense_output=True)

    def mismatch(z):
        height, amp = z
        a = outward(height).y[:, -1]
        b = inward(amp).y[:, -1]
        return [(a[0] - b[0]) / height, (a[1] - b[1]) / height]

    guess_out = outward(height0).y[:, -1]
    g_m, _ = _bessel_tail(N, match_radius)
    amp0 = guess_out[0] / (g_m * np.exp(-match_radius))
    sol = root(mismatch, [height0, amp0], method="hybr", options={"xtol": 1e-15})
    if not sol.success and max(abs(v) for v in sol.fun) > 1e-11:
        raise NonConvergence(f"two-sided shooting failed: {sol.message}")
    height, amp = sol.x
    return height, outward(height), inward(amp)


def solve_ground_state(params, R_max=DEFAULT_R_MAX, tol=2e-3):
    """Compute the radial ground state for ``params.N`` and ``params.p``.

    ``tol`` bounds the relative width of the bisection bracket on U(0) and
    is the scale against which the finite-difference ODE residual of the
    tabulated profile is judged.  The bracket is always narrowed further
    when bisection can still make progress, and the two-sided match then
    pins U(0) to integrator precision, so ``tol`` does not limit accuracy.
    """
    N, p = int(params.N), float(params.p)
    check_subcritical(N, p)
    if R_max < 30:
        raise ValueError("R_max must be at least 30")
    if not tol > 0:
        raise ValueError("tol must be positive")

    lo, hi = bracket_height(N, p, R_max, min(tol, 1e-13))
    height0 = 0.5 * (lo + hi)

    match_radius = 4.0
    height, out_sol, in_sol = _matched_profile(N, p, height0, R_max, match_radius)

    n_steps = int(round(R_max / GRID_STEP))
    grid = np.arange(n_steps + 1) * GRID_STEP
    inner = grid <= match_radius
    vals = np.empty((2, grid.size))
    r_in = np.maximum(grid[inner], _R_START)
    vals[:, inner] = out_sol.sol(r_in)
    vals[:, 0] = [height, 0.0]
    vals[:, ~inner] = in_sol.sol(grid[~inner])
    U, dU = vals
    if np.any(U <= 0) or np.any(np.diff(U) >= 0):
        raise NonConvergence("computed profile is not positive and decreasing")
    dU = np.minimum(dU, 0.0)

    window = (grid >= 0.6 * R_max) & (grid <= 0.8 * R_max)
    r_w = grid[window]
    logs = np.log(U[window]) + r_w + 0.5 * (N - 1) * np.log(r_w)
    c_N = float(np.exp(np.linalg.lstsq(np.ones((r_w.size, 1)), logs, rcond=None)[0][0]))

    return RadialProfile(N=N, p=p, grid=grid, U_values=U, U_prime_values=dU,
                         c_N=c_N, shoot_height=float(height))


def tail_model(profile, r):
    r = np.asarray(r, dtype=float)
    k = 0.5 * (profile.N - 1)
    u = profile.c_N * r ** (-k) * np.exp(-r)
    return u, -u * (1.0 + k / r)


def eval_profile(profile, r):
    """Value and derivative of U at radii ``r`` (scalar or array).

    Cubic Hermite interpolation on the tabulated grid; the asymptotic tail
    model beyond R_max.
    """
    r = np.abs(np.asarray(r, dtype=float))
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    U = np.empty_like(r)
    dU = np.empty_like(r)
    h = profile.step
    last = profile.grid.size - 1
    inside = r <= profile.R_max
    ri = r[inside]
    idx = np.minimum((ri / h).astype(np.int64), last - 1)
    s = ri / h - idx
    u0 = profile.U_values[idx]
    u1 = profile.U_values[idx + 1]
    d0 = profile.U_prime_values[idx] * h
    d1 = profile.U_prime_values[idx + 1] * h
    s2 = s * s
    s3 = s2 * s
    U[inside] = (2 * s3 - 3 * s2 + 1) * u0 + (s3 - 2 * s2 + s) * d0 \
        + (-2 * s3 + 3 * s2) * u1 + (s3 - s2) * d1
    dU[inside] = ((6 * s2 - 6 * s) * u0 + (3 * s2 - 4 * s + 1) * d0
                  + (-6 * s2 + 6 * s) * u1 + (3 * s2 - 2 * s) * d1) / h
    if not np.all(inside):
        U[~inside], dU[~inside] = tail_model(profile, r[~inside])
    if scalar:
        return float(U[0]), float(dU[0])
    return U, dU


def ode_residual(profile):
    """Second-order finite-difference residual of the radial equation at
    interior grid nodes, with U'' taken from centred differences of U'."""
    r = profile.grid[1:-1]
    U = profile.U_values[1:-1]
    dU = profile.U_prime_values
    d2U = (dU[2:] - dU[:-2]) / (2 * profile.step)
    N, p = profile.N, profile.p
    return -d2U - (N - 1) * dU[1:-1] / r + U - U**p


def decay_envelope_constant(profile):
    """Smallest C with U + |U'| <= C e^{-r} (1+r)^{-(N-1)/2} on the grid."""
    r = profile.grid
    ratio = (profile.U_values + np.abs(profile.U_prime_values)) * np.exp(r) \
        * (1 + r) ** (0.5 * (profile.N - 1))
    return float(ratio.max())


def soliton_1d(p, x):
    """Closed-form one-dimensional ground state."""
    amp = ((p + 1) / 2.0) ** (1.0 / (p - 1))
    return amp / np.cosh(0.5 * (p - 1) * np.asarray(x, dtype=float)) ** (2.0 / (p - 1))
