"""Independent reference computations used only by the tests.

Nothing here imports the package: the radial shooting uses a fixed-step
classical Runge-Kutta scheme written out by hand, and the one-dimensional
interaction uses the closed-form soliton with a plain trapezoid rule.
"""

import math

import numpy as np


def _rk4_shoot(N, p, height, r_end, step):
    """+1 if U crosses zero, -1 if U' turns positive, 0 otherwise."""
    r = 1e-6
    curv = (height - height**p) / N
    u, v = height + 0.5 * curv * r * r, curv * r

    def f(r, u, v):
        return v, -(N - 1) * v / r + u - abs(u) ** (p - 1) * u

    while r < r_end:
        k1u, k1v = f(r, u, v)
        k2u, k2v = f(r + step / 2, u + step / 2 * k1u, v + step / 2 * k1v)
        k3u, k3v = f(r + step / 2, u + step / 2 * k2u, v + step / 2 * k2v)
        k4u, k4v = f(r + step, u + step * k3u, v + step * k3v)
        u += step / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v += step / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        r += step
        if u < 0:
            return 1
        if v > 0:
            return -1
    return 0


def shooting_height(N, p, lo=1.0, hi=10.0, r_end=16.0, step=2e-3, rel=1e-10):
    """Central height of the ground state by bisection on the shooting verdict."""
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        verdict = _rk4_shoot(N, p, mid, r_end, step)
        if verdict > 0:
            hi = mid
        elif verdict < 0:
            lo = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def psi0_1d_trapezoid(t, p=3.0, step=1e-3, half_width=60.0):
    """-∫ U(x - t) U^{p-1}(x) U'(x) dx for the 1-D soliton U = √2 sech."""
    x = np.arange(-half_width, t + half_width + step / 2, step)
    U = math.sqrt(2.0) / np.cosh(x)
    dU = -U * np.tanh(x)
    shifted = math.sqrt(2.0) / np.cosh(x - t)
    return float(-np.trapezoid(shifted * U ** (p - 1) * dU, x))
