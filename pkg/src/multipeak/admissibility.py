"""Exponent hypotheses, the window for the ratio mu, and admissible triplets."""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from math import ceil, cos, pi, sin

from .errors import EmptyWindow, HypothesisViolation

MAX_DENOMINATOR = 64
# mu values this close to an endpoint are treated as on it (sin(pi/6) rounds below 1/2)
BOUNDARY_TOL = 1e-12
_K_SEARCH_LIMIT = 100000


@dataclass(frozen=True)
class DerivedExponents:
    a: float
    b: float
    c: float
    theta: float
    k0: int


@dataclass(frozen=True)
class Triplet:
    m: int
    n: int
    k: int

    @property
    def mu(self):
        return ratio_mu(self.m, self.n, self.k)


def ratio_mu(m, n, k):
    return (2 * m * sin(pi / k) + 1) / (2 * n)


def _least_k(b, c):
    for k in range(6, _K_SEARCH_LIMIT):
        if b < c - 1 + 2 * cos(pi / k):
            return k
    raise HypothesisViolation("no polygon order k satisfies b < c - 1 + 2cos(pi/k)")


def derive_exponents(params):
    """Compute a, b, c, theta and k0 and enforce the exponent hypotheses."""
    a1, a2, b1, b2 = params.a1, params.a2, params.b1, params.b2
    if min(a1, a2, b1, b2) <= 0:
        raise HypothesisViolation("coupling exponents must be positive")
    a = min(a1 + 1, a2)
    b = min(b2 + 1, b1)
    c = min(a1, a2, b1, b2)
    if not c > 1:
        raise HypothesisViolation(f"(ab) fails: c = {c} must exceed 1")
    if not max(a, b) < c + 1:
        raise HypothesisViolation(f"(ab) fails: max(a, b) = {max(a, b)} must be below c + 1 = {c + 1}")
    if a > b:
        raise HypothesisViolation(
            f"orientation a <= b fails (a={a}, b={b}); swap the two components first")
    return DerivedExponents(a=a, b=b, c=c, theta=min(a2, 2.0), k0=_least_k(b, c))


def mu_window(dx, k):
    """Open interval (lo, hi) that mu must lie in for polygon order k."""
    if k < dx.k0:
        raise EmptyWindow(f"k={k} is below the least admissible order k0={dx.k0}")
    gap = dx.a - dx.b + 2 * cos(pi / k)
    if gap <= 0:
        raise EmptyWindow(f"a - b + 2cos(pi/k) = {gap} is not positive")
    lo = max(1 / dx.a, 0.5, 1 / gap)
    hi = 1 / (dx.a + 1 - dx.c)
    if not lo < hi:
        raise EmptyWindow(f"window ({lo}, {hi}) is empty")
    return lo, hi


def is_admissible(dx, m, n, k):
    if min(m, n, k) < 1 or k < dx.k0:
        return False
    lo, hi = mu_window(dx, k)
    mu = ratio_mu(m, n, k)
    return lo + BOUNDARY_TOL < mu < hi - BOUNDARY_TOL


def canonical_ratio(dx, k):
    """Rational q = m/n with lo <= q sin(pi/k) < hi and the smallest
    denominator (at most MAX_DENOMINATOR)."""
    lo, hi = mu_window(dx, k)
    s = sin(pi / k)
    for den in range(1, MAX_DENOMINATOR + 1):
        num = max(1, ceil(lo / s * den))
        while num * s / den < lo:
            num += 1
        # keep clear of hi so that q s + 1/(2n) drops below it at moderate n
        if num * s / den < hi * (1 - 1e-9):
            return Fraction(num, den)
    raise EmptyWindow("no rational ratio with small denominator fits the window")


def enumerate_triplets(dx, k, count):
    """First ``count`` admissible triplets (q n, n, k) in increasing n."""
    q = canonical_ratio(dx, k)
    out = []
    step = q.denominator
    n = step
    while len(out) < count:
        m = int(q * n)
        if is_admissible(dx, m, n, k):
            out.append(Triplet(m, n, k))
        n += step
        if n > step * 10**6:
            raise EmptyWindow("enumeration did not produce enough admissible triplets")
    return out


def triplets_csv(dx, triplets):
    buf = io.StringIO()
    buf.write("m,n,k,mu,lo,hi,admissible\n")
    for tr in triplets:
        lo, hi = mu_window(dx, tr.k)
        flag = "true" if is_admissible(dx, tr.m, tr.n, tr.k) else "false"
        buf.write(f"{tr.m},{tr.n},{tr.k},{tr.mu!r},{lo!r},{hi!r},{flag}\n")
    return buf.getvalue()


@dataclass(frozen=True)
class RateFlags:
    p_at_least_two: bool
    p_above_three_halves: bool
    mu_below_rate: bool
    drift_condition: bool

    @property
    def all_pass(self):
        return all((self.p_at_least_two, self.p_above_three_halves,
                    self.mu_below_rate, self.drift_condition))


def rate_flags(dx, mu, p):
    """Informational checks on mu and p used by the linear-rate estimates."""
    r = min(p - 1, 1.0)
    return RateFlags(
        p_at_least_two=p >= 2,
        p_above_three_halves=p > 1.5,
        mu_below_rate=mu < r,
        drift_condition=(dx.b - dx.a) * (1 - r) * mu < 2 * r - 1,
    )
