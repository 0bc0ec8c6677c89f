"""The finite-dimensional system for the peak displacements (α, β, γ).

Unknowns are ordered α_1..α_{m+1}, β_1..β_{n-1}, γ_1..γ_n.  The limit
operator L0 is a set of second-difference stencils coupled only through the
vertex peak z_0 = y_{m+1}.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from math import pi, sin

import numpy as np

from .errors import NonContraction, Singular

SINGULAR_COND = 1e12
CONTRACTION_LIMIT = 0.5


def tridiag(M):
    """T_M: -2 on the diagonal and 1 on both off-diagonals."""
    return -2.0 * np.eye(M) + np.eye(M, k=1) + np.eye(M, k=-1)


def tridiag_inverse_columns(M):
    """First and last columns of T_M^{-1} in closed form."""
    if M < 2:
        raise ValueError("M must be at least 2")
    first = -np.arange(M, 0, -1, dtype=float) / (M + 1)
    last = -np.arange(1, M + 1, dtype=float) / (M + 1)
    return first, last


@dataclass(frozen=True)
class ReducedOperator:
    m: int
    n: int
    k: int
    a2: float
    c2: float
    matrix: np.ndarray

    @property
    def sin_k(self):
        return sin(pi / self.k)

    @property
    def size(self):
        return self.m + 2 * self.n

    def blocks(self, x):
        """Split a vector into its α, β and γ parts."""
        m, n = self.m, self.n
        return x[: m + 1], x[m + 1: m + n], x[m + n:]

    def to_csv(self):
        out = io.StringIO()
        for row in self.matrix:
            out.write(",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()


def assemble_L0(triplet, a2, c2):
    """Dense matrix of the limit operator.

    Rows: α_1 (with the extra (1 - 2 sin(π/k)) α_1 from the inner polygon),
    interior α_i, the vertex row coupling α_{m+1} to β_1 and γ_1, the β rows
    with β_0 = -sin(π/k) α_{m+1} and β_n = 0, and the γ rows with γ_0 = 0 and
    γ_{n+1} = γ_{n-1}.
    """
    m, n, k = triplet.m, triplet.n, triplet.k
    s = sin(pi / k)
    size = m + 2 * n
    A = np.zeros((size, size))

    def ia(j):          # α_j, j = 1..m+1
        return j - 1

    def ib(h):          # β_h, h = 1..n-1
        return m + h

    def ig(h):          # γ_h, h = 1..n
        return m + n - 1 + h

    for i in range(1, m + 2):
        r = ia(i)
        A[r, ia(i)] = -2.0
        if i > 1:
            A[r, ia(i - 1)] += 1.0
        if i < m + 1:
            A[r, ia(i + 1)] += 1.0
    A[ia(1), ia(1)] += 1.0 - 2.0 * s
    top = ia(m + 1)
    A[top, ia(m + 1)] += 1.0 + a2 * s
    if n >= 2:
        A[top, ib(1)] += a2
    A[top, ig(1)] += -c2

    for h in range(1, n):
        r = ib(h)
        A[r, ib(h)] = -2.0
        if h > 1:
            A[r, ib(h - 1)] += 1.0
        else:
            A[r, ia(m + 1)] += -s
        if h < n - 1:
            A[r, ib(h + 1)] += 1.0

    for h in range(1, n + 1):
        r = ig(h)
        A[r, ig(h)] += -2.0
        if h > 1:
            A[r, ig(h - 1)] += 1.0
        if h < n:
            A[r, ig(h + 1)] += 1.0
        elif n >= 2:
            A[r, ig(n - 1)] += 1.0
    return ReducedOperator(m, n, k, float(a2), float(c2), A)


def gamma_forward_substitution(L0, rhs_gamma):
    """Solve the γ rows alone from γ_1 upward.

    Row h reads γ_{h+1} - 2γ_h + γ_{h-1} = r_h, so γ_{h+1} follows from the
    two before it once γ_1 is fixed; γ_1 is chosen so the last row holds.
    """
    n = L0.n
    r = np.asarray(rhs_gamma, dtype=float)

    def run(g1):
        g = np.zeros(n + 2)
        g[1] = g1
        for h in range(1, n):
            g[h + 1] = r[h - 1] + 2 * g[h] - g[h - 1]
        last = (2 * g[n - 1] if n >= 2 else 0.0) - 2 * g[n]
        return g[1: n + 1], last - r[n - 1]

    _, f0 = run(0.0)
    _, f1 = run(1.0)
    g1 = -f0 / (f1 - f0)
    return run(g1)[0]


def beta_from_vertex(n, k, alpha_top):
    """β_1..β_{n-1} from the β rows given α_{m+1}, via T_{n-1}."""
    if n < 2:
        return np.zeros(0)
    rhs = np.zeros(n - 1)
    rhs[0] = sin(pi / k) * alpha_top
    return np.linalg.solve(tridiag(n - 1), rhs)


def matrix_A(m, k, a2, n):
    """2x2 system for (α_1, α_{m+1}) after eliminating the interior unknowns."""
    s = sin(pi / k)
    g = 1.0 + a2 / n * s
    f = 1.0 - 2.0 * s
    return np.array([[f * (m + 1) - (m + 2), g],
                     [f, g * (m + 1) - (m + 2)]])


def det_A(m, k, a, mu):
    """Closed form 2(m+2) sin(π/k)(1 - aμ).

    The matrix itself is rebuilt with n = (2m sin(π/k) + 1)/(2μ) and its
    numerical determinant must agree to 1e-12 relative.
    """
    s = sin(pi / k)
    closed = 2.0 * (m + 2) * s * (1.0 - a * mu)
    n = (2 * m * s + 1) / (2 * mu)
    numeric = float(np.linalg.det(matrix_A(m, k, a, n)))
    scale = max(abs(closed), abs(numeric), 1e-300)
    if abs(closed) > 1e-14 and abs(numeric - closed) > 1e-12 * scale:
        raise ArithmeticError(f"det A mismatch: closed {closed!r}, numeric {numeric!r}")
    return closed


def _matrix(op):
    return np.asarray(getattr(op, "matrix", op), dtype=float)


def check_invertible(op):
    M = _matrix(op)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise Singular(f"reduced operator is numerically singular (condition {cond:.3g})")
    return cond


def sampled_lipschitz(op, Q, radius, samples=8, seed=0):
    """Largest ‖L^{-1}(Q(x) - Q(y))‖ / ‖x - y‖ over random pairs in a ball."""
    M = _matrix(op)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-radius, radius, M.shape[0])
        y = rng.uniform(-radius, radius, M.shape[0])
        diff = np.linalg.solve(M, np.asarray(Q(x)) - np.asarray(Q(y)))
        worst = max(worst, float(np.linalg.norm(diff) / np.linalg.norm(x - y)))
    return worst


@dataclass(frozen=True)
class ReducedSolution:
    x: np.ndarray
    iterations: int
    lipschitz: float
    residual: float


def solve_reduced(op, E, Q=None, tol=1e-12, max_iter=100, radius=None, samples=8, seed=0):
    """Picard iteration x <- L^{-1}(E + Q(x)) from x = 0.

    ``op`` is a ReducedOperator or any square matrix (the measured response).
    Before iterating, the map's Lipschitz constant is sampled in a ball of
    ``radius`` (default: 4 times the size of the linear solution) and must
    stay below 1/2.
    """
    M = _matrix(op)
    check_invertible(M)
    E = np.asarray(E, dtype=float)
    x = np.linalg.solve(M, E)
    lip = 0.0
    if Q is None:
        return ReducedSolution(x, 1, 0.0, float(np.max(np.abs(M @ x - E), initial=0.0)))
    radius = 4.0 * max(float(np.max(np.abs(x))), 1e-8) if radius is None else radius
    lip = sampled_lipschitz(M, Q, radius, samples, seed)
    if lip >= CONTRACTION_LIMIT:
        raise NonContraction(f"sampled Lipschitz ratio {lip:.3g} is not below {CONTRACTION_LIMIT}")
    x = np.zeros_like(E)
    for it in range(1, max_iter + 1):
        new = np.linalg.solve(M, E + np.asarray(Q(x)))
        step = float(np.max(np.abs(new - x)))
        x = new
        if step < tol:
            res = float(np.max(np.abs(M @ x - E - np.asarray(Q(x)))))
            return ReducedSolution(x, it, lip, res)
    raise NonContraction(f"Picard iteration did not settle in {max_iter} steps")


def solution_csv(op_or_triplet, x):
    m, n = op_or_triplet.m, op_or_triplet.n
    names = [("alpha", j) for j in range(1, m + 2)] + [("beta", h) for h in range(1, n)] \
        + [("gamma", h) for h in range(1, n + 1)]
    out = io.StringIO()
    out.write("name,index,value\n")
    for (name, idx), v in zip(names, x):
        out.write(f"{name},{idx},{float(v)!r}\n")
    return out.getvalue()
