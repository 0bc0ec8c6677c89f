"""Newton refinement of the ansatz into a solution of the discretized system

    -Δu1 + u1 = (u1)_+^p - Λ A(u1, u2),   -Δu2 + u2 = (u2)_+^p - Λ B(u1, u2)

on a square with zero boundary values, using the 5-point Laplacian.
A(s, t) = |s|^{a1-1} s |t|^{a2} and B(s, t) = |s|^{b1} |t|^{b2-1} t.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ansatz_field import FieldPair, uniform_axis
from .errors import LineSearchStall, MaxIterExceeded

DIRECT_LIMIT = 400_000


@dataclass(frozen=True)
class DiscreteSystem:
    params: object
    Lambda: float
    L: float
    h: float
    x: np.ndarray = field(init=False, repr=False)
    laplacian: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        x = uniform_axis(self.L, self.h)
        object.__setattr__(self, "x", x)
        m = x.size - 2
        d = sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / self.h**2
        eye = sp.identity(m)
        lap = (sp.kron(d, eye) + sp.kron(eye, d)).tocsr()
        object.__setattr__(self, "laplacian", lap)

    @property
    def interior_shape(self):
        return (self.x.size - 2, self.x.size - 2)

    @property
    def size(self):
        return int(np.prod(self.interior_shape))

    def interior(self, field_values):
        return np.asarray(field_values)[1:-1, 1:-1].ravel()

    def embed(self, values):
        full = np.zeros((self.x.size, self.x.size))
        full[1:-1, 1:-1] = values.reshape(self.interior_shape)
        return full

    def _coupling(self, u1, u2):
        pr = self.params
        a1, a2, b1, b2 = pr.a1, pr.a2, pr.b1, pr.b2
        s, t = np.abs(u1), np.abs(u2)
        sg1, sg2 = np.sign(u1), np.sign(u2)
        A = s ** (a1 - 1) * u1 * t**a2
        B = s**b1 * t ** (b2 - 1) * u2
        A_s = a1 * s ** (a1 - 1) * t**a2
        A_t = a2 * s ** (a1 - 1) * u1 * t ** (a2 - 1) * sg2
        B_s = b1 * s ** (b1 - 1) * sg1 * t ** (b2 - 1) * u2
        B_t = b2 * s**b1 * t ** (b2 - 1)
        return A, B, A_s, A_t, B_s, B_t

    def residual(self, u, forcing=None):
        """Stacked residual of both equations at interior nodes."""
        n = self.size
        u1, u2 = u[:n], u[n:]
        p = self.params.p
        A, B, *_ = self._coupling(u1, u2)
        r1 = -(self.laplacian @ u1) + u1 - np.maximum(u1, 0) ** p + self.Lambda * A
        r2 = -(self.laplacian @ u2) + u2 - np.maximum(u2, 0) ** p + self.Lambda * B
        r = np.concatenate([r1, r2])
        return r if forcing is None else r - forcing

    def jacobian(self, u):
        """Sparse Jacobian; the derivative of u_+^p is taken as 0 where u < 0."""
        n = self.size
        u1, u2 = u[:n], u[n:]
        p = self.params.p
        _, _, A_s, A_t, B_s, B_t = self._coupling(u1, u2)
        base = -self.laplacian + sp.identity(n, format="csr")
        d1 = -p * np.maximum(u1, 0) ** (p - 1) + self.Lambda * A_s
        d2 = -p * np.maximum(u2, 0) ** (p - 1) + self.Lambda * B_t
        J11 = base + sp.diags(d1)
        J22 = base + sp.diags(d2)
        J12 = sp.diags(self.Lambda * A_t)
        J21 = sp.diags(self.Lambda * B_s)
        return sp.bmat([[J11, J12], [J21, J22]], format="csc")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual_sup: float
    min_u1: float
    min_u2: float
    overlap: float
    symmetry_defect: float
    max_symmetry_defect: float
    residual_history: tuple = ()
    linear_solver: str = "direct"

    def to_csv(self):
        out = io.StringIO()
        out.write("key,value\n")
        for name in ("iterations", "residual_sup", "min_u1", "min_u2", "overlap",
                     "symmetry_defect", "max_symmetry_defect", "linear_solver"):
            value = getattr(self, name)
            out.write(f"{name},{value if isinstance(value, str) else repr(value)}\n")
        return out.getvalue()


def _linear_solve(system, J, rhs, method):
    if method == "direct":
        return spla.splu(J).solve(rhs)
    n = system.size
    J = J.tocsc()
    lu1 = spla.splu(J[:n, :n].tocsc())
    lu2 = spla.splu(J[n:, n:].tocsc())

    def prec(v):
        return np.concatenate([lu1.solve(v[:n]), lu2.solve(v[n:])])

    M = spla.LinearOperator(J.shape, matvec=prec)
    sol, info = spla.gmres(J, rhs, M=M, rtol=1e-12, atol=0.0, restart=60, maxiter=20)
    if info != 0:
        return spla.splu(J).solve(rhs)
    return sol


def _field_pair(system, u, meta):
    n = system.size
    return FieldPair(system.x, system.embed(u[:n]), system.embed(u[n:]), system.h, meta)


def newton_refine(system, seed, tol=1e-8, max_iter=30, forcing=None, linear_solver=None,
                  min_step=1.0 / 1024):
    """Damped Newton from ``seed`` until the sup-norm residual is below ``tol``.

    Each step is halved until the Euclidean residual decreases.  The linear
    systems are solved directly up to DIRECT_LIMIT unknowns and otherwise by
    GMRES preconditioned with the two decoupled scalar operators.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if seed.x.size != system.x.size or abs(seed.h - system.h) > 1e-12:
        raise ValueError("seed grid does not match the system grid")
    method = linear_solver or ("direct" if 2 * system.size <= DIRECT_LIMIT else "gmres")
    u = np.concatenate([system.interior(seed.u1), system.interior(seed.u2)])
    r = system.residual(u, forcing)
    history = [float(np.max(np.abs(r)))]
    worst_sym = _field_pair(system, u, {}).reflection_defect()
    it = 0
    while history[-1] >= tol:
        if it >= max_iter:
            raise MaxIterExceeded(
                f"Newton stopped after {max_iter} iterations at residual {history[-1]:.3e}")
        it += 1
        du = _linear_solve(system, system.jacobian(u), -r, method)
        t = 1.0
        norm0 = np.linalg.norm(r)
        while True:
            trial = u + t * du
            rt = system.residual(trial, forcing)
            if np.linalg.norm(rt) < norm0:
                break
            t *= 0.5
            if t < min_step:
                raise LineSearchStall(f"no decrease along the Newton direction at iteration {it}")
        u, r = trial, rt
        history.append(float(np.max(np.abs(r))))
        worst_sym = max(worst_sym, _field_pair(system, u, {}).reflection_defect())
    out = _field_pair(system, u, {"source": "newton", "Lambda": system.Lambda})
    report = SolveReport(
        iterations=it,
        residual_sup=history[-1],
        min_u1=float(out.u1.min()),
        min_u2=float(out.u2.min()),
        overlap=segregation_metric(out),
        symmetry_defect=out.reflection_defect(),
        max_symmetry_defect=worst_sym,
        residual_history=tuple(history),
        linear_solver=method,
    )
    return out, report


@dataclass(frozen=True)
class PositivityReport:
    min_u1: float
    min_u2: float
    nonnegative: bool
    positive_at_peaks: bool


def positivity_check(fieldpair, tol=1e-9, peaks1=None, peaks2=None):
    """Minimum values, nonnegativity up to 10·tol, and positivity at the nodes
    nearest to the given peaks."""
    m1, m2 = float(fieldpair.u1.min()), float(fieldpair.u2.min())
    ok = m1 >= -10 * tol and m2 >= -10 * tol
    at_peaks = True
    for values, peaks in ((fieldpair.u1, peaks1), (fieldpair.u2, peaks2)):
        if peaks is None:
            continue
        for q in np.atleast_2d(peaks):
            i = int(np.argmin(np.abs(fieldpair.x - q[0])))
            j = int(np.argmin(np.abs(fieldpair.x - q[1])))
            at_peaks &= bool(values[i, j] > 0)
    return PositivityReport(m1, m2, ok, at_peaks)


def segregation_metric(fieldpair):
    """∫ u1 u2 by the trapezoid rule (the boundary values vanish)."""
    return float(np.sum(fieldpair.u1 * fieldpair.u2) * fieldpair.h**2)


def local_maxima(values, x, threshold):
    """Grid points that are maxima of their 8 neighbours and exceed
    ``threshold``; returns their coordinates.

    Exact ties (a peak on a symmetry line between nodes) keep the node that
    comes first in raster order, so each plateau is reported once.
    """
    v = values
    core = v[1:-1, 1:-1]
    mask = core > threshold
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            other = v[1 + di: v.shape[0] - 1 + di, 1 + dj: v.shape[1] - 1 + dj]
            mask &= (core >= other) if (di, dj) > (0, 0) else (core > other)
    i, j = np.nonzero(mask)
    return np.column_stack([x[i + 1], x[j + 1]])


@dataclass(frozen=True)
class PeakTracking:
    count1: int
    count2: int
    matched1: int
    matched2: int
    max_offset: float


def track_peaks(fieldpair, peaks1, peaks2, height, radius=1.0):
    """Match local maxima above ``height`` to ansatz peaks within ``radius``."""
    out = []
    worst = 0.0
    for values, peaks in ((fieldpair.u1, peaks1), (fieldpair.u2, peaks2)):
        found = local_maxima(values, fieldpair.x, height)
        matched = 0
        for q in np.asarray(peaks)[:, :2]:
            if len(found) == 0:
                continue
            d = np.linalg.norm(found - q, axis=1)
            if d.min() <= radius:
                matched += 1
                worst = max(worst, float(d.min()))
        out.append((len(found), matched))
    return PeakTracking(out[0][0], out[1][0], out[0][1], out[1][1], worst)


def manufactured_pair(L, eps=0.2):
    """Smooth positive fields vanishing on the square [-L, L]^2 with their
    Laplacians, for convergence tests of the discretization."""
    k = np.pi / (2 * L)

    def fields(X, Y):
        c = np.cos(k * X) * np.cos(k * Y)
        u1 = (1 + eps * X) * c
        u2 = 0.5 * (1 - eps * X) * c
        lap1 = -2 * eps * k * np.sin(k * X) * np.cos(k * Y) - 2 * k**2 * u1
        lap2 = 0.5 * 2 * eps * k * np.sin(k * X) * np.cos(k * Y) - 2 * k**2 * u2
        return u1, u2, lap1, lap2

    return fields


def manufactured_error(params, Lambda, L, h, tol=1e-11):
    """Sup error of the discrete solution against the manufactured one."""
    system = DiscreteSystem(params, Lambda, L, h)
    X, Y = np.meshgrid(system.x, system.x, indexing="ij")
    u1, u2, lap1, lap2 = manufactured_pair(L)(X, Y)
    p = params.p
    A = np.abs(u1) ** (params.a1 - 1) * u1 * np.abs(u2) ** params.a2
    B = np.abs(u1) ** params.b1 * np.abs(u2) ** (params.b2 - 1) * u2
    g1 = -lap1 + u1 - np.maximum(u1, 0) ** p + Lambda * A
    g2 = -lap2 + u2 - np.maximum(u2, 0) ** p + Lambda * B
    forcing = np.concatenate([system.interior(g1), system.interior(g2)])
    seed = FieldPair(system.x, 0.9 * u1, 0.9 * u2, h)
    sol, _ = newton_refine(system, seed, tol=tol, forcing=forcing)
    return float(max(np.max(np.abs(sol.u1 - u1)), np.max(np.abs(sol.u2 - u2))))


def fourth_order_residual(system, fieldpair):
    """Residual of a field with the 9-point-wide fourth-order Laplacian,
    on nodes at least two steps from the boundary."""
    h = system.h
    pr = system.params

    def lap4(v):
        c = v[2:-2, 2:-2]
        d2x = (-v[4:, 2:-2] + 16 * v[3:-1, 2:-2] - 30 * c + 16 * v[1:-3, 2:-2] - v[:-4, 2:-2])
        d2y = (-v[2:-2, 4:] + 16 * v[2:-2, 3:-1] - 30 * c + 16 * v[2:-2, 1:-3] - v[2:-2, :-4])
        return (d2x + d2y) / (12 * h**2)

    u1, u2 = fieldpair.u1, fieldpair.u2
    c1, c2 = u1[2:-2, 2:-2], u2[2:-2, 2:-2]
    A = np.abs(c1) ** (pr.a1 - 1) * c1 * np.abs(c2) ** pr.a2
    B = np.abs(c1) ** pr.b1 * np.abs(c2) ** (pr.b2 - 1) * c2
    r1 = -lap4(u1) + c1 - np.maximum(c1, 0) ** pr.p + system.Lambda * A
    r2 = -lap4(u2) + c2 - np.maximum(c2, 0) ** pr.p + system.Lambda * B
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))
