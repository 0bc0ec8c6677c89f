"""Composite Gauss-Legendre rules and the transverse radial weight used to
reduce R^N integrals to two active coordinates."""

from functools import lru_cache
from math import gamma, pi

import numpy as np
from numpy.polynomial.legendre import leggauss

PANEL_NODES = 16


@lru_cache(maxsize=64)
def _reference_rule(order):
    return leggauss(order)


def panel_rule(a, b, nodes, panel_nodes=PANEL_NODES):
    """Gauss-Legendre nodes and weights on [a, b] split into equal panels.

    ``nodes`` is the total count; it is rounded up to a multiple of
    ``panel_nodes``.
    """
    panels = max(1, -(-int(nodes) // panel_nodes))
    ref_x, ref_w = _reference_rule(panel_nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * ref_x[None, :]).ravel()
    w = (half[:, None] * ref_w[None, :]).ravel()
    return x, w


def sphere_area(dim):
    """Surface measure of the unit sphere S^{dim-1} in R^dim (dim >= 1)."""
    return 2.0 * pi ** (dim / 2.0) / gamma(dim / 2.0)


def transverse_rule(dims, radius, nodes):
    """Radial rule for integrating a function of |x'| over x' in R^dims.

    Returns radii and weights that already include the factor
    |S^{dims-1}| rho^{dims-1}.  For ``dims == 0`` a single node at 0 with
    unit weight is returned so callers can treat every dimension alike.
    """
    if dims <= 0:
        return np.zeros(1), np.ones(1)
    rho, w = panel_rule(0.0, radius, nodes)
    return rho, w * sphere_area(dims) * rho ** (dims - 1)


def pairwise_sum(values):
    """Sum with a fixed reduction order, independent of worker count."""
    return float(np.sum(np.asarray(values, dtype=float).ravel()))
