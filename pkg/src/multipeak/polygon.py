"""Unit vectors attached to the regular k-gon and the rotation R_k."""

from dataclasses import dataclass
from math import cos, pi, sin

import numpy as np


@dataclass(frozen=True)
class EdgeFrame:
    """Tangent and normal of the outer edge leaving the e1 axis, and their
    mirror images across that axis."""

    k: int
    tangent: np.ndarray
    normal: np.ndarray
    tangent_mirror: np.ndarray
    normal_mirror: np.ndarray

    @property
    def sin_k(self):
        return sin(pi / self.k)


def edge_frame(k):
    s, c = sin(pi / k), cos(pi / k)
    return EdgeFrame(
        k=k,
        tangent=np.array([-s, c]),
        normal=np.array([c, s]),
        tangent_mirror=np.array([-s, -c]),
        normal_mirror=np.array([c, -s]),
    )


def rotation(k, power=1):
    """Matrix of the planar rotation by 2*pi*power/k."""
    angle = 2.0 * pi * power / k
    return np.array([[cos(angle), -sin(angle)], [sin(angle), cos(angle)]])


def rotate(points, k, power=1):
    """Rotate the first two coordinates of ``points`` (shape (..., d))."""
    pts = np.array(points, dtype=float)
    pts[..., :2] = pts[..., :2] @ rotation(k, power).T
    return pts
