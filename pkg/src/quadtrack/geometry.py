"""Quad-detector receiver geometry.

Field of view, quadrant-capture probability, full-beam-misalignment
probability, and the geometric background-power model.  All functions are
pure and thread-safe.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy.integrate import quad

from .stats import q_function


@dataclass(frozen=True)
class DetectorGeometry:
    """Detector sides, focal length, and the derived angular acceptance."""

    a: float          # detector side along y [m]
    b: float          # detector side along x [m]
    f_c: float        # focal length [m]
    theta_x_fov: float  # arctan(b / f_c) [rad]
    theta_y_fov: float  # arctan(a / f_c) [rad]
    solid_angle: float  # small-angle FoV solid angle [sr]

    @classmethod
    def from_sides(cls, a: float, b: float, f_c: float) -> "DetectorGeometry":
        return cls(
            a=a, b=b, f_c=f_c,
            theta_x_fov=math.atan2(b, f_c),
            theta_y_fov=math.atan2(a, f_c),
            solid_angle=fov_solid_angle(a, b, f_c),
        )


def fov_solid_angle(a: float, b: float, f_c: float) -> float:
    """Small-angle field-of-view solid angle, 2ab/f_c^2.

    Warns when the small-angle assumption degrades (side/focal > 0.2).
    """
    if a < 0 or b < 0 or f_c <= 0:
        raise ValueError("detector sides must be >= 0 and focal length > 0")
    if max(a, b) > 0.2 * f_c:
        warnings.warn(
            "detector side exceeds 0.2 * focal length; small-angle FoV "
            "approximation is inaccurate", stacklevel=2)
    return 2.0 * a * b / f_c ** 2


def fov_solid_angle_exact(a: float, b: float, f_c: float) -> float:
    """Exact spherical-coordinate FoV integral, kept as a validation oracle.

    8 * int_0^{atan(a/b)} [1 - cos(atan(b / (2 f_c cos(phi))))] dphi.
    Note this exact form approaches ab/f_c^2 for small detectors, half of
    the small-angle production formula 2ab/f_c^2; the two conventions are
    reconciled in the test suite and documented there.
    """
    if a <= 0 or b <= 0:
        return 0.0

    def integrand(phi):
        return 1.0 - math.cos(math.atan(b / (2.0 * f_c * math.cos(phi))))

    value, _ = quad(integrand, 0.0, math.atan2(a, b), epsabs=0, epsrel=1e-12)
    return 8.0 * value


def capture_probability(geom: DetectorGeometry,
                        sigma_x: float, sigma_y: float) -> float:
    """Probability P_D of capturing the beam in one given quadrant.

    By the symmetry of the quad arrangement the same value holds for all
    four quadrants.
    """
    if sigma_x <= 0 or sigma_y <= 0:
        raise ValueError("hover standard deviations must be positive")
    px = 0.5 - q_function(math.atan2(geom.a, geom.f_c) / sigma_x)
    py = 0.5 - q_function(math.atan2(geom.b, geom.f_c) / sigma_y)
    return float(px * py)


def fbm_probability(geom: DetectorGeometry,
                    sigma_x: float, sigma_y: float) -> float:
    """Full-beam-misalignment probability, 1 - 4 P_D."""
    return 1.0 - 4.0 * capture_probability(geom, sigma_x, sigma_y)


def background_power_geometric(a: float, b: float, f_c: float,
                               n_b: float, b_o: float, a_a: float) -> float:
    """Background power collected through the FoV: 2ab N_b B_o A_a / f_c^2."""
    if min(a, b, f_c, n_b, b_o, a_a) <= 0:
        raise ValueError("all geometric background inputs must be positive")
    return 2.0 * a * b * n_b * b_o * a_a / f_c ** 2
