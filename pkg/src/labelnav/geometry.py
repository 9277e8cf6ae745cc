"""Planar polar-coordinate helpers and the two-circle origin solver.

Every matching hypothesis is anchored by a pair of database points and the
polar configuration (radius ratio and bearing difference) that the matching
pair of image points has about the image center.  :func:`solve_origin`
recovers the point in the database frame that reproduces that configuration.
"""

from __future__ import annotations

import math
from typing import NamedTuple

#: Degenerate-radius tolerance as a fraction of the frame diagonal.
EPS_R_FRACTION = 1e-6
#: Smallest admissible law-of-cosines denominator.
EPS_DEN = 1e-12
#: Below this |sin(dtheta)| the two intersections coincide (tangency branch).
EPS_THETA = 1e-12

TWO_PI = 2.0 * math.pi


class DegenerateOriginError(ValueError):
    """Raised when a point coincides with the polar origin."""


class PolarCoord(NamedTuple):
    r: float
    theta: float


class OriginSolution(NamedTuple):
    origin: tuple[float, float]
    r_i: float
    tangent: bool


def wrap_angle(a: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    x = a + math.pi
    w = x - TWO_PI * math.floor(x / TWO_PI)
    if w <= 0.0:
        w += TWO_PI
    return w - math.pi


def to_polar(p, origin=(0.0, 0.0), eps_r: float = 0.0) -> PolarCoord:
    """Polar coordinates of ``p`` about ``origin``.

    Both points must already be expressed in a right-handed frame (image
    points with ``v`` flipped).  Raises :class:`DegenerateOriginError` when
    the radius is below ``eps_r``; with the default ``eps_r = 0`` only an
    exact coincidence is rejected.
    """
    dx = float(p[0]) - float(origin[0])
    dy = float(p[1]) - float(origin[1])
    r = math.hypot(dx, dy)
    if r <= eps_r:
        raise DegenerateOriginError(
            f"point {tuple(p)} is within {eps_r:g} of origin {tuple(origin)}")
    return PolarCoord(r, wrap_angle(math.atan2(dy, dx)))


def cosine_denominator(rho: float, dtheta: float) -> float:
    """``1 + rho**2 - 2*rho*cos(dtheta)`` in a cancellation-free form."""
    s = math.sin(0.5 * dtheta)
    return (1.0 - rho) ** 2 + 4.0 * rho * s * s


def solve_origin(p_i, p_j, rho: float, dtheta: float,
                 eps_den: float = EPS_DEN) -> OriginSolution | None:
    """Find the polar origin that gives ``p_i, p_j`` a prescribed configuration.

    The returned origin ``c`` satisfies ``|p_j - c| / |p_i - c| = rho`` and
    ``wrap(theta_i - theta_j) = dtheta`` where the thetas are bearings of
    ``p_i`` and ``p_j`` seen from ``c``.  Geometrically ``c`` is one of the
    intersections of the circle of radius ``R_i`` about ``p_i`` with the
    circle of radius ``rho * R_i`` about ``p_j``; the side is chosen so that
    the bearing difference has the sign of ``dtheta``.

    Args:
        p_i: Reference anchor point.
        p_j: Second anchor point, distinct from ``p_i``.
        rho: Radius ratio ``r_j / r_i`` measured in the other frame (> 0).
        dtheta: Bearing difference ``theta_i - theta_j`` in (-pi, pi].
        eps_den: Denominators below this mean an unbounded radius.

    Returns:
        ``OriginSolution(origin, r_i, tangent)`` or ``None`` for a
        degenerate hypothesis.  ``tangent`` is set when the two circle
        intersections coincide (``dtheta`` at 0 or pi), in which case no sign
        test is possible and the single touching point is returned.
    """
    xi, yi = float(p_i[0]), float(p_i[1])
    xj, yj = float(p_j[0]), float(p_j[1])
    ex, ey = xj - xi, yj - yi
    d = math.hypot(ex, ey)
    if d == 0.0 or not rho > 0.0:
        return None
    den = cosine_denominator(rho, dtheta)
    if den < eps_den:
        return None
    sd = math.sqrt(den)
    r_i = d / sd
    # Distance from p_i along p_i->p_j to the chord, and half-chord length.
    along = r_i * (1.0 - rho * math.cos(dtheta)) / sd
    sin_dt = math.sin(dtheta)
    half = r_i * rho * abs(sin_dt) / sd
    ux, uy = ex / d, ey / d
    bx, by = xi + along * ux, yi + along * uy
    if abs(sin_dt) < EPS_THETA:
        return OriginSolution((bx, by), r_i, True)
    cx, cy = bx - half * uy, by + half * ux
    # theta_i - theta_j has the opposite sign of cross(p_i - c, p_j - c).
    cross = (xi - cx) * (yj - cy) - (yi - cy) * (xj - cx)
    if (cross < 0.0) != (dtheta > 0.0):
        cx, cy = bx + half * uy, by - half * ux
    return OriginSolution((cx, cy), r_i, False)
