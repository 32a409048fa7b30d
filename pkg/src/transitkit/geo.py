"""Small planar/spherical geometry helpers used by import and graph building."""

import math

EARTH_RADIUS_M = 6371008.8


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters between two WGS84 points."""
    p1 = math.radians(lat1)
    p2 = math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def to_local_xy(lat, lon, lat0, lon0):
    """Equirectangular projection around (lat0, lon0); good enough at city scale."""
    x = math.radians(lon - lon0) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
    y = math.radians(lat - lat0) * EARTH_RADIUS_M
    return x, y


def point_segment_projection(px, py, ax, ay, bx, by):
    """Project (px,py) onto segment a-b.

    Returns (t, fx, fy, dist): t in [0,1] along the segment, foot point, and
    the distance from the point to the foot.
    """
    dx = bx - ax
    dy = by - ay
    seg2 = dx * dx + dy * dy
    if seg2 <= 0.0:
        t = 0.0
    else:
        t = ((px - ax) * dx + (py - ay) * dy) / seg2
        t = max(0.0, min(1.0, t))
    fx = ax + t * dx
    fy = ay + t * dy
    return t, fx, fy, math.hypot(px - fx, py - fy)
