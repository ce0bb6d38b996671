"""Conversion of projected template points into a measurement vector.

Orders the four projected corners into a canonical clockwise order,
measures the quad's width/height and in-image rotation angle, and
assembles the five-element observation with a validity gate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateQuad


@dataclass
class CornerQuad:
    """Four canonically ordered corners plus the template centroid (px)."""

    corners: np.ndarray   # (4, 2), clockwise from top-left
    centroid: np.ndarray  # (2,)


@dataclass
class ObservationVector:
    """Per-frame measurement: centroid, width, height, angle.

    theta is in degrees, reduced to [0, 90) by the square pad's
    rotational symmetry.
    """

    x_c: float
    y_c: float
    o_w: float
    o_h: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x_c, self.y_c, self.o_w, self.o_h, self.theta])


@dataclass
class ObservationGate:
    """Validity thresholds for a detection."""

    min_area_px2: float = 100.0
    aspect_min: float = 0.25
    aspect_max: float = 4.0
    bounds_inflation: float = 0.2


def sort_corners(points: np.ndarray) -> np.ndarray:
    """Order 4 points clockwise, starting from the top-left corner.

    Points are sorted clockwise by polar angle around their mean (image
    y grows downward, so clockwise on screen is counter-clockwise in
    math coordinates), then rotated so the corner with the smallest
    (y, x) comes first. The result is a deterministic total order.
    """
    points = np.asarray(points, dtype=float).reshape(4, 2)
    for i in range(4):
        for j in range(i + 1, 4):
            if np.linalg.norm(points[i] - points[j]) < 1e-6:
                raise DegenerateQuad("coincident corners")

    center = points.mean(axis=0)
    angles = np.arctan2(points[:, 1] - center[1], points[:, 0] - center[0])
    order = np.argsort(angles, kind="stable")
    ring = points[order]

    keys = [(ring[i, 1], ring[i, 0]) for i in range(4)]
    start = min(range(4), key=lambda i: keys[i])
    return np.roll(ring, -start, axis=0)


def compute_object_dims(quad: CornerQuad) -> tuple[float, float]:
    """Width and height as means of opposite edge lengths.

    Width averages the top and bottom edges, height the left and right
    edges, per the canonical corner order TL, TR, BR, BL.
    """
    tl, tr, br, bl = quad.corners
    o_w = 0.5 * (np.linalg.norm(tr - tl) + np.linalg.norm(br - bl))
    o_h = 0.5 * (np.linalg.norm(bl - tl) + np.linalg.norm(br - tr))
    return float(o_w), float(o_h)


def compute_angle(quad: CornerQuad) -> float:
    """Angle of the top edge w.r.t. the image x axis, in [0, 90) deg."""
    tl, tr = quad.corners[0], quad.corners[1]
    raw = np.degrees(np.arctan2(tr[1] - tl[1], tr[0] - tl[0]))
    return float(raw % 90.0)


def _is_convex(corners: np.ndarray) -> bool:
    cross = []
    for i in range(4):
        a = corners[(i + 1) % 4] - corners[i]
        b = corners[(i + 2) % 4] - corners[(i + 1) % 4]
        cross.append(a[0] * b[1] - a[1] * b[0])
    cross = np.array(cross)
    return bool(np.all(cross > 0) or np.all(cross < 0))


def _area(corners: np.ndarray) -> float:
    x, y = corners[:, 0], corners[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def build_observation(quad: CornerQuad, image_w: float, image_h: float,
                      gate: ObservationGate | None = None,
                      ) -> tuple[ObservationVector, bool]:
    """Assemble the observation vector and judge its validity.

    Invalid observations are still returned (for logging) but must not
    drive a filter correction. A detection is invalid when the quad is
    non-convex, too small, too elongated, or its centroid lies outside
    the image bounds inflated by ``gate.bounds_inflation``.
    """
    gate = gate or ObservationGate()
    o_w, o_h = compute_object_dims(quad)
    theta = compute_angle(quad)
    x_c, y_c = float(quad.centroid[0]), float(quad.centroid[1])
    z = ObservationVector(x_c, y_c, o_w, o_h, theta)

    valid = True
    if not _is_convex(quad.corners):
        valid = False
    if _area(quad.corners) < gate.min_area_px2:
        valid = False
    if o_h <= 0 or not gate.aspect_min <= o_w / o_h <= gate.aspect_max:
        valid = False
    mx = gate.bounds_inflation * image_w
    my = gate.bounds_inflation * image_h
    if not (-mx <= x_c <= image_w + mx and -my <= y_c <= image_h + my):
        valid = False
    return z, valid


def observation_from_points(points: np.ndarray, image_w: float, image_h: float,
                            gate: ObservationGate | None = None,
                            ) -> tuple[ObservationVector, bool]:
    """Sort the 4 corners of a projected 5-point set and build Z."""
    points = np.asarray(points, dtype=float).reshape(5, 2)
    corners = sort_corners(points[:4])
    quad = CornerQuad(corners=corners, centroid=points[4])
    return build_observation(quad, image_w, image_h, gate)
