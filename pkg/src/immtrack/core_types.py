"""Shared domain types, oriented-box geometry and Gaussian helpers."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

STATE_DIM = 13
MEAS_DIM = 7

# state layout
L, W, H, X, Y, Z, THETA, VX, VY, VZ, OMEGA, AX, AY = range(STATE_DIM)
STATE_NAMES = ("l", "w", "h", "x", "y", "z", "theta", "vx", "vy", "vz", "omega", "ax", "ay")

TWO_PI = 2.0 * math.pi


class TrackingError(Exception):
    """Base class for errors raised by the tracker."""


class InvalidArgumentError(TrackingError, ValueError):
    pass


class ValidationError(TrackingError, ValueError):
    """Malformed input: files, scenarios, configs, streams."""


class OrderingError(ValidationError):
    pass


class NumericalStateError(TrackingError, ArithmeticError):
    """A covariance or density input is not usable (non-PSD, singular, NaN)."""


class NumericalWarning(RuntimeWarning):
    """Emitted when a numerical fallback (jitter, floor, uniform column) kicks in."""


def wrap_angle(a):
    """Wrap an angle (scalar or array) into [-pi, pi)."""
    if isinstance(a, (float, int)) or np.ndim(a) == 0:
        a = float(a)
        if not math.isfinite(a):
            raise InvalidArgumentError(f"angle must be finite, got {a}")
        r = (a + math.pi) % TWO_PI - math.pi
        return r - TWO_PI if r >= math.pi else r
    arr = np.asarray(a, dtype=float)
    if not np.isfinite(arr).all():
        raise InvalidArgumentError("angles must be finite")
    r = np.mod(arr + math.pi, TWO_PI) - math.pi
    r[r >= math.pi] -= TWO_PI
    return r


def angle_diff(a: float, b: float) -> float:
    return wrap_angle(a - b)


def circular_mean(angles, weights) -> float:
    """Weighted circular mean via atan2 of weighted sin/cos."""
    angles = np.asarray(angles, dtype=float)
    weights = np.asarray(weights, dtype=float)
    s = float(np.dot(weights, np.sin(angles)))
    c = float(np.dot(weights, np.cos(angles)))
    if s == 0.0 and c == 0.0:
        # antipodal cancellation: fall back to the heaviest component
        return wrap_angle(float(angles[int(np.argmax(weights))]))
    return wrap_angle(math.atan2(s, c))


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


@dataclass(frozen=True)
class BoxMeasurement:
    """Oriented 3D box: dimensions, center, yaw, and detector score."""

    l: float
    w: float
    h: float
    x: float
    y: float
    z: float
    theta: float
    score: float = 1.0

    def __post_init__(self):
        vals = (self.l, self.w, self.h, self.x, self.y, self.z, self.theta, self.score)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgumentError(f"box fields must be finite: {vals}")
        if self.l <= 0 or self.w <= 0 or self.h <= 0:
            raise InvalidArgumentError(f"box dimensions must be positive: {(self.l, self.w, self.h)}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.l, self.w, self.h, self.x, self.y, self.z, self.theta])

    @classmethod
    def from_array(cls, values: Sequence[float], score: float = 1.0) -> "BoxMeasurement":
        v = [float(a) for a in values[:MEAS_DIM]]
        return cls(*v, score=score)


@dataclass(frozen=True)
class Pose2D:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def transform(self, x: float, y: float, heading: float = 0.0) -> tuple[float, float, float]:
        """Map a point/heading from this pose's local frame into the parent frame."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        return (self.x + c * x - s * y, self.y + s * x + c * y, wrap_angle(self.heading + heading))


@dataclass(frozen=True, eq=False)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def state_from_box(box: BoxMeasurement) -> np.ndarray:
    x = np.zeros(STATE_DIM)
    x[:MEAS_DIM] = box.as_array()
    return x


# --------------------------------------------------------------------------
# oriented box IoU


def _box_array(b) -> np.ndarray:
    if isinstance(b, BoxMeasurement):
        return b.as_array()
    return np.asarray(b, dtype=float)[:MEAS_DIM]


def bev_corners(box) -> list[tuple[float, float]]:
    """Counter-clockwise footprint corners of a box (length along heading)."""
    l, w, _, x, y, _, th = _box_array(box)
    c, s = math.cos(th), math.sin(th)
    hl, hw = 0.5 * l, 0.5 * w
    out = []
    for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
        out.append((x + c * dx - s * dy, y + s * dx + c * dy))
    # (hl, hw) -> (-hl, hw) -> ... is CCW in the box frame
    return out


def polygon_area(poly: Sequence[tuple[float, float]]) -> float:
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return 0.5 * acc


def clip_convex(subject, clipper, eps: float = 1e-12) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clipping of ``subject`` by a CCW convex ``clipper``."""
    output = list(subject)
    n = len(clipper)
    for i in range(n):
        if not output:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inp = output
        output = []
        m = len(inp)
        for j in range(m):
            px, py = inp[j - 1]
            qx, qy = inp[j]
            sp = ex * (py - ay) - ey * (px - ax)
            sq = ex * (qy - ay) - ey * (qx - ax)
            if sq >= -eps:
                if sp < -eps:
                    t = sp / (sp - sq)
                    output.append((px + t * (qx - px), py + t * (qy - py)))
                output.append((qx, qy))
            elif sp >= -eps:
                t = sp / (sp - sq)
                output.append((px + t * (qx - px), py + t * (qy - py)))
    return output


def iou_3d(a, b) -> float:
    """Volume IoU of two yaw-oriented boxes (BEV clipping x height overlap).

    Accepts ``BoxMeasurement`` or 7-sequences. A zero-volume box yields 0 and a
    ``NumericalWarning``.
    """
    ba, bb = _box_array(a), _box_array(b)
    if min(ba[0], ba[1], ba[2], bb[0], bb[1], bb[2]) <= 0.0:
        warnings.warn("degenerate box in iou_3d", NumericalWarning, stacklevel=2)
        return 0.0
    # canonical argument order makes the result exactly symmetric
    if tuple(bb) < tuple(ba):
        ba, bb = bb, ba
    za0, za1 = ba[5] - 0.5 * ba[2], ba[5] + 0.5 * ba[2]
    zb0, zb1 = bb[5] - 0.5 * bb[2], bb[5] + 0.5 * bb[2]
    dz = min(za1, zb1) - max(za0, zb0)
    if dz <= 0.0:
        return 0.0
    # cheap circumcircle reject
    ra = 0.5 * math.hypot(ba[0], ba[1])
    rb = 0.5 * math.hypot(bb[0], bb[1])
    if math.hypot(ba[3] - bb[3], ba[4] - bb[4]) >= ra + rb:
        return 0.0
    ca, cb = bev_corners(ba), bev_corners(bb)
    area_a, area_b = polygon_area(ca), polygon_area(cb)
    inter_area = polygon_area(clip_convex(ca, cb))
    if inter_area <= 0.0:
        return 0.0
    inter = inter_area * dz
    vol_a = area_a * (za1 - za0)
    vol_b = area_b * (zb1 - zb0)
    union = vol_a + vol_b - inter
    return float(min(1.0, max(0.0, inter / union)))
