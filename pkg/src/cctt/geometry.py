"""Planar poses, vehicle parameters and footprint geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


def angle_diff(a: float, b: float) -> float:
    """Shortest signed difference a - b, in (-pi, pi]."""
    return normalize_angle(a - b)


class _PoseFields(NamedTuple):
    x: float
    y: float
    theta: float
    kappa: float


class Pose(_PoseFields):
    """Rear-axle pose with signed steering curvature.

    ``theta`` is normalized on construction.
    """

    __slots__ = ()

    def __new__(cls, x: float = 0.0, y: float = 0.0, theta: float = 0.0, kappa: float = 0.0):
        return super().__new__(cls, float(x), float(y), normalize_angle(float(theta)), float(kappa))

    def with_kappa(self, kappa: float) -> "Pose":
        return Pose(self.x, self.y, self.theta, kappa)

    def distance(self, other: "Pose") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def close_to(self, other: "Pose", tol: float = 1e-6) -> bool:
        return self.distance(other) <= tol and abs(angle_diff(self.theta, other.theta)) <= tol


IDENTITY = Pose()


def compose(base: Pose, local: Pose) -> Pose:
    """Express ``local`` (given in the frame of ``base``) in the world frame."""
    c = math.cos(base.theta)
    s = math.sin(base.theta)
    return Pose(
        base.x + c * local.x - s * local.y,
        base.y + s * local.x + c * local.y,
        base.theta + local.theta,
        local.kappa,
    )


def relative(base: Pose, pose: Pose) -> Pose:
    """Inverse of :func:`compose`: ``pose`` expressed in the frame of ``base``."""
    c = math.cos(base.theta)
    s = math.sin(base.theta)
    dx = pose.x - base.x
    dy = pose.y - base.y
    return Pose(c * dx + s * dy, -s * dx + c * dy, pose.theta - base.theta, pose.kappa)


@dataclass(frozen=True)
class VehicleParams:
    """Vehicle dimensions and curvature limits (defaults: the test vehicle)."""

    wheelbase_L: float = 2.845
    body_length: float = 4.910
    body_width: float = 1.860
    rear_overhang: float = 1.03
    kappa_max: float = 1.0 / 6.0
    sigma_max: float = 0.2

    def __post_init__(self):
        for name in ("wheelbase_L", "body_length", "body_width", "rear_overhang", "kappa_max", "sigma_max"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.rear_overhang >= self.body_length:
            raise ValueError("rear_overhang must be smaller than body_length")

    @property
    def delta_max(self) -> float:
        return math.atan(self.kappa_max * self.wheelbase_L)

    @property
    def min_deflection(self) -> float:
        """Heading change of a clothoid pair that just reaches kappa_max."""
        return self.kappa_max ** 2 / self.sigma_max

    def footprint(self) -> "Footprint":
        return Footprint.from_params(self)


@dataclass(frozen=True)
class Footprint:
    """Body rectangle in the vehicle frame (rear-axle origin, x forward)."""

    corners: np.ndarray  # (4, 2), counter-clockwise

    @classmethod
    def from_params(cls, params: VehicleParams) -> "Footprint":
        r = -params.rear_overhang
        f = params.body_length - params.rear_overhang
        w = 0.5 * params.body_width
        corners = np.array([[r, -w], [f, -w], [f, w], [r, w]], dtype=float)
        corners.setflags(write=False)
        return cls(corners)

    @property
    def bounding_radius(self) -> float:
        return float(np.max(np.hypot(self.corners[:, 0], self.corners[:, 1])))


def transform_points(pose: Pose, pts: np.ndarray) -> np.ndarray:
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    rot = np.array([[c, -s], [s, c]])
    return pts @ rot.T + np.array([pose.x, pose.y])


def footprint_at(params: VehicleParams, pose: Pose) -> np.ndarray:
    """World-frame corners (4, 2) of the body when the rear axle sits at ``pose``."""
    return transform_points(pose, Footprint.from_params(params).corners)


def polygon_area(pts: np.ndarray) -> float:
    x = pts[:, 0]
    y = pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
