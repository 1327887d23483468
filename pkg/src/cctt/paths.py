"""Continuous-curvature path primitives.

A path is a chain of constant-sharpness segments (straight lines, circular
arcs and clothoids). Curvature here is the steering curvature tan(delta)/L,
so it does not change sign when the vehicle reverses; the heading rate along
the path is ``direction * kappa``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, List, Optional, Tuple

import numpy as np

from . import _kernels as K
from .geometry import Pose, VehicleParams, angle_diff

FORWARD = 1
BACKWARD = -1

_CONTINUITY_TOL = 1e-9


class SegmentKind(enum.Enum):
    STRAIGHT = "straight"
    CLOTHOID = "clothoid"
    ARC = "arc"


def fresnel(s):
    """Fresnel integrals C(s), S(s) with the pi*u**2/2 kernel.

    Accepts a scalar or an array; odd in ``s``.
    """
    if np.ndim(s) == 0:
        return K.fresnel_scalar(float(s))
    arr = np.asarray(s, dtype=float)
    c, si = K.fresnel_array(arr.ravel())
    return c.reshape(arr.shape), si.reshape(arr.shape)


def clothoid_endpoint(sigma: float, kappa_target: float) -> Pose:
    """Pose reached from the origin (zero curvature) when curvature hits ``kappa_target``."""
    if sigma == 0.0:
        raise ValueError("sigma must be non-zero; use a straight segment instead")
    if kappa_target != 0.0 and math.copysign(1.0, sigma) != math.copysign(1.0, kappa_target):
        raise ValueError("sigma and kappa_target must share a sign")
    a = abs(sigma)
    scale = math.sqrt(math.pi / a)
    c, s = K.fresnel_scalar(abs(kappa_target) / math.sqrt(math.pi * a))
    y = scale * s
    theta = kappa_target ** 2 / (2.0 * a)
    if sigma < 0.0:
        y, theta = -y, -theta
    return Pose(scale * c, y, theta, kappa_target)


@dataclass(frozen=True)
class PathSegment:
    """Constant-sharpness piece: curvature is ``start_kappa + sigma * s``."""

    kind: SegmentKind
    length: float
    start_kappa: float
    sigma: float
    direction: int
    start_pose: Pose

    @classmethod
    def make(cls, start: Pose, kappa: float, sigma: float, direction: int, length: float) -> "PathSegment":
        if sigma != 0.0:
            kind = SegmentKind.CLOTHOID
        elif kappa != 0.0:
            kind = SegmentKind.ARC
        else:
            kind = SegmentKind.STRAIGHT
        return cls(kind, float(length), float(kappa), float(sigma), int(direction),
                   Pose(start.x, start.y, start.theta, kappa))

    @property
    def end_kappa(self) -> float:
        return self.start_kappa + self.sigma * self.length

    def pose_at(self, s: float) -> Pose:
        p = self.start_pose
        x, y, th, k = K.seg_point(p.x, p.y, p.theta, self.start_kappa, self.sigma, float(self.direction), float(s))
        return Pose(x, y, th, k)

    @cached_property
    def end_pose(self) -> Pose:
        return self.pose_at(self.length)

    def row(self) -> Tuple[float, ...]:
        p = self.start_pose
        return (p.x, p.y, p.theta, self.start_kappa, self.sigma, float(self.direction), self.length)

    def reversed(self) -> "PathSegment":
        """Same geometry driven the other way."""
        end = self.end_pose
        return PathSegment(self.kind, self.length, self.end_kappa, -self.sigma, -self.direction,
                           Pose(end.x, end.y, end.theta, self.end_kappa))

    def truncated(self, s: float) -> "PathSegment":
        s = min(max(s, 0.0), self.length)
        return PathSegment(self.kind, s, self.start_kappa, self.sigma, self.direction, self.start_pose)


@dataclass(frozen=True)
class Path:
    segments: Tuple[PathSegment, ...] = ()

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "Path":
        segs = []
        for r in rows:
            start = Pose(r[K.X0], r[K.Y0], r[K.TH0], r[K.K0])
            segs.append(PathSegment.make(start, r[K.K0], r[K.SIG], int(r[K.DIR]), r[K.LEN]))
        return cls(tuple(segs))

    @cached_property
    def total_length(self) -> float:
        return float(sum(seg.length for seg in self.segments))

    @cached_property
    def array(self) -> np.ndarray:
        if not self.segments:
            return np.zeros((0, 7))
        return np.array([seg.row() for seg in self.segments], dtype=float)

    @property
    def start_pose(self) -> Optional[Pose]:
        return self.segments[0].start_pose if self.segments else None

    @property
    def end_pose(self) -> Optional[Pose]:
        return self.segments[-1].end_pose if self.segments else None

    def __len__(self) -> int:
        return len(self.segments)

    def __add__(self, other: "Path") -> "Path":
        return Path(self.segments + other.segments)

    def reversed(self) -> "Path":
        return Path(tuple(seg.reversed() for seg in reversed(self.segments)))

    def truncated(self, s: float) -> "Path":
        """Prefix of arc length ``s``."""
        out = []
        remaining = s
        for seg in self.segments:
            if remaining <= 0.0:
                break
            if seg.length <= remaining:
                out.append(seg)
            else:
                out.append(seg.truncated(remaining))
            remaining -= seg.length
        return Path(tuple(out))

    def pose_at(self, s: float) -> Pose:
        if not self.segments:
            raise ValueError("empty path")
        for seg in self.segments:
            if s <= seg.length:
                return seg.pose_at(max(s, 0.0))
            s -= seg.length
        return self.segments[-1].end_pose

    def direction_switches(self) -> int:
        dirs = [seg.direction for seg in self.segments if seg.length > 0.0]
        return sum(1 for a, b in zip(dirs, dirs[1:]) if a != b)

    def sample(self, ds: float) -> np.ndarray:
        """(N, 6) rows ``s, x, y, theta, kappa, direction`` every ``ds`` per segment."""
        if not self.segments:
            return np.zeros((0, 6))
        return K.sample_segments(self.array, float(ds))


def sample_segment(seg: PathSegment, ds: float) -> List[Tuple[float, Pose]]:
    if ds <= 0.0:
        raise ValueError("ds must be positive")
    rows = K.sample_segments(np.array([seg.row()]), float(ds))
    return [(float(r[0]), Pose(r[1], r[2], r[3], r[4])) for r in rows]


def path_length(path: Path) -> float:
    return path.total_length


def path_curvature_profile(path: Path, ds: float) -> List[Tuple[float, float]]:
    rows = path.sample(ds)
    return [(float(r[0]), float(r[4])) for r in rows]


def concatenate(paths: Iterable[Path]) -> Path:
    segs: List[PathSegment] = []
    for p in paths:
        segs.extend(p.segments)
    return Path(tuple(segs))


@dataclass
class PathCheck:
    ok: bool = True
    problems: List[str] = field(default_factory=list)

    def fail(self, msg: str) -> None:
        self.ok = False
        self.problems.append(msg)

    def __bool__(self) -> bool:
        return self.ok


def check_path(path: Path, params: VehicleParams, ds: float = 0.05, tol: float = 1e-6) -> PathCheck:
    """Validate G2 continuity and curvature/sharpness limits.

    Curvature may jump only where the driving direction switches (the vehicle
    is stationary there). Sampled curvature is scanned as well, so a jump
    hidden inside a segment chain is reported.
    """
    out = PathCheck()
    kmax = params.kappa_max
    smax = params.sigma_max
    segs = path.segments
    for i, seg in enumerate(segs):
        if seg.length < 0.0:
            out.fail(f"segment {i}: negative length")
        if abs(seg.sigma) > smax + 1e-12:
            out.fail(f"segment {i}: |sigma| {abs(seg.sigma):.6g} > sigma_max")
        if max(abs(seg.start_kappa), abs(seg.end_kappa)) > kmax + 1e-9:
            out.fail(f"segment {i}: |kappa| exceeds kappa_max")
    for i, (a, b) in enumerate(zip(segs, segs[1:])):
        end = a.end_pose
        start = b.start_pose
        if math.hypot(end.x - start.x, end.y - start.y) > _CONTINUITY_TOL or \
                abs(angle_diff(end.theta, start.theta)) > _CONTINUITY_TOL:
            out.fail(f"joint {i}: pose discontinuity")
        if a.direction == b.direction and abs(a.end_kappa - b.start_kappa) > _CONTINUITY_TOL:
            out.fail(f"joint {i}: curvature jump {b.start_kappa - a.end_kappa:+.4g} within one direction")
    rows = path.sample(ds)
    if len(rows):
        if np.max(np.abs(rows[:, 4])) > kmax + 1e-9:
            out.fail("sampled |kappa| exceeds kappa_max")
        same = rows[1:, 5] == rows[:-1, 5]
        dk = np.abs(np.diff(rows[:, 4]))
        dsv = np.abs(np.diff(rows[:, 0]))
        bad = same & (dk > smax * dsv + tol)
        if np.any(bad):
            out.fail(f"sampled curvature step exceeds sigma_max*ds at s={rows[1:, 0][bad][0]:.3f}")
    return out


# ---------------------------------------------------------------- steering


@lru_cache(maxsize=16)
def _turn_table(kappa_max: float, sigma_max: float, n: int = 2049):
    _, tx, ty = K.turn_table(kappa_max, sigma_max, n)
    return tx, ty, n


def cc_steer(start: Pose, goal: Pose, params: VehicleParams, max_switches: int = 2,
             grid_step: float = 0.1, max_length: float = math.inf) -> Optional[Path]:
    """Continuous-curvature connection from ``start`` to ``goal``.

    Builds the shortest member of a turn-straight-turn family (each turn a
    clothoid/arc/clothoid or clothoid pair, any mix of driving directions with at
    most ``max_switches`` cusps), with curvature-matching clothoids at either
    end when the poses carry non-zero curvature. Returns ``None`` when no
    member reaches ``goal`` (or none is at most ``max_length`` long).
    """
    kmax = params.kappa_max
    smax = params.sigma_max
    if abs(start.kappa) > kmax + 1e-12 or abs(goal.kappa) > kmax + 1e-12:
        raise ValueError("pose curvature exceeds kappa_max")
    tx, ty, n = _turn_table(kmax, smax)
    rows, ok = K.cc_steer_kernel(start.x, start.y, start.theta, start.kappa,
                                 goal.x, goal.y, goal.theta, goal.kappa,
                                 kmax, smax, int(max_switches), tx, ty, n, float(grid_step),
                                 float(max_length), 1e-6)
    if not ok:
        return None
    path = Path.from_rows(rows)
    if path.total_length > max_length + 1e-9:
        return None
    end = path.end_pose
    if end is not None and (end.distance(goal) > 1e-6 or abs(angle_diff(end.theta, goal.theta)) > 1e-6):
        return None
    return path


def elementary_turn(start: Pose, deflection: float, params: VehicleParams, direction: int = FORWARD,
                    arc_length: Optional[float] = None) -> Path:
    """Symmetric turn: clothoid up to kappa_max, arc, clothoid back to zero.

    ``arc_length`` overrides the deflection-derived arc (deflection sign still
    picks the turning side).
    """
    kmax = params.kappa_max
    smax = params.sigma_max
    if arc_length is not None:
        deflection = math.copysign(params.min_deflection + arc_length * kmax, deflection)
    sgn = 1.0 if deflection >= 0 else -1.0
    ks = sgn * direction
    a = abs(deflection)
    pose = start
    if a < params.min_deflection:
        l = math.sqrt(a / smax)
        pieces = [(0.0, ks * smax, l), (ks * smax * l, -ks * smax, l)]
    else:
        l = kmax / smax
        pieces = [(0.0, ks * smax, l), (ks * kmax, 0.0, (a - params.min_deflection) / kmax),
                  (ks * kmax, -ks * smax, l)]
    segs = []
    for k0, sig, length in pieces:
        if length <= 0.0:
            continue
        seg = PathSegment.make(Pose(pose.x, pose.y, pose.theta, k0), k0, sig, direction, length)
        segs.append(seg)
        pose = seg.end_pose
    return Path(tuple(segs))
