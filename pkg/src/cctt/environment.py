"""Parking scenarios and footprint collision checking."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels as K
from .config import PlannerConfig
from .geometry import Footprint, Pose, VehicleParams, footprint_at
from .paths import Path


class ScenarioError(ValueError):
    """Malformed or invalid scenario document."""


class ParkingMode(enum.Enum):
    PERPENDICULAR = "perpendicular"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class ParkingSpot:
    goal: Pose
    length: float
    width: float
    mode: ParkingMode


@dataclass(frozen=True)
class Scenario:
    bounds: Tuple[float, float, float, float]
    obstacles: Tuple[np.ndarray, ...]
    spot: ParkingSpot
    start: Pose
    vehicle: VehicleParams = VehicleParams()
    planner: PlannerConfig = PlannerConfig()
    seed: int = 0
    name: str = ""

    @property
    def q_goal(self) -> Pose:
        return self.spot.goal

    @property
    def q_init(self) -> Pose:
        return self.start

    def with_planner(self, **changes) -> "Scenario":
        return replace(self, planner=replace(self.planner, **changes))

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))


# ---------------------------------------------------------------- polygons


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_ccw(points: Sequence[Sequence[float]]) -> np.ndarray:
    """Validate a convex polygon and return it counter-clockwise."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("polygon needs at least 3 [x, y] vertices")
    n = len(pts)
    crosses = np.array([_cross(pts[i], pts[(i + 1) % n], pts[(i + 2) % n]) for i in range(n)])
    if np.all(np.abs(crosses) < 1e-12):
        raise ValueError("polygon vertices are collinear")
    if np.any(crosses > 1e-12) and np.any(crosses < -1e-12):
        raise ValueError("polygon is not convex")
    if np.sum(crosses) < 0:
        pts = pts[::-1].copy()
    return pts


def inflate_polygon(poly: np.ndarray, margin: float) -> np.ndarray:
    """Shift every edge of a CCW convex polygon outward by ``margin`` (mitred corners)."""
    if margin <= 0.0:
        return poly
    n = len(poly)
    lines = []
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        e = b - a
        length = math.hypot(e[0], e[1])
        if length < 1e-12:
            continue
        normal = np.array([e[1], -e[0]]) / length
        lines.append((a + margin * normal, e / length))
    out = []
    for i in range(len(lines)):
        p1, d1 = lines[i - 1]
        p2, d2 = lines[i]
        den = d1[0] * d2[1] - d1[1] * d2[0]
        if abs(den) < 1e-12:
            out.append(p2)
            continue
        t = ((p2[0] - p1[0]) * d2[1] - (p2[1] - p1[1]) * d2[0]) / den
        out.append(p1 + t * d1)
    return np.array(out)


# ---------------------------------------------------------------- loading

_TOP_KEYS = {"bounds", "obstacles", "spot", "start", "vehicle", "planner", "seed", "name"}
_REQUIRED_TOP = ("bounds", "obstacles", "spot", "start", "vehicle")
_SPOT_KEYS = {"goal", "length", "width", "mode"}
_VEHICLE_KEYS = ("wheelbase_L", "body_length", "body_width", "rear_overhang", "kappa_max", "sigma_max")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(f"{where}: expected a finite number, got {value!r}")
    return float(value)


def _pose(value, where: str) -> Pose:
    if not isinstance(value, list) or len(value) != 3:
        raise ScenarioError(f"{where}: expected [x, y, theta]")
    return Pose(*(_number(v, f"{where}[{i}]") for i, v in enumerate(value)))


def _reject_unknown(obj: dict, allowed, where: str) -> None:
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {', '.join(unknown)}")


def load_scenario(text: Union[str, bytes], name: str = "") -> Scenario:
    """Parse and validate a scenario document (JSON)."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScenarioError(f"scenario is not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("top level must be an object")
    _reject_unknown(doc, _TOP_KEYS, "scenario")
    for key in _REQUIRED_TOP:
        if key not in doc:
            raise ScenarioError(f"missing required field '{key}'")

    bounds = doc["bounds"]
    if not isinstance(bounds, list) or len(bounds) != 4:
        raise ScenarioError("bounds: expected [xmin, ymin, xmax, ymax]")
    bounds = tuple(_number(v, f"bounds[{i}]") for i, v in enumerate(bounds))
    if not (bounds[0] < bounds[2] and bounds[1] < bounds[3]):
        raise ScenarioError("bounds: xmin < xmax and ymin < ymax required")

    vdoc = doc["vehicle"]
    if not isinstance(vdoc, dict):
        raise ScenarioError("vehicle: expected an object")
    _reject_unknown(vdoc, _VEHICLE_KEYS, "vehicle")
    for key in _VEHICLE_KEYS:
        if key not in vdoc:
            raise ScenarioError(f"vehicle: missing required field '{key}'")
    try:
        vehicle = VehicleParams(**{k: _number(vdoc[k], f"vehicle.{k}") for k in _VEHICLE_KEYS})
    except ValueError as exc:
        raise ScenarioError(f"vehicle: {exc}") from None

    pdoc = doc.get("planner", {})
    if not isinstance(pdoc, dict):
        raise ScenarioError("planner: expected an object")
    try:
        planner = PlannerConfig.from_dict(pdoc)
    except KeyError as exc:
        raise ScenarioError(f"planner: unknown key(s) {exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"planner: {exc}") from None

    sdoc = doc["spot"]
    if not isinstance(sdoc, dict):
        raise ScenarioError("spot: expected an object")
    _reject_unknown(sdoc, _SPOT_KEYS, "spot")
    for key in _SPOT_KEYS:
        if key not in sdoc:
            raise ScenarioError(f"spot: missing required field '{key}'")
    try:
        mode = ParkingMode(sdoc["mode"])
    except ValueError:
        raise ScenarioError("spot.mode: expected 'perpendicular' or 'parallel'") from None
    spot = ParkingSpot(_pose(sdoc["goal"], "spot.goal"), _number(sdoc["length"], "spot.length"),
                       _number(sdoc["width"], "spot.width"), mode)
    if spot.length <= 0 or spot.width <= 0:
        raise ScenarioError("spot: length and width must be positive")
    start = _pose(doc["start"], "start")
    for label, p in (("spot.goal", spot.goal), ("start", start)):
        if not (bounds[0] <= p.x <= bounds[2] and bounds[1] <= p.y <= bounds[3]):
            raise ScenarioError(f"{label}: pose lies outside bounds")

    obstacles = doc["obstacles"]
    if not isinstance(obstacles, list):
        raise ScenarioError("obstacles: expected a list of polygons")
    polys = []
    for i, poly in enumerate(obstacles):
        try:
            for j, v in enumerate(poly):
                if not isinstance(v, list) or len(v) != 2:
                    raise ValueError(f"vertex {j} must be [x, y]")
                _number(v[0], f"obstacles[{i}][{j}]")
                _number(v[1], f"obstacles[{i}][{j}]")
            polys.append(inflate_polygon(convex_ccw(poly), planner.inflation_margin))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"obstacles[{i}]: {exc}") from None

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioError("seed: expected an unsigned integer")
    return Scenario(bounds, tuple(polys), spot, start, vehicle, planner, seed, str(doc.get("name", name)))


def load_scenario_file(path) -> Scenario:
    with open(path, "rb") as fh:
        data = fh.read()
    return load_scenario(data, name=str(path))


def bundled_scenarios() -> List[str]:
    return sorted(p.name for p in resources.files("cctt.scenarios").iterdir() if p.name.endswith(".scn"))


def bundled_scenario(name: str) -> Scenario:
    """Load one of the scenarios shipped with the package (``.scn`` optional)."""
    if not name.endswith(".scn"):
        name += ".scn"
    data = resources.files("cctt.scenarios").joinpath(name).read_bytes()
    return load_scenario(data, name=name[:-4])


def scenario_to_dict(scn: Scenario) -> dict:
    v = scn.vehicle
    return {
        "name": scn.name,
        "bounds": list(scn.bounds),
        "obstacles": [p.tolist() for p in scn.obstacles],
        "spot": {"goal": [scn.spot.goal.x, scn.spot.goal.y, scn.spot.goal.theta],
                 "length": scn.spot.length, "width": scn.spot.width, "mode": scn.spot.mode.value},
        "start": [scn.start.x, scn.start.y, scn.start.theta],
        "vehicle": {k: getattr(v, k) for k in _VEHICLE_KEYS},
        "planner": scn.planner.to_dict(),
        "seed": scn.seed,
    }


# ---------------------------------------------------------------- collision


_GRID_MIN_OBSTACLES = 48


class CollisionChecker:
    """Immutable obstacle set plus a uniform grid of obstacle references.

    ``cell_size=None`` disables the grid; answers are the same either way.
    """

    def __init__(self, obstacles: Sequence[np.ndarray], bounds, cell_size: Optional[float] = 2.0):
        self.obstacles = tuple(np.asarray(p, dtype=float) for p in obstacles)
        self.bounds = np.asarray(bounds, dtype=float)
        n = len(self.obstacles)
        vmax = max((len(p) for p in self.obstacles), default=3)
        self._ox = np.zeros((max(n, 1), vmax))
        self._oy = np.zeros((max(n, 1), vmax))
        self._on = np.zeros(max(n, 1), dtype=np.int64)
        self._box = np.zeros((max(n, 1), 4))
        for i, p in enumerate(self.obstacles):
            self._ox[i, :len(p)] = p[:, 0]
            self._oy[i, :len(p)] = p[:, 1]
            self._on[i] = len(p)
            self._box[i] = (p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max())
        self._all = np.arange(n, dtype=np.int64)
        self.cell_size = cell_size
        self._grid: Dict[Tuple[int, int], Tuple[int, ...]] = {}
        if cell_size is not None:
            if cell_size <= 0:
                raise ValueError("cell_size must be positive")
            cells: Dict[Tuple[int, int], List[int]] = {}
            for i in range(n):
                x0, y0, x1, y1 = self._box[i]
                for cx in range(int(math.floor(x0 / cell_size)), int(math.floor(x1 / cell_size)) + 1):
                    for cy in range(int(math.floor(y0 / cell_size)), int(math.floor(y1 / cell_size)) + 1):
                        cells.setdefault((cx, cy), []).append(i)
            self._grid = {k: tuple(v) for k, v in cells.items()}
        self._corner_cache: Dict[VehicleParams, Tuple[np.ndarray, float]] = {}

    @classmethod
    def from_scenario(cls, scn: Scenario, cell_size: Optional[float] = 2.0) -> "CollisionChecker":
        return cls(scn.obstacles, scn.bounds, cell_size)

    def _corners(self, params: VehicleParams):
        hit = self._corner_cache.get(params)
        if hit is None:
            fp = Footprint.from_params(params)
            hit = (np.ascontiguousarray(fp.corners), fp.bounding_radius)
            self._corner_cache[params] = hit
        return hit

    def _candidates(self, xs: np.ndarray, ys: np.ndarray, radius: float) -> np.ndarray:
        if self.cell_size is None or not self._grid:
            return self._all
        if len(self.obstacles) <= _GRID_MIN_OBSTACLES:
            # a vectorised box test beats walking grid cells for small maps
            b = self._box[:len(self.obstacles)]
            hit = ((b[:, 0] <= xs.max() + radius) & (b[:, 2] >= xs.min() - radius)
                   & (b[:, 1] <= ys.max() + radius) & (b[:, 3] >= ys.min() - radius))
            return self._all[hit]
        cs = self.cell_size
        x0 = int(math.floor((xs.min() - radius) / cs))
        x1 = int(math.floor((xs.max() + radius) / cs))
        y0 = int(math.floor((ys.min() - radius) / cs))
        y1 = int(math.floor((ys.max() + radius) / cs))
        if (x1 - x0 + 1) * (y1 - y0 + 1) > 4 * len(self._grid):
            return self._all
        found = set()
        for cx in range(x0, x1 + 1):
            for cy in range(y0, y1 + 1):
                ids = self._grid.get((cx, cy))
                if ids:
                    found.update(ids)
        return np.array(sorted(found), dtype=np.int64)

    def first_collision(self, params: VehicleParams, poses: np.ndarray) -> int:
        """Index of the first non-free pose in an (N, >=3) x, y, theta array, or -1."""
        if len(poses) == 0:
            return -1
        corners, radius = self._corners(params)
        poses = np.ascontiguousarray(poses[:, :3], dtype=float)
        ids = self._candidates(poses[:, 0], poses[:, 1], radius)
        return int(K.first_collision(poses, corners, self._ox, self._oy, self._on, self._box, ids, self.bounds))

    def segments_free(self, params: VehicleParams, rows: np.ndarray, ds_col: float) -> bool:
        """Same answer as sampling segment ``rows`` at ``ds_col`` and testing each pose."""
        if len(rows) == 0:
            return True
        corners, radius = self._corners(params)
        if len(self.obstacles) > _GRID_MIN_OBSTACLES:
            pts = K.sample_segments(np.ascontiguousarray(rows), ds_col)
            return self.first_collision(params, pts[:, 1:4]) < 0
        return K.segments_first_collision(np.ascontiguousarray(rows), ds_col, corners, self._ox, self._oy,
                                          self._on, self._box, self._all, self.bounds) < 0

    def pose_free(self, params: VehicleParams, pose: Pose) -> bool:
        return self.first_collision(params, np.array([[pose.x, pose.y, pose.theta]])) < 0

    def path_free(self, params: VehicleParams, path: Path, ds_col: float = 0.1) -> bool:
        if ds_col <= 0:
            raise ValueError("ds_col must be positive")
        if not path.segments:
            return True
        rows = path.sample(ds_col)
        return self.first_collision(params, rows[:, 1:4]) < 0

    def clearance(self, params: VehicleParams, pose: Pose, obstacle_ids: Optional[Sequence[int]] = None) -> float:
        """Distance from the footprint to the nearest obstacle (0 on contact)."""
        fp = footprint_at(params, pose)
        best = math.inf
        ids = range(len(self.obstacles)) if obstacle_ids is None else obstacle_ids
        for i in ids:
            p = self.obstacles[i]
            best = min(best, K.polygon_distance(fp[:, 0].copy(), fp[:, 1].copy(), 4,
                                                p[:, 0].copy(), p[:, 1].copy(), len(p)))
        return best


def pose_free(checker: CollisionChecker, params: VehicleParams, pose: Pose) -> bool:
    return checker.pose_free(params, pose)


def path_free(checker: CollisionChecker, params: VehicleParams, path: Path, ds_col: float = 0.1) -> bool:
    return checker.path_free(params, path, ds_col)
