"""Closed-loop tracking of a planned path by a steering-rate-limited vehicle.

The vehicle is a kinematic bicycle whose actual steering angle can only slew
towards the commanded one at ``delta_rate_max``. A Kanayama controller tracks
the closest reference point. Reverse legs are tracked in a mirrored frame
(heading + pi, curvature negated), which turns them into forward problems.
The vehicle stops for ``switch_pause`` seconds at each direction switch.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .environment import Scenario
from .geometry import Pose, angle_diff, normalize_angle
from .paths import Path, SegmentKind


class SimDiverged(RuntimeError):
    """Cross-track error exceeded the divergence limit."""


@dataclass
class VehicleState:
    x: float
    y: float
    theta: float
    delta: float = 0.0
    v: float = 0.0

    def pose(self) -> Pose:
        return Pose(self.x, self.y, self.theta, 0.0)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    v_max_rrt: float = 4.0 / 3.6
    v_max_tree: float = 2.0 / 3.6
    switch_pause: float = 3.0
    delta_rate_max: Optional[float] = None  # None: sigma_max * L * v_max_tree
    k_x: float = 1.0
    k_y: float = 0.64
    k_theta: float = 1.6
    curvature_speed_coeff: float = 6.0
    stop_decel: float = 0.5
    min_speed: float = 0.02
    ref_ds: float = 0.01
    window: float = 2.0
    divergence_limit: float = 5.0
    timeout: Optional[float] = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if min(self.k_x, self.k_y, self.k_theta) <= 0:
            raise ValueError("controller gains must be positive")
        if self.v_max_rrt <= 0 or self.v_max_tree <= 0:
            raise ValueError("speed caps must be positive")

    def rate_limit(self, scn: Scenario) -> float:
        if self.delta_rate_max is not None:
            return self.delta_rate_max
        return scn.vehicle.sigma_max * scn.vehicle.wheelbase_L * self.v_max_tree


@dataclass
class TrackingReport:
    cross_track: List[Tuple[float, float]]
    max_cross_track: float
    mean_cross_track: float
    lateral_alignment_error: float
    orientation_alignment_error: float
    steering: List[Tuple[float, float, float]]
    final: VehicleState
    trace: np.ndarray = field(repr=False)  # t, x, y, theta, delta_cmd, delta_actual, v, cross_track
    completed: bool = True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y", "theta", "delta_cmd", "delta_actual", "v", "cross_track"])
        for r in self.trace:
            w.writerow([f"{r[0]:.3f}"] + [f"{v:.6f}" for v in r[1:]])
        return buf.getvalue()

    def summary(self) -> str:
        return "\n".join([
            f"completed = {int(self.completed)}",
            f"max_cross_track_m = {self.max_cross_track:.6f}",
            f"mean_cross_track_m = {self.mean_cross_track:.6f}",
            f"lateral_alignment_error_m = {self.lateral_alignment_error:.6f}",
            f"orientation_alignment_error_rad = {self.orientation_alignment_error:.6f}",
            f"duration_s = {self.trace[-1, 0] if len(self.trace) else 0.0:.3f}",
        ]) + "\n"


def alignment_errors(final, q_goal: Pose) -> Tuple[float, float]:
    """Lateral (across the goal heading) and heading error of the rest pose."""
    dx = final.x - q_goal.x
    dy = final.y - q_goal.y
    lateral = abs(-math.sin(q_goal.theta) * dx + math.cos(q_goal.theta) * dy)
    return lateral, abs(angle_diff(final.theta, q_goal.theta))


def _legs(ref: np.ndarray) -> List[np.ndarray]:
    """Split dense reference samples wherever the driving direction flips."""
    legs = []
    start = 0
    for i in range(1, len(ref)):
        if ref[i, 5] != ref[i - 1, 5]:
            legs.append(ref[start:i])
            start = i
    legs.append(ref[start:])
    return [leg for leg in legs if len(leg) >= 2]


def reference_from_csv(text: str) -> np.ndarray:
    """Reference rows ``s, x, y, theta, kappa, direction`` from a path CSV."""
    rows = list(csv.DictReader(io.StringIO(text)))
    need = ("s", "x", "y", "theta", "kappa", "direction")
    if not rows or any(k not in rows[0] for k in need):
        raise ValueError("path CSV needs columns " + ", ".join(need))
    return np.array([[float(r[k]) for k in need] for r in rows])


def _densify(ref: np.ndarray, ds: float) -> np.ndarray:
    """Linearly interpolate sampled rows down to spacing ``ds`` (headings unwrapped)."""
    out = [ref[:1]]
    for a, b in zip(ref[:-1], ref[1:]):
        gap = b[0] - a[0]
        n = int(math.ceil(gap / ds)) if gap > ds and a[5] == b[5] else 1
        f = np.arange(1, n + 1)[:, None] / n
        seg = a + f * (b - a)
        seg[:, 3] = a[3] + f[:, 0] * angle_diff(b[3], a[3])
        seg[:, 5] = b[5]
        out.append(seg)
    return np.vstack(out)


def simulate_tracking(path: Union[Path, np.ndarray], scn: Scenario, sim: Optional[SimConfig] = None,
                      tree_from: Optional[float] = None,
                      initial: Optional[VehicleState] = None) -> TrackingReport:
    """Drive ``path`` with the controller and report tracking/alignment errors.

    ``path`` is a :class:`Path` or already sampled rows
    ``s, x, y, theta, kappa, direction`` (as read from a path CSV).
    ``tree_from`` is the arc length where the target-tree portion starts (speed
    cap ``v_max_tree`` from there on, ``v_max_rrt`` before). ``None`` treats
    the whole path as target-tree path.
    """
    sim = sim or SimConfig()
    if isinstance(path, Path):
        if not path.segments:
            raise ValueError("empty path")
        ref = path.sample(sim.ref_ds)
    else:
        ref = np.asarray(path, dtype=float)
        if ref.ndim != 2 or ref.shape[1] != 6 or len(ref) < 2:
            raise ValueError("reference rows must be an (n >= 2, 6) array")
        ref = _densify(ref, sim.ref_ds)
    L = scn.vehicle.wheelbase_L
    dmax = scn.vehicle.delta_max
    rate = sim.rate_limit(scn)
    dt = sim.dt
    split = 0.0 if tree_from is None else tree_from

    # drop duplicate samples at segment joints (same s, same direction)
    keep = np.ones(len(ref), dtype=bool)
    keep[1:] = ~((np.abs(np.diff(ref[:, 0])) < 1e-12) & (ref[1:, 5] == ref[:-1, 5]))
    ref = ref[keep]
    legs = _legs(ref)

    state = initial or VehicleState(ref[0, 1], ref[0, 2], ref[0, 3], math.atan(L * ref[0, 4]), 0.0)
    state.delta = max(-dmax, min(dmax, state.delta))
    nominal = sum(leg[-1, 0] - leg[0, 0] for leg in legs) / min(sim.v_max_tree, sim.v_max_rrt)
    timeout = sim.timeout if sim.timeout is not None else 4.0 * nominal + sim.switch_pause * len(legs) + 30.0

    rows: List[Tuple[float, ...]] = []
    cross: List[Tuple[float, float]] = []
    t = 0.0
    completed = True
    delta_cmd = state.delta
    win_n = max(int(sim.window / sim.ref_ds), 4)

    for li, leg in enumerate(legs):
        d = leg[0, 5]
        s_leg = leg[:, 0]
        xs, ys, ths, ks = leg[:, 1], leg[:, 2], leg[:, 3], leg[:, 4]
        s_end = s_leg[-1]
        idx = 0
        if li > 0:
            # pause at the switch; steering may slew towards the new leg's start angle
            target = math.atan(L * ks[0])
            n_pause = int(round(sim.switch_pause / dt))
            for _ in range(n_pause):
                delta_cmd = target
                step = max(-rate * dt, min(rate * dt, target - state.delta))
                state.delta += step
                state.v = 0.0
                t += dt
                rows.append((t, state.x, state.y, state.theta, delta_cmd, state.delta, 0.0, rows[-1][7] if rows else 0.0))
        while True:
            if t > timeout:
                completed = False
                break
            # closest reference point within a forward window (avoids jumping across switchbacks)
            hi = min(idx + win_n, len(leg))
            lo = max(idx - 2, 0)
            ddx = xs[lo:hi] - state.x
            ddy = ys[lo:hi] - state.y
            dist2 = ddx * ddx + ddy * ddy
            idx = lo + int(np.argmin(dist2))
            xr, yr, thr, kr = xs[idx], ys[idx], ths[idx], ks[idx]
            # offset from the reference tangent at the closest sample
            e_ct = abs(-math.sin(thr) * (state.x - xr) + math.cos(thr) * (state.y - yr))
            if e_ct > sim.divergence_limit:
                raise SimDiverged(f"cross-track error {e_ct:.2f} m at t = {t:.2f} s")
            # mirrored frame for reverse legs
            th_v = state.theta if d > 0 else state.theta + math.pi
            th_r = thr if d > 0 else thr + math.pi
            k_ref = kr if d > 0 else -kr
            c, s_ = math.cos(th_v), math.sin(th_v)
            x_e = c * (xr - state.x) + s_ * (yr - state.y)
            y_e = -s_ * (xr - state.x) + c * (yr - state.y)
            th_e = normalize_angle(th_r - th_v)

            remaining = s_end - s_leg[idx] + max(x_e, 0.0) if idx < len(leg) - 1 else max(x_e, 0.0)
            if idx >= len(leg) - 1 and x_e <= 1e-3:
                break
            if remaining <= 1e-3:
                break
            cap = sim.v_max_tree if s_leg[idx] >= split - 1e-9 else sim.v_max_rrt
            v_ref = cap / (1.0 + sim.curvature_speed_coeff * abs(kr))
            v_ref = min(v_ref, math.sqrt(2.0 * sim.stop_decel * remaining) + sim.min_speed)
            v_cmd = v_ref * math.cos(th_e) + sim.k_x * x_e
            w_cmd = v_ref * k_ref + v_ref * (sim.k_y * y_e + sim.k_theta * math.sin(th_e))
            v_cmd = max(0.0, min(v_cmd, cap))
            if v_cmd > 1e-6:
                dm = math.atan(L * w_cmd / v_cmd)
                delta_cmd = d * max(-dmax, min(dmax, dm))  # back to the physical steering angle
            step = max(-rate * dt, min(rate * dt, delta_cmd - state.delta))
            state.delta += step
            state.v = v_cmd
            # midpoint integration of the bicycle model
            vs = d * v_cmd
            w = vs * math.tan(state.delta) / L
            th_mid = state.theta + 0.5 * w * dt
            state.x += vs * math.cos(th_mid) * dt
            state.y += vs * math.sin(th_mid) * dt
            state.theta = normalize_angle(state.theta + w * dt)
            t += dt
            rows.append((t, state.x, state.y, state.theta, delta_cmd, state.delta, v_cmd, e_ct))
            cross.append((float(s_leg[idx]), e_ct))
        state.v = 0.0
        if not completed:
            break

    lat, ori = alignment_errors(state, scn.q_goal)
    errs = np.array([e for _, e in cross]) if cross else np.zeros(1)
    trace = np.array(rows) if rows else np.zeros((0, 8))
    steering = [(r[0], r[4], r[5]) for r in rows]
    return TrackingReport(cross, float(errs.max()), float(errs.mean()), lat, ori, steering, state, trace,
                          completed)


def manoeuvre_tracking(scn: Scenario, seed: int, continuous: bool = True, tree=None,
                       min_remaining: float = 3.0, sim: Optional[SimConfig] = None,
                       checker=None) -> TrackingReport:
    """Track one parking manoeuvre of the target tree into the spot.

    ``seed`` picks a candidate goal on a turning branch whose remaining length
    is at least ``min_remaining`` and whose manoeuvre contains a curved piece. The vehicle starts on the path with the
    matching steering angle, so every error comes from the manoeuvre itself.
    """
    from .target_tree import initialize_target_tree

    if tree is None:
        tree = initialize_target_tree(scn, checker, continuous=continuous)
    goals = [g for g in tree.candidate_goals if g.branch_id != 0 and g.remaining_length >= min_remaining
             and any(seg.kind != SegmentKind.STRAIGHT for seg in tree.goal_suffix(g).segments)]
    if not goals:
        goals = [g for g in tree.candidate_goals if g.remaining_length > 0.0]
    if not goals:
        raise ValueError("target tree has no manoeuvre to track")
    g = goals[int(np.random.default_rng(seed).integers(len(goals)))]
    return simulate_tracking(tree.goal_suffix(g), scn, sim)
