"""Target trees: precomputed drive-out branches rooted at the parking goal.

A branch is stored as the path the vehicle would drive *out* of the spot,
starting at ``q_goal``. Reversing a branch prefix gives the parking manoeuvre
from any pose on it back into the spot. Trees come in two flavours:

* continuous curvature: straight, clothoid (sharpness sweep), arc at kappa_max
* discontinuous (the original construction): straight, then arcs whose
  curvature jumps straight from zero
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .config import PlannerConfig
from .environment import CollisionChecker, ParkingMode, Scenario
from .geometry import Pose, VehicleParams, relative
from .paths import BACKWARD, FORWARD, Path, PathSegment

_EMPTY_BOUNDS = (-1e6, -1e6, 1e6, 1e6)


class InfeasibleSpot(RuntimeError):
    """Parallel spot too short to drive out of with kappa_max arcs."""


class CandidateGoal(NamedTuple):
    pose: Pose
    remaining_length: float
    branch_id: int
    s: float


@dataclass(frozen=True)
class TargetBranch:
    path: Path
    branch_sigma: float
    tip: Pose
    truncated_by_collision: bool
    goals_from: float = 0.0  # arc length where this branch's own candidate goals start

    @property
    def length(self) -> float:
        return self.path.total_length

    def suffix_from(self, s: float) -> Path:
        """Parking manoeuvre from the pose at arc length ``s`` back to q_goal."""
        return self.path.truncated(s).reversed()


@dataclass(frozen=True)
class TargetTree:
    branches: Tuple[TargetBranch, ...]
    straight_length_l: float
    candidate_goals: Tuple[CandidateGoal, ...]
    cost: float
    mode: ParkingMode
    frame: Pose
    continuous: bool = True
    searched: Tuple[Tuple[float, float], ...] = ()

    def goal_suffix(self, goal: CandidateGoal) -> Path:
        return self.branches[goal.branch_id].suffix_from(goal.s)

    def tips_local(self) -> List[Pose]:
        return [relative(self.frame, b.tip) for b in self.branches]

    def to_csv(self, ds: Optional[float] = None) -> str:
        """Branch samples as ``branch_id, s, x, y, theta, kappa, remaining_length``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["branch_id", "s", "x", "y", "theta", "kappa", "remaining_length"])
        for i, b in enumerate(self.branches):
            if not b.path.segments:
                p = b.tip
                w.writerow([i, "0", repr(p.x), repr(p.y), repr(p.theta), repr(p.kappa), "0"])
                continue
            rows = b.path.sample(ds or 0.1)
            for r in rows:
                w.writerow([i, f"{r[0]:.6f}", f"{r[1]:.6f}", f"{r[2]:.6f}", f"{r[3]:.6f}",
                            f"{r[4]:.6f}", f"{r[0]:.6f}"])
        return buf.getvalue()


def sharpness_sweep(params: VehicleParams, n: int) -> List[float]:
    """``n`` evenly spaced sharpness values over [-sigma_max, sigma_max].

    Ordered from the leftmost (sigma_max) branch to the rightmost. For odd
    ``n`` the middle value is zero; that slot grows a straight continuation.
    """
    vals = np.linspace(params.sigma_max, -params.sigma_max, n) if n > 1 else np.array([params.sigma_max])
    return [0.0 if abs(v) < 1e-12 else float(v) for v in vals]


def curvature_sweep(params: VehicleParams, n: int) -> List[float]:
    vals = np.linspace(params.kappa_max, -params.kappa_max, n) if n > 1 else np.array([params.kappa_max])
    return [0.0 if abs(v) < 1e-12 else float(v) for v in vals]


# ---------------------------------------------------------------- growing


def _grow(checker: CollisionChecker, params: VehicleParams, start: Pose, kappa: float, sigma: float,
          direction: int, length: float, ds: float) -> Tuple[PathSegment, bool]:
    """Segment from ``start`` cut back to its last collision-free sample."""
    seg = PathSegment.make(start, kappa, sigma, direction, max(length, 0.0))
    if length <= 0.0:
        return seg, not checker.pose_free(params, start)
    rows = Path((seg,)).sample(ds)
    hit = checker.first_collision(params, rows[:, 1:4])
    if hit < 0:
        return seg, False
    keep = rows[hit - 1, 0] if hit > 0 else 0.0
    return seg.truncated(keep), True


def _chain_end(segs: Sequence[PathSegment], default: Pose) -> Pose:
    return segs[-1].end_pose if segs else default


def _turning_branch(checker, params, trunk: Sequence[PathSegment], origin: Pose, sigma: float,
                    cfg: PlannerConfig, continuous: bool, straight_len: float = 0.0) -> TargetBranch:
    kmax = params.kappa_max
    segs = list(trunk)
    goals_from = sum(s.length for s in trunk)
    pose = origin
    truncated = False
    if sigma == 0.0:
        seg, truncated = _grow(checker, params, pose.with_kappa(0.0), 0.0, 0.0, FORWARD, straight_len, cfg.ds_col)
        if seg.length > 0:
            segs.append(seg)
            pose = seg.end_pose
    elif continuous:
        # clothoid out of the straight, capped by the total turn allowance
        l_full = kmax / abs(sigma)
        l_cap = math.sqrt(2.0 * cfg.max_turn_angle / abs(sigma))
        l_clo = min(l_full, l_cap)
        seg, truncated = _grow(checker, params, pose.with_kappa(0.0), 0.0, sigma, FORWARD, l_clo, cfg.ds_col)
        if seg.length > 0:
            segs.append(seg)
            pose = seg.end_pose
        if not truncated and l_clo >= l_full - 1e-12:
            turned = 0.5 * abs(sigma) * l_full ** 2
            arc_len = max(cfg.max_turn_angle - turned, 0.0) / kmax
            k_arc = math.copysign(kmax, sigma)
            if arc_len > 1e-12:
                seg, truncated = _grow(checker, params, pose, k_arc, 0.0, FORWARD, arc_len, cfg.ds_col)
                if seg.length > 0:
                    segs.append(seg)
                    pose = seg.end_pose
    else:
        # sigma doubles as the arc curvature here
        arc_len = cfg.max_turn_angle / abs(sigma)
        seg, truncated = _grow(checker, params, pose, sigma, 0.0, FORWARD, arc_len, cfg.ds_col)
        if seg.length > 0:
            segs.append(seg)
            pose = seg.end_pose
    path = Path(tuple(segs))
    return TargetBranch(path, sigma, _chain_end(segs, origin), truncated, goals_from)


def _sweep(checker, params, trunk: List[PathSegment], origin: Pose, trunk_blocked: bool,
           cfg: PlannerConfig, continuous: bool, straight_len: float) -> List[TargetBranch]:
    trunk_branch = TargetBranch(Path(tuple(trunk)), 0.0, origin, trunk_blocked, 0.0)
    branches = [trunk_branch]
    if trunk_blocked:
        return branches
    values = sharpness_sweep(params, cfg.n_branches) if continuous else curvature_sweep(params, cfg.n_branches)
    for v in values:
        branches.append(_turning_branch(checker, params, trunk, origin, v, cfg, continuous, straight_len))
    return branches


def _candidate_goals(branches: Sequence[TargetBranch], goal_ds: float) -> Tuple[CandidateGoal, ...]:
    out: List[CandidateGoal] = []
    for i, b in enumerate(branches):
        length = b.length
        if i == 0:
            s_values = list(np.arange(0.0, length + 1e-9, goal_ds))
        else:
            k0 = math.floor(b.goals_from / goal_ds + 1e-9) + 1
            s_values = [k * goal_ds for k in range(k0, int(math.floor(length / goal_ds + 1e-9)) + 1)]
        if length - (s_values[-1] if s_values else -1.0) > 1e-6 and length > b.goals_from + 1e-9:
            s_values.append(length)
        elif i == 0 and not s_values:
            s_values = [0.0]
        for s in s_values:
            pose = b.path.pose_at(s) if b.path.segments else b.tip
            out.append(CandidateGoal(pose, float(s), i, float(s)))
    return tuple(out)


# ---------------------------------------------------------------- cost


def tree_cost(tree_or_tips, l_max: float, w_max: float, frame: Optional[Pose] = None) -> float:
    """Coverage cost ``1 - sum_k A_k / (2 l_max w_max)``, in [0, 1].

    ``A_k`` is the rectangle spanned by the largest |x| and |y| of the branch
    tips on side k (left: y > 0, right: y < 0) in the tree frame; tips on the
    axis count on both sides. Each side's extents are clipped to the
    reference rectangle, so one unobstructed side is worth exactly 1/2.
    """
    if not (l_max > 0 and w_max > 0):
        raise ValueError("l_max and w_max must be positive")
    if isinstance(tree_or_tips, TargetTree):
        tips = tree_or_tips.tips_local()
    else:
        tips = [relative(frame, t) if frame is not None else t for t in tree_or_tips]
    xl = yl = xr = yr = 0.0
    for t in tips:
        ax = abs(t.x)
        ay = abs(t.y)
        if t.y >= -1e-9:
            xl = max(xl, ax)
            yl = max(yl, ay)
        if t.y <= 1e-9:
            xr = max(xr, ax)
            yr = max(yr, ay)
    xl, xr = min(xl, l_max), min(xr, l_max)
    yl, yr = min(yl, w_max), min(yr, w_max)
    cost = 1.0 - (xl * yl + xr * yr) / (2.0 * l_max * w_max)
    return min(1.0, max(0.0, cost))


def compute_reference_extents(params: VehicleParams, cfg: PlannerConfig, continuous: bool = True
                              ) -> Tuple[float, float]:
    """|x|, |y| of the leftmost branch tip when nothing blocks the sweep."""
    checker = CollisionChecker((), _EMPTY_BOUNDS, cell_size=None)
    sweep = sharpness_sweep(params, cfg.n_branches) if continuous else curvature_sweep(params, cfg.n_branches)
    origin = Pose()
    branch = _turning_branch(checker, params, [], origin, sweep[0], cfg, continuous)
    return abs(branch.tip.x), abs(branch.tip.y)


def _finish(branches, l, mode, frame, cfg, params, continuous, extents=None, checker=None) -> TargetTree:
    goals = _candidate_goals(branches, cfg.goal_ds)
    if checker is not None:
        # goals fall between collision samples; keep only the free ones
        goals = tuple(g for g in goals if checker.pose_free(params, g.pose))
    l_max, w_max = extents
    tips = [relative(frame, b.tip) for b in branches]
    cost = tree_cost(tips, l_max, w_max) if l_max > 0 and w_max > 0 else 1.0
    return TargetTree(tuple(branches), float(l), goals, cost, mode, frame, continuous)


# ---------------------------------------------------------------- perpendicular


def build_perpendicular_tree(q_goal: Pose, l: float, checker: CollisionChecker, params: VehicleParams,
                             cfg: PlannerConfig, continuous: bool = True, extents=None) -> TargetTree:
    """Straight drive-out of length ``l`` followed by the turning sweep."""
    if l < 0:
        raise ValueError("l must be >= 0")
    q_goal = q_goal.with_kappa(0.0)
    extents = extents or compute_reference_extents(params, cfg, continuous)
    seg, blocked = _grow(checker, params, q_goal, 0.0, 0.0, FORWARD, l, cfg.ds_col)
    trunk = [seg] if seg.length > 0 else []
    origin = _chain_end(trunk, q_goal)
    branches = _sweep(checker, params, trunk, origin, blocked, cfg, continuous, extents[0])
    return _finish(branches, l, ParkingMode.PERPENDICULAR, origin, cfg, params, continuous, extents, checker)


# ---------------------------------------------------------------- parallel


def _margin_ok(checker, params, pose, margin) -> bool:
    if not checker.pose_free(params, pose):
        return False
    return margin <= 0 or checker.clearance(params, pose) >= margin


def _advance(checker, params, start: Pose, kappa: float, direction: int, max_len: float,
             margin: float, ds: float) -> float:
    """Longest arc length keeping ``margin`` clearance, found by stepping then bisecting."""
    if max_len <= 0 or not _margin_ok(checker, params, start, margin):
        return 0.0
    seg = PathSegment.make(start, kappa, 0.0, direction, max_len)
    n = int(math.ceil(max_len / ds))
    prev = 0.0
    for i in range(1, n + 1):
        t = min(i * ds, max_len)
        if not _margin_ok(checker, params, seg.pose_at(t), margin):
            lo, hi = prev, t
            for _ in range(30):
                mid = 0.5 * (lo + hi)
                if _margin_ok(checker, params, seg.pose_at(mid), margin):
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-5:
                    break
            return lo
        prev = t
    return max_len


def _exit_path(start: Pose, side: int, params: VehicleParams, probe: float, continuous: bool) -> Path:
    segs = []
    pose = start
    if continuous:
        k = side * params.kappa_max
        seg = PathSegment.make(pose.with_kappa(k), k, -side * params.sigma_max, FORWARD,
                               params.kappa_max / params.sigma_max)
        segs.append(seg)
        pose = seg.end_pose
    segs.append(PathSegment.make(pose.with_kappa(0.0), 0.0, 0.0, FORWARD, probe))
    return Path(tuple(segs))


def _probe_clear(checker, params, probe: Path, margin: float, ds: float) -> bool:
    """Sampled freedom plus ``margin`` clearance over the probe's turning part.

    The margin keeps a corner from grazing an obstacle between two samples.
    """
    if not checker.path_free(params, probe, ds):
        return False
    if margin <= 0:
        return True
    turning = probe.segments[0].length if len(probe.segments) > 1 else min(1.0, probe.total_length)
    for r in probe.sample(ds):
        if r[0] > turning + 1e-9:
            break
        if checker.clearance(params, Pose(r[1], r[2], r[3], r[4])) < margin:
            return False
    return True


def _parallel_trunk(q_goal: Pose, side: int, checker, params, cfg: PlannerConfig, continuous: bool
                    ) -> List[PathSegment]:
    kmax = params.kappa_max
    margin = cfg.clearance_margin
    ds = cfg.ds_col
    segs: List[PathSegment] = []
    pose = q_goal.with_kappa(0.0)
    rotation = 0.0
    rot_cap = math.pi / 2
    for _ in range(cfg.max_arc_pairs):
        kb = -side * kmax
        t_b = _advance(checker, params, pose, kb, BACKWARD, (rot_cap - rotation) / kmax, margin, ds)
        if t_b > 1e-9:
            seg = PathSegment.make(pose, kb, 0.0, BACKWARD, t_b)
            segs.append(seg)
            pose = seg.end_pose
            rotation += t_b * kmax
        kf = side * kmax
        t_f = _advance(checker, params, pose, kf, FORWARD, (rot_cap - rotation) / kmax, margin, ds)
        # smallest forward arc after which the vehicle can leave the spot
        n = int(math.ceil(t_f / ds)) if t_f > 0 else 0
        fwd = PathSegment.make(pose.with_kappa(kf), kf, 0.0, FORWARD, max(t_f, 0.0))
        for i in range(n + 1):
            t = min(i * ds, t_f)
            p = fwd.pose_at(t)
            probe = _exit_path(p, side, params, cfg.exit_probe, continuous)
            if _probe_clear(checker, params, probe, margin, ds):
                if t > 1e-9:
                    segs.append(fwd.truncated(t))
                return segs
        if t_b <= 1e-6 and t_f <= 1e-6:
            raise InfeasibleSpot("no room to manoeuvre inside the spot")
        if t_f > 1e-9:
            segs.append(fwd)
            pose = fwd.end_pose
            rotation += t_f * kmax
        if rotation >= rot_cap - 1e-9:
            break
    raise InfeasibleSpot(f"no exit within {cfg.max_arc_pairs} arc pairs")


def build_parallel_tree(q_goal: Pose, l: float, checker: CollisionChecker, params: VehicleParams,
                        cfg: PlannerConfig, continuous: bool = True, spot_length: Optional[float] = None,
                        side: Optional[int] = None, extents=None) -> TargetTree:
    """Alternating kappa_max arcs out of a parallel spot, then the turning sweep.

    The drive-out alternates a backward and a forward arc (each stopped when
    the clearance to obstacles drops to ``clearance_margin``) until a forward
    arc lets the vehicle leave; a clothoid brings curvature back to zero, a
    straight of length ``l`` follows and the perpendicular-style sweep starts
    from its end. Both exit sides are tried unless ``side`` is given.
    """
    if l < 0:
        raise ValueError("l must be >= 0")
    if spot_length is not None and spot_length < params.body_length + 2 * cfg.clearance_margin:
        raise InfeasibleSpot("spot shorter than the vehicle plus clearance margins")
    extents = extents or compute_reference_extents(params, cfg, continuous)
    best: Optional[TargetTree] = None
    errors = []
    for sd in ((side,) if side else (1, -1)):
        try:
            trunk = _parallel_trunk(q_goal, sd, checker, params, cfg, continuous)
        except InfeasibleSpot as exc:
            errors.append(str(exc))
            continue
        pose = _chain_end(trunk, q_goal.with_kappa(0.0))
        blocked = False
        if continuous:
            k = pose.kappa
            if abs(k) > 0:
                seg, blocked = _grow(checker, params, pose, k, -math.copysign(params.sigma_max, k), FORWARD,
                                     abs(k) / params.sigma_max, cfg.ds_col)
                trunk.append(seg)
                pose = seg.end_pose
        if not blocked and l > 0:
            seg, blocked = _grow(checker, params, pose.with_kappa(0.0), 0.0, 0.0, FORWARD, l, cfg.ds_col)
            if seg.length > 0:
                trunk.append(seg)
                pose = seg.end_pose
        origin = pose
        branches = _sweep(checker, params, trunk, origin, blocked, cfg, continuous, extents[0])
        tree = _finish(branches, l, ParkingMode.PARALLEL, origin, cfg, params, continuous, extents, checker)
        if best is None or tree.cost < best.cost - 1e-12:
            best = tree
    if best is None:
        raise InfeasibleSpot("; ".join(errors))
    return best


# ---------------------------------------------------------------- search


def straight_lengths(l_parking: float, alpha: float) -> List[float]:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n = int(math.floor(l_parking / alpha + 1e-9))
    vals = [k * alpha for k in range(n + 1)]
    if l_parking - vals[-1] > 1e-9:
        vals.append(l_parking)
    return vals


def build_tree(scn: Scenario, checker: CollisionChecker, l: float, continuous: bool = True,
               cfg: Optional[PlannerConfig] = None, extents=None) -> TargetTree:
    cfg = cfg or scn.planner
    if scn.spot.mode is ParkingMode.PERPENDICULAR:
        return build_perpendicular_tree(scn.q_goal, l, checker, scn.vehicle, cfg, continuous, extents)
    return build_parallel_tree(scn.q_goal, l, checker, scn.vehicle, cfg, continuous,
                               spot_length=scn.spot.length, extents=extents)


def initialize_target_tree(scn: Scenario, checker: Optional[CollisionChecker] = None, continuous: bool = True,
                           cfg: Optional[PlannerConfig] = None, fixed_l: Optional[float] = None) -> TargetTree:
    """Minimum-cost tree over straight lengths 0, alpha, ..., spot length.

    Ties go to the shorter straight. ``fixed_l`` skips the search.
    """
    cfg = cfg or scn.planner
    checker = checker or CollisionChecker.from_scenario(scn)
    extents = compute_reference_extents(scn.vehicle, cfg, continuous)
    ls = [fixed_l] if fixed_l is not None else straight_lengths(scn.spot.length, cfg.alpha)
    best: Optional[TargetTree] = None
    searched = []
    for l in ls:
        tree = build_tree(scn, checker, l, continuous, cfg, extents)
        searched.append((float(l), tree.cost))
        if best is None or tree.cost < best.cost - 1e-12:
            best = tree
    assert best is not None
    return TargetTree(best.branches, best.straight_length_l, best.candidate_goals, best.cost, best.mode,
                      best.frame, best.continuous, tuple(searched))


def single_goal_tree(q_goal: Pose, mode: ParkingMode) -> TargetTree:
    """Degenerate tree holding only q_goal (the no-target-tree baseline)."""
    q = q_goal.with_kappa(0.0)
    branch = TargetBranch(Path(), 0.0, q, False, 0.0)
    return TargetTree((branch,), 0.0, (CandidateGoal(q, 0.0, 0, 0.0),), 1.0, mode, q, True)
