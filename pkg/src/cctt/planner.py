"""Anytime RRT* with target-tree goal biasing.

The sampler draws candidate goals from the target tree with probability
``tau``. Because the steering function lands exactly on its target, a node
inserted from such a sample *is* that candidate goal, and the full parking
path is the tree path followed by the reversed branch prefix. Among all
reached candidate goals the planner keeps the one with the smallest total
length (tree cost plus remaining branch length), re-evaluated whenever a
node is added or a rewire changes a cost.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels as K
from .config import PlannerConfig
from .environment import CollisionChecker, Scenario
from .geometry import Pose, angle_diff
from .paths import Path, _turn_table
from .target_tree import CandidateGoal, TargetTree, initialize_target_tree, single_goal_tree

_GOAL_TOL = 1e-6
_STEER_TOL = 1e-9


class NoProgress:
    """Returned by :func:`extend` when steering fails or the edge collides."""

    __slots__ = ("reason",)

    def __init__(self, reason: str):
        self.reason = reason

    def __repr__(self) -> str:
        return f"NoProgress({self.reason!r})"


class NoPathFound(RuntimeError):
    """Budget expired before any candidate goal was reached."""


# ---------------------------------------------------------------- edge helpers


def _edge_length(rows: np.ndarray) -> float:
    return float(rows[:, K.LEN].sum()) if len(rows) else 0.0


def _edge_end(rows: np.ndarray) -> Tuple[float, float, float, float]:
    r = rows[-1]
    return K.seg_point(r[K.X0], r[K.Y0], r[K.TH0], r[K.K0], r[K.SIG], r[K.DIR], r[K.LEN])


def _truncate_rows(rows: np.ndarray, s: float) -> np.ndarray:
    out = []
    remaining = s
    for r in rows:
        if remaining <= 0.0:
            break
        if r[K.LEN] <= remaining:
            out.append(r)
        else:
            cut = r.copy()
            cut[K.LEN] = remaining
            out.append(cut)
        remaining -= r[K.LEN]
    return np.array(out) if out else np.zeros((0, 7))


class Steerer:
    """Thin, allocation-light wrapper around the compiled steering kernel."""

    def __init__(self, kappa_max: float, sigma_max: float, max_switches: int, grid_step: float = 0.2):
        self.grid_step = float(grid_step)
        self.kmax = float(kappa_max)
        self.smax = float(sigma_max)
        self.max_sw = int(max_switches)
        self.tx, self.ty, self.n = _turn_table(self.kmax, self.smax)

    def __call__(self, a: Pose, b: Pose, max_len: float = math.inf) -> Optional[np.ndarray]:
        rows, ok = K.cc_steer_kernel(a.x, a.y, a.theta, a.kappa, b.x, b.y, b.theta, b.kappa,
                                     self.kmax, self.smax, self.max_sw, self.tx, self.ty, self.n,
                                     self.grid_step, float(max_len), _STEER_TOL)
        return rows if ok else None


# ---------------------------------------------------------------- tree


class PlannerTree:
    """RRT* tree over poses; node data lives in growable numpy arrays."""

    def __init__(self, root: Pose, capacity: int = 1024):
        self.x = np.zeros(capacity)
        self.y = np.zeros(capacity)
        self.th = np.zeros(capacity)
        self.cost = np.zeros(capacity)
        self.k = np.zeros(capacity)
        self.poses: List[Pose] = []
        self.parent: List[Optional[int]] = []
        self.edges: List[np.ndarray] = []
        self.children: List[set] = []
        self.add(root, None, np.zeros((0, 7)), 0.0)

    def __len__(self) -> int:
        return len(self.poses)

    def add(self, pose: Pose, parent: Optional[int], edge: np.ndarray, cost: float) -> int:
        i = len(self.poses)
        if i == len(self.x):
            grow = len(self.x)
            for name in ("x", "y", "th", "cost", "k"):
                setattr(self, name, np.concatenate([getattr(self, name), np.zeros(grow)]))
        self.x[i], self.y[i], self.th[i], self.cost[i] = pose.x, pose.y, pose.theta, cost
        self.k[i] = pose.kappa
        self.poses.append(pose)
        self.parent.append(parent)
        self.edges.append(edge)
        self.children.append(set())
        if parent is not None:
            self.children[parent].add(i)
        return i

    def reparent(self, i: int, parent: int, edge: np.ndarray, cost: float) -> None:
        old = self.parent[i]
        if old is not None:
            self.children[old].discard(i)
        self.parent[i] = parent
        self.children[parent].add(i)
        self.edges[i] = edge
        delta = cost - self.cost[i]
        stack = [i]
        while stack:
            j = stack.pop()
            self.cost[j] += delta
            stack.extend(self.children[j])

    def distances(self, q: Pose, w_xy: float, w_theta: float) -> np.ndarray:
        n = len(self.poses)
        dx = self.x[:n] - q.x
        dy = self.y[:n] - q.y
        dth = np.abs((self.th[:n] - q.theta + math.pi) % (2 * math.pi) - math.pi)
        return np.sqrt(w_xy * (dx * dx + dy * dy)) + w_theta * dth

    def euclid(self, q: Pose) -> np.ndarray:
        n = len(self.poses)
        return np.hypot(self.x[:n] - q.x, self.y[:n] - q.y)

    def length_bound(self, q: Pose, kappa_max: float, sigma_max: float) -> Tuple[np.ndarray, np.ndarray]:
        """Euclidean distance and a lower bound on any steered connection length.

        Turning by dtheta takes at least |dtheta| / kappa_max of arc length.
        Between two zero-curvature poses every steered turn starts and ends
        straight, and the minimal turn length is subadditive, so the single
        symmetric turn through |dtheta| bounds the length from below.
        """
        n = len(self.poses)
        d = np.hypot(self.x[:n] - q.x, self.y[:n] - q.y)
        dth = np.abs((self.th[:n] - q.theta + math.pi) % (2 * math.pi) - math.pi)
        rot = dth / kappa_max
        if abs(q.kappa) < 1e-12:
            dmin = kappa_max * kappa_max / sigma_max
            turn = np.where(dth < dmin, 2.0 * np.sqrt(dth / sigma_max),
                            2.0 * kappa_max / sigma_max + (dth - dmin) / kappa_max)
            rot = np.where(np.abs(self.k[:n]) < 1e-12, turn, rot)
        return d, np.maximum(d, rot)

    def path_to(self, i: int) -> Path:
        chain = []
        while i is not None and self.parent[i] is not None:
            chain.append(self.edges[i])
            i = self.parent[i]
        rows = [e for e in reversed(chain) if len(e)]
        return Path.from_rows(np.vstack(rows)) if rows else Path()

    def recomputed_costs(self) -> np.ndarray:
        """Costs recomputed from the edges by walking parent pointers (test oracle)."""
        n = len(self.poses)
        out = np.zeros(n)
        for i in range(n):
            total = 0.0
            j = i
            steps = 0
            while self.parent[j] is not None:
                total += _edge_length(self.edges[j])
                j = self.parent[j]
                steps += 1
                if steps > n:
                    raise RuntimeError("cycle in planner tree")
            out[i] = total
        return out

    def is_acyclic(self) -> bool:
        try:
            self.recomputed_costs()
        except RuntimeError:
            return False
        return True


def nearest(tree: PlannerTree, q: Pose, w_xy: float = 1.0, w_theta: float = 2.0) -> int:
    """Index of the closest node (lowest index on ties)."""
    return int(np.argmin(tree.distances(q, w_xy, w_theta)))


def sample(cfg: PlannerConfig, rng: np.random.Generator, bounds, target: TargetTree
           ) -> Tuple[Pose, Optional[int]]:
    """Candidate goal with probability ``tau``, else a uniform pose in bounds.

    Returns the pose and the candidate-goal index (``None`` for uniform draws).
    """
    goals = target.candidate_goals
    if goals and rng.random() < cfg.tau:
        k = int(rng.integers(len(goals)))
        return goals[k].pose, k
    x0, y0, x1, y1 = bounds
    u = rng.random(3)
    return Pose(x0 + (x1 - x0) * u[0], y0 + (y1 - y0) * u[1], -math.pi + 2 * math.pi * u[2], 0.0), None


# ---------------------------------------------------------------- planner state


@dataclass
class PlanResult:
    best_path: Optional[Path]
    q_soln: List[Tuple[Pose, float]]
    history: List[Tuple[float, float]]
    stats: Dict[str, float]
    target_tree: Optional[TargetTree] = None
    tree_path_length: float = 0.0  # arc length where the target-tree suffix starts
    history_iters: List[Tuple[int, float]] = field(default_factory=list)
    config: Optional[PlannerConfig] = None
    variant: str = "min_cost_tree"
    planner_tree: Optional[PlannerTree] = None
    tree_suffix: Optional[Path] = None  # the target-tree part of best_path on its own

    @property
    def success(self) -> bool:
        return self.best_path is not None

    @property
    def best_length(self) -> Optional[float]:
        return self.history[-1][1] if self.history else None

    def raise_if_failed(self) -> None:
        if self.best_path is None:
            raise NoPathFound("no candidate goal reached within the budget")

    def path_csv(self, ds: float = 0.1) -> str:
        return path_to_csv(self.best_path, ds) if self.best_path is not None else path_to_csv(Path(), ds)

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_seconds", "best_length_m"])
        for t, length in self.history:
            w.writerow([f"{t:.6f}", f"{length:.6f}"])
        return buf.getvalue()

    def stats_text(self) -> str:
        lines = [f"variant = {self.variant}", f"success = {int(self.success)}"]
        if self.best_length is not None:
            lines.append(f"best_length_m = {self.best_length:.6f}")
        for k, v in self.stats.items():
            lines.append(f"{k} = {v:.6f}" if isinstance(v, float) else f"{k} = {v}")
        if self.target_tree is not None:
            lines.append(f"target_tree_l_m = {self.target_tree.straight_length_l:.6f}")
            lines.append(f"target_tree_cost = {self.target_tree.cost:.6f}")
            lines.append(f"candidate_goals = {len(self.target_tree.candidate_goals)}")
        if self.config is not None:
            for k, v in self.config.to_dict().items():
                lines.append(f"config.{k} = {v}")
        return "\n".join(lines) + "\n"


def path_to_csv(path: Path, ds: float = 0.1) -> str:
    """``idx, s, x, y, theta, kappa, direction`` samples of a path."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["idx", "s", "x", "y", "theta", "kappa", "direction"])
    rows = path.sample(ds)
    for i, r in enumerate(rows):
        w.writerow([i, f"{r[0]:.9f}", f"{r[1]:.9f}", f"{r[2]:.9f}", f"{r[3]:.9f}", f"{r[4]:.9f}", int(r[5])])
    return buf.getvalue()


class Planner:
    """One planning run: tree, checker, steering and the solution set."""

    def __init__(self, scn: Scenario, target: TargetTree, checker: Optional[CollisionChecker] = None,
                 cfg: Optional[PlannerConfig] = None,
                 on_rewire: Optional[Callable[["Planner"], None]] = None):
        self.scn = scn
        self.cfg = cfg or scn.planner
        self.params = scn.vehicle
        self.checker = checker or CollisionChecker.from_scenario(scn)
        self.target = target
        self.steer = Steerer(self.params.kappa_max, self.params.sigma_max, self.cfg.max_switches)
        self.tree = PlannerTree(scn.q_init.with_kappa(0.0))
        self.rng = np.random.default_rng(scn.seed)
        self.on_rewire = on_rewire
        self.soln: Dict[int, CandidateGoal] = {}  # node index -> candidate goal
        self.reached: Dict[int, int] = {}  # candidate index -> node index
        self.best: Optional[Tuple[float, int]] = None
        self.rewires = 0
        root = self.tree.poses[0]
        for k, g in enumerate(target.candidate_goals):
            if root.close_to(g.pose, _GOAL_TOL):
                self.soln[0] = g
                self.reached[k] = 0
                break

    # -- collision
    def edge_free(self, rows: np.ndarray) -> bool:
        return self.checker.segments_free(self.params, rows, self.cfg.ds_col)

    def near_radius(self) -> float:
        n = len(self.tree)
        if n < 2:
            return self.cfg.near_radius_max
        return min(self.cfg.rewire_gamma * (math.log(n) / n) ** (1.0 / 3.0), self.cfg.near_radius_max)

    # -- solution set
    def update_best(self) -> bool:
        """Re-select the shortest reached goal; True when the best changed."""
        best = None
        for i, g in self.soln.items():
            total = self.tree.cost[i] + g.remaining_length
            if best is None or total < best[0] - 1e-12:
                best = (total, i)
        changed = best is not None and (self.best is None or best[0] < self.best[0] - 1e-12)
        if changed:
            self.best = best
        return changed

    # -- one RRT* extension
    def extend(self, q_rand: Pose, goal_index: Optional[int] = None):
        tree = self.tree
        cfg = self.cfg
        i_near = nearest(tree, q_rand, cfg.w_xy, cfg.w_theta)
        q_near = tree.poses[i_near]
        rows = self.steer(q_near, q_rand)
        if rows is None:
            return NoProgress("steer")
        length = _edge_length(rows)
        if length < 1e-9:
            return NoProgress("duplicate")
        exact = length <= cfg.steer_step
        if not exact:
            rows = _truncate_rows(rows, cfg.steer_step)
            length = _edge_length(rows)
        if not self.edge_free(rows):
            return NoProgress("collision")
        x, y, th, k = _edge_end(rows)
        q_new = Pose(x, y, th, k)

        # choose parent: lazily, in order of the Euclidean lower bound
        r = self.near_radius()
        d, bound = tree.length_bound(q_new, self.params.kappa_max, self.params.sigma_max)
        near = np.flatnonzero(d <= r)
        best_parent, best_edge, best_cost = i_near, rows, tree.cost[i_near] + length
        lb = tree.cost[near] + bound[near]
        for j in near[np.argsort(lb, kind="stable")]:
            if tree.cost[j] + bound[j] >= best_cost - 1e-9:
                break
            if j == i_near:
                continue
            e = self.steer(tree.poses[j], q_new, best_cost - tree.cost[j])
            if e is None:
                continue
            c = tree.cost[j] + _edge_length(e)
            if c < best_cost - 1e-9 and self.edge_free(e):
                best_parent, best_edge, best_cost = int(j), e, c
        i_new = tree.add(q_new, best_parent, best_edge, best_cost)

        if exact and goal_index is not None:
            self.reached[goal_index] = i_new
            self.soln[i_new] = self.target.candidate_goals[goal_index]

        # rewire
        changed = False
        for j in near:
            if j == best_parent or tree.cost[j] <= best_cost + bound[j] + 1e-9:
                continue
            e = self.steer(q_new, tree.poses[j], tree.cost[j] - best_cost)
            if e is None:
                continue
            c = best_cost + _edge_length(e)
            if c < tree.cost[j] - 1e-9 and self.edge_free(e):
                tree.reparent(int(j), i_new, e, c)
                self.rewires += 1
                changed = True
                if self.on_rewire is not None:
                    self.on_rewire(self)
        if self.soln and (i_new in self.soln or changed):
            self.update_best()
        return i_new

    def solution_path(self) -> Tuple[Optional[Path], float, Optional[Path]]:
        """Best path, arc length of its RRT* head, and its target-tree suffix."""
        if self.best is None:
            return None, 0.0, None
        _, i = self.best
        head = self.tree.path_to(i)
        suffix = self.target.goal_suffix(self.soln[i])
        return head + suffix, head.total_length, suffix


def _variant_tree(scn: Scenario, checker: CollisionChecker, variant: str, fixed_l: Optional[float]
                  ) -> TargetTree:
    if variant == "no_tree_baseline":
        return single_goal_tree(scn.q_goal, scn.spot.mode)
    if variant == "discontinuous_tree":
        return initialize_target_tree(scn, checker, continuous=False, fixed_l=fixed_l)
    if variant == "fixed_l_tree":
        return initialize_target_tree(scn, checker, fixed_l=0.0 if fixed_l is None else fixed_l)
    if variant == "min_cost_tree":
        return initialize_target_tree(scn, checker, fixed_l=fixed_l)
    raise ValueError(f"unknown variant {variant!r}")


VARIANTS = ("min_cost_tree", "fixed_l_tree", "discontinuous_tree", "no_tree_baseline")


def plan(scn: Scenario, variant: str = "min_cost_tree", fixed_l: Optional[float] = None,
         checker: Optional[CollisionChecker] = None, target: Optional[TargetTree] = None,
         on_rewire: Optional[Callable[[Planner], None]] = None, keep_tree: bool = False,
         relative_budget: Optional[float] = None) -> PlanResult:
    """Build the target tree, then sample until the iteration or time budget runs out.

    ``relative_budget`` additionally stops the run at ``relative_budget`` times
    the iteration of the first solution (``iter_max`` still caps it).
    """
    cfg = scn.planner
    checker = checker or CollisionChecker.from_scenario(scn)
    t0 = time.perf_counter()
    if target is None:
        target = _variant_tree(scn, checker, variant, fixed_l)
    t_tfs = time.perf_counter() - t0
    planner = Planner(scn, target, checker, cfg, on_rewire)
    history: List[Tuple[float, float]] = []
    history_iters: List[Tuple[int, float]] = []
    t_ttfp = math.nan
    i_ttfp = -1
    if planner.soln:
        planner.update_best()
        t_ttfp = time.perf_counter() - t0
        i_ttfp = 0
        history.append((t_ttfp, planner.best[0]))
        history_iters.append((0, planner.best[0]))
    it = 0
    t_loop = time.perf_counter()
    deadline = None if cfg.iter_max is not None else t_loop + cfg.t_max
    while True:
        if relative_budget is not None and i_ttfp >= 0 and it >= math.ceil(relative_budget * max(i_ttfp, 1)):
            break
        if cfg.iter_max is not None:
            if it >= cfg.iter_max:
                break
        elif time.perf_counter() >= deadline:
            break
        it += 1
        q_rand, k = sample(cfg, planner.rng, scn.bounds, target)
        if k is not None and k in planner.reached:
            continue
        before = planner.best
        planner.extend(q_rand, k)
        if planner.best is not None and planner.best is not before:
            now = time.perf_counter() - t0
            if i_ttfp < 0:
                t_ttfp, i_ttfp = now, it
            history.append((now, planner.best[0]))
            history_iters.append((it, planner.best[0]))
    t_total = time.perf_counter() - t0
    path, head_len, suffix = planner.solution_path()
    stats = {
        "iterations": it,
        "nodes": len(planner.tree),
        "rewires": planner.rewires,
        "t_tfs": t_tfs,
        "t_ttfp": t_ttfp,
        "i_ttfp": i_ttfp,
        "t_total": t_total,
    }
    return PlanResult(path, [(planner.tree.poses[i], planner.tree.cost[i] + g.remaining_length)
                             for i, g in planner.soln.items()],
                      history, stats, target, head_len, history_iters, cfg, variant,
                      planner.tree if keep_tree else None, suffix)


def plan_baseline_no_tree(scn: Scenario, **kw) -> PlanResult:
    """Same machinery with q_goal as the only goal."""
    return plan(scn, variant="no_tree_baseline", **kw)


def plan_discontinuous_variant(scn: Scenario, **kw) -> PlanResult:
    """Target tree of straights and arcs only (curvature jumps at the joints)."""
    return plan(scn, variant="discontinuous_tree", **kw)


def extend(planner: Planner, q_rand: Pose, goal_index: Optional[int] = None):
    """Module-level alias for :meth:`Planner.extend`."""
    return planner.extend(q_rand, goal_index)
