import csv
import io
import math
from dataclasses import replace

import numpy as np
import pytest

from cctt.config import PlannerConfig
from cctt.environment import CollisionChecker, ParkingMode, bundled_scenario
from cctt.geometry import Pose, VehicleParams, relative
from cctt.paths import BACKWARD, FORWARD, SegmentKind, check_path, clothoid_endpoint
from cctt.target_tree import (InfeasibleSpot, TargetTree, build_parallel_tree, build_perpendicular_tree,
                              compute_reference_extents, initialize_target_tree, sharpness_sweep,
                              single_goal_tree, straight_lengths, tree_cost)

from conftest import max_sampled_curvature_step

UP = Pose(0.0, 0.0, math.pi / 2)
CFG = PlannerConfig()


def box(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def kinds(branch):
    return [s.kind for s in branch.path.segments]


# ---------------------------------------------------------------- perpendicular


def test_empty_tree_branch_count_and_leftmost(params, empty_checker):
    tree = build_perpendicular_tree(UP, 2.0, empty_checker, params, CFG)
    assert len(tree.branches) == 9 + 1
    left = tree.branches[1]
    assert left.branch_sigma == pytest.approx(params.sigma_max)
    assert kinds(left) == [SegmentKind.STRAIGHT, SegmentKind.CLOTHOID, SegmentKind.ARC]
    straight, clo, arc = left.path.segments
    assert straight.length == pytest.approx(2.0)
    assert clo.sigma == pytest.approx(0.2) and clo.length == pytest.approx(5 / 6)
    assert clo.start_kappa == 0.0 and clo.end_kappa == pytest.approx(1 / 6)
    assert arc.start_kappa == pytest.approx(1 / 6)
    assert tree.cost == 0.0
    assert not any(b.truncated_by_collision for b in tree.branches)


def test_zero_straight_starts_with_clothoid(params, empty_checker):
    tree = build_perpendicular_tree(UP, 0.0, empty_checker, params, CFG)
    for b in tree.branches[1:]:
        if b.branch_sigma != 0.0:
            assert b.path.segments[0].kind is SegmentKind.CLOTHOID
            assert b.path.start_pose.close_to(UP)


def test_branches_turn_at_most_max_turn(params, empty_checker):
    tree = build_perpendicular_tree(UP, 1.0, empty_checker, params, CFG)
    for b in tree.branches:
        turned = abs(b.tip.theta - UP.theta)
        assert turned <= CFG.max_turn_angle + 1e-9


def test_sharpness_sweep_symmetric(params):
    sw = sharpness_sweep(params, 9)
    assert sw[0] == params.sigma_max and sw[-1] == -params.sigma_max
    assert 0.0 in sw and len(sw) == 9
    assert np.allclose(sw, [-v for v in reversed(sw)])


def test_wall_behind_exit_truncates_everything(params):
    front = params.body_length - params.rear_overhang
    checker = CollisionChecker([box(-10, front + 0.05, 10, front + 2)], (-50, -50, 50, 50))
    tree = build_perpendicular_tree(UP, 0.0, checker, params, CFG)
    assert all(b.truncated_by_collision for b in tree.branches[1:])
    assert tree.cost == pytest.approx(1.0, abs=1e-3)


def test_fully_blocked_exit_keeps_only_trunk(params):
    checker = CollisionChecker([box(-10, 3.9, 10, 5)], (-50, -50, 50, 50))
    tree = build_perpendicular_tree(UP, 2.0, checker, params, CFG)
    assert len(tree.branches) == 1
    assert tree.branches[0].truncated_by_collision
    assert tree.cost == 1.0


def test_one_side_wall_costs_half(params):
    # a wall on the right of the exit, starting 2 m up, stops every right turn at once
    checker = CollisionChecker([box(0.935, 2, 20, 30)], (-1e3, -1e3, 1e3, 1e3))
    tree = build_perpendicular_tree(UP, 0.0, checker, params, CFG)
    right = [b for b in tree.branches if b.branch_sigma < 0]
    left = [b for b in tree.branches if b.branch_sigma > 0]
    assert all(b.truncated_by_collision for b in right)
    assert not any(b.truncated_by_collision for b in left)
    # right tips stop within one collision step of the origin
    assert tree.cost == pytest.approx(0.5, abs=1e-4)


def test_flush_wall_costs_exactly_half(params):
    # 0.1 mm from the right flank: the first step of every right turn collides
    wall = box(params.body_width / 2 + 1e-4, 2, 20, 30)
    tree = build_perpendicular_tree(UP, 0.0, CollisionChecker([wall], (-1e3, -1e3, 1e3, 1e3)), params, CFG)
    assert all(b.length == 0.0 for b in tree.branches if b.branch_sigma < 0)
    assert abs(tree.cost - 0.5) <= 1e-12


def test_tree_invariants_on_bundled_scenarios():
    for name in ("perp", "perpendicular_blocked", "parallel", "parallel_tight"):
        scn = bundled_scenario(name)
        checker = CollisionChecker.from_scenario(scn)
        tree = initialize_target_tree(scn, checker)
        assert 0.0 <= tree.cost <= 1.0
        for b in tree.branches:
            assert b.path.start_pose is None or b.path.start_pose.close_to(scn.q_goal, 1e-9)
            assert checker.path_free(scn.vehicle, b.path, CFG.ds_col)
            assert check_path(b.path, scn.vehicle), check_path(b.path, scn.vehicle).problems
            if b.path.segments:
                assert max_sampled_curvature_step(b.path, scn.vehicle) <= 1e-9
        for g in tree.candidate_goals:
            assert checker.pose_free(scn.vehicle, g.pose)
            b = tree.branches[g.branch_id]
            if b.path.segments:
                p = b.path.pose_at(g.s)
                assert p.close_to(g.pose, 1e-9)
            assert g.remaining_length == pytest.approx(tree.goal_suffix(g).total_length, abs=1e-9)
            suffix = tree.goal_suffix(g)
            if suffix.segments:
                assert suffix.end_pose.close_to(scn.q_goal, 1e-9)
        # remaining length strictly increases away from the goal on every branch
        by_branch = {}
        for g in tree.candidate_goals:
            by_branch.setdefault(g.branch_id, []).append(g.remaining_length)
        for vals in by_branch.values():
            assert all(b > a for a, b in zip(vals, vals[1:]))


def test_discontinuous_tree_jumps_curvature(params, empty_checker):
    tree = build_perpendicular_tree(UP, 1.0, empty_checker, params, CFG, continuous=False)
    turning = [b for b in tree.branches[1:] if b.branch_sigma != 0.0]
    assert turning
    for b in turning:
        assert kinds(b) == [SegmentKind.STRAIGHT, SegmentKind.ARC]
        assert not check_path(b.path, params)
    left = turning[0]
    prof = left.path.sample(0.05)
    jump = np.abs(np.diff(prof[:, 4])).max()
    assert jump == pytest.approx(params.kappa_max)


def test_to_csv_columns(params, empty_checker):
    tree = build_perpendicular_tree(UP, 1.0, empty_checker, params, CFG)
    rows = list(csv.reader(io.StringIO(tree.to_csv())))
    assert rows[0] == ["branch_id", "s", "x", "y", "theta", "kappa", "remaining_length"]
    ids = {int(r[0]) for r in rows[1:]}
    assert ids == set(range(len(tree.branches)))


# ---------------------------------------------------------------- parallel


def _parallel_arcs(tree):
    trunk = tree.branches[0].path.segments
    return [s for s in trunk if s.kind is SegmentKind.ARC]


def test_parallel_one_arc_pair(parallel):
    checker = CollisionChecker.from_scenario(parallel)
    tree = build_parallel_tree(parallel.q_goal, 0.0, checker, parallel.vehicle, parallel.planner,
                               spot_length=parallel.spot.length)
    assert tree.mode is ParkingMode.PARALLEL
    arcs = _parallel_arcs(tree)
    assert [a.direction for a in arcs] == [BACKWARD, FORWARD]
    for b in tree.branches:
        segs = b.path.segments
        assert [s.kind for s in segs[:3]] == [SegmentKind.ARC, SegmentKind.ARC, SegmentKind.CLOTHOID]
        assert segs[2].end_kappa == pytest.approx(0.0, abs=1e-12)


def test_parallel_tight_needs_several_switches():
    scn = bundled_scenario("parallel_tight")
    checker = CollisionChecker.from_scenario(scn)
    tree = build_parallel_tree(scn.q_goal, 0.0, checker, scn.vehicle, scn.planner, spot_length=scn.spot.length)
    dirs = [a.direction for a in _parallel_arcs(tree)]
    assert len(dirs) >= 4
    assert dirs[0] == BACKWARD
    assert all(a != b for a, b in zip(dirs, dirs[1:]))


def test_parallel_switch_clearance(parallel):
    for scn in (parallel, bundled_scenario("parallel_tight")):
        checker = CollisionChecker.from_scenario(scn)
        cfg = scn.planner
        tree = build_parallel_tree(scn.q_goal, 0.0, checker, scn.vehicle, cfg, spot_length=scn.spot.length)
        arcs = _parallel_arcs(tree)
        # every switch pose except the final exit arc
        for a in arcs[:-1]:
            c = checker.clearance(scn.vehicle, a.end_pose)
            assert cfg.clearance_margin - 1e-9 <= c <= cfg.clearance_margin + cfg.ds_col


def test_parallel_short_spot_infeasible(parallel):
    checker = CollisionChecker.from_scenario(parallel)
    with pytest.raises(InfeasibleSpot):
        build_parallel_tree(parallel.q_goal, 0.0, checker, parallel.vehicle, parallel.planner,
                            spot_length=parallel.vehicle.body_length + 0.1)


def test_parallel_too_many_pairs_infeasible():
    scn = bundled_scenario("parallel_tight")
    checker = CollisionChecker.from_scenario(scn)
    cfg = replace(scn.planner, max_arc_pairs=1)
    with pytest.raises(InfeasibleSpot):
        build_parallel_tree(scn.q_goal, 0.0, checker, scn.vehicle, cfg, spot_length=scn.spot.length)


# ---------------------------------------------------------------- cost


def test_cost_exact_cases():
    l_max, w_max = 6.4166, 6.0048
    full = [Pose(l_max, w_max), Pose(l_max, -w_max), Pose(l_max, 0.0)]
    assert tree_cost(full, l_max, w_max) == 0.0
    assert tree_cost([Pose()] * 10, l_max, w_max) == 1.0
    one_side = [Pose(l_max, w_max), Pose(l_max * 0.9, w_max * 0.5)] + [Pose()] * 4
    assert abs(tree_cost(one_side, l_max, w_max) - 0.5) <= 1e-12


def test_cost_axis_tip_counts_both_sides():
    # a lone straight tip spans no width, so it covers nothing by itself
    assert tree_cost([Pose(5, 0)], 5, 5) == 1.0
    # with a left tip of height 2 and the straight tip of length 5: A_L = 5 * 2
    assert tree_cost([Pose(5, 0), Pose(1, 2)], 5, 5) == pytest.approx(1 - 10 / 50)


def test_cost_uses_frame():
    frame = Pose(3, 4, math.pi / 2)
    tips = [Pose(3 - 1, 4 + 1, math.pi)]  # local (1, 1)
    assert tree_cost(tips, 2, 2, frame=frame) == pytest.approx(1 - 1 / 8)


def test_cost_rejects_bad_extents():
    with pytest.raises(ValueError):
        tree_cost([Pose()], 0.0, 1.0)


def test_removing_obstacle_never_raises_cost(params):
    rng = np.random.default_rng(2)
    base = [box(-12, -6, -1.0, -0.2), box(1.0, -6, 12, -0.2)]
    for _ in range(15):
        cx, cy = rng.uniform(-8, 8), rng.uniform(4, 10)
        extra = box(cx - 1, cy - 1, cx + 1, cy + 1)
        with_extra = CollisionChecker(base + [extra], (-50, -50, 50, 50))
        without = CollisionChecker(base, (-50, -50, 50, 50))
        goal = Pose(0, -5, math.pi / 2)
        c1 = build_perpendicular_tree(goal, 0.5, with_extra, params, CFG).cost
        c0 = build_perpendicular_tree(goal, 0.5, without, params, CFG).cost
        assert c0 <= c1 + 1e-12


# ---------------------------------------------------------------- reference extents


def test_reference_extents_closed_form(params):
    l_max, w_max = compute_reference_extents(params, CFG)
    c = clothoid_endpoint(params.sigma_max, params.kappa_max)
    r = 1.0 / params.kappa_max
    # centre of the arc, then the tip where the heading reaches max_turn_angle (pi/2)
    cx, cy = c.x - r * math.sin(c.theta), c.y + r * math.cos(c.theta)
    tip = (cx + r * math.sin(math.pi / 2), cy - r * math.cos(math.pi / 2))
    assert l_max == pytest.approx(abs(tip[0]), abs=1e-9)
    assert w_max == pytest.approx(abs(tip[1]), abs=1e-9)


def test_reference_extents_no_turning(params):
    _, w_max = compute_reference_extents(params, replace(CFG, max_turn_angle=1e-4))
    assert w_max < 1e-4


def test_reference_extents_scale_with_radius(params):
    a = compute_reference_extents(params, CFG)
    b = compute_reference_extents(replace(params, kappa_max=params.kappa_max / 2), CFG)
    assert b[0] / a[0] == pytest.approx(2.0, rel=0.1)
    assert b[1] / a[1] == pytest.approx(2.0, rel=0.1)


def test_discontinuous_reference_extents(params):
    assert compute_reference_extents(params, CFG, continuous=False) == pytest.approx((6.0, 6.0), abs=1e-9)


# ---------------------------------------------------------------- selection


def test_straight_lengths():
    assert straight_lengths(1.0, 0.2) == pytest.approx([0, 0.2, 0.4, 0.6, 0.8, 1.0])
    assert straight_lengths(5.5, 5.5) == [0.0, 5.5]
    assert straight_lengths(0.5, 0.2) == pytest.approx([0, 0.2, 0.4, 0.5])


def test_empty_environment_selects_zero():
    scn = bundled_scenario("empty")
    unbounded = CollisionChecker((), (-1e3, -1e3, 1e3, 1e3))
    tree = initialize_target_tree(scn, unbounded)
    assert tree.straight_length_l == 0.0 and tree.cost == 0.0
    assert all(c == 0.0 for _, c in tree.searched)


def test_alpha_equal_spot_length_two_candidates():
    scn = bundled_scenario("empty")
    scn = scn.with_planner(alpha=scn.spot.length)
    tree = initialize_target_tree(scn)
    assert [l for l, _ in tree.searched] == [0.0, scn.spot.length]


def test_blocked_scenario_prefers_longer_straight():
    scn = bundled_scenario("perpendicular_blocked")
    tree = initialize_target_tree(scn)
    costs = dict(tree.searched)
    assert tree.straight_length_l > 0.0
    assert tree.cost < costs[0.0]
    assert tree.cost == min(costs.values())


def test_fixed_l_skips_search():
    scn = bundled_scenario("perpendicular_blocked")
    tree = initialize_target_tree(scn, fixed_l=0.0)
    assert tree.straight_length_l == 0.0 and len(tree.searched) == 1


def test_single_goal_tree():
    t = single_goal_tree(Pose(1, 2, 3, 0.1), ParkingMode.PERPENDICULAR)
    assert len(t.candidate_goals) == 1
    g = t.candidate_goals[0]
    assert g.pose == Pose(1, 2, 3, 0.0) and g.remaining_length == 0.0
    assert t.goal_suffix(g).total_length == 0.0
