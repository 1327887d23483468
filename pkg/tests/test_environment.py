import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cctt.environment import (CollisionChecker, ParkingMode, ScenarioError, bundled_scenario, bundled_scenarios,
                              convex_ccw, inflate_polygon, load_scenario, path_free, pose_free, scenario_to_dict)
from cctt.geometry import Pose, VehicleParams, footprint_at
from cctt.paths import FORWARD, Path, PathSegment, cc_steer

VEHICLE = {"wheelbase_L": 2.845, "body_length": 4.91, "body_width": 1.86, "rear_overhang": 1.03,
           "kappa_max": 1 / 6, "sigma_max": 0.2}


def doc(**over):
    d = {"bounds": [-10, -10, 10, 10], "obstacles": [],
         "spot": {"goal": [0, 0, 0], "length": 5.5, "width": 2.5, "mode": "perpendicular"},
         "start": [-5, -5, 0], "vehicle": dict(VEHICLE)}
    d.update(over)
    return json.dumps(d)


def box(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def sat_overlap(a, b):
    """Closed-set separating-axis oracle for two convex polygons."""
    for poly in (a, b):
        for i in range(len(poly)):
            e = poly[(i + 1) % len(poly)] - poly[i]
            n = np.array([-e[1], e[0]])
            pa, pb = a @ n, b @ n
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def oracle_free(obstacles, bounds, params, pose):
    fp = footprint_at(params, pose)
    x0, y0, x1, y1 = bounds
    if fp[:, 0].min() < x0 or fp[:, 0].max() > x1 or fp[:, 1].min() < y0 or fp[:, 1].max() > y1:
        return False
    return not any(sat_overlap(fp, o) for o in obstacles)


# ---------------------------------------------------------------- loading


def test_minimal_document():
    scn = load_scenario(doc())
    assert scn.obstacles == ()
    assert scn.q_goal == Pose(0, 0, 0, 0) and scn.spot.mode is ParkingMode.PERPENDICULAR


def test_missing_wheelbase_named():
    d = json.loads(doc())
    del d["vehicle"]["wheelbase_L"]
    with pytest.raises(ScenarioError, match="wheelbase_L"):
        load_scenario(json.dumps(d))


def test_unknown_keys_rejected():
    with pytest.raises(ScenarioError, match="colour"):
        load_scenario(doc(colour="red"))
    with pytest.raises(ScenarioError, match="planner"):
        load_scenario(doc(planner={"not_a_field": 1}))


def test_parse_error_has_position():
    with pytest.raises(ScenarioError, match="line 1"):
        load_scenario(b'{"bounds": [1, 2,')


@pytest.mark.parametrize("bad, needle", [
    ({"obstacles": [[[0, 0], [1, 1], [2, 2]]]}, "obstacles\\[0\\]"),
    ({"obstacles": [[[0, 0], [1, 0]]]}, "obstacles\\[0\\]"),
    ({"start": [50, 0, 0]}, "start"),
    ({"bounds": [1, 1, 0, 0]}, "bounds"),
    ({"seed": -1}, "seed"),
    ({"spot": {"goal": [0, 0, 0], "length": 5, "width": 2, "mode": "diagonal"}}, "mode"),
])
def test_validation_errors(bad, needle):
    with pytest.raises(ScenarioError, match=needle):
        load_scenario(doc(**bad))


def test_non_convex_obstacle_rejected():
    with pytest.raises(ScenarioError):
        load_scenario(doc(obstacles=[[[0, 0], [4, 0], [1, 1], [0, 4]]]))


def test_vertex_order_normalised_ccw():
    poly = convex_ccw([[0, 0], [0, 1], [1, 1], [1, 0]])
    x, y = poly[:, 0], poly[:, 1]
    assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0


def test_round_trip_dict():
    scn = bundled_scenario("parallel")
    again = load_scenario(json.dumps(scenario_to_dict(scn)))
    assert again.q_goal == scn.q_goal and len(again.obstacles) == len(scn.obstacles)
    assert again.planner == scn.planner


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert {"empty.scn", "perp.scn", "perpendicular_blocked.scn", "parallel.scn", "walled.scn"} <= set(names)
    for n in names:
        scn = bundled_scenario(n)
        checker = CollisionChecker.from_scenario(scn)
        assert checker.pose_free(scn.vehicle, scn.q_goal)
        assert checker.pose_free(scn.vehicle, scn.q_init)


def test_blocked_scenario_road_width():
    scn = bundled_scenario("perpendicular_blocked")
    row_top = max(o[:, 1].max() for o in scn.obstacles if o[:, 1].max() <= 0.5)
    blocker_bottom = min(o[:, 1].min() for o in scn.obstacles if o[:, 1].min() > 0.5)
    assert blocker_bottom - row_top == pytest.approx(3.5)


# ---------------------------------------------------------------- collision


def test_empty_environment_free(params, empty_checker):
    rng = np.random.default_rng(1)
    for _ in range(200):
        p = Pose(*rng.uniform(-100, 100, 2), rng.uniform(-math.pi, math.pi))
        assert pose_free(empty_checker, params, p)


def test_pose_inside_obstacle(params):
    c = CollisionChecker([box(-5, -5, 5, 5)], (-20, -20, 20, 20))
    assert not pose_free(c, params, Pose(0, 0, 0.3))


def test_touching_counts_as_collision(params):
    # front bumper at x = body_length - rear_overhang exactly on the obstacle edge
    front = params.body_length - params.rear_overhang
    c = CollisionChecker([box(front, -1, front + 1, 1)], (-20, -20, 20, 20))
    assert not pose_free(c, params, Pose(0, 0, 0))
    assert pose_free(c, params, Pose(-1e-9, 0, 0))


def test_outside_bounds_is_not_free(params):
    c = CollisionChecker([], (-3, -3, 3, 3))
    assert not pose_free(c, params, Pose(2.5, 0, 0))


def _random_obstacles(rng, n):
    out = []
    for _ in range(n):
        cx, cy = rng.uniform(-25, 25, 2)
        k = rng.integers(3, 7)
        ang = np.sort(rng.uniform(0, 2 * math.pi, k))
        r = rng.uniform(0.3, 2.5)
        out.append(convex_ccw(np.c_[cx + r * np.cos(ang), cy + r * np.sin(ang)]))
    return out


@pytest.mark.parametrize("n_obstacles", [12, 80])
def test_spatial_index_equivalence(params, n_obstacles):
    rng = np.random.default_rng(n_obstacles)
    obs = _random_obstacles(rng, n_obstacles)
    bounds = (-30, -30, 30, 30)
    plain = CollisionChecker(obs, bounds, cell_size=None)
    grids = [CollisionChecker(obs, bounds, cell_size=c) for c in (0.7, 2.0, 9.0)]
    poses = np.c_[rng.uniform(-30, 30, (100_000, 2)), rng.uniform(-math.pi, math.pi, 100_000)]
    for i, row in enumerate(poses):
        g = grids[i % len(grids)]
        assert (plain.first_collision(params, row[None]) < 0) == (g.first_collision(params, row[None]) < 0)


def test_collision_matches_sat_oracle(params):
    rng = np.random.default_rng(7)
    obs = _random_obstacles(rng, 25)
    bounds = (-30, -30, 30, 30)
    c = CollisionChecker(obs, bounds)
    for _ in range(3000):
        p = Pose(*rng.uniform(-30, 30, 2), rng.uniform(-math.pi, math.pi))
        assert pose_free(c, params, p) == oracle_free(obs, bounds, params, p)


@given(st.floats(0.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_inflation_monotone(margin):
    params = VehicleParams()
    rng = np.random.default_rng(3)
    obs = _random_obstacles(rng, 20)
    bounds = (-30, -30, 30, 30)
    base = CollisionChecker(obs, bounds)
    fat = CollisionChecker([inflate_polygon(o, margin) for o in obs], bounds)
    poses = np.c_[rng.uniform(-28, 28, (300, 2)), rng.uniform(-math.pi, math.pi, 300)]
    for row in poses:
        if base.first_collision(params, row[None]) >= 0:
            assert fat.first_collision(params, row[None]) >= 0


def test_path_free_examples(params):
    c = CollisionChecker([box(4, -1, 5, 1)], (-20, -20, 20, 20))
    seg = PathSegment.make(Pose(-10, 0, 0), 0.0, 0.0, FORWARD, 15.0)
    assert not path_free(c, params, Path((seg,)), 0.1)
    assert path_free(c, params, Path(), 0.1)
    with pytest.raises(ValueError):
        path_free(c, params, Path((seg,)), 0.0)


def test_path_free_monotone_in_step(params):
    rng = np.random.default_rng(11)
    obs = _random_obstacles(rng, 30)
    c = CollisionChecker(obs, (-30, -30, 30, 30))
    for _ in range(150):
        a = Pose(*rng.uniform(-20, 20, 2), rng.uniform(-math.pi, math.pi))
        b = Pose(*rng.uniform(-20, 20, 2), rng.uniform(-math.pi, math.pi))
        p = cc_steer(a, b, params)
        if p is None:
            continue
        for ds in (0.4, 0.2, 0.1):
            if not path_free(c, params, p, ds):
                assert not path_free(c, params, p, ds / 2)


def test_random_paths_free_in_empty_scenario(params):
    scn = bundled_scenario("empty")
    c = CollisionChecker([], (-1e3, -1e3, 1e3, 1e3))
    rng = np.random.default_rng(5)
    n = 0
    while n < 1000:
        a = Pose(*rng.uniform(-10, 10, 2), rng.uniform(-math.pi, math.pi))
        b = Pose(*rng.uniform(-10, 10, 2), rng.uniform(-math.pi, math.pi))
        p = cc_steer(a, b, scn.vehicle)
        if p is None:
            continue
        assert path_free(c, params, p, 0.1)
        n += 1


def test_clearance(params):
    c = CollisionChecker([box(5.0, -1, 6, 1)], (-20, -20, 20, 20))
    front = params.body_length - params.rear_overhang
    assert c.clearance(params, Pose(0, 0, 0)) == pytest.approx(5.0 - front)
    assert c.clearance(params, Pose(1.2, 0, 0)) == 0.0
