"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line through the ``acceptance`` fixture; the
lines are repeated in the terminal summary. Wall-clock budgets are reported
in the detail text. Iteration budgets stand in for time budgets so that the
outcome does not depend on the speed of the machine.
"""
import math
import time

import numpy as np
from scipy.integrate import quad

from cctt import CollisionChecker, Pose, bundled_scenario
from cctt.config import PlannerConfig
from cctt.paths import check_path, clothoid_endpoint, fresnel
from cctt.planner import plan, plan_discontinuous_variant
from cctt.target_tree import build_perpendicular_tree, initialize_target_tree, tree_cost
from cctt.tracking import manoeuvre_tracking

from conftest import max_sampled_curvature_step, rk4_clothoid

UP = Pose(0.0, 0.0, math.pi / 2)
UNBOUNDED = (-1e3, -1e3, 1e3, 1e3)

# iterations standing in for the 3 s and 1 s planning budgets
BUDGET_3S = 1500
BUDGET_1S = 1500
# criterion 3 only validates the returned paths, so a shorter run suffices
BUDGET_CURVATURE = 1000


def _box(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def _quad_fresnel(s):
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=400)
    c = quad(lambda u: math.cos(math.pi * u * u / 2), 0, s, **opts)[0]
    si = quad(lambda u: math.sin(math.pi * u * u / 2), 0, s, **opts)[0]
    return c, si


def test_criterion_1_fresnel(acceptance):
    t0 = time.perf_counter()
    args = np.concatenate([[0.0], np.logspace(-6, 1, 999)])
    c, s = fresnel(args)
    err = 0.0
    for a, ci, si in zip(args, c, s):
        qc, qs = _quad_fresnel(float(a))
        err = max(err, abs(ci - qc), abs(si - qs))
    dt = time.perf_counter() - t0
    ok = err <= 1e-8
    acceptance(1, ok, f"max |err| = {err:.2e} over {len(args)} arguments, {dt:.2f} s")
    assert ok


def test_criterion_2_clothoid(acceptance, params):
    t0 = time.perf_counter()
    pos_err = th_err = 0.0
    for sigma in np.linspace(0.02, params.sigma_max, 10):
        for kappa in np.linspace(params.kappa_max / 10, params.kappa_max, 10):
            x, y, th = rk4_clothoid(sigma, kappa)
            p = clothoid_endpoint(float(sigma), float(kappa))
            pos_err = max(pos_err, math.hypot(p.x - x, p.y - y))
            th_err = max(th_err, abs(p.theta - th))
    full = clothoid_endpoint(params.sigma_max, params.kappa_max)
    exact = params.kappa_max ** 2 / (2 * params.sigma_max)
    dt = time.perf_counter() - t0
    ok = pos_err <= 1e-6 and th_err <= 1e-8 and abs(full.theta - exact) <= 1e-12 and round(exact, 6) == 0.069444
    acceptance(2, ok, f"pos {pos_err:.2e} m, theta {th_err:.2e} rad, full turn {full.theta:.6f} rad, {dt:.2f} s")
    assert ok


def test_criterion_3_curvature_continuity(acceptance):
    t0 = time.perf_counter()
    worst_step = -math.inf
    worst_kappa = 0.0
    valid = solved = 0
    for name in ("perp", "parallel"):
        scn = bundled_scenario(name).with_planner(iter_max=BUDGET_CURVATURE)
        checker = CollisionChecker.from_scenario(scn)
        tree = initialize_target_tree(scn, checker)
        for seed in range(50):
            r = plan(scn.with_seed(seed), checker=checker, target=tree)
            if not r.success:
                continue
            solved += 1
            path = r.best_path
            step = max_sampled_curvature_step(path, scn.vehicle)
            kmax = float(np.max(np.abs(path.sample(0.05)[:, 4])))
            worst_step = max(worst_step, step)
            worst_kappa = max(worst_kappa, kmax)
            valid += bool(check_path(path, scn.vehicle)) and step <= 1e-6 and kmax <= 1 / 6 + 1e-9
    perp = bundled_scenario("perp")
    disc = plan_discontinuous_variant(perp.with_planner(iter_max=10))
    flagged = any(not check_path(b.path, perp.vehicle) for b in disc.target_tree.branches)
    dt = time.perf_counter() - t0
    ok = solved > 0 and valid == solved and flagged
    acceptance(3, ok, f"{valid}/{solved} solved plans valid (100 seeds), worst dk excess {worst_step:.2e}, "
                      f"max |k| {worst_kappa:.6f}, discontinuous flagged={flagged}, {dt:.1f} s")
    assert ok


def test_criterion_4_cost_exact_cases(acceptance, params):
    cfg = PlannerConfig()
    empty = initialize_target_tree(bundled_scenario("empty"), CollisionChecker((), UNBOUNDED))
    blocked = build_perpendicular_tree(UP, 2.0, CollisionChecker([_box(-10, 3.9, 10, 5)], UNBOUNDED), params, cfg)
    wall = _box(params.body_width / 2 + 1e-4, 2, 20, 30)
    half = build_perpendicular_tree(UP, 0.0, CollisionChecker([wall], UNBOUNDED), params, cfg)
    costs = (empty.cost, blocked.cost, half.cost)
    tips = (tree_cost([Pose(6, 6), Pose(6, -6)], 6, 6), tree_cost([Pose()] * 3, 6, 6),
            tree_cost([Pose(6, 6)], 6, 6))
    ok = all(abs(a - b) <= 1e-12 for a, b in zip(costs + tips, (0.0, 1.0, 0.5) * 2))
    acceptance(4, ok, f"trees {costs}, tip sets {tips}")
    assert ok


def _run_variant(scn, seeds, fixed_l=None):
    checker = CollisionChecker.from_scenario(scn)
    variant = "min_cost_tree" if fixed_l is None else "fixed_l_tree"
    tree = initialize_target_tree(scn, checker, fixed_l=fixed_l)
    runs = [plan(scn.with_seed(s), variant=variant, fixed_l=fixed_l, checker=checker, target=tree) for s in seeds]
    rate = sum(r.success for r in runs) / len(runs)
    ittfp = [r.stats["i_ttfp"] for r in runs if r.success]
    return rate, (float(np.mean(ittfp)) if ittfp else math.inf), tree


def test_criterion_5_min_cost_vs_fixed_zero(acceptance):
    t0 = time.perf_counter()
    scn = bundled_scenario("perpendicular_blocked").with_planner(iter_max=BUDGET_3S)
    seeds = range(100)
    rate, ittfp, tree = _run_variant(scn, seeds)
    rate0, ittfp0, _ = _run_variant(scn, seeds, fixed_l=0.0)
    dt = time.perf_counter() - t0
    ok = rate >= 0.95 and rate > rate0 and ittfp < ittfp0
    acceptance(5, ok, f"min-cost (l={tree.straight_length_l:g}) {rate:.0%} mean i_ttfp {ittfp:.0f}; "
                      f"fixed l=0 {rate0:.0%} mean i_ttfp {ittfp0:.0f}; {dt:.0f} s")
    assert ok


def test_criterion_6_anytime_improvement(acceptance):
    t0 = time.perf_counter()
    scn = bundled_scenario("perp").with_planner(iter_max=40_000)
    checker = CollisionChecker.from_scenario(scn)
    tree = initialize_target_tree(scn, checker)
    first, final = [], []
    monotone = True
    for seed in range(50):
        r = plan(scn.with_seed(seed), checker=checker, target=tree, relative_budget=20)
        if not r.success:
            continue
        hist = [length for _, length in r.history_iters]
        monotone &= all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
        first.append(hist[0])
        final.append(hist[-1])
    dt = time.perf_counter() - t0
    ratio = float(np.mean(final) / np.mean(first)) if first else math.inf
    ok = len(first) == 50 and monotone and ratio <= 0.95
    acceptance(6, ok, f"{len(first)}/50 solved, histories non-increasing={monotone}, "
                      f"mean final/first = {np.mean(final):.2f}/{np.mean(first):.2f} = {ratio:.3f}, {dt:.0f} s")
    assert ok


def test_criterion_7_tracking(acceptance):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for name in ("perp", "parallel"):
        scn = bundled_scenario(name)
        checker = CollisionChecker.from_scenario(scn)
        res = {}
        for continuous in (True, False):
            reps = [manoeuvre_tracking(scn, s, continuous=continuous, checker=checker) for s in range(5)]
            res[continuous] = (np.mean([r.orientation_alignment_error for r in reps]),
                               np.mean([r.mean_cross_track for r in reps]))
        ratio = res[True][0] / res[False][0]
        ok &= ratio <= 0.7 and res[True][1] < res[False][1]
        parts.append(f"{name}: orientation ratio {ratio:.3f}, cross-track {res[True][1]:.4f} vs {res[False][1]:.4f}")
    dt = time.perf_counter() - t0
    acceptance(7, ok, "; ".join(parts) + f"; {dt:.1f} s")
    assert ok


def test_criterion_8_empty_scenario(acceptance):
    t0 = time.perf_counter()
    scn = bundled_scenario("empty").with_planner(iter_max=BUDGET_1S)
    checker = CollisionChecker.from_scenario(scn)
    tree = initialize_target_tree(scn, checker)
    wins = sum(plan(scn.with_seed(s), checker=checker, target=tree).success for s in range(100))
    a = plan(scn.with_seed(17)).path_csv()
    b = plan(scn.with_seed(17)).path_csv()
    dt = time.perf_counter() - t0
    ok = wins == 100 and a == b and a.count("\n") > 1
    acceptance(8, ok, f"{wins}/100 solved, repeated path CSV byte-identical={a == b}, {dt:.1f} s")
    assert ok


def test_criterion_9_rewire_invariants(acceptance):
    t0 = time.perf_counter()
    scn = bundled_scenario("perp").with_planner(iter_max=5000).with_seed(0)
    checks = []

    def hook(pl):
        t = pl.tree
        n = len(t)
        err = float(np.max(np.abs(t.recomputed_costs() - t.cost[:n])))
        checks.append((t.is_acyclic(), err))

    plan(scn, on_rewire=hook)
    worst = max((e for _, e in checks), default=0.0)
    ok = bool(checks) and all(a for a, _ in checks) and worst <= 1e-9
    dt = time.perf_counter() - t0
    acceptance(9, ok, f"{len(checks)} rewires checked, all acyclic={all(a for a, _ in checks)}, "
                      f"max cost drift {worst:.1e}, {dt:.1f} s")
    assert ok
