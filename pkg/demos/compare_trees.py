"""Success rate of the cost-selected target tree against a fixed drive-out.

In the blocked perpendicular scenario the turns right at the spot exit are
cut short by a neighbour, so the tree that drives straight a little further
before branching gives the sampler far better goals. This script shows the
gap on a handful of seeds.

    python3 demos/compare_trees.py [runs]
"""
import sys

import numpy as np

from cctt import CollisionChecker, bundled_scenario
from cctt.planner import plan
from cctt.target_tree import initialize_target_tree


def run(scn, checker, seeds, fixed_l=None):
    variant = "min_cost_tree" if fixed_l is None else "fixed_l_tree"
    tree = initialize_target_tree(scn, checker, fixed_l=fixed_l)
    results = [plan(scn.with_seed(s), variant=variant, fixed_l=fixed_l, checker=checker, target=tree)
               for s in seeds]
    solved = [r for r in results if r.success]
    mean_it = np.mean([r.stats["i_ttfp"] for r in solved]) if solved else float("nan")
    return tree, len(solved), mean_it


def main(runs: int = 20) -> None:
    scn = bundled_scenario("perpendicular_blocked").with_planner(iter_max=1500)
    checker = CollisionChecker.from_scenario(scn)
    seeds = range(runs)
    for label, fixed in (("min cost", None), ("l = 0", 0.0)):
        tree, n, mean_it = run(scn, checker, seeds, fixed)
        print(f"{label:9s} l={tree.straight_length_l:4.1f} cost={tree.cost:.3f}  "
              f"solved {n}/{runs}  mean first-solution iteration {mean_it:.0f}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:2]))
