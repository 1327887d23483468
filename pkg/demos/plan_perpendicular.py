"""Plan into the bundled perpendicular spot and draw the result.

Run from the repository root:

    python3 demos/plan_perpendicular.py [out.svg]

The script prints how the first solution improved over the run and writes an
SVG with the obstacles, the target tree, the planner tree and the best path.
"""
import sys

from cctt import bundled_scenario
from cctt.planner import plan
from cctt.render import render_svg, write_svg


def main(out: str = "perp_plan.svg") -> None:
    scn = bundled_scenario("perp").with_planner(iter_max=3000).with_seed(3)
    result = plan(scn, keep_tree=True)
    result.raise_if_failed()

    tree = result.target_tree
    print(f"target tree: l = {tree.straight_length_l:g} m, cost = {tree.cost:.4f}, "
          f"{len(tree.candidate_goals)} candidate goals")
    print(f"first solution at iteration {result.stats['i_ttfp']}")
    for it, length in result.history_iters:
        print(f"  iteration {it:5d}: {length:7.3f} m")

    svg = render_svg(scn, result.best_path, tree, result.planner_tree, footprints_every=1.5,
                     title=f"perp, seed 3, {result.best_length:.2f} m")
    write_svg(svg, out)
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
