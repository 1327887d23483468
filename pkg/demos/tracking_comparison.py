"""Track continuous and discontinuous parking manoeuvres with the same controller.

A curvature jump asks for an instant change of steering angle. The simulated
steering is rate limited, so the vehicle lags behind the reference and arrives
in the spot misaligned. The continuous tree keeps curvature changes within the
sharpness limit and the lag disappears.

    python3 demos/tracking_comparison.py
"""
import numpy as np

from cctt import CollisionChecker, bundled_scenario
from cctt.render import render_trajectory, write_svg
from cctt.tracking import manoeuvre_tracking


def main() -> None:
    for name in ("perp", "parallel"):
        scn = bundled_scenario(name)
        checker = CollisionChecker.from_scenario(scn)
        for continuous in (True, False):
            reports = [manoeuvre_tracking(scn, s, continuous=continuous, checker=checker) for s in range(5)]
            ori = np.mean([r.orientation_alignment_error for r in reports])
            ct = np.mean([r.mean_cross_track for r in reports])
            label = "continuous" if continuous else "discontinuous"
            print(f"{name:9s} {label:14s} orientation error {np.degrees(ori):6.3f} deg, "
                  f"mean cross-track {ct:.4f} m")
            out = f"track_{name}_{label}.svg"
            write_svg(render_trajectory(scn, reports[0].trace, title=f"{name} {label}"), out)


if __name__ == "__main__":
    main()
