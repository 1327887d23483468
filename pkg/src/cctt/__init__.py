"""Continuous-curvature target-tree parking planner."""

from .config import PlannerConfig
from .environment import (CollisionChecker, ParkingMode, ParkingSpot, Scenario, ScenarioError,
                          bundled_scenario, bundled_scenarios, load_scenario, load_scenario_file)
from .geometry import Pose, VehicleParams, footprint_at, normalize_angle
from .paths import BACKWARD, FORWARD, Path, PathSegment, cc_steer, check_path, clothoid_endpoint, fresnel
from .planner import VARIANTS, NoPathFound, PlanResult, plan
from .tracking import SimConfig, SimDiverged, TrackingReport, manoeuvre_tracking, simulate_tracking
from .target_tree import (InfeasibleSpot, TargetTree, build_parallel_tree, build_perpendicular_tree,
                          compute_reference_extents, initialize_target_tree, tree_cost)

__version__ = "0.1.0"
