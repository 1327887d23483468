"""Planner and target-tree configuration."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional


@dataclass(frozen=True)
class PlannerConfig:
    # budget: exactly one of t_max (seconds) / iter_max (iterations) governs
    t_max: Optional[float] = 3.0
    iter_max: Optional[int] = None
    tau: float = 0.2
    steer_step: float = 3.0
    rewire_gamma: float = 15.0
    near_radius_max: float = 6.0
    ds_col: float = 0.1
    w_xy: float = 1.0
    w_theta: float = 2.0
    max_switches: int = 2
    inflation_margin: float = 0.0
    # target tree
    alpha: float = 0.2
    n_branches: int = 9
    goal_ds: float = 0.5
    max_turn_angle: float = math.pi / 2
    clearance_margin: float = 0.10
    max_arc_pairs: int = 10
    exit_probe: float = 3.0

    def __post_init__(self):
        if self.iter_max is not None and self.t_max is not None:
            # iteration budget wins; keeps deterministic configs short to write
            object.__setattr__(self, "t_max", None)
        if self.iter_max is None and self.t_max is None:
            raise ValueError("one of t_max / iter_max is required")
        if self.iter_max is not None and self.iter_max < 0:
            raise ValueError("iter_max must be >= 0")
        if self.t_max is not None and self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        for name in ("steer_step", "rewire_gamma", "near_radius_max", "ds_col", "w_xy", "alpha",
                     "goal_ds", "exit_probe"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.w_theta < 0 or self.inflation_margin < 0 or self.clearance_margin < 0:
            raise ValueError("w_theta, inflation_margin and clearance_margin must be >= 0")
        if self.n_branches < 1 or self.max_arc_pairs < 1 or self.max_switches < 0:
            raise ValueError("n_branches and max_arc_pairs must be >= 1, max_switches >= 0")
        if self.max_turn_angle < 0:
            raise ValueError("max_turn_angle must be >= 0")

    @property
    def deterministic(self) -> bool:
        return self.iter_max is not None

    def with_budget(self, *, iters: Optional[int] = None, seconds: Optional[float] = None) -> "PlannerConfig":
        if iters is not None:
            return replace(self, iter_max=int(iters), t_max=None)
        if seconds is not None:
            return replace(self, iter_max=None, t_max=float(seconds))
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PlannerConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise KeyError(", ".join(unknown))
        kwargs = dict(data)
        if "iter_max" in kwargs and kwargs["iter_max"] is not None and "t_max" not in kwargs:
            kwargs["t_max"] = None
        return cls(**kwargs)
