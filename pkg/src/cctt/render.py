"""Hand-written SVG rendering of scenarios, target trees, RRT* trees and paths.

World coordinates are metres with y up; the SVG y axis points down, so every
point goes through :meth:`_Canvas.xy`.
"""

from __future__ import annotations

import math
from typing import List, Optional, Sequence

import numpy as np

from .environment import Scenario
from .geometry import Pose, footprint_at
from .paths import Path, SegmentKind

SEGMENT_STYLE = {
    SegmentKind.STRAIGHT: "stroke:#2b6cb0;stroke-width:0.06",
    SegmentKind.CLOTHOID: "stroke:#d69e2e;stroke-width:0.06",
    SegmentKind.ARC: "stroke:#c53030;stroke-width:0.06",
}


class _Canvas:
    def __init__(self, bounds: Sequence[float], scale: float = 30.0, pad: float = 1.0):
        self.x0, self.y0, self.x1, self.y1 = (float(b) for b in bounds)
        self.scale = scale
        self.pad = pad
        self.parts: List[str] = []

    @property
    def width(self) -> float:
        return (self.x1 - self.x0 + 2 * self.pad) * self.scale

    @property
    def height(self) -> float:
        return (self.y1 - self.y0 + 2 * self.pad) * self.scale

    def xy(self, x: float, y: float) -> str:
        px = (x - self.x0 + self.pad) * self.scale
        py = (self.y1 - y + self.pad) * self.scale
        return f"{px:.2f},{py:.2f}"

    def polyline(self, pts: np.ndarray, style: str, closed: bool = False) -> None:
        tag = "polygon" if closed else "polyline"
        coords = " ".join(self.xy(x, y) for x, y in pts)
        self.parts.append(f'<{tag} points="{coords}" style="fill:none;{_px(style, self.scale)}"/>')

    def polygon(self, pts: np.ndarray, fill: str, stroke: str = "none", opacity: float = 1.0) -> None:
        coords = " ".join(self.xy(x, y) for x, y in pts)
        self.parts.append(f'<polygon points="{coords}" fill="{fill}" stroke="{stroke}" '
                          f'fill-opacity="{opacity}" stroke-width="1"/>')

    def text(self, x: float, y: float, label: str, size: float = 12.0) -> None:
        self.parts.append(f'<text x="{self.xy(x, y).split(",")[0]}" y="{self.xy(x, y).split(",")[1]}" '
                          f'font-family="sans-serif" font-size="{size:.0f}">{_escape(label)}</text>')

    def svg(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width:.0f}" height="{self.height:.0f}" '
                f'viewBox="0 0 {self.width:.2f} {self.height:.2f}">')
        return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>'] + self.parts + ["</svg>"]) + "\n"


def _px(style: str, scale: float) -> str:
    """Convert a ``stroke-width`` given in metres to pixels."""
    out = []
    for item in style.split(";"):
        if item.startswith("stroke-width:"):
            out.append(f"stroke-width:{float(item.split(':')[1]) * scale:.2f}")
        elif item:
            out.append(item)
    return ";".join(out)


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _grid(cv: _Canvas) -> None:
    for x in range(math.ceil(cv.x0), math.floor(cv.x1) + 1):
        cv.polyline(np.array([[x, cv.y0], [x, cv.y1]]), "stroke:#eeeeee;stroke-width:0.02")
    for y in range(math.ceil(cv.y0), math.floor(cv.y1) + 1):
        cv.polyline(np.array([[cv.x0, y], [cv.x1, y]]), "stroke:#eeeeee;stroke-width:0.02")
    box = np.array([[cv.x0, cv.y0], [cv.x1, cv.y0], [cv.x1, cv.y1], [cv.x0, cv.y1]])
    cv.polyline(box, "stroke:#555555;stroke-width:0.04", closed=True)


def _segment_polyline(cv: _Canvas, seg, ds: float = 0.05, style: Optional[str] = None) -> None:
    n = max(2, int(math.ceil(seg.length / ds)) + 1)
    pts = np.array([seg.pose_at(s)[:2] for s in np.linspace(0.0, seg.length, n)])
    cv.polyline(pts, style or SEGMENT_STYLE[seg.kind])


def _footprint(cv: _Canvas, scn: Scenario, pose: Pose, colour: str, opacity: float = 0.35) -> None:
    cv.polygon(footprint_at(scn.vehicle, pose), colour, stroke=colour, opacity=opacity)


def classify_samples(kappa: np.ndarray, tol: float = 1e-6) -> List[SegmentKind]:
    """Segment kind of each sample interval from the curvature at its ends."""
    kinds = []
    for a, b in zip(kappa[:-1], kappa[1:]):
        if abs(b - a) > tol:
            kinds.append(SegmentKind.CLOTHOID)
        elif abs(a) > tol:
            kinds.append(SegmentKind.ARC)
        else:
            kinds.append(SegmentKind.STRAIGHT)
    return kinds


def _tree_rows(cv: _Canvas, rows: np.ndarray) -> None:
    """Draw a tree dump (``branch_id, s, x, y, theta, kappa, ...``), one run per kind."""
    for bid in np.unique(rows[:, 0]):
        b = rows[rows[:, 0] == bid]
        kinds = classify_samples(b[:, 5])
        start = 0
        for i in range(1, len(kinds) + 1):
            if i == len(kinds) or kinds[i] != kinds[start]:
                cv.polyline(b[start:i + 1, 2:4], SEGMENT_STYLE[kinds[start]])
                start = i


def render_svg(scn: Scenario, path: Optional[Path] = None, target_tree=None, planner_tree=None,
               footprints_every: float = 0.0, title: str = "", scale: float = 30.0,
               tree_rows: Optional[np.ndarray] = None, path_rows: Optional[np.ndarray] = None) -> str:
    """SVG drawing of a scenario with any of: target tree, RRT* tree, path.

    Target-tree segments are coloured by kind (straight blue, clothoid amber,
    arc red). ``footprints_every`` > 0 draws the vehicle outline along the path
    at that spacing in metres. ``tree_rows`` / ``path_rows`` take the CSV dumps
    (tree: ``branch_id, s, x, y, theta, kappa, ...``; path: ``s, x, y, theta,
    kappa, direction``) in place of the objects.
    """
    cv = _Canvas(scn.bounds, scale)
    _grid(cv)
    for obs in scn.obstacles:
        cv.polygon(np.asarray(obs), "#4a5568", stroke="#2d3748", opacity=0.85)
    if planner_tree is not None:
        for i in range(1, len(planner_tree)):
            edge = planner_tree.edges[i]
            if edge is None or len(edge) == 0:
                continue
            for seg in Path.from_rows(edge).segments:
                _segment_polyline(cv, seg, ds=0.2, style="stroke:#a0aec0;stroke-width:0.02")
    if target_tree is not None:
        for b in target_tree.branches:
            for seg in b.path.segments:
                _segment_polyline(cv, seg)
        for g in target_tree.candidate_goals:
            cv.parts.append(f'<circle cx="{cv.xy(g.pose.x, g.pose.y).split(",")[0]}" '
                            f'cy="{cv.xy(g.pose.x, g.pose.y).split(",")[1]}" r="{0.06 * scale:.2f}" fill="#38a169"/>')
    if tree_rows is not None and len(tree_rows):
        _tree_rows(cv, np.asarray(tree_rows, dtype=float))
    if path_rows is not None and len(path_rows) > 1:
        cv.polyline(np.asarray(path_rows, dtype=float)[:, 1:3], "stroke:#1a202c;stroke-width:0.08")
    if path is not None and path.segments:
        if footprints_every > 0:
            for s in np.arange(0.0, path.total_length, footprints_every):
                _footprint(cv, scn, path.pose_at(float(s)), "#90cdf4", 0.15)
        for seg in path.segments:
            style = "stroke:#1a202c;stroke-width:0.08" if seg.direction > 0 else \
                "stroke:#805ad5;stroke-width:0.08;stroke-dasharray:6,4"
            _segment_polyline(cv, seg, style=style)
    _footprint(cv, scn, scn.q_init, "#3182ce", 0.5)
    _footprint(cv, scn, scn.q_goal, "#38a169", 0.5)
    if title:
        cv.text(cv.x0, cv.y1 + 0.3, title)
    return cv.svg()


def render_trajectory(scn: Scenario, trace: np.ndarray, path: Optional[Path] = None,
                      title: str = "", scale: float = 30.0) -> str:
    """SVG of a simulated rear-axle trace (columns t, x, y, ...) over the reference path."""
    svg = render_svg(scn, path=path, title=title, scale=scale)
    if len(trace) < 2:
        return svg
    cv = _Canvas(scn.bounds, scale)
    cv.polyline(trace[:, 1:3], "stroke:#e53e3e;stroke-width:0.04")
    return svg.replace("</svg>\n", "\n".join(cv.parts) + "\n</svg>\n")


def write_svg(text: str, out) -> None:
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(text)

