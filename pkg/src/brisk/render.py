"""SVG rendering of scenarios: workspace, obstacles, plan, confidence ellipses."""

import math

import numpy as np
from scipy.stats import chi2

from .geometry import Ball, Halfspace, Polygon, Polytope


def confidence_ellipse(cov, level):
    """Semi-axes and rotation (radians) of the given-mass ellipse of a 2-D cov."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2):
        raise ValueError("confidence ellipses are 2-D")
    q = chi2.ppf(level, df=2)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)
    semi = np.sqrt(eigvals * q)
    angle = math.atan2(eigvecs[1, 1], eigvecs[0, 1])
    return np.array([semi[1], semi[0]]), angle


def _ellipse_svg(center, semi, angle, color, sx, sy, t):
    cx, cy = t(center)
    rx = semi[0] * sx
    ry = semi[1] * sy
    deg = -math.degrees(angle)
    return (f'<ellipse cx="{cx:.2f}" cy="{cy:.2f}" rx="{max(rx, 0.2):.2f}" '
            f'ry="{max(ry, 0.2):.2f}" transform="rotate({deg:.2f} {cx:.2f} {cy:.2f})" '
            f'fill="none" stroke="{color}" stroke-width="1"/>')


def render_svg(workspace, traj, sched, levels=(0.95,), intermediate=3, size=640):
    """SVG drawing of the scenario with confidence ellipses along the plan.

    Ellipses at waypoint times are black; intermediate-time ellipses are blue.
    """
    lo, hi = workspace.lo, workspace.hi
    span = hi - lo
    pad = 0.05 * float(span.max())
    sx = size / (span[0] + 2 * pad)
    sy = size / (span[1] + 2 * pad)

    def t(p):
        return ((p[0] - lo[0] + pad) * sx, size - (p[1] - lo[1] + pad) * sy)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    x0, y0 = t(lo)
    x1, y1 = t(hi)
    parts.append(f'<rect x="{min(x0, x1):.2f}" y="{min(y0, y1):.2f}" '
                 f'width="{abs(x1 - x0):.2f}" height="{abs(y1 - y0):.2f}" '
                 f'fill="none" stroke="black" stroke-width="1.5"/>')

    for obs in workspace.obstacles:
        if isinstance(obs, (Polygon, Polytope)):
            pts = " ".join(f"{t(v)[0]:.2f},{t(v)[1]:.2f}" for v in obs.vertices)
            parts.append(f'<polygon points="{pts}" fill="#e06060" '
                         f'fill-opacity="0.75" stroke="darkred"/>')
        elif isinstance(obs, Ball):
            cx, cy = t(obs.center)
            parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{obs.radius * sx:.2f}" '
                         f'fill="#e06060" fill-opacity="0.75" stroke="darkred"/>')
        elif isinstance(obs, Halfspace):
            continue

    path_pts = " ".join(f"{t(w)[0]:.2f},{t(w)[1]:.2f}" for w in traj.waypoints)
    parts.append(f'<polyline points="{path_pts}" fill="none" stroke="black" '
                 f'stroke-width="1.5"/>')

    times = traj.times
    for level in levels:
        for j in range(traj.n_segments):
            for k in range(1, intermediate + 1):
                tt = times[j] + k * traj.durations[j] / (intermediate + 1)
                semi, ang = confidence_ellipse(sched.at_time(tt), level)
                parts.append(_ellipse_svg(traj.position(tt), semi, ang,
                                          "#4060d0", sx, sy, t))
        for j in range(1, traj.n_segments + 1):
            semi, ang = confidence_ellipse(sched.at_waypoint(j), level)
            parts.append(_ellipse_svg(traj.waypoints[j], semi, ang,
                                      "black", sx, sy, t))

    for j, w in enumerate(traj.waypoints):
        cx, cy = t(w)
        color = "red" if j == 0 else "black"
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="{color}"/>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
