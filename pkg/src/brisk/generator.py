"""Random benchmark scenarios: obstacles plus collision-free waypoint chains.

Distribution (documented rather than matched to any external environment set):
unit workspace with 2-4 large wall-like obstacles (circles radius 0.08-0.2 or
convex hulls spanning 0.12-0.28). Two chain styles, half each: "dive" chains
whose early interior waypoint plunges to clearance 0.006-0.035 of an obstacle
and retreats steeply, and "tangent" chains whose first segment runs parallel
to a rectangular wall face about two deviation sigmas away. The remaining
waypoints keep a wide berth, so risk is dominated by the featured approach.
"""

import numpy as np

from .geometry import (Ball, Polygon, Segment, Workspace, ZeroClearance,
                       convex_hull, convex_pieces, min_distance)
from .process import NoiseModel, build_trajectory

_HUG_MIN = 0.006
_HUG_MAX = 0.035
_FAR_CLEARANCE = 0.16
_MIN_STEP = 0.22
_MAX_STEP = 0.55


def _random_obstacle(rng):
    """Large wall-like obstacles; deviating past their face usually hits them."""
    center = rng.uniform(0.2, 0.8, size=2)
    if rng.random() < 0.3:
        return Ball(center, rng.uniform(0.08, 0.2)), center
    radius = rng.uniform(0.12, 0.28)
    count = rng.integers(4, 9)
    pts = center + radius * rng.uniform(-1.0, 1.0, size=(count, 2))
    hull = convex_hull(pts)
    if hull.shape[0] < 3:
        return Ball(center, radius * 0.5), center
    return Polygon(hull), center


def _segment_clearance(p0, p1, pieces):
    seg = Segment(p0, p1)
    best = np.inf
    for piece in pieces:
        try:
            d, _, _ = min_distance(seg, piece)
        except ZeroClearance:
            return 0.0
        best = min(best, d)
    return best


def _point_clearance(point, pieces):
    probe = point + np.array([1e-6, 0.0])
    return _segment_clearance(point, probe, pieces)


def _sample_far_point(rng, pieces, anchor=None, retreat_from=None):
    for _ in range(160):
        if anchor is None:
            cand = rng.uniform(0.04, 0.96, size=2)
        else:
            angle = rng.uniform(0.0, 2.0 * np.pi)
            step = rng.uniform(_MIN_STEP, _MAX_STEP)
            cand = np.clip(anchor + step * np.array([np.cos(angle), np.sin(angle)]),
                           0.04, 0.96)
            if np.linalg.norm(cand - anchor) < 0.08:
                continue
            if retreat_from is not None:
                # leave the dived obstacle steeply, not tangentially
                away = anchor - retreat_from
                gap = np.linalg.norm(cand - anchor)
                cos = float((cand - anchor) @ away) / (gap * np.linalg.norm(away))
                if cos < 0.5:
                    continue
        if _point_clearance(cand, pieces) >= _FAR_CLEARANCE:
            return cand
    return None


def _sample_dive_point(rng, pieces, centers, anchor):
    """Waypoint close to a random obstacle, approached head-on from the anchor."""
    for _ in range(200):
        center = centers[rng.integers(len(centers))]
        angle = rng.uniform(0.0, 2.0 * np.pi)
        reach = rng.uniform(0.02, 0.22)
        cand = np.clip(center + reach * np.array([np.cos(angle), np.sin(angle)]),
                       0.02, 0.98)
        if not (_HUG_MIN <= _point_clearance(cand, pieces) <= _HUG_MAX):
            continue
        gap = np.linalg.norm(cand - anchor)
        if not (0.08 <= gap <= _MAX_STEP + 0.15):
            continue
        # steep approach: travel direction roughly toward the obstacle
        to_obs = center - cand
        head_on = float((cand - anchor) @ to_obs) / (gap * np.linalg.norm(to_obs))
        if head_on < 0.5:
            continue
        return cand, center
    return None


def _sample_chain(rng, pieces, centers, n_waypoints, dive_indices):
    start = _sample_far_point(rng, pieces)
    if start is None:
        return None
    chain = [start]
    dived_center = None
    for i in range(1, n_waypoints):
        if i in dive_indices:
            got = _sample_dive_point(rng, pieces, centers, chain[-1])
            if got is None:
                return None
            cand, dived_center = got
        else:
            cand = _sample_far_point(rng, pieces, anchor=chain[-1],
                                     retreat_from=dived_center)
            dived_center = None
        if cand is None:
            return None
        chain.append(cand)
    chain = np.array(chain)
    featured = set()
    for i in dive_indices:
        featured.update((i - 1, i))
    for j in range(n_waypoints - 1):
        clearance = _segment_clearance(chain[j], chain[j + 1], pieces)
        floor = _HUG_MIN if j in featured else 0.8 * _FAR_CLEARANCE
        if clearance < floor:
            return None
    return chain


def _rot(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _tangent_scenario(rng, noise_scale):
    """Wall rectangle with the first segment running parallel to a face."""
    run = rng.uniform(0.35, 0.65)
    depth = rng.uniform(0.12, 0.3)
    margin = rng.uniform(1.9, 2.7) * np.sqrt(run * noise_scale)
    angle = rng.uniform(0.0, np.pi)
    center = rng.uniform(0.35, 0.65, size=2)
    R = _rot(angle)
    normal = R @ np.array([0.0, 1.0])
    half = run / 2 + rng.uniform(0.02, 0.08)
    local_rect = np.array([[-half, -depth], [half, -depth], [half, 0.0], [-half, 0.0]])
    rect = center + local_rect @ R.T
    w0 = center + np.array([-run / 2, margin]) @ R.T
    w1 = center + np.array([run / 2, margin]) @ R.T
    if np.any(rect < 0.02) or np.any(rect > 0.98):
        return None
    if np.any(np.vstack([w0, w1]) < 0.04) or np.any(np.vstack([w0, w1]) > 0.96):
        return None
    wall = Polygon(rect)
    others = []
    for _ in range(int(rng.integers(1, 3))):
        obs, _ = _random_obstacle(rng)
        others.append(obs)
    obstacles = [wall] + others
    pieces = []
    for obs in obstacles:
        pieces.extend(convex_pieces(obs))
    if not (_HUG_MIN <= _segment_clearance(w0, w1, pieces) <= margin + 1e-9):
        return None
    chain = [w0, w1]
    # retreat leaves the wall steeply before the chain wanders on
    retreat_anchor = w1 - margin * normal
    for i in range(int(rng.integers(2, 6))):
        cand = _sample_far_point(rng, pieces, anchor=chain[-1],
                                 retreat_from=retreat_anchor if i == 0 else None)
        if cand is None:
            return None
        chain.append(cand)
    chain = np.array(chain)
    for j in range(1, chain.shape[0] - 1):
        floor = margin * 0.9 if j == 1 else 0.8 * _FAR_CLEARANCE
        if _segment_clearance(chain[j], chain[j + 1], pieces) < floor:
            return None
    return obstacles, chain


def _dive_scenario(rng):
    made = [_random_obstacle(rng) for _ in range(rng.integers(2, 5))]
    obstacles = [m[0] for m in made]
    centers = [m[1] for m in made]
    pieces = []
    for obs in obstacles:
        pieces.extend(convex_pieces(obs))
    n_waypoints = int(rng.integers(4, 9))
    # an early dive dominates the risk; sometimes add a later one
    dive_indices = {1 if rng.random() < 0.7 else 2}
    if n_waypoints > 4 and rng.random() < 0.4:
        dive_indices.add(int(rng.integers(3, n_waypoints - 1)))
    chain = _sample_chain(rng, pieces, centers, n_waypoints, dive_indices)
    if chain is None:
        return None
    return obstacles, chain


def random_scenario(seed, noise_scale=1e-3, speed=1.0):
    """(Workspace, PlannedTrajectory, NoiseModel) with a collision-free plan.

    Deterministic in the seed. Raises RuntimeError when no collision-free
    chain can be placed within the retry budget.
    """
    rng = np.random.default_rng(seed)
    tangent_style = rng.random() < 0.5
    for _ in range(200):
        made = (_tangent_scenario(rng, noise_scale) if tangent_style
                else _dive_scenario(rng))
        if made is None:
            continue
        obstacles, chain = made
        workspace = Workspace([0.0, 0.0], [1.0, 1.0], obstacles)
        traj = build_trajectory(chain, speed=speed)
        noise = NoiseModel(noise_scale * np.eye(2))
        return workspace, traj, noise
    raise RuntimeError(f"could not place a collision-free waypoint chain (seed {seed})")
