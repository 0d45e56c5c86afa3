"""Convex shapes, segment-obstacle clearance, separating hyperplanes, and
convex decomposition of simple polygons.

All functions are pure and operate on immutable inputs; they are safe to call
concurrently.
"""

from dataclasses import dataclass

import numpy as np

ZERO_CLEARANCE = 1e-9
_UNIT_TOL = 1e-12


class ZeroClearance(Exception):
    """Segment touches or penetrates the obstacle; no separating plane exists."""


class InvalidPolygon(Exception):
    """Polygon is self-intersecting, degenerate, or has fewer than 3 vertices."""


@dataclass(frozen=True)
class Polytope:
    """Convex hull of a non-empty vertex list in R^n."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 2:
            raise ValueError("polytope needs a non-empty vertex list in R^n, n >= 2")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self):
        return self.vertices.shape[1]


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.ndim != 1 or c.shape[0] < 2:
            raise ValueError("ball center must be a point in R^n, n >= 2")
        if not self.radius > 0.0:
            raise ValueError("ball radius must be strictly positive")
        object.__setattr__(self, "center", c)

    @property
    def dim(self):
        return self.center.shape[0]


@dataclass(frozen=True)
class Halfspace:
    """Obstacle over-approximation {x : normal . x >= offset}.

    Only valid as an obstacle; never passed to the bounded-set distance branch.
    """

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(a) - 1.0) > _UNIT_TOL:
            raise ValueError("halfspace normal must have unit norm")
        object.__setattr__(self, "normal", a)

    @property
    def dim(self):
        return self.normal.shape[0]


@dataclass(frozen=True)
class Polygon:
    """Simple (possibly non-convex) polygon obstacle in R^2.

    `convex_pieces` overrides the decomposition when provided.
    """

    vertices: np.ndarray
    convex_pieces: tuple = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise InvalidPolygon("polygon needs at least 3 vertices in R^2")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self):
        return 2


@dataclass(frozen=True)
class Segment:
    p0: np.ndarray
    p1: np.ndarray

    def __post_init__(self):
        p0 = np.asarray(self.p0, dtype=float)
        p1 = np.asarray(self.p1, dtype=float)
        if np.array_equal(p0, p1):
            raise ValueError("zero-length segment")
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)


@dataclass(frozen=True)
class SeparatingHyperplane:
    """Plane a.x - b = 0 with the obstacle in {a.x - b >= 0}.

    `clearance` is the segment-obstacle minimum distance; `y_obstacle` /
    `y_segment` are the witness points attaining it.
    """

    normal: np.ndarray
    offset: float
    clearance: float
    y_obstacle: np.ndarray
    y_segment: np.ndarray


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned bounds plus the obstacle set."""

    lo: np.ndarray
    hi: np.ndarray
    obstacles: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def convex_pieces(self):
        """(obstacle_index, ConvexShape) pairs covering every obstacle."""
        out = []
        for i, obs in enumerate(self.obstacles):
            for piece in convex_pieces(obs):
                out.append((i, piece))
        return out


# ---------------------------------------------------------------------------
# minimum distance
# ---------------------------------------------------------------------------

def _closest_on_segment(p0, p1, point):
    u = p1 - p0
    t = float(np.dot(point - p0, u) / np.dot(u, u))
    t = min(max(t, 0.0), 1.0)
    return p0 + t * u


def _min_norm_in_simplex(W):
    """Min-norm point of conv(rows of W): (point, weights, kept row indices)."""
    k = W.shape[0]
    best = None
    for mask in range(1, 1 << k):
        idx = [i for i in range(k) if (mask >> i) & 1]
        S = W[idx]
        m = len(idx)
        A = np.empty((m + 1, m + 1))
        A[:m, :m] = S @ S.T
        A[:m, m] = 1.0
        A[m, :m] = 1.0
        A[m, m] = 0.0
        rhs = np.zeros(m + 1)
        rhs[m] = 1.0
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            continue
        lam = sol[:m]
        if np.any(lam < -1e-12):
            continue
        pt = lam @ S
        d2 = float(pt @ pt)
        if best is None or d2 < best[0] - 1e-18:
            best = (d2, pt, np.maximum(lam, 0.0), idx)
    return best[1], best[2], best[3]


def _gjk_segment_polytope(seg, poly_vertices, max_iter=200):
    """Support-function distance iteration on the Minkowski difference."""
    pv = poly_vertices
    sv = np.vstack([seg.p0, seg.p1])

    def support(direction):
        i = int(np.argmax(pv @ direction))
        j = int(np.argmax(sv @ -direction))
        return pv[i] - sv[j], pv[i], sv[j]

    d0 = pv.mean(axis=0) - sv.mean(axis=0)
    if not np.any(d0):
        d0 = np.zeros(pv.shape[1])
        d0[0] = 1.0
    w, p, q = support(-d0)
    W = [w]
    P = [p]
    Q = [q]
    lam = np.array([1.0])
    for _ in range(max_iter):
        v, lam, keep = _min_norm_in_simplex(np.vstack(W))
        W = [W[i] for i in keep]
        P = [P[i] for i in keep]
        Q = [Q[i] for i in keep]
        v2 = float(v @ v)
        if v2 <= 1e-24:
            return 0.0, P[0], Q[0]
        s, p, q = support(-v)
        if v2 - float(v @ s) <= 1e-14 * v2:
            break
        if any(np.array_equal(s, wi) for wi in W):
            break
        W.append(s)
        P.append(p)
        Q.append(q)
        lam = np.append(lam, 0.0)
    lam = lam / lam.sum()
    y1 = lam @ np.vstack(P)
    y2 = lam @ np.vstack(Q)
    return float(np.linalg.norm(y1 - y2)), y1, y2


def min_distance(seg, obs):
    """Minimum distance between a path segment and a convex obstacle.

    Returns (d, y1, y2) with y1 on the obstacle and y2 on the segment
    attaining the minimum. Raises ZeroClearance when d <= 1e-9 (contact or
    penetration), in which case the caller must treat the segment risk as 1.
    """
    if isinstance(obs, Ball):
        y2 = _closest_on_segment(seg.p0, seg.p1, obs.center)
        gap = obs.center - y2
        dist_c = float(np.linalg.norm(gap))
        d = dist_c - obs.radius
        if d <= ZERO_CLEARANCE:
            raise ZeroClearance(f"segment-ball clearance {d:.3e}")
        y1 = obs.center - obs.radius * (gap / dist_c)
        return d, y1, y2
    if isinstance(obs, Halfspace):
        m0 = float(obs.normal @ seg.p0)
        m1 = float(obs.normal @ seg.p1)
        d = obs.offset - max(m0, m1)
        if d <= ZERO_CLEARANCE:
            raise ZeroClearance(f"segment-halfspace clearance {d:.3e}")
        y2 = seg.p0 if m0 >= m1 else seg.p1
        y1 = y2 + d * obs.normal
        return d, np.asarray(y1), np.asarray(y2)
    if isinstance(obs, Polytope):
        d, y1, y2 = _gjk_segment_polytope(seg, obs.vertices)
        if d <= ZERO_CLEARANCE:
            raise ZeroClearance(f"segment-polytope clearance {d:.3e}")
        return d, y1, y2
    raise TypeError(f"unsupported obstacle type {type(obs).__name__}")


def separating_hyperplane(seg, obs):
    """Least-conservative plane through the obstacle-side witness point.

    The normal points from the segment toward the obstacle, so the obstacle
    lies in {a.x - b >= 0} and a.y2 - b = -d.
    """
    d, y1, y2 = min_distance(seg, obs)
    a = (y1 - y2) / d
    b = float(a @ y1)
    return SeparatingHyperplane(normal=a, offset=b, clearance=d,
                                y_obstacle=y1, y_segment=y2)


# ---------------------------------------------------------------------------
# polygon utilities
# ---------------------------------------------------------------------------

def shoelace_area(vertices):
    """Signed area; positive for counter-clockwise orientation."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def convex_hull(points):
    """Andrew monotone chain; returns hull vertices counter-clockwise."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if pts.shape[0] <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _orient(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = build(pts)
    upper = build(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def _orient(p, q, r):
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r):
    return (min(p[0], q[0]) - 1e-12 <= r[0] <= max(p[0], q[0]) + 1e-12
            and min(p[1], q[1]) - 1e-12 <= r[1] <= max(p[1], q[1]) + 1e-12)


def _segments_intersect(p1, q1, p2, q2):
    o1 = _orient(p1, q1, p2)
    o2 = _orient(p1, q1, q2)
    o3 = _orient(p2, q2, p1)
    o4 = _orient(p2, q2, q1)
    if ((o1 > 0) != (o2 > 0) and o1 != 0 and o2 != 0
            and (o3 > 0) != (o4 > 0) and o3 != 0 and o4 != 0):
        return True
    if o1 == 0 and _on_segment(p1, q1, p2):
        return True
    if o2 == 0 and _on_segment(p1, q1, q2):
        return True
    if o3 == 0 and _on_segment(p2, q2, p1):
        return True
    if o4 == 0 and _on_segment(p2, q2, q1):
        return True
    return False


def _validate_simple(v):
    m = v.shape[0]
    if m < 3:
        raise InvalidPolygon("fewer than 3 vertices")
    for i in range(m):
        if np.array_equal(v[i], v[(i + 1) % m]):
            raise InvalidPolygon("repeated consecutive vertices")
    if abs(shoelace_area(v)) < 1e-15:
        raise InvalidPolygon("polygon has zero area")
    for k in range(m):
        a, b, c = v[k - 1], v[k], v[(k + 1) % m]
        if _orient(a, b, c) == 0 and float(np.dot(a - b, c - b)) > 0:
            raise InvalidPolygon("degenerate spike")
    for i in range(m):
        p1, q1 = v[i], v[(i + 1) % m]
        for j in range(i + 1, m):
            if (j + 1) % m == i or (i + 1) % m == j:
                continue
            p2, q2 = v[j], v[(j + 1) % m]
            if _segments_intersect(p1, q1, p2, q2):
                raise InvalidPolygon("self-intersecting polygon")


def is_convex_polygon(vertices, tol=1e-12):
    """True when every turn has the same sign (collinear vertices allowed)."""
    v = np.asarray(vertices, dtype=float)
    m = v.shape[0]
    sign = 0
    for i in range(m):
        c = _orient(v[i], v[(i + 1) % m], v[(i + 2) % m])
        if abs(c) <= tol:
            continue
        s = 1 if c > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True


def _point_in_triangle(p, a, b, c):
    d1 = _orient(a, b, p)
    d2 = _orient(b, c, p)
    d3 = _orient(c, a, p)
    neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
    pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
    return not (neg and pos)


def _triangulate_ccw(v):
    """Ear clipping on a CCW simple polygon; returns index triples."""
    m = v.shape[0]
    idx = list(range(m))
    tris = []
    while len(idx) > 3:
        n_cur = len(idx)
        clipped = False
        # pass 1: drop straight (collinear) vertices, they carry no geometry
        for k in range(n_cur):
            a, b, c = idx[k - 1], idx[k], idx[(k + 1) % n_cur]
            cr = _orient(v[a], v[b], v[c])
            if abs(cr) <= 1e-14 and float(np.dot(v[a] - v[b], v[c] - v[b])) < 0:
                idx.pop(k)
                clipped = True
                break
        if clipped:
            continue
        for k in range(n_cur):
            a, b, c = idx[k - 1], idx[k], idx[(k + 1) % n_cur]
            if _orient(v[a], v[b], v[c]) <= 1e-14:
                continue
            blocked = False
            for other in idx:
                if other in (a, b, c):
                    continue
                if _point_in_triangle(v[other], v[a], v[b], v[c]):
                    blocked = True
                    break
            if not blocked:
                tris.append((a, b, c))
                idx.pop(k)
                clipped = True
                break
        if not clipped:
            raise InvalidPolygon("ear clipping failed; polygon is not simple")
    tris.append(tuple(idx))
    return tris


def _merged_cycle(pa, pb, u, v):
    """Join two CCW cycles sharing directed edge u->v in pa (v->u in pb)."""
    ia = pa.index(v)
    a_seq = pa[ia:] + pa[:ia]          # starts at v, ends at u
    ib = pb.index(u)
    b_seq = pb[ib:] + pb[:ib]          # starts at u, ends at v
    return a_seq + b_seq[1:-1]


def _cycle_convex(cycle, v, seam):
    m = len(cycle)
    for k in range(m):
        cr = _orient(v[cycle[k - 1]], v[cycle[k]], v[cycle[(k + 1) % m]])
        if cycle[k] in seam:
            if cr <= 1e-14:
                return False
        elif cr < -1e-12:
            return False
    return True


def _merge_convex_pieces(tris, v):
    """Greedy edge-removal merge, smallest combined area first."""
    pieces = {i: list(t) for i, t in enumerate(tris)}
    areas = {i: abs(shoelace_area(v[t, :])) for i, t in enumerate(tris)}

    def edge_map():
        em = {}
        for pid, cyc in pieces.items():
            for k in range(len(cyc)):
                em[(cyc[k], cyc[(k + 1) % len(cyc)])] = pid
        return em

    while True:
        em = edge_map()
        best = None
        for (a, b), pid in em.items():
            qid = em.get((b, a))
            if qid is None or qid == pid:
                continue
            if pid > qid:
                continue
            merged = _merged_cycle(pieces[pid], pieces[qid], a, b)
            if not _cycle_convex(merged, v, seam=(a, b)):
                continue
            score = (areas[pid] + areas[qid], pid, qid)
            if best is None or score < best[0]:
                best = (score, pid, qid, merged)
        if best is None:
            return [pieces[k] for k in sorted(pieces)]
        _, pid, qid, merged = best
        pieces[pid] = merged
        areas[pid] = abs(shoelace_area(v[merged, :]))
        del pieces[qid]
        del areas[qid]


def decompose_nonconvex(vertices):
    """Partition a simple polygon into convex pieces that tile it exactly.

    A convex input is returned unchanged as a single piece; otherwise the
    polygon is ear-clipped and adjacent pieces are greedily merged while the
    union stays convex.
    """
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise InvalidPolygon("expected an (m, 2) vertex array")
    _validate_simple(v)
    if is_convex_polygon(v):
        return [Polytope(v.copy())]
    if shoelace_area(v) < 0:
        v = v[::-1].copy()
    tris = _triangulate_ccw(v)
    cycles = _merge_convex_pieces(tris, v)
    return [Polytope(v[c, :].copy()) for c in cycles]


def convex_pieces(obstacle):
    """Convex cover of an obstacle: pieces tiling a Polygon, or the shape itself."""
    if isinstance(obstacle, (Ball, Halfspace, Polytope)):
        return [obstacle]
    if isinstance(obstacle, Polygon):
        if obstacle.convex_pieces is not None:
            return list(obstacle.convex_pieces)
        return decompose_nonconvex(obstacle.vertices)
    raise TypeError(f"unsupported obstacle type {type(obstacle).__name__}")


# ---------------------------------------------------------------------------
# membership (exact, closed sets)
# ---------------------------------------------------------------------------

def contains(shape, point):
    p = np.asarray(point, dtype=float)
    if isinstance(shape, Ball):
        return float(np.sum((p - shape.center) ** 2)) <= shape.radius ** 2
    if isinstance(shape, Halfspace):
        return float(shape.normal @ p) >= shape.offset
    if isinstance(shape, Polytope):
        if shape.dim != 2:
            raise NotImplementedError("polytope membership implemented for R^2")
        hull = convex_hull(shape.vertices)
        if hull.shape[0] == 1:
            return bool(np.allclose(hull[0], p))
        if hull.shape[0] == 2:
            return _orient(hull[0], hull[1], p) == 0 and _on_segment(hull[0], hull[1], p)
        m = hull.shape[0]
        for i in range(m):
            if _orient(hull[i], hull[(i + 1) % m], p) < 0:
                return False
        return True
    if isinstance(shape, Polygon):
        return any(contains(piece, p) for piece in convex_pieces(shape))
    raise TypeError(f"unsupported shape type {type(shape).__name__}")
