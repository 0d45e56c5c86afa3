"""Hot numerical kernels: path simulation, collision counting, and the
quasi-Monte Carlo stage of the multivariate normal integrator.

Two interchangeable backends are provided. When numba imports cleanly the
jitted kernels are used; setting the environment variable BRISK_PURE_NUMPY=1
(before import) forces the vectorized numpy fallbacks. `BACKEND` reports the
active choice and `benchmarks/kernel_benchmark.py` compares the two.

Random-number scheme (fixed so results are reproducible and independent of
thread count): path k draws from its own counter-based substream, a
splitmix64 generator whose initial state is mix64(mix64(seed) ^ ((k+1) *
GAMMA)). Uniforms are (raw >> 11 + 1) * 2^-53 in (0, 1]; standard normals
come from consecutive uniforms via the Box-Muller transform. The same layout
is implemented by both backends, so estimates agree statistically (bitwise
agreement is not promised across backends).
"""

import math
import os

import numpy as np

_FORCE_NUMPY = os.environ.get("BRISK_PURE_NUMPY", "").strip().lower() in {"1", "true", "yes"}

NUMBA_ENABLED = False
if not _FORCE_NUMPY:
    try:
        from numba import njit, prange

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

BACKEND = "numba" if NUMBA_ENABLED else "numpy"

# splitmix64 constants
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO53 = 2.0 ** -53
_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# numpy backend: RNG streams (vectorized across paths)
# ---------------------------------------------------------------------------

def _np_mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def np_stream_init(seed, path_indices):
    """Initial splitmix64 states for the given path indices."""
    seed_arr = np.full(path_indices.shape, np.uint64(seed), dtype=np.uint64)
    k = path_indices.astype(np.uint64)
    return _np_mix64(_np_mix64(seed_arr) ^ ((k + _ONE) * _GAMMA))


def np_next_unit(states):
    """Advance states in place, return uniforms in (0, 1]."""
    states += _GAMMA
    return ((_np_mix64(states) >> _S11) + _ONE).astype(np.float64) * _TWO53


def np_normal_pair(states):
    u1 = np_next_unit(states)
    u2 = np_next_unit(states)
    r = np.sqrt(-2.0 * np.log(u1))
    return r * np.cos(_TWO_PI * u2), r * np.sin(_TWO_PI * u2)


# ---------------------------------------------------------------------------
# membership tests (numpy backend; the numba twins live inside the kernels)
# ---------------------------------------------------------------------------

def _np_points_in_pieces(pts, poly_verts, poly_offsets, ball_centers, ball_radii,
                         half_normals, half_offsets):
    """Boolean mask: which points lie in any convex piece (closed sets)."""
    m = pts.shape[0]
    hit = np.zeros(m, dtype=bool)
    for p in range(poly_offsets.shape[0] - 1):
        v = poly_verts[poly_offsets[p]:poly_offsets[p + 1]]
        inside = ~hit
        if not inside.any():
            break
        cand = pts[inside]
        ok = np.ones(cand.shape[0], dtype=bool)
        for i in range(v.shape[0]):
            a = v[i]
            b = v[(i + 1) % v.shape[0]]
            ex, ey = b[0] - a[0], b[1] - a[1]
            cross = ex * (cand[:, 1] - a[1]) - ey * (cand[:, 0] - a[0])
            ok &= cross >= 0.0
            if not ok.any():
                break
        hit[np.flatnonzero(inside)[ok]] = True
    for b in range(ball_centers.shape[0]):
        d2 = np.sum((pts - ball_centers[b]) ** 2, axis=1)
        hit |= d2 <= ball_radii[b] ** 2
    for h in range(half_normals.shape[0]):
        hit |= pts @ half_normals[h] >= half_offsets[h]
    return hit


# ---------------------------------------------------------------------------
# numpy backend: Euler-Maruyama collision indicators
# ---------------------------------------------------------------------------

def np_mc_collisions(waypoints, durations, r_d, chol_R, poly_verts, poly_offsets,
                     ball_centers, ball_radii, half_normals, half_offsets,
                     seed, n_paths):
    n = waypoints.shape[1]
    n_segments = waypoints.shape[0] - 1
    indicators = np.zeros(n_paths, dtype=np.uint8)

    start_hit = _np_points_in_pieces(
        waypoints[0][None, :], poly_verts, poly_offsets, ball_centers,
        ball_radii, half_normals, half_offsets)
    if start_hit[0]:
        indicators[:] = 1
        return indicators

    states = np_stream_init(seed, np.arange(n_paths, dtype=np.uint64))
    pos = np.tile(waypoints[0], (n_paths, 1))
    active = np.arange(n_paths)
    n_pairs = (n + 1) // 2
    z = np.empty((n_paths, 2 * n_pairs))

    for j in range(n_segments):
        drift = (waypoints[j + 1] - waypoints[j]) / r_d
        sq_dt = math.sqrt(durations[j] / r_d)
        for _ in range(r_d):
            if active.size == 0:
                return indicators
            st = states[active]
            for p in range(n_pairs):
                z0, z1 = np_normal_pair(st)
                z[:active.size, 2 * p] = z0
                z[:active.size, 2 * p + 1] = z1
            states[active] = st
            pos[active] += drift + sq_dt * (z[:active.size, :n] @ chol_R.T)
            hit = _np_points_in_pieces(
                pos[active], poly_verts, poly_offsets, ball_centers,
                ball_radii, half_normals, half_offsets)
            if hit.any():
                indicators[active[hit]] = 1
                active = active[~hit]
    return indicators


def np_stream_positions(waypoints, durations, r_d, chol_R, seed, n_paths):
    """Yield (t, positions) for every substep, same draws as np_mc_collisions."""
    n = waypoints.shape[1]
    n_segments = waypoints.shape[0] - 1
    states = np_stream_init(seed, np.arange(n_paths, dtype=np.uint64))
    pos = np.tile(waypoints[0], (n_paths, 1))
    n_pairs = (n + 1) // 2
    t = 0.0
    yield t, pos.copy()
    for j in range(n_segments):
        drift = (waypoints[j + 1] - waypoints[j]) / r_d
        dt = durations[j] / r_d
        sq_dt = math.sqrt(dt)
        for _ in range(r_d):
            z = np.empty((n_paths, 2 * n_pairs))
            for p in range(n_pairs):
                z0, z1 = np_normal_pair(states)
                z[:, 2 * p] = z0
                z[:, 2 * p + 1] = z1
            pos += drift + sq_dt * (z[:, :n] @ chol_R.T)
            t += dt
            yield t, pos.copy()


# ---------------------------------------------------------------------------
# numpy backend: 1-D Brownian running-maximum indicators
# ---------------------------------------------------------------------------

def np_sup_hits(threshold, sigma_step, n_steps, seed, n_paths):
    if threshold <= 0.0:
        return np.ones(n_paths, dtype=np.uint8)
    states = np_stream_init(seed, np.arange(n_paths, dtype=np.uint64))
    w = np.zeros(n_paths)
    hit = np.zeros(n_paths, dtype=np.uint8)
    steps_done = 0
    while steps_done < n_steps:
        z0, z1 = np_normal_pair(states)
        w += sigma_step * z0
        hit |= w >= threshold
        steps_done += 1
        if steps_done < n_steps:
            w += sigma_step * z1
            hit |= w >= threshold
            steps_done += 1
    return hit


# ---------------------------------------------------------------------------
# numpy backend: QMC stage for the MVN rectangle integrator
# ---------------------------------------------------------------------------

def np_qmc_stage(cho, lo, hi, q, shifts, m0, m_count):
    """Partial sums per randomization shift for lattice points m0..m0+m_count-1.

    `cho` is the permuted scaled Cholesky factor; `lo`/`hi` the transformed
    bounds (may be +-inf); `q` the (dim-1,) lattice generator; `shifts` the
    (n_shifts, dim-1) randomization offsets.
    """
    from scipy.special import ndtr, ndtri

    dim = cho.shape[0]
    n_shifts = shifts.shape[0]
    out = np.empty(n_shifts)
    c0 = ndtr(lo[0]) if np.isfinite(lo[0]) else (0.0 if lo[0] < 0 else 1.0)
    d0 = ndtr(hi[0]) if np.isfinite(hi[0]) else (0.0 if hi[0] < 0 else 1.0)
    idx = np.arange(m0 + 1, m0 + m_count + 1, dtype=np.float64)
    y = np.empty((dim - 1, m_count))
    for s in range(n_shifts):
        c = np.full(m_count, c0)
        dc = np.full(m_count, d0 - c0)
        pv = dc.copy()
        for i in range(1, dim):
            zv = q[i - 1] * idx + shifts[s, i - 1]
            zv -= np.floor(zv)
            x = np.abs(2.0 * zv - 1.0)
            u = np.clip(c + x * dc, 1e-16, 1.0 - 1e-16)
            y[i - 1] = ndtri(u)
            sdot = cho[i, :i] @ y[:i]
            ct = cho[i, i]
            if ct > 0.0:
                cl = ndtr((lo[i] - sdot) / ct) if np.isfinite(lo[i]) else np.full(m_count, 0.0 if lo[i] < 0 else 1.0)
                dl = ndtr((hi[i] - sdot) / ct) if np.isfinite(hi[i]) else np.full(m_count, 0.0 if hi[i] < 0 else 1.0)
            else:
                cl = np.where(lo[i] - sdot > 0.0, 1.0, 0.0)
                dl = np.where(hi[i] - sdot >= 0.0, 1.0, 0.0)
            c = cl
            dc = dl - cl
            pv = pv * dc
        out[s] = pv.sum()
    return out


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @njit(cache=True, nogil=True, inline="always")
    def _mix64(z):
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        return z ^ (z >> _S31)

    @njit(cache=True, nogil=True, inline="always")
    def _stream_init(seed, k):
        return _mix64(_mix64(seed) ^ ((np.uint64(k) + _ONE) * _GAMMA))

    @njit(cache=True, nogil=True, inline="always")
    def _next_unit(state):
        state = state + _GAMMA
        return state, float((_mix64(state) >> _S11) + _ONE) * _TWO53

    @njit(cache=True, nogil=True)
    def _point_in_pieces(pt, poly_verts, poly_offsets, poly_bbox,
                         ball_centers, ball_radii, half_normals, half_offsets):
        for p in range(poly_offsets.shape[0] - 1):
            if (pt[0] < poly_bbox[p, 0] or pt[0] > poly_bbox[p, 2]
                    or pt[1] < poly_bbox[p, 1] or pt[1] > poly_bbox[p, 3]):
                continue
            lo = poly_offsets[p]
            hi = poly_offsets[p + 1]
            inside = True
            for i in range(lo, hi):
                ax = poly_verts[i, 0]
                ay = poly_verts[i, 1]
                j = i + 1 if i + 1 < hi else lo
                if ((poly_verts[j, 0] - ax) * (pt[1] - ay)
                        - (poly_verts[j, 1] - ay) * (pt[0] - ax)) < 0.0:
                    inside = False
                    break
            if inside:
                return True
        for b in range(ball_centers.shape[0]):
            d2 = 0.0
            for c in range(ball_centers.shape[1]):
                diff = pt[c] - ball_centers[b, c]
                d2 += diff * diff
            if d2 <= ball_radii[b] * ball_radii[b]:
                return True
        for h in range(half_normals.shape[0]):
            dot = 0.0
            for c in range(half_normals.shape[1]):
                dot += pt[c] * half_normals[h, c]
            if dot >= half_offsets[h]:
                return True
        return False

    @njit(cache=True, nogil=True, parallel=True)
    def nb_mc_collisions(waypoints, durations, r_d, chol_R, poly_verts,
                         poly_offsets, poly_bbox, ball_centers, ball_radii,
                         half_normals, half_offsets, seed, n_paths):
        n = waypoints.shape[1]
        n_segments = waypoints.shape[0] - 1
        indicators = np.zeros(n_paths, dtype=np.uint8)
        if _point_in_pieces(waypoints[0], poly_verts, poly_offsets, poly_bbox,
                            ball_centers, ball_radii, half_normals, half_offsets):
            indicators[:] = 1
            return indicators
        n_pairs = (n + 1) // 2
        for k in prange(n_paths):
            state = _stream_init(seed, np.uint64(k))
            pos = waypoints[0].copy()
            z = np.empty(2 * n_pairs)
            hit = False
            for j in range(n_segments):
                sq_dt = math.sqrt(durations[j] / r_d)
                for _ in range(r_d):
                    for p in range(n_pairs):
                        state, u1 = _next_unit(state)
                        state, u2 = _next_unit(state)
                        r = math.sqrt(-2.0 * math.log(u1))
                        z[2 * p] = r * math.cos(_TWO_PI * u2)
                        z[2 * p + 1] = r * math.sin(_TWO_PI * u2)
                    for c in range(n):
                        step = 0.0
                        for c2 in range(n):
                            step += chol_R[c, c2] * z[c2]
                        pos[c] += (waypoints[j + 1, c] - waypoints[j, c]) / r_d + sq_dt * step
                    if _point_in_pieces(pos, poly_verts, poly_offsets, poly_bbox,
                                        ball_centers, ball_radii,
                                        half_normals, half_offsets):
                        hit = True
                        break
                if hit:
                    break
            indicators[k] = np.uint8(1) if hit else np.uint8(0)
        return indicators

    @njit(cache=True, nogil=True, parallel=True)
    def nb_sup_hits(threshold, sigma_step, n_steps, seed, n_paths):
        hits = np.zeros(n_paths, dtype=np.uint8)
        if threshold <= 0.0:
            hits[:] = 1
            return hits
        for k in prange(n_paths):
            state = _stream_init(seed, np.uint64(k))
            w = 0.0
            hit = False
            steps_done = 0
            while steps_done < n_steps:
                state, u1 = _next_unit(state)
                state, u2 = _next_unit(state)
                r = math.sqrt(-2.0 * math.log(u1))
                w += sigma_step * (r * math.cos(_TWO_PI * u2))
                steps_done += 1
                if w >= threshold:
                    hit = True
                    break
                if steps_done < n_steps:
                    w += sigma_step * (r * math.sin(_TWO_PI * u2))
                    steps_done += 1
                    if w >= threshold:
                        hit = True
                        break
            hits[k] = np.uint8(1) if hit else np.uint8(0)
        return hits

    @njit(cache=True, nogil=True, inline="always")
    def _phi(x):
        return 0.5 * math.erfc(-x * 0.7071067811865475)

    @njit(cache=True, nogil=True)
    def _phinv(p):
        # Wichura's AS 241 (PPND16): double-precision normal quantile.
        q = p - 0.5
        if abs(q) <= 0.425:
            r = 0.180625 - q * q
            num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                        + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                      + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                    + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
            den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                        + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                      + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                    + 4.2313330701600911252e1) * r + 1.0)
            return q * num / den
        if q < 0.0:
            r = p
        else:
            r = 1.0 - p
        if r <= 0.0:
            return -math.inf if q < 0.0 else math.inf
        r = math.sqrt(-math.log(r))
        if r <= 5.0:
            r = r - 1.6
            num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                        + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                      + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                    + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
            den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                        + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                      + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                    + 2.05319162663775882187e0) * r + 1.0)
        else:
            r = r - 5.0
            num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                        + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                      + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                    + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
            den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                        + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                      + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                    + 5.99832206555887937690e-1) * r + 1.0)
        val = num / den
        return -val if q < 0.0 else val

    @njit(cache=True, nogil=True)
    def nb_qmc_stage(cho, lo, hi, q, shifts, m0, m_count):
        dim = cho.shape[0]
        n_shifts = shifts.shape[0]
        out = np.empty(n_shifts)
        # hoist bound classification out of the hot loop
        # 0: finite, 1: -inf (phi = 0), 2: +inf (phi = 1)
        lo_kind = np.zeros(dim, dtype=np.int8)
        hi_kind = np.zeros(dim, dtype=np.int8)
        for i in range(dim):
            if math.isinf(lo[i]):
                lo_kind[i] = 1 if lo[i] < 0 else 2
            if math.isinf(hi[i]):
                hi_kind[i] = 1 if hi[i] < 0 else 2
        c0 = _phi(lo[0]) if lo_kind[0] == 0 else (0.0 if lo_kind[0] == 1 else 1.0)
        d0 = _phi(hi[0]) if hi_kind[0] == 0 else (0.0 if hi_kind[0] == 1 else 1.0)
        dc0 = d0 - c0
        y = np.empty(dim - 1)
        for s in range(n_shifts):
            acc = 0.0
            for m in range(m0 + 1, m0 + m_count + 1):
                c = c0
                dc = dc0
                pv = dc
                for i in range(1, dim):
                    zv = q[i - 1] * m + shifts[s, i - 1]
                    zv -= math.floor(zv)
                    x = abs(2.0 * zv - 1.0)
                    u = c + x * dc
                    if u < 1e-16:
                        u = 1e-16
                    elif u > 1.0 - 1e-16:
                        u = 1.0 - 1e-16
                    y[i - 1] = _phinv(u)
                    sdot = 0.0
                    for i2 in range(i):
                        sdot += cho[i, i2] * y[i2]
                    ct = cho[i, i]
                    if ct > 0.0:
                        if lo_kind[i] == 0:
                            cl = _phi((lo[i] - sdot) / ct)
                        else:
                            cl = 0.0 if lo_kind[i] == 1 else 1.0
                        if hi_kind[i] == 0:
                            dl = _phi((hi[i] - sdot) / ct)
                        else:
                            dl = 0.0 if hi_kind[i] == 1 else 1.0
                    else:
                        cl = 1.0 if lo[i] - sdot > 0.0 else 0.0
                        dl = 1.0 if hi[i] - sdot >= 0.0 else 0.0
                    c = cl
                    dc = dl - cl
                    pv *= dc
                acc += pv
            out[s] = acc
        return out


# ---------------------------------------------------------------------------
# public dispatch
# ---------------------------------------------------------------------------

def mc_collisions(waypoints, durations, r_d, chol_R, poly_verts, poly_offsets,
                  ball_centers, ball_radii, half_normals, half_offsets,
                  seed, n_paths):
    """Collision indicator per path for the Euler-Maruyama fine grid."""
    if NUMBA_ENABLED:
        n_polys = poly_offsets.shape[0] - 1
        bbox = np.empty((n_polys, 4))
        for p in range(n_polys):
            v = poly_verts[poly_offsets[p]:poly_offsets[p + 1]]
            bbox[p] = (v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max())
        return nb_mc_collisions(waypoints, durations, r_d, chol_R, poly_verts,
                                poly_offsets, bbox, ball_centers, ball_radii,
                                half_normals, half_offsets, np.uint64(seed),
                                n_paths)
    return np_mc_collisions(waypoints, durations, r_d, chol_R, poly_verts,
                            poly_offsets, ball_centers, ball_radii,
                            half_normals, half_offsets, np.uint64(seed), n_paths)


def sup_hits(threshold, sigma_step, n_steps, seed, n_paths):
    """Indicator per path that a 1-D random walk maximum reaches threshold."""
    if NUMBA_ENABLED:
        return nb_sup_hits(threshold, sigma_step, n_steps, np.uint64(seed), n_paths)
    return np_sup_hits(threshold, sigma_step, n_steps, np.uint64(seed), n_paths)


def qmc_stage(cho, lo, hi, q, shifts, m0, m_count):
    """Per-shift partial sums of the Genz-transformed integrand."""
    if NUMBA_ENABLED:
        return nb_qmc_stage(cho, lo, hi, q, shifts, m0, m_count)
    return np_qmc_stage(cho, lo, hi, q, shifts, m0, m_count)


def warmup():
    """Force-compile the jitted kernels on tiny inputs (no-op on numpy)."""
    if not NUMBA_ENABLED:
        return
    wp = np.array([[0.0, 0.0], [1.0, 0.0]])
    dur = np.array([1.0])
    chol = np.eye(2)
    pv = np.array([[10.0, 10.0], [11.0, 10.0], [10.5, 11.0]])
    po = np.array([0, 3], dtype=np.int64)
    bc = np.zeros((0, 2))
    br = np.zeros(0)
    hn = np.zeros((0, 2))
    ho = np.zeros(0)
    mc_collisions(wp, dur, 2, chol, pv, po, bc, br, hn, ho, 1, 2)
    sup_hits(1.0, 0.1, 4, 1, 2)
    cho = np.eye(2)
    qmc_stage(cho, np.array([-np.inf, -np.inf]), np.array([0.0, 0.0]),
              np.array([math.sqrt(2.0) % 1.0]), np.full((2, 1), 0.5), 0, 8)
