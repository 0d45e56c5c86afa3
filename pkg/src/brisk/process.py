"""Trajectory construction, deviation-covariance propagation, and the dense
covariance assembly for per-segment time grids.

Segment indices are 0-based throughout: segment j runs from waypoint j at
time t_j to waypoint j+1 at time t_{j+1}.
"""

from dataclasses import dataclass

import numpy as np

from .gaussian import GaussianVector


class DegenerateSegment(Exception):
    """Consecutive waypoints coincide."""


@dataclass(frozen=True)
class PlannedTrajectory:
    """Waypoints with per-segment durations and implied constant velocities."""

    waypoints: np.ndarray      # (N+1, n)
    durations: np.ndarray      # (N,)

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        dt = np.asarray(self.durations, dtype=float)
        if wp.ndim != 2 or wp.shape[0] < 2:
            raise ValueError("need at least 2 waypoints")
        if dt.shape != (wp.shape[0] - 1,):
            raise ValueError("need one duration per segment")
        if np.any(dt <= 0.0):
            raise ValueError("durations must be positive")
        for j in range(wp.shape[0] - 1):
            if np.array_equal(wp[j], wp[j + 1]):
                raise DegenerateSegment(f"waypoints {j} and {j + 1} coincide")
        object.__setattr__(self, "waypoints", wp)
        object.__setattr__(self, "durations", dt)

    @property
    def dim(self):
        return self.waypoints.shape[1]

    @property
    def n_segments(self):
        return self.waypoints.shape[0] - 1

    @property
    def times(self):
        """Waypoint times t_0 = 0 .. t_N = T."""
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    @property
    def total_time(self):
        return float(np.sum(self.durations))

    @property
    def velocities(self):
        return (self.waypoints[1:] - self.waypoints[:-1]) / self.durations[:, None]

    def position(self, t):
        """Planned position at time t (linear interpolation)."""
        times = self.times
        t = min(max(float(t), 0.0), times[-1])
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(j, self.n_segments - 1)
        frac = (t - times[j]) / self.durations[j]
        return self.waypoints[j] + frac * (self.waypoints[j + 1] - self.waypoints[j])


@dataclass(frozen=True)
class NoiseModel:
    """Positive-definite process-noise intensity matrix R."""

    R: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("R must be square")
        if np.any(np.abs(R - R.T) > 1e-12 * np.maximum(1.0, np.abs(R))):
            raise ValueError("R must be symmetric")
        if float(np.linalg.eigvalsh(R).min()) <= 0.0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "R", R)

    @property
    def dim(self):
        return self.R.shape[0]

    def cholesky(self):
        return np.linalg.cholesky(self.R)


@dataclass(frozen=True)
class CovarianceSchedule:
    """Deviation covariance at every waypoint time; starts at exactly zero."""

    times: np.ndarray          # (N+1,)
    covariances: np.ndarray    # (N+1, n, n)

    def at_waypoint(self, j):
        return self.covariances[j]

    def at_time(self, t):
        """Covariance at an interior time (exact for piecewise-constant R)."""
        times = self.times
        t = min(max(float(t), 0.0), times[-1])
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(j, len(times) - 2)
        frac = (t - times[j]) / (times[j + 1] - times[j])
        return self.covariances[j] + frac * (self.covariances[j + 1] - self.covariances[j])


@dataclass(frozen=True)
class SegmentGrid:
    """Strictly increasing times covering one segment, endpoints included."""

    segment: int
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.shape[0] < 2:
            raise ValueError("grid needs at least the two segment endpoints")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @property
    def r(self):
        """Refinement count: number of sub-intervals."""
        return self.times.shape[0] - 1


def build_trajectory(waypoints, speed=None, durations=None):
    """PlannedTrajectory from waypoints plus either a speed or explicit durations.

    In speed mode each duration is segment length / speed (the unit-speed case
    makes durations equal segment lengths). Explicit durations win.
    """
    wp = np.asarray(waypoints, dtype=float)
    if durations is not None:
        return PlannedTrajectory(wp, np.asarray(durations, dtype=float))
    if speed is None or speed <= 0.0:
        raise ValueError("need speed > 0 or explicit durations")
    lengths = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    if np.any(lengths == 0.0):
        raise DegenerateSegment("repeated consecutive waypoints")
    return PlannedTrajectory(wp, lengths / speed)


def propagate_covariance(traj, noise):
    """Covariance recursion: zero at start, plus duration * R per segment."""
    n = traj.dim
    N = traj.n_segments
    cov = np.zeros((N + 1, n, n))
    for j in range(N):
        cov[j + 1] = cov[j] + traj.durations[j] * noise.R
    return CovarianceSchedule(times=traj.times, covariances=cov)


def uniform_grid(traj, segment, r):
    """Uniform SegmentGrid with r sub-intervals over the given segment."""
    times = traj.times
    return SegmentGrid(segment, np.linspace(times[segment], times[segment + 1], r + 1))


def _stack_matrices(a, grid):
    """M (rows of a^T) and K (lower block-triangular copies of a^T) for a grid."""
    n = a.shape[0]
    r = grid.r
    M = np.tile(a, (r + 1, 1))
    K = np.zeros((r + 1, n * r))
    for i in range(1, r + 1):
        K[i, :n * i] = np.tile(a, i)
    return M, K


def _noise_block_diag(grid, noise):
    dt_hat = np.diff(grid.times)
    return np.kron(np.diag(dt_hat), noise.R)


def segment_gaussian(segment, a, grid, sched, noise):
    """Joint law of the projected deviation at all grid times of one segment.

    Dense assembly: covariance = M Sigma_start M^T + K Sigma_noise K^T, where
    Sigma_start is the deviation covariance at the segment's start waypoint
    and Sigma_noise is the block-diagonal of per-subinterval increments.
    """
    a = np.asarray(a, dtype=float)
    M, K = _stack_matrices(a, grid)
    sigma_start = sched.at_waypoint(segment)
    cov = M @ sigma_start @ M.T + K @ _noise_block_diag(grid, noise) @ K.T
    cov = 0.5 * (cov + cov.T)
    return GaussianVector(cov)


def cross_covariance(segment, a_j, a_next, grid_j, grid_next, sched, noise):
    """Covariance block between consecutive segments' grid projections."""
    a_j = np.asarray(a_j, dtype=float)
    a_next = np.asarray(a_next, dtype=float)
    n = a_j.shape[0]
    M_j, K_j = _stack_matrices(a_j, grid_j)
    M_next, _ = _stack_matrices(a_next, grid_next)
    G_j = np.tile(np.eye(n), (1, grid_j.r))
    sigma_start = sched.at_waypoint(segment)
    sigma_n = _noise_block_diag(grid_j, noise)
    return M_j @ sigma_start @ M_next.T + K_j @ sigma_n @ G_j.T @ M_next.T


def stacked_pair_gaussian(segment, a_j, a_next, grid_j, grid_next, sched, noise):
    """Joint law over both segments' grids: [[S_j, H], [H^T, S_next]]."""
    g_j = segment_gaussian(segment, a_j, grid_j, sched, noise)
    g_next = segment_gaussian(segment + 1, a_next, grid_next, sched, noise)
    H = cross_covariance(segment, a_j, a_next, grid_j, grid_next, sched, noise)
    top = np.hstack([g_j.covariance, H])
    bottom = np.hstack([H.T, g_next.covariance])
    cov = np.vstack([top, bottom])
    cov = 0.5 * (cov + cov.T)
    return GaussianVector(cov)
