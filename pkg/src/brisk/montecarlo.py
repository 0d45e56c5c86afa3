"""Euler-Maruyama path simulation and empirical collision probability.

Paths use counter-based per-path substreams (see kernels), so estimates are
deterministic for a fixed seed and independent of worker-thread count.
Collision checks use exact convex-piece membership on the fine grid, not the
hyperplane surrogate; the slight under-count of continuous-time crossings is
mitigated by a high substep rate.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import Ball, Halfspace, Polytope, convex_hull


@dataclass(frozen=True)
class SimulationConfig:
    paths: int = 100_000
    r_d: int = 100             # substeps per segment (total substeps for sup checks)
    seed: int = 0
    check_mode: str = "fine-grid point-in-obstacle"

    def __post_init__(self):
        if self.paths < 1 or self.r_d < 1:
            raise ValueError("paths and r_d must be at least 1")


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    stderr: float
    paths: int
    elapsed: float
    metadata: dict = field(default_factory=dict)


def _encode_pieces(pieces, dim):
    poly_chunks = []
    offsets = [0]
    ball_c = []
    ball_r = []
    half_n = []
    half_o = []
    for piece in pieces:
        if isinstance(piece, Polytope):
            if piece.dim != 2:
                raise ValueError("polytope obstacles are supported in R^2 only")
            hull = convex_hull(piece.vertices)
            poly_chunks.append(hull)
            offsets.append(offsets[-1] + hull.shape[0])
        elif isinstance(piece, Ball):
            ball_c.append(piece.center)
            ball_r.append(piece.radius)
        elif isinstance(piece, Halfspace):
            half_n.append(piece.normal)
            half_o.append(piece.offset)
        else:
            raise TypeError(f"unsupported piece type {type(piece).__name__}")
    poly_verts = (np.vstack(poly_chunks) if poly_chunks
                  else np.zeros((0, 2)))
    return (poly_verts,
            np.asarray(offsets, dtype=np.int64),
            np.asarray(ball_c, dtype=float).reshape(-1, dim),
            np.asarray(ball_r, dtype=float),
            np.asarray(half_n, dtype=float).reshape(-1, dim),
            np.asarray(half_o, dtype=float))


def collision_indicators(traj, noise, workspace, cfg):
    """Per-path collision indicator array (uint8), deterministic in cfg.seed."""
    pieces = [piece for _, piece in workspace.convex_pieces()]
    arrays = _encode_pieces(pieces, traj.dim)
    return kernels.mc_collisions(traj.waypoints, traj.durations, cfg.r_d,
                                 noise.cholesky(), *arrays, cfg.seed, cfg.paths)


def estimate_risk(traj, noise, workspace, cfg=SimulationConfig()):
    """Fraction of simulated paths whose fine-grid position enters any obstacle."""
    start = time.perf_counter()
    if not workspace.obstacles:
        hits = 0
    else:
        hits = int(collision_indicators(traj, noise, workspace, cfg).sum())
    elapsed = time.perf_counter() - start
    p_hat = hits / cfg.paths
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / cfg.paths)
    return McEstimate(p_hat=p_hat, stderr=stderr, paths=cfg.paths, elapsed=elapsed,
                      metadata={"membership": "exact-convex-piece",
                                "backend": kernels.BACKEND,
                                "r_d": cfg.r_d, "seed": cfg.seed})


def simulate_paths(traj, noise, cfg=SimulationConfig()):
    """Stream (t, positions) over the fine grid, one (paths, n) block per substep.

    Draw-for-draw identical to the collision kernel's numpy backend, so the
    streamed ensemble and the fused collision count describe the same paths.
    """
    return kernels.np_stream_positions(traj.waypoints, traj.durations, cfg.r_d,
                                       noise.cholesky(), np.uint64(cfg.seed),
                                       cfg.paths)


def brownian_sup_check(d, t, sigma2, cfg=SimulationConfig()):
    """MC estimate of P(sup of 1-D Brownian motion over [0, t] >= d).

    Fine grid with cfg.r_d substeps over the whole horizon; compare against
    the reflection closed form 2 (1 - Phi(d / sqrt(sigma2 t))).
    """
    if t <= 0.0 or sigma2 <= 0.0:
        raise ValueError("need t > 0 and sigma2 > 0")
    start = time.perf_counter()
    sigma_step = math.sqrt(sigma2 * t / cfg.r_d)
    hits = int(kernels.sup_hits(float(d), sigma_step, cfg.r_d, cfg.seed, cfg.paths).sum())
    elapsed = time.perf_counter() - start
    p_hat = hits / cfg.paths
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / cfg.paths)
    return McEstimate(p_hat=p_hat, stderr=stderr, paths=cfg.paths, elapsed=elapsed,
                      metadata={"kind": "brownian-sup", "substeps": cfg.r_d,
                                "backend": kernels.BACKEND, "seed": cfg.seed})
