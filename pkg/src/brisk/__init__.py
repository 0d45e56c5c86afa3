"""Continuous-time collision risk bounds for waypoint plans under Brownian
process noise, with discrete-time and Monte Carlo baselines."""

from .gaussian import (GaussianVector, MvnResult, bivariate_normal_cdf,
                       mvn_cdf, std_normal_cdf)
from .geometry import (Ball, Halfspace, InvalidPolygon, Polygon, Polytope,
                       Segment, SeparatingHyperplane, Workspace, ZeroClearance,
                       convex_pieces, decompose_nonconvex, min_distance,
                       separating_hyperplane)
from .kernels import BACKEND, NUMBA_ENABLED
from .montecarlo import (McEstimate, SimulationConfig, brownian_sup_check,
                         estimate_risk, simulate_paths)
from .process import (CovarianceSchedule, DegenerateSegment, NoiseModel,
                      PlannedTrajectory, SegmentGrid, build_trajectory,
                      cross_covariance, propagate_covariance, segment_gaussian,
                      uniform_grid)
from .risk import (EstimatorConfig, PairRisk, RiskReport, SegmentRisk,
                   discrete_time_bound, first_order_bound,
                   full_horizon_segment_risk, pair_risk_lower_bound,
                   second_order_bound, segment_risk, total_risk)

__version__ = "0.1.0"
