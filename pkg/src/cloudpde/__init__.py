"""Mesh-free PDE solving on point-sampled manifolds with boundary.

The pipeline: sample points -> exact fixed-radius neighbor lists -> kernel
density / boundary distance / boundary direction estimates -> sparse weak-form
operators (stiffness, mass, boundary load) -> elliptic and parabolic solves,
plus a suite of verification experiments with closed-form references.
"""

__version__ = "0.1.0"

from .pointcloud import (PointCloud, NeighborList, build_neighbors,
                         generate_interval_grid, generate_square_grid,
                         mean_spacing, sample_ellipse, sample_hemisphere,
                         warp_interval_grid)
from .kernels import (boundary_moments, half_moments, interior_moments,
                      kernel_eval, truncation_radius)
from .boundary import (BoundaryEstimate, classify_dofs, corrected_density,
                       estimate_boundary, invert_distance, kde, bde)
from .operators import (OperatorSet, boundary_matrix, boundary_weights,
                        build_operators, kernel_matrix, mass_matrix,
                        normalized_kernel, pointwise_laplacian_extract,
                        stiffness, unnormalized_weak_laplacian)
from .pde import (SolveResult, cg_solve, l2_error, solve_dirichlet,
                  solve_neumann, solve_parabolic, space_time_error)
from .problems import PROBLEMS, Problem, run_problem, run_problem_sweep
from .verify import (StreamingMean, SweepResult, extract_mean_curvature,
                     fit_loglog_slope, streaming_kernel_expectation)
