"""Benchmark problem registry: manufactured solutions on standard domains.

Each problem bundles a cloud generator, an exact solution, the matching
source term, and boundary data, so solvers can be exercised end to end and
their discrete L2 errors measured against the truth.  Domains: the unit
square (flat, with corners), and the unit upper hemisphere (curved, boundary
at the equator).  Boundary data are always evaluated at the boundary dofs'
own positions, consistent with how the solvers impose them.

Sign conventions: "dirichlet" problems solve -Delta u = f with u = g;
"neumann" problems solve -Delta u + u = f with du/deta = g; "parabolic"
problems solve u_t = Delta u + f with homogeneous Dirichlet data.
"""

from dataclasses import dataclass

import numpy as np

from .pointcloud import (PointCloud, generate_square_grid, sample_ellipse,
                         sample_hemisphere)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Problem:
    """A manufactured PDE problem on a point-sampled domain.

    `exact` and `source` take the (N, n) point array (parabolic variants take
    (points, t)); `boundary` gives the Dirichlet value or Neumann flux at the
    points' own positions.  `eps_sweep` is the default bandwidth sweep for
    best-eps error reporting.
    """

    name: str
    kind: str                 # "dirichlet" | "neumann" | "parabolic"
    description: str
    make_cloud: callable
    exact: callable
    source: callable
    boundary: callable
    default_eps: float
    eps_sweep: tuple
    T: float = None
    steps: int = None


# ----------------------------------------------------------------- unit square

def _square_cloud(seed=0):
    # 101 x 101 grid vertices; the seed is accepted for interface uniformity.
    return generate_square_grid(100)


def square_edge_normals(points):
    """Outward unit normal of the nearest edge of the unit square.

    Corner-adjacent points pick one of their two nearest edges (the first in
    left/right/bottom/top order); for the smooth data used here either choice
    is equally valid.
    """
    points = np.atleast_2d(points)
    x, y = points[:, 0], points[:, 1]
    dists = np.column_stack([x, 1.0 - x, y, 1.0 - y])
    which = np.argmin(dists, axis=1)
    normals = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
    return normals[which]


def _sine_product(points):
    return np.sin(TWO_PI * points[:, 0]) * np.sin(TWO_PI * points[:, 1])


def _cosine_product(points):
    return np.cos(TWO_PI * points[:, 0]) * np.cos(TWO_PI * points[:, 1])


def _quadratic(points):
    return points[:, 0] ** 2 + points[:, 1] ** 2


_SQUARE_SWEEP = (0.01, 0.0125, 0.015, 0.02, 0.03)

SQUARE_SINE_DIRICHLET = Problem(
    name="square-sine-dirichlet",
    kind="dirichlet",
    description="-Delta u = 8 pi^2 u on the unit square, "
                "u = sin(2 pi x) sin(2 pi y), zero boundary data",
    make_cloud=_square_cloud,
    exact=_sine_product,
    source=lambda p: 8.0 * np.pi ** 2 * _sine_product(p),
    boundary=lambda p: np.zeros(len(p)),
    default_eps=0.015,
    eps_sweep=_SQUARE_SWEEP,
)

SQUARE_QUADRATIC_DIRICHLET = Problem(
    name="square-quadratic-dirichlet",
    kind="dirichlet",
    description="-Delta u = -4 on the unit square, u = x^2 + y^2 "
                "with its own trace as boundary data",
    make_cloud=_square_cloud,
    exact=_quadratic,
    source=lambda p: -4.0 * np.ones(len(p)),
    boundary=_quadratic,
    default_eps=0.015,
    eps_sweep=_SQUARE_SWEEP,
)

SQUARE_COSINE_NEUMANN = Problem(
    name="square-cosine-neumann",
    kind="neumann",
    description="-Delta u + u = (8 pi^2 + 1) u on the unit square, "
                "u = cos(2 pi x) cos(2 pi y), zero flux",
    make_cloud=_square_cloud,
    exact=_cosine_product,
    source=lambda p: (8.0 * np.pi ** 2 + 1.0) * _cosine_product(p),
    boundary=lambda p: np.zeros(len(p)),
    default_eps=0.015,
    eps_sweep=_SQUARE_SWEEP,
)


def _quadratic_flux(points):
    # du/deta for u = x^2 + y^2 against the nearest-edge outward normal.
    eta = square_edge_normals(points)
    return 2.0 * points[:, 0] * eta[:, 0] + 2.0 * points[:, 1] * eta[:, 1]


SQUARE_QUADRATIC_NEUMANN = Problem(
    name="square-quadratic-neumann",
    kind="neumann",
    description="-Delta u + u = u - 4 on the unit square, u = x^2 + y^2 "
                "with exact nearest-edge flux data",
    make_cloud=_square_cloud,
    exact=_quadratic,
    source=lambda p: _quadratic(p) - 4.0,
    boundary=_quadratic_flux,
    default_eps=0.015,
    eps_sweep=_SQUARE_SWEEP,
)

SQUARE_SINE_HEAT = Problem(
    name="square-sine-heat",
    kind="parabolic",
    description="u_t = Delta u + (8 pi^2 - 1) u on the unit square, "
                "u = exp(-t) sin(2 pi x) sin(2 pi y), homogeneous data",
    make_cloud=_square_cloud,
    exact=lambda p, t: np.exp(-t) * _sine_product(p),
    source=lambda p, t: (8.0 * np.pi ** 2 - 1.0) * np.exp(-t) * _sine_product(p),
    boundary=lambda p: np.zeros(len(p)),
    default_eps=0.015,
    eps_sweep=_SQUARE_SWEEP,
    T=1.0,
    steps=50,
)


# ------------------------------------------------------------ unit hemisphere

def hemisphere_exact(theta, phi):
    """u(theta, phi) = sin(theta)^2 sin(3 phi) / 2 on the unit sphere."""
    return 0.5 * np.sin(theta) ** 2 * np.sin(3.0 * phi)


def hemisphere_forcing(theta, phi):
    """-Laplace-Beltrami of `hemisphere_exact`: (5/2 + 3 sin^2 theta) sin(3 phi).

    On the unit sphere Delta u = u_tt + cot(theta) u_t + csc^2(theta) u_pp;
    applied to sin^2(theta) sin(3 phi) / 2 this gives
    (cos 2 theta + cos^2 theta - 9/2) sin(3 phi) = -(5/2 + 3 sin^2 theta) sin 3 phi.
    """
    return (2.5 + 3.0 * np.sin(theta) ** 2) * np.sin(3.0 * phi)


def _spherical_angles(points):
    z = np.clip(points[:, 2], -1.0, 1.0)
    theta = np.arccos(z)
    phi = np.arctan2(points[:, 1], points[:, 0])
    return theta, phi


def _hemisphere_exact_xyz(points):
    theta, phi = _spherical_angles(points)
    return hemisphere_exact(theta, phi)


def _hemisphere_forcing_xyz(points):
    theta, phi = _spherical_angles(points)
    return hemisphere_forcing(theta, phi)


HEMISPHERE_DIRICHLET = Problem(
    name="hemisphere-dirichlet",
    kind="dirichlet",
    description="-Delta u = (5/2 + 3 sin^2 theta) sin(3 phi) on the unit "
                "upper hemisphere, u = sin^2(theta) sin(3 phi) / 2, "
                "Dirichlet data on the equator",
    make_cloud=lambda seed=0: sample_hemisphere(5000, seed=seed),
    exact=_hemisphere_exact_xyz,
    source=_hemisphere_forcing_xyz,
    boundary=_hemisphere_exact_xyz,
    default_eps=0.1,
    eps_sweep=(0.08, 0.1, 0.125, 0.15),
)


PROBLEMS = {p.name: p for p in [
    SQUARE_SINE_DIRICHLET,
    SQUARE_QUADRATIC_DIRICHLET,
    SQUARE_COSINE_NEUMANN,
    SQUARE_QUADRATIC_NEUMANN,
    SQUARE_SINE_HEAT,
    HEMISPHERE_DIRICHLET,
]}


# -------------------------------------------------------------------- ellipse

def ellipse_curvature(psi, a=1.0, b=2.0 / 3.0):
    """Boundary curvature of the ellipse (a cos psi, b sin psi)."""
    return a * b / (a ** 2 * np.sin(psi) ** 2 + b ** 2 * np.cos(psi) ** 2) ** 1.5


def ellipse_boundary_distance(points, a=1.0, b=2.0 / 3.0, iterations=12):
    """Exact distance from interior points to the ellipse boundary.

    Newton iteration on the foot-point parameter phi: the nearest boundary
    point (a cos phi, b sin phi) satisfies

        G(phi) = (a^2 - b^2) cos phi sin phi - p_x a sin phi + p_y b cos phi = 0

    (orthogonality of p - foot to the tangent).  Seeded from the angular
    parameter of p, this converges quadratically for points that are not
    near the center's evolute, i.e. certainly for points near the boundary.
    """
    points = np.atleast_2d(points)
    px, py = points[:, 0], points[:, 1]
    phi = np.arctan2(a * py, b * px)
    for _ in range(iterations):
        c, s = np.cos(phi), np.sin(phi)
        g = (a ** 2 - b ** 2) * c * s - px * a * s + py * b * c
        gp = (a ** 2 - b ** 2) * (c ** 2 - s ** 2) - px * a * c - py * b * s
        phi = phi - g / gp
    foot = np.column_stack([a * np.cos(phi), b * np.sin(phi)])
    return np.linalg.norm(points - foot, axis=1)


def ellipse_sampler(a=1.0, b=2.0 / 3.0):
    """Batch sampler (rng, n) -> uniform points on the solid ellipse."""
    def _draw(rng, n):
        out = np.empty((n, 2))
        have = 0
        while have < n:
            block = max(1024, int(1.6 * (n - have)))
            xy = rng.uniform(-1.0, 1.0, size=(block, 2)) * [a, b]
            keep = xy[(xy[:, 0] / a) ** 2 + (xy[:, 1] / b) ** 2 <= 1.0]
            take = min(len(keep), n - have)
            out[have:have + take] = keep[:take]
            have += take
        return out
    return _draw


# ------------------------------------------------------------------- running

def run_problem(problem, ops=None, eps=None, seed=0, tol=1e-10):
    """Solve one registry problem and measure its discrete L2 error.

    Pass a prebuilt operator set to share assembly across problems on the
    same cloud; otherwise one is built at `eps` (default: the problem's).
    Returns a dict with the solution, error, and solver statistics.
    """
    from .operators import build_operators
    from .pde import (l2_error, solve_dirichlet, solve_neumann,
                      solve_parabolic, space_time_error)

    if ops is None:
        eps = problem.default_eps if eps is None else eps
        cloud = problem.make_cloud(seed=seed)
        ops = build_operators(cloud, eps, keep_kernel=False)
    pts = ops.cloud.points

    if problem.kind == "dirichlet":
        res = solve_dirichlet(ops, problem.source(pts), problem.boundary(pts),
                              tol=tol)
        err = l2_error(res.u, problem.exact(pts), ops.M)
    elif problem.kind == "neumann":
        res = solve_neumann(ops, problem.source(pts), problem.boundary(pts),
                            tol=tol)
        err = l2_error(res.u, problem.exact(pts), ops.M)
    elif problem.kind == "parabolic":
        res = solve_parabolic(ops, lambda t: problem.source(pts, t),
                              problem.exact(pts, 0.0), problem.T,
                              problem.steps, tol=tol)
        tau = problem.T / problem.steps
        exact_snaps = np.stack([problem.exact(pts, k * tau)
                                for k in range(problem.steps + 1)])
        err = space_time_error(res.snapshots, exact_snaps, ops.M, tau)
    else:
        raise ValueError(f"unknown problem kind: {problem.kind}")

    return {"problem": problem.name, "eps": ops.eps, "count": ops.count,
            "l2_error": err, "iterations": res.iterations, "u": res.u,
            "ops": ops}


def run_problem_sweep(problem, eps_values=None, seed=0, tol=1e-10):
    """Solve a problem over a bandwidth sweep; returns (best, all results).

    Results drop the solution vectors except for the best run, to keep sweep
    memory flat.  "Best" means smallest discrete L2 error.
    """
    eps_values = problem.eps_sweep if eps_values is None else eps_values
    results = []
    best = None
    for eps in eps_values:
        out = run_problem(problem, eps=float(eps), seed=seed, tol=tol)
        if best is None or out["l2_error"] < best["l2_error"]:
            if best is not None:
                best.pop("u", None)
            best = out
        else:
            out = dict(out)
            out.pop("u", None)
        out.pop("ops", None)
        results.append({k: out[k] for k in
                        ("problem", "eps", "count", "l2_error", "iterations")})
    return best, results
