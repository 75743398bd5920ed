"""Boundary distance, direction, and density estimation from kernel sums.

Near a (locally flat) boundary, kernel sums against a uniformly sampled cloud
behave like half-space Gaussian integrals.  Writing t = b/eps for the distance
b to the boundary, the kernel density estimate and the kernel first-moment
vector satisfy

    q_raw   ~ q * m0b(b)                      (damped by the missing half-space)
    |mu|    ~ q * pi^((m-1)/2) * exp(-t^2)/2  (points toward the interior)

so the scale- and density-free ratio

    R(t) = sqrt(pi) |mu| / q_raw = exp(-t^2) / (1 + erf(t))

depends on the boundary distance alone.  Inverting R gives b; the direction of
-mu gives the outward conormal; dividing q_raw by m0b(b) removes the boundary
damping and recovers an unbiased density estimate up to O(eps) terms.

R is monotone decreasing with R(0) = 1, so inversion is well posed.  We seed a
Newton iteration with a cheap piecewise approximation: the quadratic
1 - 1.15 t + 0.35 t^2 fits R on [0, 1.4] to about 1e-2, and for larger t the
tail R(t) ~ exp(-t^2)/2 inverts in closed form.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .kernels import SQRT_PI, boundary_moments, kernel_eval

# Ratios above 1 are pure noise (R(0) = 1); tolerate a little before warning.
_RATIO_NOISE_CEILING = 1.1
# The two seed branches meet where the quadratic is evaluated at t = 1.4.
_RATIO_BRANCH_SWITCH = 1.0 - 1.15 * 1.4 + 0.35 * 1.4 ** 2   # = 0.076
# Beyond 5 eps the ratio is ~ exp(-25): numerically indistinguishable from
# "not near any boundary", so estimates are clamped there.
_MAX_DISTANCE_IN_EPS = 5.0


@dataclass
class BoundaryEstimate:
    """Per-point boundary data: distance, outward direction, raw ratio.

    Attributes
    ----------
    b : ndarray, shape (N,)
        Estimated distance to the boundary, clamped to [0, 5 eps].
    eta : ndarray, shape (N, n)
        Estimated outward conormal direction (unit rows; all-zero for points
        whose first moment is negligible, i.e. deep interior).
    ratio : ndarray, shape (N,)
        The raw ratio sqrt(pi) |mu| / q_raw that was inverted.
    """

    b: np.ndarray
    eta: np.ndarray
    ratio: np.ndarray


def _row_index(neighbors):
    return np.repeat(np.arange(neighbors.count), neighbors.degrees())


def kde(cloud, neighbors, eps):
    """Kernel density estimate q_raw at every cloud point (self included).

    q_raw_i = (1 / (N eps^m)) sum_j k(|X_j - x_i| / eps).  Near the boundary
    this underestimates the true density by the factor m0b(b)/m0; see
    `corrected_density`.  Points with no neighbors besides themselves produce
    a warning, since every downstream quantity at such points is meaningless.
    """
    k = kernel_eval(neighbors.d_squared, eps)
    sums = np.bincount(_row_index(neighbors), weights=k, minlength=neighbors.count)
    if np.any(neighbors.degrees() == 1):
        warnings.warn(
            f"{int(np.sum(neighbors.degrees() == 1))} point(s) have no neighbors "
            f"within the truncation radius; their density estimate is the bare "
            f"self-term", stacklevel=2)
    m = cloud.intrinsic_dim
    return sums / (cloud.count * eps ** m)


def bde(cloud, neighbors, eps):
    """Kernel first-moment (boundary direction) estimate at every point.

    mu_i = (1 / (N eps^m)) sum_j k(|X_j - x_i| / eps) (X_j - x_i) / eps.
    In the interior contributions cancel by symmetry; near the boundary mu
    points toward the interior, away from the missing mass.
    """
    k = kernel_eval(neighbors.d_squared, eps)
    rows = _row_index(neighbors)
    diff = (cloud.points[neighbors.indices] - cloud.points[rows]) / eps
    mu = np.zeros((cloud.count, cloud.ambient_dim))
    for c in range(cloud.ambient_dim):
        mu[:, c] = np.bincount(rows, weights=k * diff[:, c], minlength=cloud.count)
    m = cloud.intrinsic_dim
    return mu / (cloud.count * eps ** m)


def boundary_ratio(q_raw, mu):
    """Dimensionless ratio sqrt(pi) |mu| / q_raw, one value per point."""
    q_raw = np.asarray(q_raw, dtype=float)
    if np.any(q_raw <= 0):
        raise ValueError("density estimate must be positive at every point")
    return SQRT_PI * np.linalg.norm(np.atleast_2d(mu), axis=1) / q_raw


def _ratio_curve(t):
    # R(t) = exp(-t^2) / (1 + erf t)
    return np.exp(-t ** 2) / (1.0 + erf(t))


def _ratio_curve_derivative(t):
    # R'(t) = -exp(-t^2) [2 t (1 + erf t) + (2/sqrt(pi)) exp(-t^2)] / (1+erf t)^2
    denom = 1.0 + erf(t)
    return -np.exp(-t ** 2) * (2.0 * t * denom
                               + (2.0 / SQRT_PI) * np.exp(-t ** 2)) / denom ** 2


def invert_distance(ratio, eps, newton_steps=2):
    """Invert the ratio curve R(b/eps) to a boundary distance estimate.

    A piecewise closed-form seed (quadratic fit near the boundary, Gaussian
    tail beyond t = 1.4) is refined by `newton_steps` Newton iterations on the
    exact curve.  Results are clamped to [0, 5 eps]; ratios above 1.1 cannot
    come from any distance and are mapped to b = 0 with a warning.
    """
    r = np.atleast_1d(np.asarray(ratio, dtype=float))
    if np.any(r < 0):
        raise ValueError("ratio must be nonnegative")
    if np.any(r > _RATIO_NOISE_CEILING):
        warnings.warn(
            f"{int(np.sum(r > _RATIO_NOISE_CEILING))} ratio value(s) exceed "
            f"{_RATIO_NOISE_CEILING}; treating them as on-boundary (b = 0)",
            stacklevel=2)

    t = np.zeros_like(r)
    quad = r >= _RATIO_BRANCH_SWITCH
    if np.any(quad):
        # smaller root of 0.35 t^2 - 1.15 t + (1 - r) = 0
        disc = 1.15 ** 2 - 4.0 * 0.35 * (1.0 - r[quad])
        t[quad] = (1.15 - np.sqrt(disc)) / 0.7
    tail = ~quad
    if np.any(tail):
        # R(t) ~ exp(-t^2)/2  =>  t = sqrt(log(1 / (2 r)))
        rt = np.maximum(r[tail], 1e-300)
        t[tail] = np.sqrt(np.log(1.0 / (2.0 * rt)))
    np.clip(t, 0.0, _MAX_DISTANCE_IN_EPS, out=t)

    for _ in range(newton_steps):
        t = t - (_ratio_curve(t) - r) / _ratio_curve_derivative(t)
        np.clip(t, 0.0, _MAX_DISTANCE_IN_EPS, out=t)

    b = eps * t
    if np.isscalar(ratio) or np.ndim(ratio) == 0:
        return float(b[0])
    return b


def estimate_boundary(cloud, neighbors, eps, newton_steps=2):
    """Full per-point boundary estimate: distance, outward direction, ratio.

    The outward conormal estimate is -mu/|mu|; rows where |mu| is negligible
    relative to q_raw (deep-interior points, where cancellation leaves only
    sampling noise) are set to zero rather than normalized noise.
    """
    q_raw = kde(cloud, neighbors, eps)
    mu = bde(cloud, neighbors, eps)
    ratio = boundary_ratio(q_raw, mu)
    b = invert_distance(ratio, eps, newton_steps=newton_steps)

    norms = np.linalg.norm(mu, axis=1)
    eta = np.zeros_like(mu)
    significant = norms > 1e-14 * q_raw
    eta[significant] = -mu[significant] / norms[significant, None]
    return BoundaryEstimate(b=np.atleast_1d(b), eta=eta, ratio=ratio)


def corrected_density(q_raw, b, eps, m):
    """Boundary-corrected density q_hat = q_raw / m0b(b).

    Dividing by the zeroth boundary moment at the estimated distance removes
    the damping caused by the missing half-space; in the interior m0b -> m0
    and the correction degrades gracefully to the usual normalization.
    """
    m0b, _, _ = boundary_moments(b, eps, m)
    return np.asarray(q_raw, dtype=float) / m0b


def classify_dofs(b, eps):
    """Split degrees of freedom into interior (b > eps/2) and boundary band.

    Returns a boolean mask, True for interior points.  A configuration with
    no interior points at all cannot support any of the solvers and raises.
    """
    interior = np.asarray(b, dtype=float) > 0.5 * eps
    if not np.any(interior):
        raise ValueError(
            "no interior points: every dof is within eps/2 of the boundary "
            "(eps too large for this cloud, or the cloud is all boundary)")
    return interior
