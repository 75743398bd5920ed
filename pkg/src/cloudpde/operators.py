"""Sparse weak-form operators assembled from kernel sums.

Everything here follows the same pattern: a truncated exponential kernel
matrix K over the cloud, density-normalized into tK_ij = K_ij / (q_i q_j),
turned into graph-Laplacian-like matrices whose quadratic forms approximate
continuum integrals.  With c = 2 / (m2 eps^(m+2) N^2),

    v^T S u  ->  integral of grad u . grad v  over the manifold,
    v^T M u  ->  integral of u v                (M diagonal, Monte Carlo),
    (B g)_i  ->  weak boundary flux load        (Neumann data g).

S is symmetric positive semidefinite by construction (nonnegative affinities,
diagonal = row sums) and annihilates constants exactly, which is the discrete
counterpart of the Laplacian of a constant vanishing.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree
from scipy.special import erf

from . import boundary as bd
from .kernels import (TRUNCATION, half_moments, boundary_moments,
                      interior_moments, kernel_eval, truncation_radius)
from .pointcloud import build_neighbors

# Interior dofs sit at b > eps/2, so the boundary-weight vector j restricted
# to them integrates exp(-t^2) over [1/2, inf) instead of [0, inf); dividing
# by 1 - erf(1/2) restores the full half-line mass.
_BAND_RENORM = 1.0 / (1.0 - erf(0.5))


def kernel_matrix(cloud, neighbors, eps):
    """Sparse symmetric kernel matrix K_ij = exp(-|x_i - x_j|^2 / eps^2).

    The diagonal is exactly 1; entries below the truncation threshold are
    dropped (the neighbor radius already guarantees none are materially
    below it, so this only trims boundary-of-support dust).
    """
    data = kernel_eval(neighbors.d_squared, eps)
    K = sp.csr_matrix((data, neighbors.indices, neighbors.indptr),
                      shape=(cloud.count, cloud.count))
    K.data[K.data < TRUNCATION] = 0.0
    K.eliminate_zeros()
    return K


def normalized_kernel(K, q_hat):
    """Density-normalized kernel tK_ij = K_ij / (q_hat_i q_hat_j).

    The scaling is applied as one multiplication by 1/(q_i * q_j) so that the
    (i, j) and (j, i) entries stay bit-identical and downstream operators are
    exactly symmetric.
    """
    q_hat = np.asarray(q_hat, dtype=float)
    if np.any(q_hat <= 0):
        raise ValueError("density estimates must be positive")
    tk = K.copy()
    rows = np.repeat(np.arange(K.shape[0]), np.diff(K.indptr))
    tk.data = K.data / (q_hat[rows] * q_hat[tk.indices])
    return tk


def weak_scale(eps, m, count):
    """Scale constant c = 2 / (m2 eps^(m+2) N^2) shared by S and L_w."""
    _, m2 = interior_moments(m)
    return 2.0 / (m2 * eps ** (m + 2) * count ** 2)


def _graph_laplacian(A, scale):
    # scale * (diag(row sums) - A); preserves symmetry, kills constants.
    row_sums = np.asarray(A.sum(axis=1)).ravel()
    L = A.copy()
    L.data = L.data * (-scale)
    L.setdiag(L.diagonal() + scale * row_sums)
    return L, row_sums


def stiffness(tk, eps, m, count):
    """Stiffness matrix S = c (diag(tK 1) - tK) from the normalized kernel.

    v^T S u approximates the Dirichlet form integral grad u . grad v dV; the
    density normalization removes the sampling-density weight, so this holds
    for nonuniform clouds too.
    """
    S, _ = _graph_laplacian(tk, weak_scale(eps, m, count))
    return S


def unnormalized_weak_laplacian(K, eps, m, count):
    """Graph Laplacian of the raw kernel: L_w = c (diag(K 1) - K).

    Without density normalization the quadratic form f^T L_w f approximates
    the q^2-weighted Dirichlet energy integral |grad f|^2 q^2 dV (each of the
    two kernel sums carries one factor of the sampling density q).
    """
    L, _ = _graph_laplacian(K, weak_scale(eps, m, count))
    return L


def mass_matrix(q_hat):
    """Diagonal Monte Carlo mass matrix M_ii = 1 / (N q_hat_i).

    Sums f^T M g approximate integral f g dV: each sample contributes the
    inverse of the local density, i.e. the volume it represents.
    """
    q_hat = np.asarray(q_hat, dtype=float)
    if np.any(q_hat <= 0):
        raise ValueError("density estimates must be positive")
    return sp.diags(1.0 / (len(q_hat) * q_hat), format="csr")


def boundary_weights(b, eps, q_hat):
    """Per-point weak boundary quadrature weights.

    j_i = exp(-b_i^2/eps^2) / (mbar0 eps N q_hat_i), so that sum_i j_i f(x_i)
    approximates the surface integral of f over the boundary (the Gaussian
    factor collapses the collar of width ~eps onto the boundary, and mbar0
    eps is exactly its integrated thickness).  Points at or beyond the 5 eps
    distance clamp get an exact zero: their analytic weight is below any
    meaningful tolerance and keeping it would only seed noise.
    """
    b = np.asarray(b, dtype=float)
    q_hat = np.asarray(q_hat, dtype=float)
    mbar0, _ = half_moments()
    j = np.exp(-(b / eps) ** 2) / (mbar0 * eps * len(q_hat) * q_hat)
    j[b >= 5.0 * eps] = 0.0
    return j


def boundary_matrix(cloud, j, interior):
    """Sparse boundary load matrix B routing collar weights to boundary dofs.

    Row i (interior only) carries the renormalized weight of point i in the
    column of its nearest boundary dof, so (B g)_i applies the boundary datum
    g evaluated where it is actually prescribed.  Columns at interior dofs
    are identically zero; boundary rows are zero as well, since boundary dofs
    never receive a weak flux load.

    1^T B 1 approximates the boundary measure |dM| and the nonzero column
    sums partition it.
    """
    interior = np.asarray(interior, dtype=bool)
    n = cloud.count
    bd_idx = np.flatnonzero(~interior)
    if len(bd_idx) == 0:
        raise ValueError("no boundary dofs to route boundary weights to")
    rows = np.flatnonzero(interior & (np.asarray(j) > 0))
    if len(rows) == 0:
        return sp.csr_matrix((n, n))
    tree = cKDTree(cloud.points[bd_idx])
    _, nearest = tree.query(cloud.points[rows])
    cols = bd_idx[nearest]
    vals = _BAND_RENORM * np.asarray(j, dtype=float)[rows]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def pointwise_laplacian_extract(K, f, q_hat, eps, m, b=None,
                                normal_derivative=None):
    """Pointwise Laplacian estimate from a single normalized kernel sum.

    The kernel average s_i = eps^{-m} (K f)_i / (N q_hat_i) expands as

        s = m0b f + eps m1b (df/deta) + (eps^2/2) m2b (Delta f) + ...

    so subtracting the zeroth- and first-order terms and dividing by
    (eps^2/2) m2b recovers Delta f.  With `b` omitted the interior moments
    are used (valid away from the boundary); near the boundary the distance-
    dependent moments and the outward normal derivative of f are required,
    otherwise the O(1/eps) first-moment term pollutes the estimate.
    """
    f = np.asarray(f, dtype=float)
    q_hat = np.asarray(q_hat, dtype=float)
    n = len(q_hat)
    s = (K @ f) * eps ** (-m) / (n * q_hat)
    if b is None:
        m0, m2 = interior_moments(m)
        return 2.0 * (s - m0 * f) / (eps ** 2 * m2)
    m0b, m1b, m2b = boundary_moments(b, eps, m)
    first = 0.0 if normal_derivative is None else eps * m1b * normal_derivative
    return 2.0 * (s - m0b * f - first) / (eps ** 2 * m2b)


@dataclass
class OperatorSet:
    """Everything a solver needs, assembled once per (cloud, eps) pair.

    `flux_weights` are the self-calibrated per-row boundary flux weights: the
    stiffness matrix applied to the ambient coordinate functions isolates,
    after projection onto the estimated outward conormal, exactly the weight
    each row's weak identity assigns to the boundary flux (coordinates are
    harmonic along the conormal, and their manifold Laplacian -- the mean
    curvature vector -- is ambient-normal, hence killed by the projection).
    They agree with `boundary_weights` to O(eps) but are exact row by row,
    which matters for Neumann solves.

    `load_weights` are the volume weights the stiffness matrix itself induces
    (normalized-kernel row sums, rescaled).  Solvers assemble load terms with
    these rather than with M: on random clouds the row-sum fluctuations then
    cancel against the identical fluctuations inside S row by row, and across
    the boundary collar the weights taper exactly like the clipped test
    bumps, both of which M's density correction deliberately undoes.  On a
    noise-free interior grid the two coincide.
    """

    cloud: object
    eps: float
    q_hat: np.ndarray
    b: np.ndarray
    eta: np.ndarray
    interior: np.ndarray
    S: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix
    j: np.ndarray
    flux_weights: np.ndarray
    load_weights: np.ndarray
    tk_row_sums: np.ndarray
    scale: float
    K: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def count(self):
        return self.cloud.count

    def kernel_average(self, v):
        """Row-stochastic kernel average P v, P = tK / row sums.

        P is reconstructed from S to avoid storing tK:
        P v = v - (S v) / (c * rowsum) row by row.
        """
        v = np.asarray(v, dtype=float)
        return v - (self.S @ v) / (self.scale * self.tk_row_sums)

    def smooth(self, v):
        """One step of (I + P)/2 averaging; mollifies boundary liftings."""
        return 0.5 * (np.asarray(v, dtype=float) + self.kernel_average(v))


def build_operators(cloud, eps, newton_steps=2, keep_kernel=True):
    """Assemble the full operator set for a cloud at bandwidth eps.

    Runs the boundary pipeline (density, distance, direction), corrects the
    density, classifies dofs, and builds S, M, and B.  Set keep_kernel=False
    to drop the raw kernel matrix once S is assembled (saves memory on large
    sweeps; pointwise extraction then needs a rebuild).
    """
    neighbors = build_neighbors(cloud, truncation_radius(eps))
    est = bd.estimate_boundary(cloud, neighbors, eps, newton_steps=newton_steps)
    q_raw = bd.kde(cloud, neighbors, eps)
    q_hat = bd.corrected_density(q_raw, est.b, eps, cloud.intrinsic_dim)
    interior = bd.classify_dofs(est.b, eps)

    K = kernel_matrix(cloud, neighbors, eps)
    del neighbors
    tk = normalized_kernel(K, q_hat)
    c = weak_scale(eps, cloud.intrinsic_dim, cloud.count)
    S, row_sums = _graph_laplacian(tk, c)
    del tk
    M = mass_matrix(q_hat)
    j = boundary_weights(est.b, eps, q_hat)
    B = boundary_matrix(cloud, j, interior)
    # self-calibrated flux weights: conormal part of S applied to coordinates
    w = np.einsum("ij,ij->i", S @ cloud.points, est.eta)
    np.maximum(w, 0.0, out=w)
    # row-sum volume weights: sum_j tK_ij / (N^2 eps^m m0) -> 1/(N q) interior
    m0, _ = interior_moments(cloud.intrinsic_dim)
    lw = row_sums / (cloud.count ** 2 * eps ** cloud.intrinsic_dim * m0)
    return OperatorSet(cloud=cloud, eps=eps, q_hat=q_hat, b=est.b, eta=est.eta,
                       interior=interior, S=S, M=M, B=B, j=j, flux_weights=w,
                       load_weights=lw, tk_row_sums=row_sums, scale=c,
                       K=K if keep_kernel else None)


def export_coo(matrix, path):
    """Write a sparse matrix as whitespace-separated COO text: i j value."""
    coo = matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, jj, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {jj} {v:.17g}\n")
