"""Point-cloud containers, synthetic sample-set generators, and neighbor search.

A :class:`PointCloud` is just an (N, n) array of ambient coordinates plus the
intrinsic dimension m of the sampled manifold (m is configuration, never
estimated).  The generators cover the synthetic test domains used throughout:
uniform and warped interval grids, the unit-square tensor grid, a uniformly
sampled solid ellipse, and a uniformly sampled unit upper hemisphere.

Neighbor lists are exact fixed-radius lists (KD-tree accelerated) stored in a
CSR-like layout with squared distances, and always include the point itself.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


@dataclass
class PointCloud:
    """Sample points on (or in) a manifold.

    Attributes
    ----------
    points : ndarray, shape (N, n)
        Ambient coordinates, one point per row.
    intrinsic_dim : int
        Dimension m of the underlying manifold, 1 <= m <= n.
    """

    points: np.ndarray
    intrinsic_dim: int

    def __post_init__(self):
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(self.points, dtype=float)))
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise ValueError("a point cloud needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        m = int(self.intrinsic_dim)
        if not 1 <= m <= pts.shape[1]:
            raise ValueError(
                f"intrinsic dimension m={m} must satisfy 1 <= m <= n={pts.shape[1]}"
            )
        self.points = pts
        self.intrinsic_dim = m

    @property
    def count(self):
        return self.points.shape[0]

    @property
    def ambient_dim(self):
        return self.points.shape[1]


@dataclass
class NeighborList:
    """Fixed-radius neighbor list in CSR layout, self-pairs included.

    ``indices[indptr[i]:indptr[i+1]]`` are the neighbors of point i (including
    i itself, with squared distance 0) and ``d_squared`` holds the matching
    squared ambient distances.  The list is symmetric by construction.
    """

    indptr: np.ndarray
    indices: np.ndarray
    d_squared: np.ndarray
    r_cut: float

    @property
    def count(self):
        return len(self.indptr) - 1

    def degrees(self):
        """Number of neighbors per point (self included)."""
        return np.diff(self.indptr)


def generate_interval_grid(count, a, b):
    """Uniform grid of `count` points on [a, b], endpoints included (m=n=1)."""
    if count < 2:
        raise ValueError("interval grid needs count >= 2")
    if not a < b:
        raise ValueError(f"invalid interval bounds: a={a} must be < b={b}")
    x = np.linspace(a, b, count)
    return PointCloud(x[:, None], intrinsic_dim=1)


def warp_interval_grid(cloud, shift=0.05, power=1.2):
    """Monotone nonuniform warp of a 1-D grid, preserving its endpoints.

    The grid is mapped affinely to [0, 1], transformed by t -> (t + shift)^power
    (fractional powers of negative bases are thereby avoided), then affinely
    rescaled back onto the original interval.  With the defaults the point
    density comes out higher near the left endpoint than near the right one.
    """
    if cloud.ambient_dim != 1 or cloud.intrinsic_dim != 1:
        raise ValueError("warp_interval_grid expects a 1-D grid")
    x = cloud.points[:, 0]
    lo, hi = x.min(), x.max()
    if hi <= lo:
        raise ValueError("degenerate interval")
    t = (x - lo) / (hi - lo)
    base = t + shift
    if np.any(base <= 0):
        raise ValueError("shift must keep t + shift positive on [0, 1]")
    w = base ** power
    y = lo + (w - w.min()) / (w.max() - w.min()) * (hi - lo)
    return PointCloud(y[:, None], intrinsic_dim=1)


def generate_square_grid(cells_per_side):
    """Tensor grid of cell vertices on the unit square: (cells+1)^2 points."""
    if cells_per_side < 2:
        raise ValueError("square grid needs cells_per_side >= 2")
    v = np.linspace(0.0, 1.0, cells_per_side + 1)
    xx, yy = np.meshgrid(v, v, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return PointCloud(pts, intrinsic_dim=2)


def sample_ellipse(count, a=1.0, b=2.0 / 3.0, seed=0):
    """`count` points uniform on the solid ellipse x^2/a^2 + y^2/b^2 <= 1.

    Rejection sampling from the bounding box [-a, a] x [-b, b]; deterministic
    given the seed (m = n = 2).
    """
    if a <= 0 or b <= 0:
        raise ValueError("ellipse semi-axes must be positive")
    rng = np.random.default_rng(seed)
    kept = []
    have = 0
    while have < count:
        block = max(1024, int(1.6 * (count - have)))
        xy = rng.uniform(-1.0, 1.0, size=(block, 2)) * [a, b]
        mask = (xy[:, 0] / a) ** 2 + (xy[:, 1] / b) ** 2 <= 1.0
        accepted = xy[mask]
        kept.append(accepted)
        have += len(accepted)
    pts = np.concatenate(kept)[:count]
    return PointCloud(pts, intrinsic_dim=2)


def sample_hemisphere(count, seed=0):
    """`count` points uniform on the unit upper hemisphere in R^3 (m=2, n=3).

    Standard-normal 3-vectors are normalized to the sphere and the z
    coordinate reflected to |z|; deterministic given the seed.
    """
    if count < 1:
        raise ValueError("need count >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, 3))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms < 1e-12):   # essentially never; regenerate degenerate rows
        bad = norms < 1e-12
        v[bad] = rng.standard_normal((bad.sum(), 3))
        norms = np.linalg.norm(v, axis=1)
    v /= norms[:, None]
    v[:, 2] = np.abs(v[:, 2])
    return PointCloud(v, intrinsic_dim=2)


def build_neighbors(cloud, r_cut):
    """Exact fixed-radius neighbor list with squared distances, self included."""
    if r_cut <= 0:
        raise ValueError("r_cut must be positive")
    pts = cloud.points
    n = cloud.count
    tree = cKDTree(pts)
    pairs = tree.query_pairs(r_cut, output_type="ndarray")
    if len(pairs):
        d2_pairs = np.sum((pts[pairs[:, 0]] - pts[pairs[:, 1]]) ** 2, axis=1)
        rows = np.concatenate([pairs[:, 0], pairs[:, 1], np.arange(n)])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0], np.arange(n)])
        d2 = np.concatenate([d2_pairs, d2_pairs, np.zeros(n)])
    else:
        rows = cols = np.arange(n)
        d2 = np.zeros(n)
    order = np.lexsort((cols, rows))
    rows, cols, d2 = rows[order], cols[order], d2[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return NeighborList(indptr=indptr, indices=cols.astype(np.int64),
                        d_squared=d2, r_cut=float(r_cut))


def mean_spacing(cloud):
    """Mean distance to the nearest other point (duplicates contribute 0)."""
    tree = cKDTree(cloud.points)
    d, _ = tree.query(cloud.points, k=2)
    nearest = d[:, 1]
    if np.all(nearest == 0):
        raise ValueError("cloud consists only of duplicated points")
    return float(nearest.mean())


def load_points_csv(path, intrinsic_dim):
    """Load a point cloud from CSV (one point per row, optional header)."""
    with open(path) as fh:
        first = fh.readline()
    has_header = any(c.isalpha() for c in first.split(",")[0])
    pts = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
    return PointCloud(pts, intrinsic_dim=intrinsic_dim)


def save_points_csv(cloud, path):
    """Write a point cloud as CSV with coordinate-column header x0,x1,..."""
    header = ",".join(f"x{i}" for i in range(cloud.ambient_dim))
    np.savetxt(path, cloud.points, delimiter=",", header=header, comments="")
