"""Exponential kernel and its interior/boundary moment constants.

All operators in this package are built from the single radial kernel

    K(x, y) = exp(-|x - y|^2 / eps^2),

i.e. k(z) = exp(-z) applied to the squared distance scaled by the bandwidth
``eps``.  Integrals of this kernel against polynomials of the local normal
coordinate have closed forms in terms of ``erf``; near a boundary they become
functions of the distance-to-boundary b.  Those "moments" are what the density
correction, the distance inversion, and the weak-operator scalings consume, so
they are hard-coded here rather than computed by quadrature (quadrature is
kept as a test oracle only).
"""

import numpy as np
from scipy.special import erf

SQRT_PI = np.sqrt(np.pi)

# Kernel weights below this threshold are treated as zero when sparsifying;
# exp(-r^2/eps^2) = TRUNCATION at r = eps*sqrt(ln(1/TRUNCATION)) ~ 4.8*eps,
# which preserves every expansion order used downstream (up to eps^4).
TRUNCATION = 1e-10


def truncation_radius(eps):
    """Cutoff radius beyond which kernel weights fall below TRUNCATION."""
    return float(eps) * np.sqrt(np.log(1.0 / TRUNCATION))


def kernel_eval(d_squared, eps):
    """Kernel weight exp(-d^2/eps^2) for squared distance(s) d_squared."""
    d_squared = np.asarray(d_squared, dtype=float)
    if np.any(d_squared < 0):
        raise ValueError("squared distances must be nonnegative")
    return np.exp(-d_squared / (eps * eps))


def interior_moments(m):
    """Interior moments (m0, m2) of the kernel in intrinsic dimension m.

    m0 = integral of exp(-|z|^2) over R^m = pi^(m/2), and the second moment
    in any single coordinate is m2 = m0/2.  The ratio m2/m0 = 1/2 is the
    cancellation that all the boundary-free expansions rely on.
    """
    if m < 1:
        raise ValueError("intrinsic dimension m must be >= 1")
    m0 = np.pi ** (m / 2.0)
    return m0, m0 / 2.0


def boundary_moments(b, eps, m):
    """Boundary moments (m0b, m1b, m2b) at distance(s) b from the boundary.

    These are the half-space moments of exp(-|z|^2) over the region reaching
    at most b/eps past the point in the outward normal direction:

        m0b = (pi^(m/2)/2) (1 + erf(b/eps))
        m1b = -(pi^((m-1)/2)/2) exp(-b^2/eps^2)
        m2b = (pi^((m-1)/2)/2) (-(b/eps) exp(-b^2/eps^2)
                                + (sqrt(pi)/2)(1 + erf(b/eps)))

    m1b <= 0 always (the missing mass lies on the outward side), and all three
    tend to their interior values (m0, 0, m2) as b/eps grows.  Vectorized in b.
    """
    t = np.asarray(b, dtype=float) / eps
    pref = np.pi ** ((m - 1) / 2.0) / 2.0
    decay = np.exp(-t * t)
    tail = 1.0 + erf(t)
    m0b = 0.5 * np.pi ** (m / 2.0) * tail
    m1b = -pref * decay
    m2b = pref * (-t * decay + 0.5 * SQRT_PI * tail)
    return m0b, m1b, m2b


def boundary_moment_recursive(ell, b, eps, m):
    """General boundary moment of order ell >= 0 by the two-term recursion.

    Integration by parts gives, for ell >= 2,

        m_ell = (b/eps)^(ell-1) * m1b + ((ell-1)/2) * m_(ell-2),

    grounded at the closed forms for ell = 0, 1.  Orders 0..2 agree exactly
    with :func:`boundary_moments`; higher orders appear in the Taylor-remainder
    analysis and in tests.
    """
    if ell < 0:
        raise ValueError("moment order must be nonnegative")
    m0b, m1b, _ = boundary_moments(b, eps, m)
    if ell == 0:
        return m0b
    if ell == 1:
        return m1b
    t = np.asarray(b, dtype=float) / eps
    return t ** (ell - 1) * m1b + 0.5 * (ell - 1) * boundary_moment_recursive(
        ell - 2, b, eps, m
    )


def half_moments():
    """Half-line moments (mbar0, mbar1) = (sqrt(pi)/2, 1/2).

    mbar0 = int_0^inf exp(-u^2) du and mbar1 = int_0^inf u exp(-u^2) du;
    these normalize the boundary-integral functional.
    """
    return SQRT_PI / 2.0, 0.5
