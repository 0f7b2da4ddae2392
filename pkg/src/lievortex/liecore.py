"""Matrix kernel for SO(n) and so(n).

Group elements are orthogonal ``(n, n)`` arrays with positive determinant;
algebra elements and momenta are skew ``(n, n)`` arrays.  Momenta are
identified with the algebra through the pairing ``(m, xi) = -1/2 tr(m xi)``,
which makes the elementary skews ``E_ij = e_i e_j^T - e_j e_i^T`` (i < j)
orthonormal.  With that identification

* ``ad(xi, eta)      = xi eta - eta xi``
* ``ad_star(xi, m)   = m xi - xi m``
* ``Ad(g, xi)        = g xi g^T``
* ``Ad_star(g, m)    = g^T m g``

The validators return read-only float copies so values can be shared freely.
"""
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import kernels
from .errors import DimensionMismatch, InvalidElement

SKEW_TOL = 1e-12
ORTH_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _square(a, what):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{what} must be a square matrix, got shape {a.shape}")
    return a


def algebra_element(xi, tol=SKEW_TOL):
    """Validate a skew matrix; the tolerance is relative to max(1, ||xi||)."""
    xi = _square(xi, "algebra element")
    scale = max(1.0, float(np.linalg.norm(xi)))
    if np.linalg.norm(xi + xi.T) > tol * scale:
        raise InvalidElement(f"matrix is not skew (||x + x^T|| = {np.linalg.norm(xi + xi.T):.3e})")
    return _frozen(xi)


momentum = algebra_element


def group_element(g, tol=ORTH_TOL):
    g = _square(g, "group element")
    err = np.linalg.norm(g.T @ g - np.eye(g.shape[0]))
    if err > tol:
        raise InvalidElement(f"matrix is not orthogonal (||g^T g - I|| = {err:.3e})")
    if np.linalg.det(g) <= 0:
        raise InvalidElement("matrix has non-positive determinant")
    return _frozen(g)


def _same_dim(a, b):
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")


def dim_algebra(n):
    return n * (n - 1) // 2


@lru_cache(maxsize=None)
def triu_indices(n):
    """Row/column index arrays of the lexicographic basis ordering (i < j)."""
    iu, ju = np.triu_indices(n, k=1)
    iu = np.ascontiguousarray(iu, dtype=np.int64)
    ju = np.ascontiguousarray(ju, dtype=np.int64)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


def elementary(n, i, j):
    """E_ij with zero-based indices."""
    e = np.zeros((n, n))
    e[i, j] = 1.0
    e[j, i] = -1.0
    return e


def basis(n):
    """Ordered basis [E_01, E_02, ..., E_(n-2)(n-1)] of so(n)."""
    iu, ju = triu_indices(n)
    return [elementary(n, i, j) for i, j in zip(iu, ju)]


def basis_labels(n):
    iu, ju = triu_indices(n)
    return [f"{i}{j}" for i, j in zip(iu, ju)]


def vec(xi):
    """Upper-triangle coordinates of a skew matrix (pairing-orthonormal)."""
    xi = np.asarray(xi, dtype=float)
    iu, ju = triu_indices(xi.shape[0])
    return xi[iu, ju].copy()


def unvec(c, n=None):
    c = np.asarray(c, dtype=float)
    if n is None:
        n = int(round((1 + np.sqrt(1 + 8 * c.size)) / 2))
    if c.size != dim_algebra(n):
        raise DimensionMismatch(f"{c.size} coordinates do not describe so({n})")
    iu, ju = triu_indices(n)
    out = np.zeros((n, n))
    out[iu, ju] = c
    out[ju, iu] = -c
    return out


def skew_part(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a - a.T)


def pairing(m, xi):
    m = np.asarray(m, dtype=float)
    xi = np.asarray(xi, dtype=float)
    _same_dim(m, xi)
    return -0.5 * float(np.einsum("ij,ji->", m, xi))


def ad(xi, eta):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    _same_dim(xi, eta)
    return xi @ eta - eta @ xi


def ad_star(xi, m):
    xi = np.asarray(xi, dtype=float)
    m = np.asarray(m, dtype=float)
    _same_dim(xi, m)
    return m @ xi - xi @ m


def Ad(g, xi):
    g = np.asarray(g, dtype=float)
    xi = np.asarray(xi, dtype=float)
    _same_dim(g, xi)
    return g @ xi @ g.T


def Ad_star(g, m):
    """Coadjoint action; body momentum from space momentum is ``Ad_star(g, m_s)``."""
    g = np.asarray(g, dtype=float)
    m = np.asarray(m, dtype=float)
    _same_dim(g, m)
    return g.T @ m @ g


def exp(xi):
    xi = np.ascontiguousarray(xi, dtype=float)
    if xi.ndim != 2 or xi.shape[0] != xi.shape[1]:
        raise DimensionMismatch(f"exp expects a square matrix, got {xi.shape}")
    if xi.shape[0] == 1:
        return np.ones((1, 1))
    return kernels.expm_skew(xi)


def log(g):
    """Principal matrix logarithm projected onto so(n); valid for rotation angles < pi."""
    g = np.asarray(g, dtype=float)
    return skew_part(np.real(scipy.linalg.logm(g)))


def random_algebra(n, rng, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * skew_part(a) * np.sqrt(2.0)


def random_group(n, rng):
    """Haar-distributed rotation (QR of a Gaussian matrix with sign fix)."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def hat3(v):
    """so(3) hat map, hat3(v) @ w == cross(v, w)."""
    v = np.asarray(v, dtype=float)
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def vee3(x):
    x = np.asarray(x, dtype=float)
    return np.array([x[2, 1], x[0, 2], x[1, 0]])


# vec(hat3(v)) == HAT3_COORDS @ v   (coordinates ordered E_01, E_02, E_12)
HAT3_COORDS = np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
HAT3_COORDS.setflags(write=False)
