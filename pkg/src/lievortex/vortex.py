"""Isotropy (vortex) algebras, Darboux frames and vortex-manifold probing."""
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg
import scipy.optimize

from . import liecore
from .reduction import field_step, reduced_field

DEFAULT_RANK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DarbouxFrame:
    """Rows of ``X``/``Y`` are the vectors x^(l), y^(l); ``h[l] = |x^(l)|^2 = |y^(l)|^2``."""

    X: np.ndarray
    Y: np.ndarray
    h: np.ndarray

    @property
    def k(self):
        return 2 * len(self.h)

    @property
    def n(self):
        return self.X.shape[1]

    def reconstruct(self):
        return self.X.T @ self.Y - self.Y.T @ self.X

    def stacked(self):
        """The k x n matrix Z with rows x^(1), y^(1), x^(2), y^(2), ..."""
        z = np.empty((self.k, self.n))
        z[0::2] = self.X
        z[1::2] = self.Y
        return z

    def block_generators(self, normalized=False):
        """x^(l) ^ y^(l) for each block (divided by h_l when ``normalized``)."""
        out = []
        for x, y, h in zip(self.X, self.Y, self.h):
            w = np.outer(x, y) - np.outer(y, x)
            out.append(w / h if normalized else w)
        return out

    def transformed(self, g):
        """Frame components after the change of frame v -> v g (space to body)."""
        return DarbouxFrame(self.X @ g, self.Y @ g, self.h)


def darboux_decompose(M, rank_tol=DEFAULT_RANK_TOL):
    """Write a skew matrix as sum_l x^(l) ^ y^(l) with mutually orthogonal vectors.

    Blocks come from the real Schur form and are sorted by decreasing ``h``.
    Inside each plane the phase is fixed so that x^(l) has a positive
    component, and y^(l) a zero component, at the first coordinate on which
    the plane has support.
    """
    M = liecore.momentum(M)
    n = M.shape[0]
    if n < 2 or not np.any(M):
        return DarbouxFrame(np.zeros((0, n)), np.zeros((0, n)), np.zeros(0))
    T, Z = scipy.linalg.schur(M, output="real")
    blocks = []
    i = 0
    scale = np.abs(T).max()
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 1e-14 * scale:
            b = 0.5 * (T[i, i + 1] - T[i + 1, i])
            p, q = Z[:, i], Z[:, i + 1]
            if b < 0:
                p, q, b = q, p, -b
            blocks.append((b, p, q))
            i += 2
        else:
            i += 1
    if not blocks:
        return DarbouxFrame(np.zeros((0, n)), np.zeros((0, n)), np.zeros(0))
    hmax = max(b for b, _, _ in blocks)
    blocks = [blk for blk in blocks if blk[0] > rank_tol * hmax]
    blocks.sort(key=lambda blk: -blk[0])
    X, Y, H = [], [], []
    for b, p, q in blocks:
        support = p * p + q * q
        i0 = int(np.argmax(support > 1e-8 * support.max()))
        r = math.hypot(p[i0], q[i0])
        c, s = p[i0] / r, q[i0] / r
        xhat = c * p + s * q
        yhat = -s * p + c * q
        X.append(math.sqrt(b) * xhat)
        Y.append(math.sqrt(b) * yhat)
        H.append(b)
    return DarbouxFrame(np.array(X), np.array(Y), np.array(H))


@dataclass(frozen=True, eq=False)
class VortexBasis:
    m_s: np.ndarray
    basis: list
    rank_tol: float
    singular_values: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self):
        return len(self.basis)

    def coordinates(self):
        return np.array([liecore.vec(b) for b in self.basis]).reshape(self.dim, -1)

    def isotropy_residual(self):
        """max_i ||[m_s, xi_i]|| (zero for an exact isotropy basis)."""
        if not self.basis:
            return 0.0
        return max(float(np.linalg.norm(liecore.ad_star(b, self.m_s))) for b in self.basis)

    def closure_residual(self):
        """Largest component of [xi_i, xi_j] orthogonal to the span of the basis."""
        if self.dim < 2:
            return 0.0
        B = self.coordinates()
        worst = 0.0
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                c = liecore.vec(liecore.ad(self.basis[i], self.basis[j]))
                worst = max(worst, float(np.linalg.norm(c - B.T @ (B @ c))))
        return worst

    def max_commutator(self):
        worst = 0.0
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                worst = max(worst, float(np.linalg.norm(liecore.ad(self.basis[i], self.basis[j]))))
        return worst


def coadjoint_matrix(m_s):
    """Matrix of xi -> [m_s, xi] on algebra coordinates."""
    n = m_s.shape[0]
    return np.column_stack([liecore.vec(liecore.ad(m_s, e)) for e in liecore.basis(n)])


def _fix_sign(c):
    k = int(np.argmax(np.abs(c) > 1e-12))
    return -c if c[k] < 0 else c


def isotropy_basis(m_s, rank_tol=DEFAULT_RANK_TOL, canonical=True):
    """Orthonormal basis of {xi : ad*_xi m_s = 0}.

    The nullspace comes from an SVD with relative cutoff ``rank_tol``.  With
    ``canonical`` the basis is rotated so that it starts with the normalised
    Darboux block generators (whose one-parameter subgroups are circles of
    period 2*pi), completed by a sign-fixed orthonormal remainder.
    """
    m_s = liecore.momentum(m_s)
    n = m_s.shape[0]
    d = liecore.dim_algebra(n)
    if not 0 < rank_tol < 1:
        raise ValueError("rank_tol must lie in (0, 1)")
    L = coadjoint_matrix(m_s)
    _, sv, Vt = np.linalg.svd(L)
    smax = sv[0] if sv.size else 0.0
    if smax == 0.0:
        null = np.eye(d)
    else:
        null = Vt[sv <= rank_tol * smax].T
    if canonical and smax > 0.0 and null.shape[1] > 0:
        gens = [liecore.vec(w) for w in darboux_decompose(m_s, rank_tol).block_generators(normalized=True)]
        gens = [c for c in gens if np.linalg.norm(c - null @ (null.T @ c)) < 1e-6]
        cols = list(gens)
        if cols:
            G = np.column_stack(cols)
            rest = null - G @ (G.T @ null)
            u, s, _ = np.linalg.svd(rest, full_matrices=False)
            extra = u[:, s > 1e-6][:, : null.shape[1] - len(cols)]
            cols += [_fix_sign(c) for c in extra.T]
            null = np.column_stack(cols)
        else:
            null = np.column_stack([_fix_sign(c) for c in null.T])
    basis = [liecore.unvec(c, n) for c in null.T]
    return VortexBasis(m_s, basis, rank_tol, sv)


def vortex_field(xi, g):
    """Right-invariant extension w(g) = xi g."""
    return np.asarray(xi, dtype=float) @ np.asarray(g, dtype=float)


def vortex_flow(xi, g0, s):
    """Flow of the right-invariant field: g0 -> exp(s xi) g0."""
    return liecore.exp(s * np.asarray(xi, dtype=float)) @ np.asarray(g0, dtype=float)


def darboux_vortex_rhs(X, Y):
    """Redundant-coordinate vortex fields x' = (x,x) y, y' = -(y,y) x, one per block row."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    xx = np.einsum("ij,ij->i", X, X)[:, None]
    yy = np.einsum("ij,ij->i", Y, Y)[:, None]
    return xx * Y, -yy * X


def commutation_residual(sys, xi, g, delta=1e-4):
    """Four-point flow-composition estimate of ||[v, w](g)||.

    ``v`` is the reduced field of ``sys`` (advanced by one RKMK4 step of
    size +-delta) and ``w`` the right-invariant field of ``xi`` (exact flow).
    """
    xi = np.asarray(xi, dtype=float)
    g = np.ascontiguousarray(g, dtype=float)
    fwd = liecore.exp(delta * xi)
    bwd = liecore.exp(-delta * xi)
    g1 = field_step(sys, g, delta)
    g2 = fwd @ g1
    g3 = field_step(sys, np.ascontiguousarray(g2), -delta)
    g4 = bwd @ g3
    return float(np.linalg.norm(g4 - g)) / delta**2


def bracket_scale(sys, xi):
    """Natural size ||xi|| * ||A^-1|| * ||m_s|| of a bracket [v, w] (||xi|| if that vanishes)."""
    ainv = sys.operator_at(None).ainv_matrix if not sys.generalized else None
    op_norm = float(np.linalg.eigvalsh(ainv).max()) if ainv is not None and ainv.size else 1.0
    s = float(np.linalg.norm(xi)) * op_norm * float(np.linalg.norm(sys.momentum))
    return s if s > 0 else float(np.linalg.norm(xi))


def vortex_covector_pairing(sys, xi, g):
    """Pairing of the vortex field of ``xi`` with the reduced covector field at g.

    Both are left-trivialised: the covector is A(g^-1 v(g) - lam) and the
    vector is g^-1 xi g.
    """
    g = np.asarray(g, dtype=float)
    w = g.T @ reduced_field(sys, g) - sys.lam
    cov = sys.operator_at(g).apply(liecore.skew_part(w))
    return liecore.pairing(cov, g.T @ xi @ g)


@dataclass
class ManifoldReport:
    dimension: int
    tangent_ranks: list
    abelian: bool
    max_commutator: float
    periods: list
    min_return_distances: list
    samples: int

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "tangent_rank_min": min(self.tangent_ranks) if self.tangent_ranks else 0,
            "tangent_rank_max": max(self.tangent_ranks) if self.tangent_ranks else 0,
            "abelian": self.abelian,
            "max_commutator": self.max_commutator,
            "periods": self.periods,
            "min_return_distances": self.min_return_distances,
            "samples": self.samples,
        }


def _circle_period(xi, t_max, scan, tol):
    """First return time of t -> exp(t xi) to the identity, or None."""
    n = xi.shape[0]
    eye = np.eye(n)

    def dist(t):
        return float(np.linalg.norm(liecore.exp(t * xi) - eye))

    ts = np.linspace(0.0, t_max, scan + 1)[1:]
    ds = np.array([dist(t) for t in ts])
    left = np.argmax(ds > 0.5)
    if ds[left] <= 0.5:
        return None, float(ds.min())
    dt = ts[1] - ts[0]
    best = float(ds[left:].min())
    for i in range(left + 1, len(ts) - 1):
        if ds[i] <= ds[i - 1] and ds[i] <= ds[i + 1] and ds[i] < 0.2:
            res = scipy.optimize.minimize_scalar(dist, bounds=(ts[i] - dt, ts[i] + dt), method="bounded",
                                                 options={"xatol": 1e-12})
            if res.fun < tol:
                return float(res.x), float(res.fun)
            best = min(best, float(res.fun))
    return None, best


def probe_vortex_manifold(basis, g0, steps=64, t_max=4 * math.pi, tol=1e-6, abelian_tol=1e-8):
    """Sample exp(sum t_i xi_i) g0 and summarise the vortex manifold through g0.

    Reports the tangent rank at the samples, whether the basis commutes, and
    for each basis direction the recurrence period of its coordinate circle
    (``None`` if it does not close within ``t_max``).
    """
    if basis.dim == 0:
        raise ValueError("empty vortex basis")
    g0 = np.asarray(g0, dtype=float)
    dim = basis.dim
    per_axis = max(2, int(round(steps ** (1.0 / dim))))
    axis = np.linspace(0.0, 2 * math.pi, per_axis, endpoint=False) + 0.37
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    pts = np.stack([gr.ravel() for gr in grids], axis=1)
    ranks = []
    for t in pts:
        xi = sum(ti * b for ti, b in zip(t, basis.basis))
        p = liecore.exp(xi) @ g0
        tangents = np.array([liecore.vec(p.T @ b @ p) for b in basis.basis])
        s = np.linalg.svd(tangents, compute_uv=False)
        ranks.append(int(np.sum(s > 1e-9 * s[0])))
    periods, returns = [], []
    for b in basis.basis:
        period, d = _circle_period(b, t_max, 4000, tol)
        periods.append(period)
        returns.append(d)
    maxc = basis.max_commutator()
    return ManifoldReport(
        dimension=int(np.median(ranks)),
        tangent_ranks=ranks,
        abelian=maxc <= abelian_tol,
        max_commutator=maxc,
        periods=periods,
        min_return_distances=returns,
        samples=len(pts),
    )
