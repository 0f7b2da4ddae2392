"""Controllability checks and steering of the reduced system

    g' = g (A^-1 Ad*_g m_s + lam - sum_i u_i lam_i),   |u_i(t)| <= eps,

with piecewise-constant controls ``u`` on a uniform grid.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import itertools
import math
import time
import warnings

import numpy as np

from . import kernels, liecore
from .errors import BudgetExhausted, DimensionMismatch
from .reduction import ReducedSystem
from .stiefel_top import ControlSignal
from .vortex import VortexBasis

DEFAULT_RANK_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ControlSystem:
    sys: ReducedSystem
    control_dirs: list
    eps: float
    segments: int = 20
    T: float = 10.0
    steps_per_segment: int = 25

    def __post_init__(self):
        dirs = [liecore.algebra_element(c) for c in self.control_dirs]
        if any(d.shape != (self.n, self.n) for d in dirs):
            raise DimensionMismatch("control directions must live in the same so(n) as the system")
        object.__setattr__(self, "control_dirs", dirs)
        if self.eps <= 0 or self.segments < 1 or self.T <= 0 or self.steps_per_segment < 1:
            raise ValueError("need eps > 0, segments >= 1, T > 0 and steps_per_segment >= 1")
        if self.sys.chirality != "left" or self.sys.generalized:
            raise ValueError("controlled systems use a left-invariant constant inertia operator")

    @property
    def n(self):
        return self.sys.n

    @property
    def k(self):
        return len(self.control_dirs)

    @property
    def h(self):
        return self.T / (self.segments * self.steps_per_segment)

    def zero_signal(self):
        return ControlSignal.zeros(self.segments, self.k, self.T)

    def _args(self):
        iu, ju = liecore.triu_indices(self.n)
        dirs = np.ascontiguousarray(np.array(self.control_dirs).reshape(self.k, self.n, self.n))
        return (np.ascontiguousarray(self.sys.momentum), np.ascontiguousarray(self.sys.inertia.ainv_matrix),
                iu, ju, np.ascontiguousarray(self.sys.lam), dirs)

    def _check_signal(self, signal):
        v = signal.values
        if v.shape != (self.segments, self.k):
            raise DimensionMismatch(f"signal of shape {v.shape}, expected {(self.segments, self.k)}")
        if abs(signal.T - self.T) > 1e-12 * self.T:
            raise ValueError(f"signal horizon {signal.T} differs from system horizon {self.T}")
        return np.ascontiguousarray(v)


def controlled_endpoint(csys, g0, signal, reverse=False):
    """Endpoint of the controlled flow over [0, T]; ``reverse`` integrates backwards from T to 0."""
    values = csys._check_signal(signal)
    m_s, ainv, iu, ju, lam, dirs = csys._args()
    h = -csys.h if reverse else csys.h
    return kernels.controlled_rollout(np.ascontiguousarray(g0, dtype=float), m_s, ainv, iu, ju, lam, dirs,
                                      values, h, csys.steps_per_segment)


def controlled_path(csys, g0, signal):
    values = csys._check_signal(signal)
    m_s, ainv, iu, ju, lam, dirs = csys._args()
    gs = kernels.controlled_trajectory(np.ascontiguousarray(g0, dtype=float), m_s, ainv, iu, ju, lam, dirs,
                                       values, csys.h, csys.steps_per_segment)
    return np.arange(gs.shape[0]) * csys.h, gs


def frobenius_distance(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


# --- Lie-algebra rank condition ------------------------------------------------


@dataclass
class RankReport:
    point: np.ndarray
    directions: np.ndarray
    labels: list
    rank: int
    depth: int
    singular_values: np.ndarray

    def to_dict(self):
        return {
            "point": np.asarray(self.point).tolist(),
            "labels": self.labels,
            "rank": self.rank,
            "depth": self.depth,
            "singular_values": np.asarray(self.singular_values).tolist(),
        }


@dataclass
class _Field:
    """Left-trivialised vector field on G that depends on g only through m_c = g^T m_s g.

    ``degree`` bounds its polynomial degree in m_c, which makes the
    directional derivatives below exact up to rounding.
    """

    label: str
    fn: object
    degree: int


def _stencil(p):
    # derivative weights at nodes -K..K, exact for polynomials of degree <= 2K
    K = max(1, math.ceil(p / 2))
    nodes = np.arange(-K, K + 1, dtype=float)
    V = np.vander(nodes, increasing=True).T
    rhs = np.zeros(len(nodes))
    rhs[1] = 1.0
    return nodes, np.linalg.solve(V, rhs)


def _directional(fld, m, e):
    if fld.degree == 0:
        return np.zeros_like(m)
    ne = np.linalg.norm(e)
    if ne == 0.0:
        return np.zeros_like(m)
    if fld.degree == 1:
        return fld.fn(m + e) - fld.fn(m)
    s = max(np.linalg.norm(m), 1e-3) / ne
    nodes, w = _stencil(fld.degree)
    return sum(wi * fld.fn(m + (ti * s) * e) for ti, wi in zip(nodes, w) if wi != 0.0) / s


def _bracket(a, b):
    def fn(m):
        am, bm = a.fn(m), b.fn(m)
        return (am @ bm - bm @ am
                + _directional(b, m, m @ am - am @ m)
                - _directional(a, m, m @ bm - bm @ m))

    return _Field(f"[{a.label},{b.label}]", fn, a.degree + b.degree)


def _generators(csys, include_drift):
    op = csys.sys.inertia
    lam = csys.sys.lam
    gens = []
    if include_drift:
        gens.append(_Field("v", lambda m: op.apply_inverse(m) + lam, 1))
    for i, d in enumerate(csys.control_dirs):
        gens.append(_Field(f"L{i + 1}", (lambda dd: lambda m: -dd)(d), 0))
    return gens


def _right_nested(gens, depth):
    levels = [list(gens)]
    for _ in range(depth - 1):
        nxt = []
        for a in gens:
            for b in levels[-1]:
                if a.label != b.label:
                    nxt.append(_bracket(a, b))
        levels.append(nxt)
    return [f for lvl in levels for f in lvl]


def _rank(vectors, tol):
    s = np.linalg.svd(vectors, compute_uv=False) if vectors.size else np.zeros(0)
    if s.size == 0 or s[0] == 0.0:
        return 0, s
    return int(np.sum(s > tol * s[0])), s


def lie_rank(csys, g, depth=3, tol=DEFAULT_RANK_TOL, include_drift=True):
    """Rank at g of the right-nested brackets (up to ``depth``) of the drift and control fields.

    Fields are compared in the left-trivialised chart.  Control/control
    brackets reduce to exact matrix commutators; brackets involving the
    drift use directional derivatives of polynomial maps of m_c, evaluated
    with stencils exact for the degree involved.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    g = np.asarray(g, dtype=float)
    m_c = g.T @ csys.sys.momentum @ g
    fields = _right_nested(_generators(csys, include_drift), depth)
    vecs = np.array([liecore.vec(f.fn(m_c)) for f in fields])
    rank, s = _rank(vecs, tol)
    return RankReport(g, vecs, [f.label for f in fields], rank, depth, s)


def two_generator_check(l1, l2, depth=None, tol=1e-10):
    """Dimension of the Lie subalgebra generated by l1, l2 (closed under brackets up to ``depth``).

    Returns ``(generates_everything, dimension)``.
    """
    l1 = liecore.algebra_element(l1)
    l2 = liecore.algebra_element(l2)
    n = l1.shape[0]
    d = liecore.dim_algebra(n)
    scale = max(np.linalg.norm(l1), np.linalg.norm(l2), 1e-300)
    basis = []

    def add(x):
        c = liecore.vec(x)
        for b in basis:
            c = c - (b @ c) * b
        nc = np.linalg.norm(c)
        if nc > tol * scale * max(1.0, np.linalg.norm(x) / scale):
            basis.append(c / nc)
            return True
        return False

    frontier = [x for x in (l1, l2) if add(x)]
    elements = list(frontier)
    level = 1
    while frontier and (depth is None or level < depth) and len(basis) < d:
        new = []
        for a, b in itertools.product(elements, frontier):
            x = liecore.ad(a, b)
            if add(x):
                new.append(x)
        elements.extend(new)
        frontier = new
        level += 1
    return len(basis) == d, len(basis)


# --- planar examples -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlanarField:
    """Vector field on the cylinder (x1 mod 2*pi, x2)."""

    evaluator: object
    analytic: bool = True
    name: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.evaluator(np.array([x[0] % (2 * math.pi), x[1]])), dtype=float)


def _nonanalytic_g(x):
    x1 = x[0] % (2 * math.pi)
    return np.array([0.0, math.sin(x1) if x1 > math.pi else 0.0])


PLANAR_FIELDS = {
    "horizontal": PlanarField(lambda x: np.array([1.0, 0.0]), True, "horizontal"),
    "vertical": PlanarField(lambda x: np.array([0.0, 1.0]), True, "vertical"),
    "cosine": PlanarField(lambda x: np.array([0.0, 1.0 - math.cos(x[0])]), True, "cosine"),
    "nonanalytic": PlanarField(_nonanalytic_g, False, "nonanalytic"),
}


def _planar_bracket(X, Y, step):
    # [X, Y] = DY.X - DX.Y with central-difference Jacobian-vector products
    def jvp(F, x, v):
        return (F(x + step * v) - F(x - step * v)) / (2 * step)

    def Z(x):
        return jvp(Y, x, X(x)) - jvp(X, x, Y(x))

    return PlanarField(Z, X.analytic and Y.analytic)


def _word_label(word):
    label = word[-1]
    for w in reversed(word[:-1]):
        label = f"[{w},{label}]"
    return label


def planar_bracket_rank(f, g, point, depth=3, tol=DEFAULT_RANK_TOL, words=None, step=1e-3):
    """Rank at ``point`` of a set of right-nested brackets of two planar fields.

    ``words`` lists brackets as tuples of names, e.g. ``("f",)`` or
    ``("f", "f", "g")`` for [f,[f,g]]; by default every right-nested word of
    length <= depth is used.
    """
    named = {"f": f, "g": g}
    if words is None:
        words = [w for L in range(1, depth + 1) for w in itertools.product("fg", repeat=L)
                 if L == 1 or w[-1] != w[-2]]
    cache = {}

    def build(word):
        word = tuple(word)
        if word not in cache:
            if len(word) == 1:
                cache[word] = named[word[0]]
            else:
                cache[word] = _planar_bracket(named[word[0]], build(word[1:]), step)
        return cache[word]

    point = np.asarray(point, dtype=float)
    vecs = np.array([build(w)(point) for w in words])
    rank, s = _rank(vecs, tol)
    return RankReport(point, vecs, [_word_label(w) for w in words], rank, max(len(w) for w in words), s)


def line_x1(c=0.0, width=1e-9):
    """Region {x1 = c} on the cylinder."""

    def pred(x):
        d = abs((x[0] - c + math.pi) % (2 * math.pi) - math.pi)
        return d <= width

    return pred


def strip_x1(lo, hi):
    """Region {lo <= x1 <= hi} with 0 <= lo <= hi <= 2*pi."""

    def pred(x):
        x1 = x[0] % (2 * math.pi)
        return lo - 1e-12 <= x1 <= hi + 1e-12

    return pred


@dataclass
class TransversalityReport:
    transversal: bool
    forward_exit: list
    backward_exit: list
    forward_only: bool

    def to_dict(self):
        return {
            "transversal": self.transversal,
            "forward_only": self.forward_only,
            "forward_exit_times": self.forward_exit,
            "backward_exit_times": self.backward_exit,
        }


def _exit_time(f, region, x0, T_max, steps, sign):
    h = sign * T_max / steps
    x = np.asarray(x0, dtype=float)
    for s in range(1, steps + 1):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        if not region(x):
            return s * abs(h)
    return None


def transversality_probe(f, region, samples, T_max, steps=2000, measure_preserving=False):
    """Check that trajectories of ``f`` from each sample point leave ``region``.

    Without ``measure_preserving`` an exit is required both forward and
    backward in time; with it the forward exit suffices.  Exit times are
    resolved to ``T_max / steps``; ``None`` means no exit within ``T_max``.
    """
    fwd, bwd = [], []
    for x0 in samples:
        if not region(np.asarray(x0, dtype=float)):
            raise ValueError(f"sample {x0} is not in the region")
        fwd.append(_exit_time(f, region, x0, T_max, steps, +1.0))
        bwd.append(None if measure_preserving else _exit_time(f, region, x0, T_max, steps, -1.0))
    ok = all(t is not None for t in fwd)
    if not measure_preserving:
        ok = ok and all(t is not None for t in bwd)
    return TransversalityReport(ok, fwd, bwd, measure_preserving)


# --- steering -----------------------------------------------------------------


@dataclass(frozen=True)
class SteerBudget:
    """Search budget.  ``tol`` stops a start early; a best distance above
    ``max_distance`` raises :class:`BudgetExhausted`."""

    starts: int = 8
    max_iter: int = 60
    tol: float = 1e-9
    max_distance: float = 1e-2
    seed: int = 0
    fd_step: float = 1e-7
    time_limit: float = None
    workers: int = 1


@dataclass
class SteerResult:
    signal: ControlSignal
    distance: float
    endpoint: np.ndarray
    iterations: int
    starts_used: int
    wall_time: float
    history: list = field(default_factory=list)


_SVD_CUTOFF = 1e-6


def _lm_descent(csys, g0, target, u0, budget, deadline):
    m_s, ainv, iu, ju, lam, dirs = csys._args()
    eps = csys.eps
    shape = (csys.segments, csys.k)
    tvec = target.ravel()
    g0 = np.ascontiguousarray(g0, dtype=float)

    def endpoint(u):
        return kernels.controlled_rollout(g0, m_s, ainv, iu, ju, lam, dirs, u.reshape(shape), csys.h,
                                          csys.steps_per_segment)

    def endpoint_jac(u):
        return kernels.controlled_jacobian(g0, m_s, ainv, iu, ju, lam, dirs, u.reshape(shape), csys.h,
                                           csys.steps_per_segment, budget.fd_step)

    u = np.clip(u0.ravel().copy(), -eps, eps)
    gT, J = endpoint_jac(u)
    r = gT.ravel() - tvec
    cost = float(np.linalg.norm(r))
    mu = 1e-3
    iters = 0
    history = [cost]
    while iters < budget.max_iter and cost > budget.tol:
        if deadline is not None and time.perf_counter() > deadline:
            break
        iters += 1
        grad = J.T @ r
        at_hi = (u >= eps) & (grad < 0)
        at_lo = (u <= -eps) & (grad > 0)
        free = ~(at_hi | at_lo)
        # truncated-SVD LM step: singular values below the cutoff carry only
        # finite-difference noise and would otherwise be amplified as mu shrinks
        Uj, sj, Vtj = np.linalg.svd(J[:, free], full_matrices=False)
        keep = sj > _SVD_CUTOFF * sj[0] if sj.size and sj[0] > 0 else np.zeros(sj.shape, bool)
        proj = Uj[:, keep].T @ r
        improved = False
        while mu < 1e12 and keep.any():
            step = np.zeros_like(u)
            step[free] = -Vtj[keep].T @ (sj[keep] / (sj[keep] ** 2 + mu * sj[0] ** 2) * proj)
            u_new = np.clip(u + step, -eps, eps)
            r_new = endpoint(u_new).ravel() - tvec
            c_new = float(np.linalg.norm(r_new))
            if c_new < cost:
                u, cost = u_new, c_new
                mu = max(mu / 5.0, 1e-12)
                improved = True
                break
            mu *= 4.0
        history.append(cost)
        if not improved:
            break
        if cost > budget.tol:
            gT, J = endpoint_jac(u)
            r = gT.ravel() - tvec
            cost = float(np.linalg.norm(r))
    return u.reshape(shape), cost, iters, history


class _Inline:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    @staticmethod
    def map(fn, items):
        return map(fn, items)


def steer(csys, g0, g_target, budget=None):
    """Search for a bounded piecewise-constant signal moving ``g0`` to ``g_target``.

    Multi-start projected Levenberg-Marquardt on the segment values with
    forward-difference Jacobians.  The first start is the zero signal, the
    others are drawn uniformly from the box with per-start seeds spawned
    from ``budget.seed``.  Returns the first signal reaching ``budget.tol``
    or the best one found.
    """
    budget = budget or SteerBudget()
    g0 = liecore.group_element(g0)
    target = liecore.group_element(g_target)
    if g0.shape != (csys.n, csys.n) or target.shape != g0.shape:
        raise DimensionMismatch("initial and target elements must match the system dimension")
    start_time = time.perf_counter()
    deadline = None if budget.time_limit is None else start_time + budget.time_limit
    if lie_rank(csys, g0, depth=3).rank < liecore.dim_algebra(csys.n):
        warnings.warn("Lie-algebra rank condition fails at g0; steering may not reach the target",
                      RuntimeWarning, stacklevel=2)
    n_starts = max(budget.starts, 1)
    seeds = np.random.SeedSequence(budget.seed).spawn(n_starts)

    def run(s):
        if s == 0:
            u0 = np.zeros((csys.segments, csys.k))
        else:
            u0 = np.random.default_rng(seeds[s]).uniform(-csys.eps, csys.eps, size=(csys.segments, csys.k))
        return _lm_descent(csys, g0, target, u0, budget, deadline)

    # starts run in batches of ``workers``; scanning each batch in index order
    # keeps the result independent of thread scheduling
    workers = max(1, budget.workers)
    best = None
    total_iters = 0
    used = 0
    done = False
    with ThreadPoolExecutor(max_workers=workers) if workers > 1 else _Inline() as pool:
        for lo in range(0, n_starts, workers):
            for u, cost, iters, hist in pool.map(run, range(lo, min(lo + workers, n_starts))):
                used += 1
                total_iters += iters
                if best is None or cost < best[1]:
                    best = (u, cost, hist)
                if cost <= budget.tol:
                    done = True
                    break
            if done or (deadline is not None and time.perf_counter() > deadline):
                break
    u, cost, hist = best
    signal = ControlSignal(u, csys.T)
    assert signal.within(csys.eps)
    endpoint = controlled_endpoint(csys, g0, signal)
    distance = frobenius_distance(endpoint, target)
    result = SteerResult(signal, distance, endpoint, total_iters, used, time.perf_counter() - start_time, hist)
    if distance > budget.max_distance:
        raise BudgetExhausted(
            f"best distance {distance:.3e} after {used} starts exceeds {budget.max_distance:.1e}",
            signal=signal, distance=distance)
    return result


# --- vortex manifold transfer ------------------------------------------------------


@dataclass
class TransferReport:
    steering: SteerResult
    s_grid: list
    defects: np.ndarray
    worst_defect: float
    commute_tol: float

    @property
    def residual(self):
        return self.steering.distance

    def to_dict(self):
        return {
            "residual": self.residual,
            "s_grid": list(self.s_grid),
            "defects": self.defects.tolist(),
            "worst_defect": self.worst_defect,
            "ratio_to_residual": self.worst_defect / self.residual if self.residual > 0 else None,
            "commute_tol": self.commute_tol,
        }


def diagram_defects(csys, basis, h1, h2, signal, s_grid):
    """||Phi(exp(s xi) h1) - exp(s xi) h2|| for every s in ``s_grid`` and basis element xi."""
    out = np.empty((len(s_grid), basis.dim))
    for a, s in enumerate(s_grid):
        for b, xi in enumerate(basis.basis):
            shift = liecore.exp(s * xi)
            out[a, b] = frobenius_distance(controlled_endpoint(csys, shift @ h1, signal), shift @ h2)
    return out


def vortex_transfer(csys, basis, h1, h2, s_grid=(0.5, 1.0, 2.0), budget=None, commute_tol=1e-9):
    """Steer h1 to h2 and check that the same signal carries exp(s xi) h1 to exp(s xi) h2.

    ``basis`` must be the isotropy basis of the system's space momentum.
    """
    if not isinstance(basis, VortexBasis):
        raise TypeError("basis must be a VortexBasis")
    if np.linalg.norm(basis.m_s - csys.sys.momentum) > 1e-12 * max(1.0, np.linalg.norm(basis.m_s)):
        raise ValueError("vortex basis was computed for a different space momentum")
    result = steer(csys, h1, h2, budget)
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    defects = diagram_defects(csys, basis, h1, h2, result.signal, list(s_grid))
    worst = float(defects.max()) if defects.size else 0.0
    return TransferReport(result, list(s_grid), defects, worst, commute_tol)
