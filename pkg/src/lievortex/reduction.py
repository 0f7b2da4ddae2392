"""Euler equations, fields reduced to the group, and Lie-group integration.

A :class:`ReducedSystem` fixes the conserved momentum (space momentum ``m_s``
for a left-invariant metric, body momentum ``m_c`` for a right-invariant one)
together with a constant drift shift ``lam``.  The reduced field is

* left:  ``g' = g (A^-1 Ad*_g m_s + lam)``
* right: ``g' = (A^-1 Ad*_{g^-1} m_c + lam) g``

The inertia may also be a callable ``g -> InertiaOperator`` (nonholonomic
generalisation); such systems run on the generic Python path.
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import kernels, liecore
from .errors import DimensionMismatch, SingularMassMatrix, StepRejected
from .inertia import InertiaOperator

DEFAULT_H = 1e-3
DEFAULT_T = 10.0
DEFAULT_DRIFT_BUDGET = 1e-6


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    inertia: object
    momentum: np.ndarray
    lam: np.ndarray = None
    chirality: str = "left"

    def __post_init__(self):
        if self.chirality not in ("left", "right"):
            raise ValueError(f"chirality must be 'left' or 'right', not {self.chirality!r}")
        m = liecore.momentum(self.momentum)
        object.__setattr__(self, "momentum", m)
        lam = np.zeros_like(m) if self.lam is None else liecore.algebra_element(self.lam)
        if lam.shape != m.shape:
            raise DimensionMismatch("lam and momentum differ in dimension")
        object.__setattr__(self, "lam", lam)
        if isinstance(self.inertia, InertiaOperator) and self.inertia.n != self.n:
            raise DimensionMismatch(f"operator acts on so({self.inertia.n}), momentum lives in so({self.n})")

    @property
    def n(self):
        return self.momentum.shape[0]

    @property
    def generalized(self):
        return not isinstance(self.inertia, InertiaOperator)

    def operator_at(self, g=None):
        if not self.generalized:
            return self.inertia
        if g is None:
            raise ValueError("a state-dependent operator needs the group element")
        return self.inertia(g)

    def with_shift(self, extra):
        """Same system with ``extra`` added to the drift shift (frozen controls)."""
        return replace(self, lam=self.lam + np.asarray(extra, dtype=float))


@dataclass
class TrajectorySample:
    t: float
    g: np.ndarray
    m_body: np.ndarray
    invariant_report: dict = field(default_factory=dict)


def euler_rhs(sys, m, g=None):
    """Time derivative of the moving momentum.

    Left case: ``m_c' = ad*_{A^-1 m_c + lam} m_c``; right case: ``m_s' = -ad*_{A^-1 m_s + lam} m_s``.
    """
    m = np.asarray(m, dtype=float)
    w = sys.operator_at(g).apply_inverse(m) + sys.lam
    rhs = liecore.ad_star(w, m)
    return rhs if sys.chirality == "left" else -rhs


def moving_momentum(sys, g):
    """Momentum in the moving frame determined by g: m_c for the left case, m_s for the right."""
    if sys.chirality == "left":
        return liecore.Ad_star(g, sys.momentum)
    return g @ sys.momentum @ g.T


def fixed_momentum(sys, g, m_moving):
    """Inverse of :func:`moving_momentum`: the conserved momentum recovered from (g, m)."""
    if sys.chirality == "left":
        return g @ m_moving @ g.T
    return g.T @ m_moving @ g


def trivialized_velocity(sys, g):
    return sys.operator_at(g).apply_inverse(moving_momentum(sys, g)) + sys.lam


def reduced_field(sys, g):
    """Tangent vector v(g) of the reduced flow."""
    g = np.asarray(g, dtype=float)
    if g.shape != (sys.n, sys.n):
        raise DimensionMismatch(f"group element shape {g.shape} does not match so({sys.n})")
    w = trivialized_velocity(sys, g)
    return g @ w if sys.chirality == "left" else w @ g


def momentum_from_velocity(sys, g, gdot):
    """Recover the conserved momentum from a point and a velocity of the reduced flow."""
    w = g.T @ gdot if sys.chirality == "left" else gdot @ g.T
    m = sys.operator_at(g).apply(liecore.skew_part(w) - sys.lam)
    return fixed_momentum(sys, g, m)


def hamiltonian(sys, m, g=None):
    op = sys.operator_at(g)
    return op.energy(m) + liecore.pairing(m, sys.lam)


def _step_count(T, h):
    if T < 0 or h <= 0:
        raise ValueError("need T >= 0 and h > 0")
    if T == 0:
        return 0, h
    steps = max(1, int(math.ceil(T / h - 1e-9)))
    return steps, T / steps


def _generic_step(sys, g, m, h):
    """Python RKMK4 step for the coupled (g, m) system; any chirality, any operator."""
    left = sys.chirality == "left"
    dexpinv = kernels.dexpinv_left if left else kernels.dexpinv_right
    sign = 1.0 if left else -1.0

    def act(u):
        return g @ liecore.exp(u) if left else liecore.exp(u) @ g

    def f(gi, mi):
        w = sys.operator_at(gi).apply_inverse(mi) + sys.lam
        return w, sign * (mi @ w - w @ mi)

    w1, dm1 = f(g, m)
    k1 = h * w1
    u = 0.5 * k1
    w2, dm2 = f(act(u), m + 0.5 * h * dm1)
    k2 = h * dexpinv(u, w2)
    u = 0.5 * k2
    w3, dm3 = f(act(u), m + 0.5 * h * dm2)
    k3 = h * dexpinv(u, w3)
    u = k3
    w4, dm4 = f(act(u), m + h * dm3)
    k4 = h * dexpinv(u, w4)
    theta = (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    g_new = g @ liecore.exp(theta) if left else liecore.exp(theta) @ g
    return g_new, m + h * (dm1 + 2 * dm2 + 2 * dm3 + dm4) / 6.0


def _generic_field_step(sys, g, h):
    """Python RKMK4 step of the reduced field alone."""
    left = sys.chirality == "left"
    dexpinv = kernels.dexpinv_left if left else kernels.dexpinv_right

    def act(u):
        return g @ liecore.exp(u) if left else liecore.exp(u) @ g

    k1 = h * trivialized_velocity(sys, g)
    u = 0.5 * k1
    k2 = h * dexpinv(u, trivialized_velocity(sys, act(u)))
    u = 0.5 * k2
    k3 = h * dexpinv(u, trivialized_velocity(sys, act(u)))
    u = k3
    k4 = h * dexpinv(u, trivialized_velocity(sys, act(u)))
    theta = (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return g @ liecore.exp(theta) if left else liecore.exp(theta) @ g


def _kernel_args(sys):
    iu, ju = liecore.triu_indices(sys.n)
    return np.ascontiguousarray(sys.inertia.ainv_matrix), iu, ju


def _uses_kernel(sys):
    return sys.chirality == "left" and not sys.generalized and sys.n > 1


def flow_arrays(sys, g0, T, h):
    """Integrate the coupled Euler + reconstruction system.

    Returns ``(t, gs, ms)`` with the moving momentum ``ms`` evolved by the
    Euler equations rather than recomputed from ``gs``.
    """
    g0 = liecore.group_element(g0)
    steps, h = _step_count(T, h)
    m0 = moving_momentum(sys, g0)
    if _uses_kernel(sys):
        ainv, iu, ju = _kernel_args(sys)
        gs, ms = kernels.coupled_trajectory(
            np.ascontiguousarray(g0), np.ascontiguousarray(m0), ainv, iu, ju,
            np.ascontiguousarray(sys.lam), h, steps)
    else:
        gs = np.empty((steps + 1, sys.n, sys.n))
        ms = np.empty_like(gs)
        gs[0], ms[0] = g0, m0
        g, m = np.array(g0), m0
        for s in range(steps):
            g, m = _generic_step(sys, g, m, h)
            gs[s + 1], ms[s + 1] = g, m
    return np.arange(steps + 1) * h, gs, ms


def drift_report(sys, g, m, m_fixed0, h0):
    n = g.shape[0]
    orth = float(np.linalg.norm(g.T @ g - np.eye(n)))
    ref = np.linalg.norm(m_fixed0)
    dm = float(np.linalg.norm(fixed_momentum(sys, g, m) - m_fixed0))
    e = hamiltonian(sys, m, g)
    de = abs(e - h0)
    return {
        "orthogonality": orth,
        "momentum": float(dm / ref) if ref > 0 else dm,
        "energy": float(de / abs(h0)) if h0 != 0 else float(de),
    }


def integrate(sys, g0, T=DEFAULT_T, h=DEFAULT_H, drift_budget=DEFAULT_DRIFT_BUDGET, sample_every=1):
    """Integrate the reduced system from ``g0`` and return :class:`TrajectorySample` records.

    Samples are taken at ``t = 0, h, 2h, ..., T`` (``h`` is shrunk slightly
    when it does not divide ``T``); ``sample_every`` thins the output but the
    final time is always included.  :class:`StepRejected` is raised at the
    first sample whose drift exceeds ``drift_budget``.
    """
    # a step that is far too coarse can overflow; the drift check rejects it
    with np.errstate(over="ignore", invalid="ignore"):
        return _sampled(sys, *flow_arrays(sys, g0, T, h), drift_budget, sample_every)


def _sampled(sys, t, gs, ms, drift_budget, sample_every):
    m_fixed0 = fixed_momentum(sys, gs[0], ms[0])
    h0 = hamiltonian(sys, ms[0], gs[0])
    idx = list(range(0, len(t), max(1, int(sample_every))))
    if idx[-1] != len(t) - 1:
        idx.append(len(t) - 1)
    samples = []
    for i in idx:
        report = drift_report(sys, gs[i], ms[i], m_fixed0, h0)
        worst = max(report.values())
        if not np.all(np.isfinite(list(report.values()))) or worst > drift_budget:
            raise StepRejected(
                f"drift {worst:.3e} exceeds budget {drift_budget:.1e} at t={t[i]:.6g}; reduce h",
                t=float(t[i]), report=report)
        samples.append(TrajectorySample(float(t[i]), gs[i], ms[i], report))
    return samples


def max_drifts(samples):
    keys = samples[0].invariant_report.keys()
    return {k: max(s.invariant_report[k] for s in samples) for k in keys}


def integrate_field(sys, g0, T, h):
    """Flow of the reduced field alone.  Returns ``(t, gs)``; negative ``T`` runs backwards."""
    g0 = np.ascontiguousarray(g0, dtype=float)
    steps, hh = _step_count(abs(T), h)
    if T < 0:
        hh = -hh
    if _uses_kernel(sys):
        ainv, iu, ju = _kernel_args(sys)
        gs = kernels.reduced_trajectory(g0, np.ascontiguousarray(sys.momentum), ainv, iu, ju,
                                        np.ascontiguousarray(sys.lam), hh, steps)
    else:
        gs = np.empty((steps + 1, sys.n, sys.n))
        gs[0] = g0
        g = g0
        for s in range(steps):
            g = _generic_field_step(sys, g, hh)
            gs[s + 1] = g
    return np.arange(steps + 1) * hh, gs


def field_step(sys, g, h):
    """Single RKMK4 step of the reduced field (``h`` may be negative)."""
    g = np.ascontiguousarray(g, dtype=float)
    if _uses_kernel(sys):
        ainv, iu, ju = _kernel_args(sys)
        return kernels.reduced_step(g, np.ascontiguousarray(sys.momentum), ainv, iu, ju,
                                    np.ascontiguousarray(sys.lam), h)
    return _generic_field_step(sys, g, h)


def field_divergence(sys, g, delta=1e-4):
    """Divergence of the reduced field in exponential coordinates centred at g.

    The chart is ``theta -> g exp(sum theta_i E_i)``; the Haar density has zero
    gradient at the centre, so this is also the Haar divergence there.
    """
    n = sys.n
    g = np.asarray(g, dtype=float)
    left = sys.chirality == "left"
    dexpinv = kernels.dexpinv_right if not left else kernels.dexpinv_left
    total = 0.0
    for i, e in enumerate(liecore.basis(n)):
        vals = []
        for s in (delta, -delta):
            u = s * e
            gi = g @ liecore.exp(u) if left else liecore.exp(u) @ g
            vals.append(liecore.vec(dexpinv(u, trivialized_velocity(sys, gi)))[i])
        total += (vals[0] - vals[1]) / (2 * delta)
    return total


# --- Chaplygin ball -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChaplyginState:
    M: np.ndarray
    gamma: np.ndarray
    I: np.ndarray
    D: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "M", np.asarray(self.M, dtype=float))
        gamma = np.asarray(self.gamma, dtype=float)
        if abs(np.linalg.norm(gamma) - 1.0) > 1e-10:
            raise ValueError("gamma must be a unit vector")
        object.__setattr__(self, "gamma", gamma)
        I = np.asarray(self.I, dtype=float)
        object.__setattr__(self, "I", np.diag(I) if I.ndim == 1 else I)
        if self.D < 0:
            raise ValueError("D must be non-negative")


def chaplygin_mass_matrix(I, D, gamma):
    gamma = np.asarray(gamma, dtype=float)
    return np.asarray(I, dtype=float) + D * (gamma @ gamma * np.eye(3) - np.outer(gamma, gamma))


def chaplygin_omega(M, gamma, I, D):
    """Solve M = I w + D gamma x (w x gamma) for the angular velocity w."""
    K = chaplygin_mass_matrix(I, D, gamma)
    try:
        w = np.linalg.solve(K, M)
    except np.linalg.LinAlgError as exc:
        raise SingularMassMatrix(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise SingularMassMatrix("mass matrix solve returned non-finite values")
    return w


def chaplygin_rhs(state):
    w = chaplygin_omega(state.M, state.gamma, state.I, state.D)
    return np.cross(state.M, w), np.cross(state.gamma, w)


def integrate_chaplygin(state, T=DEFAULT_T, h=DEFAULT_H):
    """Classical RK4 on (M, gamma).  Returns ``(t, M, gamma)`` arrays."""
    steps, h = _step_count(T, h)
    I, D = state.I, state.D

    def f(y):
        w = chaplygin_omega(y[:3], y[3:], I, D)
        return np.concatenate([np.cross(y[:3], w), np.cross(y[3:], w)])

    ys = np.empty((steps + 1, 6))
    y = np.concatenate([state.M, state.gamma])
    ys[0] = y
    for s in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        ys[s + 1] = y
    return np.arange(steps + 1) * h, ys[:, :3], ys[:, 3:]


def chaplygin_system(I, D, m_s, vertical=(0.0, 0.0, 1.0)):
    """The ball as a left system on SO(3) with the g-dependent operator
    A(g) built from gamma = g^T e_vertical."""
    I = np.asarray(I, dtype=float)
    vertical = np.asarray(vertical, dtype=float)

    def operator(g):
        return InertiaOperator.rigid_body3(chaplygin_mass_matrix(I if I.ndim == 2 else np.diag(I), D, g.T @ vertical))

    return ReducedSystem(operator, m_s)
