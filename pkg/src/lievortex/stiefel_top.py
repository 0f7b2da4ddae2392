"""The n-dimensional top in redundant Darboux (Stiefel) coordinates.

The state is a pair of ``(k/2) x n`` matrices ``X, Y`` whose rows are the
body-frame Darboux vectors.  The body momentum is ``M_c = X^T Y - Y^T X`` and
the Manakov velocity ``Omega_c = U M_c + M_c U``.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels, liecore
from .errors import HorizonExceeded
from .inertia import InertiaOperator
from .vortex import DarbouxFrame


@dataclass(frozen=True, eq=False)
class StiefelState:
    X: np.ndarray
    Y: np.ndarray
    gram0: np.ndarray = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if X.shape != Y.shape:
            raise ValueError(f"X and Y shapes differ: {X.shape} vs {Y.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        if self.gram0 is None:
            object.__setattr__(self, "gram0", self.gram())

    @classmethod
    def from_frame(cls, frame, g=None):
        """Body-frame state of a space-frame Darboux frame seen from orientation g."""
        if g is not None:
            frame = frame.transformed(np.asarray(g, dtype=float))
        return cls(frame.X, frame.Y)

    @property
    def n(self):
        return self.X.shape[1]

    def stacked(self):
        z = np.empty((2 * self.X.shape[0], self.n))
        z[0::2] = self.X
        z[1::2] = self.Y
        return z

    def gram(self):
        z = self.stacked()
        return z @ z.T

    def gram_drift(self):
        return float(np.linalg.norm(self.gram() - self.gram0))


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Piecewise-constant control: ``values[j]`` holds on ``[t_j, t_{j+1})`` of a uniform grid."""

    values: np.ndarray
    T: float

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", v)
        if self.T <= 0:
            raise ValueError("horizon T must be positive")

    @classmethod
    def zeros(cls, segments, controls, T):
        return cls(np.zeros((segments, controls)), T)

    @property
    def segments(self):
        return self.values.shape[0]

    @property
    def breakpoints(self):
        return np.linspace(0.0, self.T, self.segments + 1)

    def sup_norm(self):
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def within(self, eps):
        return self.sup_norm() <= eps * (1 + 1e-12)

    def at(self, t):
        if t < 0 or t > self.T * (1 + 1e-12):
            raise HorizonExceeded(f"t={t} outside the signal horizon [0, {self.T}]")
        j = min(int(t / self.T * self.segments), self.segments - 1)
        return self.values[j]

    def reversed(self):
        return ControlSignal(self.values[::-1].copy(), self.T)


@dataclass(frozen=True, eq=False)
class ControlledTop:
    U: np.ndarray
    controls: list
    eps: float
    signal: ControlSignal

    def __post_init__(self):
        ctrls = [liecore.algebra_element(c) for c in self.controls]
        object.__setattr__(self, "controls", ctrls)
        object.__setattr__(self, "U", np.asarray(self.U, dtype=float))
        if not self.signal.within(self.eps):
            raise ValueError(f"signal sup-norm {self.signal.sup_norm():.3e} exceeds bound {self.eps}")
        if self.signal.values.shape[1] != len(ctrls):
            raise ValueError("signal width does not match the number of control directions")

    def control_matrix(self, t):
        u = self.signal.at(t)
        return sum((ui * c for ui, c in zip(u, self.controls)), np.zeros((self.n, self.n)))

    @property
    def n(self):
        return self.U.shape[0]


def reconstruct_momentum(state):
    return state.X.T @ state.Y - state.Y.T @ state.X


def manakov_velocity(U, M):
    U = np.asarray(U, dtype=float)
    return U @ M + M @ U


def stiefel_rhs(state, U):
    """Right-hand side exactly as written for the Stiefel variety:
    X' = X [U M + X^T Y U],  Y' = Y [U M - Y^T X U]."""
    U = np.asarray(U, dtype=float)
    X, Y = state.X, state.Y
    M = X.T @ Y - Y.T @ X
    return X @ (U @ M + X.T @ Y @ U), Y @ (U @ M - Y.T @ X @ U)


def poisson_rhs(state, U):
    """The same field in Poisson form X' = X Omega_c, Y' = Y Omega_c."""
    W = manakov_velocity(U, reconstruct_momentum(state))
    return state.X @ W, state.Y @ W


def controlled_rhs(state, top, t):
    dX, dY = stiefel_rhs(state, top.U)
    L = top.control_matrix(t)
    return dX - state.X @ L, dY - state.Y @ L


def _kernel_inputs(U, n):
    U = np.asarray(U, dtype=float)
    if np.allclose(U, 0.0):
        ainv = np.zeros((liecore.dim_algebra(n),) * 2)
    else:
        ainv = np.ascontiguousarray(InertiaOperator.manakov(U).ainv_matrix)
    iu, ju = liecore.triu_indices(n)
    return ainv, iu, ju


def integrate_frame(state, U, T, h, controls=(), signal=None):
    """Integrate the (optionally controlled) frame dynamics.

    Rows are advanced by right multiplication with exponentials of
    ``Omega_c - sum u_i Lambda_i`` (RKMK4), so the Gram matrix is preserved
    to the accuracy of the exponential.  With a signal, ``T`` must equal its
    horizon and ``h`` is adjusted to divide each segment.

    Returns ``(t, states, rotations)``: ``rotations[i]`` is the accumulated
    right factor with ``Z(t_i) = Z(0) rotations[i]``.
    """
    n = state.n
    half = state.X.shape[0]
    ainv, iu, ju = _kernel_inputs(U, n)
    if signal is None:
        shifts = np.zeros((1, n, n))
        steps = max(1, int(np.ceil(T / h - 1e-9)))
    else:
        if abs(signal.T - T) > 1e-12 * max(1.0, T):
            raise HorizonExceeded(f"integration horizon {T} differs from signal horizon {signal.T}")
        lam = np.zeros((n, n))
        dirs = np.array([np.asarray(c, dtype=float) for c in controls]).reshape(-1, n, n)
        shifts = kernels.segment_shifts(lam, np.ascontiguousarray(dirs), np.ascontiguousarray(signal.values))
        steps = max(1, int(np.ceil(T / signal.segments / h - 1e-9)))
    hh = T / (shifts.shape[0] * steps)
    z0 = np.ascontiguousarray(np.vstack([state.X, state.Y]))
    zs, rots = kernels.frame_trajectory(z0, half, ainv, iu, ju, np.ascontiguousarray(shifts), hh, steps)
    t = np.arange(zs.shape[0]) * hh
    states = [StiefelState(z[:half], z[half:], state.gram0) for z in zs]
    return t, states, rots


def frame_from_group(frame, g):
    """Body-frame redundant coordinates of orientation g for a space-frame Darboux frame."""
    return StiefelState.from_frame(frame, g)


def space_momentum(state, g):
    """M_s = g M_c g^T for body-frame state and orientation g."""
    return g @ reconstruct_momentum(state) @ g.T


def spectrum(M):
    """Sorted imaginary parts of the eigenvalues of a skew matrix."""
    return np.sort(np.linalg.eigvals(np.asarray(M, dtype=float)).imag)


__all__ = [
    "ControlSignal",
    "ControlledTop",
    "DarbouxFrame",
    "StiefelState",
    "controlled_rhs",
    "integrate_frame",
    "poisson_rhs",
    "reconstruct_momentum",
    "stiefel_rhs",
]
