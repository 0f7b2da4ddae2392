"""Inertia operators so(n) -> so(n)*.

Two kinds are supported:

``dense``
    An SPD ``d x d`` matrix acting on upper-triangle coordinates
    (``d = n(n-1)/2``, lexicographic ``(i, j)``, ``i < j``), mapping angular
    velocity coordinates to momentum coordinates.

``manakov``
    An SPD ``n x n`` matrix ``U`` with inverse action ``A^-1 M = U M + M U``.
    ``U`` is diagonalised once; in its eigenbasis both directions act
    entrywise with the factors ``u_i + u_j``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import liecore
from .errors import DimensionMismatch, InvalidElement, SylvesterSolveFailed


@dataclass(frozen=True, eq=False)
class InertiaOperator:
    kind: str
    n: int
    matrix: np.ndarray
    _eigvals: np.ndarray = field(repr=False, default=None)
    _eigvecs: np.ndarray = field(repr=False, default=None)
    _ainv: np.ndarray = field(repr=False, default=None)

    @classmethod
    def manakov(cls, U):
        U = np.array(U, dtype=float)
        if U.ndim == 1:
            U = np.diag(U)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise DimensionMismatch(f"U must be square, got {U.shape}")
        if np.linalg.norm(U - U.T) > 1e-12 * max(1.0, np.linalg.norm(U)):
            raise InvalidElement("Manakov U must be symmetric")
        U = 0.5 * (U + U.T)
        lam, Q = np.linalg.eigh(U)
        if lam[0] <= 0:
            raise InvalidElement(f"Manakov U must be positive definite (min eigenvalue {lam[0]:.3e})")
        op = cls("manakov", U.shape[0], _ro(U), _ro(lam), _ro(Q))
        object.__setattr__(op, "_ainv", _ro(_coordinate_matrix(op.apply_inverse, op.n)))
        return op

    @classmethod
    def dense(cls, A, n=None):
        A = np.array(A, dtype=float)
        d = A.shape[0]
        if n is None:
            n = int(round((1 + np.sqrt(1 + 8 * d)) / 2))
        if A.shape != (d, d) or liecore.dim_algebra(n) != d:
            raise DimensionMismatch(f"dense operator of shape {A.shape} does not act on so({n})")
        if np.linalg.norm(A - A.T) > 1e-12 * max(1.0, np.linalg.norm(A)):
            raise InvalidElement("dense inertia operator must be symmetric")
        A = 0.5 * (A + A.T)
        lam = np.linalg.eigvalsh(A)
        if lam[0] <= 0:
            raise InvalidElement(f"dense inertia operator must be positive definite (min eigenvalue {lam[0]:.3e})")
        op = cls("dense", n, _ro(A), _ro(lam), None)
        object.__setattr__(op, "_ainv", _ro(np.linalg.inv(A)))
        return op

    @classmethod
    def rigid_body3(cls, inertia_tensor):
        """so(3) operator of a classical 3x3 inertia tensor I (m = I w in vector form)."""
        inertia_tensor = np.asarray(inertia_tensor, dtype=float)
        if inertia_tensor.ndim == 1:
            inertia_tensor = np.diag(inertia_tensor)
        P = liecore.HAT3_COORDS
        return cls.dense(P @ inertia_tensor @ P.T, n=3)

    @property
    def ainv_matrix(self):
        """Dense matrix of A^-1 on algebra coordinates (used by the kernels)."""
        return self._ainv

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n, self.n):
            raise DimensionMismatch(f"expected a {self.n}x{self.n} matrix, got {x.shape}")
        return x

    def apply_inverse(self, m):
        """Angular velocity A^-1 m of a momentum m."""
        m = self._check(m)
        if self.kind == "manakov":
            return self.matrix @ m + m @ self.matrix
        return liecore.unvec(self._ainv @ liecore.vec(m), self.n)

    def apply(self, omega):
        """Momentum A omega; for the Manakov kind this solves U M + M U = omega."""
        omega = self._check(omega)
        if self.kind == "manakov":
            lam, Q = self._eigvals, self._eigvecs
            if lam[0] <= 0:
                raise SylvesterSolveFailed("U lost positive definiteness")
            denom = lam[:, None] + lam[None, :]
            return Q @ ((Q.T @ omega @ Q) / denom) @ Q.T
        return liecore.unvec(self.matrix @ liecore.vec(omega), self.n)

    def energy(self, m):
        return 0.5 * liecore.pairing(m, self.apply_inverse(m))

    def coordinate_matrix(self):
        """Matrix of A (not its inverse) on algebra coordinates."""
        if self.kind == "dense":
            return np.array(self.matrix)
        return np.linalg.inv(self._ainv)

    def to_dict(self):
        if self.kind == "manakov":
            return {"kind": "manakov", "n": self.n, "U": self.matrix.tolist()}
        return {"kind": "dense", "n": self.n, "A": self.matrix.tolist(), "basis": liecore.basis_labels(self.n)}


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _coordinate_matrix(linear_map, n):
    cols = [liecore.vec(linear_map(e)) for e in liecore.basis(n)]
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def identity_metric(n):
    """The bi-invariant operator U = I/2, for which A^-1 is the identity."""
    return InertiaOperator.manakov(0.5 * np.eye(n))


def random_spd(d, rng, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = np.exp(rng.uniform(0.0, np.log(cond), size=d))
    return (q * lam) @ q.T


apply = InertiaOperator.apply
apply_inverse = InertiaOperator.apply_inverse
energy = InertiaOperator.energy
