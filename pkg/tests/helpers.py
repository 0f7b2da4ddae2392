"""Shared constructors and independent oracles for the tests."""
import numpy as np

from lievortex import liecore

# criterion number -> PASS/FAIL line, filled by test_acceptance and printed by conftest
ACCEPTANCE = {}


def E(n, i, j):
    """Elementary skew E_ij with one-based indices, built by hand."""
    e = np.zeros((n, n))
    e[i - 1, j - 1] = 1.0
    e[j - 1, i - 1] = -1.0
    return e


def coords_dot(a, b):
    """Dot product of upper-triangle coordinates, written out entry by entry."""
    n = a.shape[0]
    return sum(a[i, j] * b[i, j] for i in range(n) for j in range(i + 1, n))


def taylor_expm(x, terms=60):
    """Plain truncated exponential series (only for small ||x||)."""
    out = np.eye(x.shape[0])
    term = np.eye(x.shape[0])
    for k in range(1, terms):
        term = term @ x / k
        out = out + term
    return out


def rk4_matrix_ode(f, y0, T, steps):
    """Classical RK4 on a flattened matrix state (no Lie-group structure)."""
    y = np.array(y0, dtype=float)
    h = T / steps
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return y


def random_skew(n, rng, scale=1.0):
    return liecore.random_algebra(n, rng, scale)


def random_rotation(n, rng):
    return liecore.random_group(n, rng)
