import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lievortex import liecore, vortex
from lievortex.inertia import InertiaOperator
from lievortex.reduction import ReducedSystem

from helpers import E, random_rotation, random_skew, rk4_matrix_ode

U4 = [1.0, 1.7, 2.3, 3.1]


def test_isotropy_dimensions():
    assert vortex.isotropy_basis(np.zeros((3, 3))).dim == 3
    b = vortex.isotropy_basis(E(3, 1, 2))
    assert b.dim == 1
    np.testing.assert_allclose(b.basis[0], E(3, 1, 2), atol=1e-14)
    assert vortex.isotropy_basis(E(4, 1, 2) + 2 * E(4, 3, 4)).dim == 2


def test_isotropy_basis_invariants(rng):
    for n in (3, 4, 5, 6):
        m = random_skew(n, rng)
        b = vortex.isotropy_basis(m)
        C = b.coordinates()
        np.testing.assert_allclose(C @ C.T, np.eye(b.dim), atol=1e-12)
        for xi in b.basis:
            assert np.linalg.norm(liecore.ad(m, xi)) <= b.rank_tol * np.linalg.norm(m) * np.linalg.norm(xi)
        assert b.closure_residual() <= 1e-9


def test_isotropy_basis_matches_brute_force_nullspace(rng):
    # oracle: null space of the Gram matrix of [m, E_a] computed entry by entry
    m = random_skew(5, rng)
    B = liecore.basis(5)
    L = np.array([[liecore.pairing(liecore.ad(m, a), liecore.ad(m, c)) for c in B] for a in B])
    w, V = np.linalg.eigh(L)
    null = V[:, w < 1e-9 * w.max()]
    C = vortex.isotropy_basis(m).coordinates().T
    assert null.shape[1] == C.shape[1]
    # same subspace: projectors agree
    np.testing.assert_allclose(null @ null.T, C @ C.T, atol=1e-9)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_even_codimension(n, rng):
    d = liecore.dim_algebra(n)
    for _ in range(100):
        assert (d - vortex.isotropy_basis(random_skew(n, rng)).dim) % 2 == 0


def test_generic_so4_isotropy_is_abelian(rng):
    for _ in range(100):
        b = vortex.isotropy_basis(random_skew(4, rng))
        assert b.dim == 2
        assert b.max_commutator() <= 1e-8


def test_equal_levels_give_larger_nonabelian_isotropy():
    b = vortex.isotropy_basis(E(4, 1, 2) + E(4, 3, 4))
    assert b.dim == 4
    assert b.max_commutator() > 0.1
    rep = vortex.probe_vortex_manifold(b, np.eye(4), steps=16)
    assert rep.abelian is False


def test_darboux_examples():
    f = vortex.darboux_decompose(E(3, 1, 2))
    assert f.k == 2
    np.testing.assert_allclose(f.h, [1.0])
    np.testing.assert_allclose(f.X[0], [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(f.Y[0], [0, 1, 0], atol=1e-15)
    f3 = vortex.darboux_decompose(3 * E(3, 1, 2))
    np.testing.assert_allclose(f3.h, [3.0])
    np.testing.assert_allclose(f3.X[0], [math.sqrt(3), 0, 0], atol=1e-14)
    np.testing.assert_allclose(f3.Y[0], [0, math.sqrt(3), 0], atol=1e-14)
    empty = vortex.darboux_decompose(np.zeros((4, 4)))
    assert empty.k == 0 and empty.X.shape == (0, 4)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_darboux_frame_invariants(n, rng):
    for _ in range(50):
        M = random_skew(n, rng)
        f = vortex.darboux_decompose(M)
        assert np.linalg.norm(f.reconstruct() - M) <= 1e-10
        assert f.k == np.linalg.matrix_rank(M)
        Z = f.stacked()
        G = Z @ Z.T
        np.testing.assert_allclose(G, np.diag(np.repeat(f.h, 2)), atol=1e-10)
        assert np.all(np.diff(f.h) <= 0)


def test_darboux_of_rank_deficient_input(rng):
    x, y = rng.standard_normal(5), rng.standard_normal(5)
    M = np.outer(x, y) - np.outer(y, x)
    f = vortex.darboux_decompose(M)
    assert f.k == 2
    np.testing.assert_allclose(f.reconstruct(), M, atol=1e-12)


def test_vortex_field_and_flow(rng):
    xi = random_skew(4, rng)
    g0 = random_rotation(4, rng)
    np.testing.assert_allclose(vortex.vortex_field(xi, np.eye(4)), xi)
    ref = rk4_matrix_ode(lambda g: vortex.vortex_field(xi, g), g0, 1.3, 4000)
    np.testing.assert_allclose(vortex.vortex_flow(xi, g0, 1.3), ref, atol=1e-11)


def test_redundant_vortex_form_is_right_multiplication_by_block_generator(rng):
    f = vortex.darboux_decompose(random_skew(5, rng))
    dX, dY = vortex.darboux_vortex_rhs(f.X, f.Y)
    for l, (w, wn) in enumerate(zip(f.block_generators(), f.block_generators(normalized=True))):
        np.testing.assert_allclose(dX[l], f.X[l] @ w, atol=1e-12)
        np.testing.assert_allclose(dY[l], f.Y[l] @ w, atol=1e-12)
        np.testing.assert_allclose(dX[l], f.h[l] * (f.X[l] @ wn), atol=1e-12)
        # the block generator leaves every other block row fixed
        for k in range(len(f.h)):
            if k != l:
                assert np.linalg.norm(f.X[k] @ w) <= 1e-12


def _system(rng, lam=None):
    return ReducedSystem(InertiaOperator.manakov(U4), random_skew(4, rng), lam)


def bracket_closed_form(sys_, xi, g):
    # |[v, w](g)| = |A^-1(g^T [m_s, xi] g)| for the left field v and w = xi g
    return np.linalg.norm(sys_.inertia.apply_inverse(g.T @ liecore.ad(sys_.momentum, xi) @ g))


def test_commutation_with_isotropy_fields(rng):
    sys_ = _system(rng)
    b = vortex.isotropy_basis(sys_.momentum)
    for _ in range(5):
        g = random_rotation(4, rng)
        for xi in b.basis:
            assert vortex.commutation_residual(sys_, xi, g, 1e-4) <= 1e-6 * vortex.bracket_scale(sys_, xi)


def test_commutation_estimator_matches_closed_form(rng):
    sys_ = _system(rng, 0.3 * random_skew(4, rng))
    for _ in range(10):
        g = random_rotation(4, rng)
        xi = random_skew(4, rng)
        est = vortex.commutation_residual(sys_, xi, g, 1e-4)
        assert est == pytest.approx(bracket_closed_form(sys_, xi, g), rel=2e-3)


def test_commutation_unchanged_by_frozen_controls(rng):
    sys_ = _system(rng)
    b = vortex.isotropy_basis(sys_.momentum)
    ctrl = 0.7 * E(4, 1, 2) - 0.4 * E(4, 2, 3)
    g = random_rotation(4, rng)
    for xi in b.basis:
        scale = vortex.bracket_scale(sys_, xi)
        a = vortex.commutation_residual(sys_, xi, g)
        c = vortex.commutation_residual(sys_.with_shift(-ctrl), xi, g)
        assert a <= 1e-6 * scale and c <= 1e-6 * scale
    xi = random_skew(4, rng)
    a = vortex.commutation_residual(sys_, xi, g)
    c = vortex.commutation_residual(sys_.with_shift(-ctrl), xi, g)
    assert c == pytest.approx(a, rel=1e-3)


def test_commutation_detects_non_isotropy_directions(rng):
    sys_ = _system(rng)
    b = vortex.isotropy_basis(sys_.momentum)
    C = b.coordinates()
    for _ in range(20):
        c = rng.standard_normal(6)
        c -= C.T @ (C @ c)
        xi = liecore.unvec(c / np.linalg.norm(c), 4)
        g = random_rotation(4, rng)
        assert vortex.commutation_residual(sys_, xi, g) >= 1e-2 * vortex.bracket_scale(sys_, xi)


def test_vortex_covector_pairing_is_constant(rng):
    sys_ = _system(rng, 0.2 * random_skew(4, rng))
    for xi in vortex.isotropy_basis(sys_.momentum).basis:
        ref = liecore.pairing(sys_.momentum, xi)
        for _ in range(10):
            assert vortex.vortex_covector_pairing(sys_, xi, random_rotation(4, rng)) == pytest.approx(ref, abs=1e-12)


def test_probe_circle_so3():
    rep = vortex.probe_vortex_manifold(vortex.isotropy_basis(E(3, 1, 2)), np.eye(3))
    assert rep.dimension == 1
    assert rep.periods[0] == pytest.approx(2 * math.pi, abs=1e-6)


def test_probe_torus_so4(rng):
    m = E(4, 1, 2) + 2 * E(4, 3, 4)
    rep = vortex.probe_vortex_manifold(vortex.isotropy_basis(m), random_rotation(4, rng))
    assert rep.dimension == 2 and rep.abelian
    np.testing.assert_allclose(rep.periods, [2 * math.pi] * 2, atol=1e-6)
    assert max(rep.min_return_distances) <= 1e-6


def test_probe_zero_momentum():
    rep = vortex.probe_vortex_manifold(vortex.isotropy_basis(np.zeros((3, 3))), np.eye(3), steps=27)
    assert rep.dimension == 3 and rep.abelian is False


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_isotropy_scale_invariance(n, seed, scale):
    m = random_skew(n, np.random.default_rng(seed))
    a = vortex.isotropy_basis(m).coordinates()
    b = vortex.isotropy_basis(scale * m).coordinates()
    np.testing.assert_allclose(a.T @ a, b.T @ b, atol=1e-8)
