import numpy as np
import pytest
import scipy.linalg

from lievortex import liecore
from lievortex.errors import DimensionMismatch, InvalidElement
from lievortex.inertia import InertiaOperator, identity_metric, random_spd

from helpers import E, random_skew


def test_half_identity_is_the_identity_map(rng):
    op = identity_metric(4)
    m = random_skew(4, rng)
    np.testing.assert_allclose(op.apply_inverse(m), m, atol=1e-15)
    np.testing.assert_allclose(op.apply(m), m, atol=1e-15)
    assert op.energy(E(4, 1, 2)) == pytest.approx(0.5)
    assert op.energy(np.zeros((4, 4))) == 0.0


def test_diagonal_manakov_acts_entrywise(rng):
    u = np.array([1.0, 2.0, 3.0, 5.0])
    op = InertiaOperator.manakov(u)
    m = random_skew(4, rng)
    np.testing.assert_allclose(op.apply_inverse(m), (u[:, None] + u[None, :]) * m, atol=1e-14)
    np.testing.assert_allclose(InertiaOperator.manakov([1, 2, 3]).apply(E(3, 1, 2)), E(3, 1, 2) / 3, atol=1e-15)


def test_manakov_apply_solves_sylvester(rng):
    for _ in range(10):
        U = random_spd(5, rng, cond=50)
        op = InertiaOperator.manakov(U)
        w = random_skew(5, rng)
        M = op.apply(w)
        assert np.linalg.norm(U @ M + M @ U - w) <= 1e-10
        np.testing.assert_allclose(M, scipy.linalg.solve_sylvester(U, U, w), atol=1e-11)
        np.testing.assert_allclose(M, -M.T, atol=1e-14)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_round_trips_and_symmetry(n, rng):
    d = liecore.dim_algebra(n)
    for op in (InertiaOperator.dense(random_spd(d, rng, 20), n),
               InertiaOperator.manakov(random_spd(n, rng, 10))):
        for _ in range(5):
            m, w1, w2 = random_skew(n, rng), random_skew(n, rng), random_skew(n, rng)
            assert np.linalg.norm(op.apply(op.apply_inverse(m)) - m) <= 1e-10
            assert np.linalg.norm(op.apply_inverse(op.apply(m)) - m) <= 1e-10
            a = liecore.pairing(op.apply(w1), w2)
            b = liecore.pairing(op.apply(w2), w1)
            assert a == pytest.approx(b, abs=1e-12)
            assert liecore.pairing(op.apply(w1), w1) > 0


def test_energy_lower_bound(rng):
    for n in (3, 4, 5):
        op = InertiaOperator.manakov(random_spd(n, rng, 10))
        lam_min = np.linalg.eigvalsh(op.ainv_matrix).min()
        for _ in range(20):
            m = random_skew(n, rng)
            assert op.energy(m) >= 0.5 * lam_min * (liecore.vec(m) @ liecore.vec(m)) * (1 - 1e-12)


def test_coordinate_matrix_of_manakov_is_diagonal_for_diagonal_U():
    op = InertiaOperator.manakov([1.0, 2.0, 3.0])
    np.testing.assert_allclose(op.ainv_matrix, np.diag([3.0, 4.0, 5.0]))
    np.testing.assert_allclose(op.coordinate_matrix(), np.diag([1 / 3, 1 / 4, 1 / 5]))


def test_rigid_body_operator_matches_vector_form(rng):
    I = np.array([1.0, 2.0, 3.0])
    op = InertiaOperator.rigid_body3(I)
    w = rng.standard_normal(3)
    np.testing.assert_allclose(liecore.vee3(op.apply(liecore.hat3(w))), I * w, atol=1e-14)


def test_invalid_operators_rejected(rng):
    with pytest.raises(InvalidElement):
        InertiaOperator.manakov([1.0, -2.0, 3.0])
    with pytest.raises(InvalidElement):
        InertiaOperator.manakov(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(InvalidElement):
        InertiaOperator.dense(-np.eye(3), 3)
    with pytest.raises(DimensionMismatch):
        InertiaOperator.dense(np.eye(4))
    with pytest.raises(DimensionMismatch):
        InertiaOperator.manakov([1, 2, 3]).apply(np.zeros((4, 4)))


def test_to_dict_records_basis_order(rng):
    d = InertiaOperator.dense(random_spd(3, rng), 3).to_dict()
    assert d["basis"] == ["01", "02", "12"]
    assert InertiaOperator.manakov([1, 2]).to_dict()["kind"] == "manakov"
