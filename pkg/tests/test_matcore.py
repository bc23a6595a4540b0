import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtp2.matcore import (
    AsymmetricInput,
    DimensionMismatch,
    NonpositiveScale,
    NotPositiveDefinite,
    as_symmetric,
    cholesky,
    congruence,
    frobenius_inner,
    inverse_psd,
    log_det,
    positive_part,
    sym_eigen,
)
from mtp2.models import equicorrelation

from conftest import random_spd


class TestCholesky:
    def test_identity(self):
        assert np.array_equal(cholesky(np.eye(3)), np.eye(3))

    def test_hand_2x2(self):
        # [[4,2],[2,5]]: L11=2, L21=1, L22=sqrt(5-1)=2
        L = cholesky(np.array([[4.0, 2.0], [2.0, 5.0]]))
        assert np.allclose(L, [[2.0, 0.0], [1.0, 2.0]], atol=1e-14)

    def test_indefinite_reports_pivot(self):
        with pytest.raises(NotPositiveDefinite) as err:
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))  # second pivot 1-4 < 0
        assert err.value.index == 1

    def test_pivot_floor(self):
        with pytest.raises(NotPositiveDefinite) as err:
            cholesky(np.diag([1.0, 1e-20]))
        assert err.value.index == 1

    def test_first_pivot(self):
        with pytest.raises(NotPositiveDefinite) as err:
            cholesky(np.array([[-1.0, 0.0], [0.0, 1.0]]))
        assert err.value.index == 0


class TestLogDet:
    def test_identity(self):
        assert log_det(cholesky(np.eye(5))) == 0.0

    def test_diag(self):
        assert log_det(cholesky(np.diag([2.0, 2.0]))) == pytest.approx(2 * np.log(2), abs=1e-12)

    def test_hand_2x2(self):
        # det [[4,2],[2,5]] = 16
        assert log_det(cholesky(np.array([[4.0, 2.0], [2.0, 5.0]]))) == pytest.approx(
            np.log(16.0), abs=1e-12
        )


class TestInverse:
    def test_identity(self):
        assert np.allclose(inverse_psd(cholesky(np.eye(4))), np.eye(4), atol=1e-14)

    def test_diag(self):
        assert np.allclose(
            inverse_psd(cholesky(np.diag([2.0, 4.0]))), np.diag([0.5, 0.25]), atol=1e-14
        )

    def test_hand_adjugate(self):
        # inv [[4,2],[2,5]] = (1/16) [[5,-2],[-2,4]]
        got = inverse_psd(cholesky(np.array([[4.0, 2.0], [2.0, 5.0]])))
        assert np.allclose(got, np.array([[5.0, -2.0], [-2.0, 4.0]]) / 16.0, atol=1e-14)


class TestEigen:
    def test_diagonal_sorted(self):
        w, v = sym_eigen(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(w, [1.0, 2.0, 3.0])

    def test_equicorrelation_spectrum(self):
        # eigenvalues 1-x (multiplicity p-1) and 1+(p-1)x
        w = sym_eigen(equicorrelation(3, -0.25)).eigenvalues
        assert np.allclose(w, [0.5, 1.25, 1.25], atol=1e-12)

    def test_exchange_matrix(self):
        w = sym_eigen(np.array([[0.0, 1.0], [1.0, 0.0]])).eigenvalues
        assert np.allclose(w, [-1.0, 1.0], atol=1e-14)

    @given(st.integers(2, 100), st.data())
    @settings(max_examples=30)
    def test_equicorrelation_two_distinct_eigenvalues(self, p, data):
        x = data.draw(st.floats(-1.0 / (p - 1) + 1e-6, 1.0 - 1e-6))
        w = sym_eigen(equicorrelation(p, x)).eigenvalues
        expected = np.sort(np.r_[np.full(p - 1, 1.0 - x), 1.0 + (p - 1) * x])
        assert np.abs(w - expected).max() <= 1e-8


class TestEntrywise:
    def test_frobenius_examples(self):
        assert frobenius_inner(np.eye(3), np.eye(3)) == 3.0
        a = np.array([[1.0, 2.0], [2.0, 1.0]])
        b = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert frobenius_inner(a, b) == 4.0
        assert frobenius_inner(a, np.zeros((2, 2))) == 0.0

    def test_frobenius_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            frobenius_inner(np.eye(2), np.eye(3))

    def test_positive_part(self):
        m = np.array([[1.0, -0.3], [-0.3, 1.0]])
        assert np.array_equal(positive_part(m), np.eye(2))
        nn = np.array([[1.0, 0.2], [0.2, 0.5]])
        assert np.array_equal(positive_part(nn), nn)
        m2 = np.array([[1.0, 0.2], [0.2, -0.5]])
        assert np.array_equal(positive_part(m2), np.array([[1.0, 0.2], [0.2, 0.0]]))

    def test_congruence(self):
        m = np.array([[1.0, 0.3], [0.3, 2.0]])
        assert np.array_equal(congruence(np.ones(2), m), m)
        assert np.array_equal(congruence([2.0, 1.0], np.eye(2)), np.diag([4.0, 1.0]))
        a, b = 0.7, 1.3
        got = congruence([a, b], np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(got, [[0.0, a * b], [a * b, 0.0]], atol=1e-15)

    def test_congruence_rejects_nonpositive(self):
        with pytest.raises(NonpositiveScale):
            congruence([1.0, 0.0], np.eye(2))


class TestAsSymmetric:
    def test_rejects_gross_asymmetry(self):
        with pytest.raises(AsymmetricInput):
            as_symmetric(np.array([[1.0, 0.1], [0.0, 1.0]]))

    def test_symmetrizes_roundoff(self):
        m = np.array([[1.0, 0.5 + 1e-13], [0.5, 1.0]])
        out = as_symmetric(m)
        assert out[0, 1] == out[1, 0]

    def test_rejects_nonsquare(self):
        with pytest.raises(DimensionMismatch):
            as_symmetric(np.zeros((2, 3)))


@given(st.integers(1, 50), st.integers(0, 10_000))
@settings(max_examples=40)
def test_cholesky_reconstruction(p, seed):
    m = random_spd(np.random.default_rng(seed), p)
    L = cholesky(m)
    assert np.abs(L @ L.T - m).max() <= 1e-10 * np.abs(m).max()


@given(st.integers(1, 50), st.integers(0, 10_000))
@settings(max_examples=40)
def test_log_det_matches_eigen_sum(p, seed):
    m = random_spd(np.random.default_rng(seed), p)
    ld = log_det(cholesky(m))
    via_eigen = float(np.sum(np.log(sym_eigen(m).eigenvalues)))
    assert ld == pytest.approx(via_eigen, rel=1e-8, abs=1e-10)


@given(st.integers(1, 50), st.integers(0, 10_000))
@settings(max_examples=40)
def test_inverse_is_involution(p, seed):
    m = random_spd(np.random.default_rng(seed), p)
    back = inverse_psd(cholesky(inverse_psd(cholesky(m))))
    assert np.abs(back - m).max() <= 1e-6 * np.abs(m).max()


@given(st.integers(1, 50), st.integers(0, 10_000))
@settings(max_examples=40)
def test_eigen_reconstruction_and_orthonormality(p, seed):
    m = random_spd(np.random.default_rng(seed), p)
    w, v = sym_eigen(m)
    assert np.all(np.diff(w) >= 0)
    assert np.abs(v @ np.diag(w) @ v.T - m).max() <= 1e-8 * np.abs(m).max()
    assert np.abs(v.T @ v - np.eye(p)).max() <= 1e-8
