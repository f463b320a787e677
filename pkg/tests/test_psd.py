"""Tests for symmetric matrix square roots, operator norms, and Loewner order."""

import numpy as np
import pytest

from otrates import (
    DimensionMismatch,
    NotPSD,
    SymMatrix,
    loewner_leq,
    op_norm,
    sym_sqrt,
)


def hs_norm(m):
    return float(np.sqrt((np.asarray(m) ** 2).sum()))


class TestSymMatrix:
    def test_construction_symmetrizes_exactly(self):
        m = SymMatrix(np.array([[1.0, 2.0], [0.0, 3.0]]))
        assert np.array_equal(m.entries, m.entries.T)
        assert m.entries[0, 1] == 1.0

    def test_scalar_promotes_to_1x1(self):
        assert SymMatrix(4.0).dim == 1

    def test_rejects_non_square(self):
        with pytest.raises(DimensionMismatch):
            SymMatrix(np.ones((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            SymMatrix(np.array([[np.inf]]))

    def test_entries_read_only(self):
        m = SymMatrix(np.eye(2))
        with pytest.raises(ValueError):
            m.entries[0, 0] = 5.0


class TestSymSqrt:
    def test_identity(self):
        s = sym_sqrt(np.eye(2))
        np.testing.assert_allclose(s.entries, np.eye(2), atol=1e-15)

    def test_diagonal(self):
        s = sym_sqrt(np.diag([4.0, 9.0]))
        np.testing.assert_allclose(s.entries, np.diag([2.0, 3.0]), atol=1e-14)

    def test_frozen_2x2_against_eigen_oracle(self):
        # [[2,1],[1,2]] has eigenpairs (1, (1,-1)/sqrt2) and (3, (1,1)/sqrt2),
        # so the root is ((sqrt3+1)/2) on the diagonal, ((sqrt3-1)/2) off it.
        m = np.array([[2.0, 1.0], [1.0, 2.0]])
        expected = np.array(
            [
                [(np.sqrt(3) + 1) / 2, (np.sqrt(3) - 1) / 2],
                [(np.sqrt(3) - 1) / 2, (np.sqrt(3) + 1) / 2],
            ]
        )
        s = sym_sqrt(m)
        np.testing.assert_allclose(s.entries, expected, atol=1e-12)
        np.testing.assert_allclose(s.entries[0, 0], 1.3660, atol=5e-5)
        np.testing.assert_allclose(s.entries[0, 1], 0.3660, atol=5e-5)
        assert hs_norm(s.entries @ s.entries - m) <= 1e-12

    def test_square_residual_contract(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            d = rng.integers(1, 6)
            q, _ = np.linalg.qr(rng.normal(size=(d, d)))
            vals = rng.uniform(0.5, 4.0, size=d)
            m = (q * vals) @ q.T
            s = sym_sqrt(m).entries
            assert hs_norm(s @ s - m) <= 10 * np.finfo(float).eps * d * hs_norm(m)

    def test_clamps_small_negative_eigenvalues(self):
        m = np.diag([1.0, -1e-14])
        s = sym_sqrt(m)
        assert s.entries[1, 1] == 0.0

    def test_raises_on_genuinely_indefinite(self):
        with pytest.raises(NotPSD):
            sym_sqrt(np.diag([1.0, -0.5]))

    def test_sqrt_squares_back_200_random_psd(self):
        # dim <= 5, condition number <= 1e4
        rng = np.random.default_rng(123)
        for _ in range(200):
            d = int(rng.integers(1, 6))
            q, _ = np.linalg.qr(rng.normal(size=(d, d)))
            lo = rng.uniform(1e-3, 1.0)
            vals = rng.uniform(lo, min(lo * 1e4, 10.0), size=d)
            m = (q * vals) @ q.T
            s = sym_sqrt(m).entries
            assert hs_norm(s @ s - m) <= 1e-10 * hs_norm(m)


class TestOpNorm:
    def test_identity(self):
        assert op_norm(np.eye(3)) == 1.0

    def test_diagonal(self):
        assert op_norm(np.diag([2.0, 5.0])) == 5.0

    def test_frozen_2x2_against_char_poly_oracle(self):
        # Characteristic polynomial of [[2,1],[1,2]] is l^2 - 4l + 3 with
        # roots 1 and 3.
        roots = np.roots([1.0, -4.0, 3.0])
        assert np.isclose(max(abs(roots)), 3.0)
        assert np.isclose(op_norm([[2.0, 1.0], [1.0, 2.0]]), 3.0, atol=1e-12)

    def test_matches_unit_vector_sup(self):
        rng = np.random.default_rng(5)
        m = rng.normal(size=(3, 3))
        m = m + m.T
        directions = rng.normal(size=(2000, 3))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        sampled = np.abs(directions @ m @ directions.T).diagonal()
        # np.linalg.norm of M x over sampled unit vectors is a lower bound
        sampled_sup = np.linalg.norm(directions @ m, axis=1).max()
        assert sampled_sup <= op_norm(m) + 1e-12
        assert op_norm(m) - sampled_sup < 5e-2

    def test_negation_and_scaling(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            m = rng.normal(size=(4, 4))
            m = m + m.T
            assert np.isclose(op_norm(-m), op_norm(m), rtol=1e-14)
            c = rng.uniform(-3.0, 3.0)
            assert np.isclose(op_norm(c * m), abs(c) * op_norm(m), rtol=1e-12)


class TestLoewnerLeq:
    def test_scalar_ordering(self):
        assert loewner_leq(np.eye(2), 2 * np.eye(2), 0.0)

    def test_eigenvalue_violation(self):
        assert not loewner_leq(np.diag([1.0, 3.0]), 2 * np.eye(2), 0.0)

    def test_tolerance_band(self):
        eye = np.eye(2)
        assert loewner_leq(eye, eye - 1e-12 * eye, 1e-9)
        assert not loewner_leq(eye, eye - 1e-12 * eye, 0.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            loewner_leq(np.eye(2), np.eye(3), 0.0)

    def test_mutual_order_implies_equality(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = rng.normal(size=(3, 3))
            a = m + m.T
            b = a + 1e-13 * np.eye(3)
            if loewner_leq(a, b, 0.0) and loewner_leq(b, a, 0.0):
                assert np.max(np.abs(a - b)) <= 1e-12
        # and a genuinely equal pair passes both directions
        a = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert loewner_leq(a, a, 0.0) and loewner_leq(a, a, 0.0)
