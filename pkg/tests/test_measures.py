"""Tests for Gaussian specs, grid discretization, and assumption constants."""

import json
import math

import numpy as np
import pytest

from otrates import (
    DiscreteMeasure,
    GaussianSpec,
    GridTooLarge,
    NonuniformGrid,
    assumption_params,
    differential_entropy_discrete,
    discretize_gaussian,
    loewner_leq,
    measure_from_json,
    measure_to_json,
    op_norm,
)

LOG_2PIE = math.log(2.0 * math.pi * math.e)


class TestGaussianSpec:
    def test_requires_strict_pd(self):
        with pytest.raises(ValueError):
            GaussianSpec.isotropic(2, 0.0)

    def test_isotropic_helper(self):
        spec = GaussianSpec.isotropic(3, 2.0)
        np.testing.assert_allclose(spec.covariance.entries, 2.0 * np.eye(3))


class TestDiscreteMeasure:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(points=np.array([[0.0], [1.0]]), weights=np.array([0.5, 0.6]))

    def test_points_must_be_distinct(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(points=np.array([[1.0], [1.0]]), weights=np.array([0.5, 0.5]))

    def test_1d_points_promoted(self):
        m = DiscreteMeasure(points=np.array([-1.0, 1.0]), weights=np.array([0.5, 0.5]))
        assert m.points.shape == (2, 1)
        assert m.dim == 1


class TestDiscretizeGaussian:
    def test_three_point_grid_weights(self):
        # nodes {-6, 0, 6}; weights proportional to the density there
        m = discretize_gaussian(GaussianSpec.isotropic(1, 1.0), 3, 6.0)
        np.testing.assert_allclose(np.sort(m.points[:, 0]), [-6.0, 0.0, 6.0])
        phi0 = math.exp(0.0)
        phi6 = math.exp(-18.0)
        middle = phi0 / (phi0 + 2 * phi6)
        center_idx = int(np.argmax(m.weights))
        assert m.points[center_idx, 0] == 0.0
        np.testing.assert_allclose(m.weights[center_idx], middle, rtol=1e-14)
        assert m.weights[center_idx] > 0.999

    def test_mirror_nodes_have_equal_weights(self):
        m = discretize_gaussian(GaussianSpec.isotropic(1, 1.0), 41, 5.0)
        order = np.argsort(m.points[:, 0])
        w = m.weights[order]
        assert np.array_equal(w, w[::-1])

    def test_empirical_variance_window(self):
        m = discretize_gaussian(GaussianSpec.isotropic(1, 1.0), 401, 6.0)
        var = float(m.weights @ m.points[:, 0] ** 2)
        assert 0.999 <= var <= 1.001

    def test_empirical_covariance_2d(self):
        cov = np.array([[1.0, 0.4], [0.4, 2.0]])
        m = discretize_gaussian(GaussianSpec(cov), 61, 6.0)
        emp = m.points.T @ (m.points * m.weights[:, None])
        np.testing.assert_allclose(emp, cov, atol=2e-3)

    def test_rotated_grid_loses_axis_metadata(self):
        cov = np.array([[1.0, 0.4], [0.4, 2.0]])
        m = discretize_gaussian(GaussianSpec(cov), 9, 4.0)
        assert m.grid_axes is None
        m_diag = discretize_gaussian(GaussianSpec(np.diag([1.0, 2.0])), 9, 4.0)
        assert m_diag.grid_axes is not None

    def test_grid_too_large(self):
        with pytest.raises(GridTooLarge):
            discretize_gaussian(GaussianSpec.isotropic(3, 1.0), 401, 6.0)

    def test_parameter_validation(self):
        spec = GaussianSpec.isotropic(1, 1.0)
        with pytest.raises(ValueError):
            discretize_gaussian(spec, 4, 6.0)  # even
        with pytest.raises(ValueError):
            discretize_gaussian(spec, 1, 6.0)  # too few
        with pytest.raises(ValueError):
            discretize_gaussian(spec, 5, 2.0)  # truncation too tight


class TestAssumptionParams:
    def test_standard_pair(self):
        p = assumption_params(GaussianSpec.isotropic(2, 1.0), GaussianSpec.isotropic(2, 1.0))
        assert p.alpha == 1.0
        assert p.beta == 1.0
        assert p.poincare_constant == 1.0
        np.testing.assert_allclose(p.differential_entropy, 2 * 0.5 * LOG_2PIE, rtol=1e-14)
        np.testing.assert_allclose(p.differential_entropy, 2.83788, atol=5e-6)

    def test_scalar_inverses(self):
        p = assumption_params(GaussianSpec.isotropic(1, 4.0), GaussianSpec.isotropic(1, 1.0))
        assert p.alpha == 0.25
        assert p.poincare_constant == 4.0

    def test_beta_from_largest_target_eigenvalue(self):
        p = assumption_params(
            GaussianSpec.isotropic(2, 1.0), GaussianSpec(np.diag([1.0, 9.0]))
        )
        np.testing.assert_allclose(p.beta, 1.0 / 9.0, rtol=1e-14)

    def test_condition_number_identity(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            vals = rng.uniform(0.5, 5.0, size=3)
            a = (q * vals) @ q.T
            p = assumption_params(GaussianSpec(a), GaussianSpec.isotropic(3, 1.0))
            assert p.alpha * op_norm(a) >= 1.0 - 1e-12
        # equality iff the covariance is a multiple of the identity
        p = assumption_params(GaussianSpec.isotropic(3, 2.5), GaussianSpec.isotropic(3, 1.0))
        np.testing.assert_allclose(p.alpha * 2.5, 1.0, rtol=1e-14)

    def test_poincare_monotone_in_loewner_order(self):
        a = np.diag([1.0, 2.0])
        a_bigger = np.diag([1.5, 2.5])
        assert loewner_leq(a, a_bigger, 0.0)
        nu = GaussianSpec.isotropic(2, 1.0)
        p1 = assumption_params(GaussianSpec(a), nu)
        p2 = assumption_params(GaussianSpec(a_bigger), nu)
        assert p1.poincare_constant <= p2.poincare_constant


class TestDifferentialEntropyDiscrete:
    def test_uniform_two_point(self):
        m = DiscreteMeasure(points=np.array([[0.0], [1.0]]), weights=np.array([0.5, 0.5]))
        np.testing.assert_allclose(
            differential_entropy_discrete(m, cell_volume=1.0), math.log(2.0), rtol=1e-14
        )

    def test_gaussian_grid_matches_analytic(self):
        m = discretize_gaussian(GaussianSpec.isotropic(1, 1.0), 401, 6.0)
        h = differential_entropy_discrete(m)
        np.testing.assert_allclose(h, 0.5 * LOG_2PIE, atol=1e-3)
        np.testing.assert_allclose(h, 1.41894, atol=1e-3)

    def test_cell_volume_dilation_adds_log2(self):
        m = discretize_gaussian(GaussianSpec.isotropic(1, 1.0), 101, 5.0)
        h1 = differential_entropy_discrete(m)
        h2 = differential_entropy_discrete(m, cell_volume=2.0 * m.cell_volume)
        np.testing.assert_allclose(h2 - h1, math.log(2.0), rtol=1e-12)

    def test_unknown_cell_volume_raises(self):
        m = DiscreteMeasure(points=np.array([[0.0], [1.0]]), weights=np.array([0.5, 0.5]))
        with pytest.raises(NonuniformGrid):
            differential_entropy_discrete(m)


class TestMeasureJson:
    def test_round_trip(self):
        spec = GaussianSpec(np.array([[2.0, 0.5], [0.5, 1.0]]))
        blob = json.dumps(measure_to_json(spec))
        back = measure_from_json(json.loads(blob))
        np.testing.assert_allclose(back.covariance.entries, spec.covariance.entries)

    def test_schema_shape(self):
        obj = measure_to_json(GaussianSpec.isotropic(1, 1.0))
        assert obj == {"type": "gaussian", "dim": 1, "covariance": [[1.0]]}

    def test_unknown_type_rejected(self):
        with pytest.raises(ValueError, match="type"):
            measure_from_json({"type": "cauchy", "dim": 1, "covariance": [[1.0]]})

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dim"):
            measure_from_json({"type": "gaussian", "dim": 3, "covariance": [[1.0]]})
