import dataclasses
import logging

import numpy as np
import pytest

from aprfm import collocation, problems, quadrature, reference
from aprfm.errors import (NoConvergenceError, UndefinedMetricError,
                          UnsupportedProblemError)


class TestExactField:
    def test_slab_values(self):
        spec = problems.catalog("ex1", 1.0)
        grid = (np.array([[0.25]]), np.array([-0.5]))
        field = reference.exact_field(spec, grid)
        assert field.values[0] == pytest.approx(0.75)

    def test_planar_values(self):
        spec = problems.catalog("ex4", 1.0)
        grid = (np.array([[1.0, 1.0]]), np.array([0.1]))
        assert reference.exact_field(spec, grid).values[0] == \
            pytest.approx(np.exp(-2.0))
        spec6 = problems.catalog("ex6", 1.0)
        grid6 = (np.array([[-1.0, -1.0]]), np.array([0.1]))
        assert reference.exact_field(spec6, grid6).values[0] == \
            pytest.approx(np.exp(2.0))

    def test_missing_exact_solution(self):
        spec = problems.catalog("ex2", 1.0)
        with pytest.raises(UnsupportedProblemError):
            reference.exact_field(spec, collocation.evaluation_grid(spec))


class TestRelativeL2:
    def grid(self, values):
        n = len(values)
        return reference.GridField(points=np.arange(n, dtype=float)[:, None],
                                   values=np.asarray(values, dtype=float))

    def test_identical_fields(self):
        assert reference.relative_l2(self.grid([1, 2]), self.grid([1, 2])) == 0

    def test_doubled_field(self):
        ref = self.grid([1.0, -2.0, 0.5])
        approx = self.grid([2.0, -4.0, 1.0])
        assert reference.relative_l2(approx, ref) == pytest.approx(1.0)

    def test_unit_mismatch(self):
        assert reference.relative_l2(self.grid([1.0, 1.0]),
                                     self.grid([1.0, 0.0])) == \
            pytest.approx(1.0)

    def test_zero_reference(self):
        with pytest.raises(UndefinedMetricError):
            reference.relative_l2(self.grid([1.0]), self.grid([0.0]))

    def test_scale_invariance(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal(64)
        r = rng.standard_normal(64)
        base = reference.relative_l2(self.grid(a), self.grid(r))
        for c in (3.0, -0.2, 1e-7, 1e7):
            scaled = reference.relative_l2(self.grid(c * a), self.grid(c * r))
            assert scaled == pytest.approx(base, rel=1e-13)

    def test_grid_mismatch(self):
        other = reference.GridField(points=np.array([[5.0], [6.0]]),
                                    values=np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            reference.relative_l2(self.grid([1.0, 2.0]), other)


class TestDensityField:
    def test_velocity_independent_samples(self):
        spec = problems.catalog("ex4", 1.0)
        rule = quadrature.angular_rule(2, 16)
        xs = np.array([[0.1, 0.2], [-0.3, 0.4]])
        samples = np.repeat(spec.exact_rho(xs)[:, None], rule.n_nodes, axis=1)
        rho = reference.density_field(spec, rule, xs, f_samples=samples)
        np.testing.assert_allclose(rho.values, spec.exact_rho(xs), atol=1e-14)

    def test_zero_fluctuation_coefficients(self):
        from helpers import build_models
        spec = problems.catalog("ex1", 0.5)
        rule = quadrature.angular_rule(1, 8)
        rho_model, g_model = build_models(spec, 4, 5, (1,), 1, seed=0)
        rng = np.random.default_rng(2)
        coeffs = np.concatenate([rng.standard_normal(4), np.zeros(5)])
        xs = rng.uniform(0, 1, size=(12, 1))
        rho = reference.density_field(spec, rule, xs, rho_model=rho_model,
                                      g_model=g_model, coeffs=coeffs)
        from aprfm.basis import model_values
        np.testing.assert_allclose(rho.values,
                                   model_values(rho_model, coeffs[:4], xs),
                                   atol=1e-14)


class TestFdm1D:
    def test_oracle_matches_exact_solution(self):
        spec = problems.catalog("ex1", 1.0)
        field = reference.fdm_reference(spec, resolution=128)
        exact = reference.exact_field(spec, collocation.evaluation_grid(spec))
        assert reference.relative_l2(field, exact) < 5e-3

    def test_first_order_refinement(self):
        spec = problems.catalog("ex1", 1.0)
        exact = reference.exact_field(spec, collocation.evaluation_grid(spec))
        coarse = reference.fdm_reference(spec, resolution=64)
        fine = reference.fdm_reference(spec, resolution=128)
        ratio = reference.relative_l2(coarse, exact) / \
            reference.relative_l2(fine, exact)
        assert 1.5 <= ratio <= 2.5

    def test_constant_solution_reproduced(self):
        spec = problems.catalog("ex2", 1.0)
        const = dataclasses.replace(
            spec, boundary_value=lambda x, v: np.ones(
                np.broadcast_shapes(np.asarray(x).shape[:-1], np.shape(v))))
        field = reference.fdm_reference(const, resolution=64,
                                        sweep_tol=1e-13)
        np.testing.assert_allclose(field.values, 1.0, atol=1e-12)

    def test_no_convergence_error(self):
        spec = problems.catalog("ex3")
        with pytest.raises(NoConvergenceError) as err:
            reference.fdm_reference(spec, resolution=64, max_iters=3)
        assert err.value.last_change > 0

    def test_mixed_scale_profile_supported(self):
        spec = problems.catalog("ex3")
        field = reference.fdm_reference(spec, resolution=128,
                                        sweep_tol=1e-8)
        assert field.values.min() > -1e-8
        assert field.values.max() <= 0.5 + 1e-8


class TestFdm2D:
    def test_converges_and_logs_iterations(self, caplog):
        spec = problems.catalog("ex5", 1.0)
        with caplog.at_level(logging.INFO, logger="aprfm.reference"):
            rho = reference.fdm_density(spec, resolution=(32, 32))
        assert any("source iteration converged" in rec.message
                   for rec in caplog.records)
        assert rho.values.max() > 0.1  # interior source builds up density

    def test_planar_oracle_against_exact(self):
        spec = problems.catalog("ex4", 1.0)
        rho = reference.fdm_density(spec, resolution=(64, 64))
        xs = collocation.evaluation_spatial_grid(spec)
        exact = reference.GridField(points=xs, values=spec.exact_rho(xs))
        assert reference.relative_l2(rho, exact) < 5e-2

    def test_annulus_oracle_against_exact(self):
        spec = problems.catalog("ex6", 1.0)
        rho = reference.fdm_density(spec, resolution=(64, 64))
        xs = collocation.evaluation_spatial_grid(spec)
        exact = reference.GridField(points=xs, values=spec.exact_rho(xs))
        assert reference.relative_l2(rho, exact) < 5e-2

    def test_velocity_node_override(self):
        spec = problems.catalog("ex4", 1.0)
        rule = quadrature.angular_rule(2, 8)
        field = reference.fdm_reference(spec, resolution=(16, 16),
                                        sweep_tol=1e-8,
                                        velocity_nodes=rule.nodes)
        xs = collocation.evaluation_spatial_grid(spec)
        assert field.points.shape == (xs.shape[0] * 8, 3)
