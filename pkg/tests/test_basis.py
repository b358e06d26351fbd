import numpy as np
import pytest

from aprfm import basis
from aprfm.errors import DegenerateCoverError


def unit_square_partition(counts=(1, 1)):
    return basis.uniform_partition([(0.0, 1.0), (-1.0, 1.0)], counts)


class TestNormalizeToBox:
    def test_midpoint_maps_to_zero(self):
        box = basis.Box(np.array([0.2, -1.0]), np.array([0.8, 3.0]))
        np.testing.assert_allclose(
            basis.normalize_to_box(box.center, box), [0.0, 0.0])

    def test_unit_interval_endpoints(self):
        box = basis.Box(np.array([0.0]), np.array([1.0]))
        assert basis.normalize_to_box(np.array([0.0]), box)[0] == -1.0
        assert basis.normalize_to_box(np.array([1.0]), box)[0] == 1.0
        assert basis.normalize_to_box(np.array([0.75]), box)[0] == 0.5

    def test_dimension_mismatch(self):
        box = basis.Box(np.array([0.0]), np.array([1.0]))
        with pytest.raises(ValueError):
            basis.normalize_to_box(np.array([0.0, 1.0]), box)


class TestPouUnivariate:
    def test_bump_values(self):
        assert basis.pou_univariate("phi_b", 0.0) == 1.0
        assert basis.pou_univariate("phi_b", 1.0) == pytest.approx(0.5)
        assert basis.pou_univariate("phi_b", -1.0) == pytest.approx(0.5)
        assert basis.pou_univariate("phi_b", 2.0) == 0.0
        assert basis.pou_univariate("phi_a", 0.5) == 1.0
        assert basis.pou_univariate("phi_a", -1.0) == 1.0
        assert basis.pou_univariate("phi_a", 1.0 + 1e-12) == 0.0

    def test_bump_continuity_at_joints(self):
        for joint in (0.75, 1.25, -0.75, -1.25):
            lo = basis.pou_univariate("phi_b", joint - 1e-9)
            hi = basis.pou_univariate("phi_b", joint + 1e-9)
            assert abs(lo - hi) < 1e-7

    def test_indicator_support(self):
        z = np.linspace(-2, 2, 401)
        vals = basis.pou_univariate("phi_a", z)
        np.testing.assert_array_equal(vals, (np.abs(z) <= 1).astype(float))


class TestPouTensorNormalized:
    def test_single_box_is_one(self):
        part = unit_square_partition((1, 1))
        for y in ([0.5, 0.0], [0.01, -0.99], [0.99, 0.73]):
            np.testing.assert_allclose(
                basis.pou_tensor_normalized(part, "phi_b", np.array(y)), [1.0])

    @pytest.mark.parametrize("kind", ["phi_a", "phi_b"])
    @pytest.mark.parametrize("counts", [(1, 1), (2, 2), (4, 2), (8, 8)])
    def test_sums_to_one(self, kind, counts):
        part = unit_square_partition(counts)
        rng = np.random.default_rng(7)
        pts = rng.uniform([0, -1], [1, 1], size=(200, 2))
        psi, _ = basis.pou_normalized_batch(part, kind, pts)
        np.testing.assert_allclose(psi.sum(axis=1), 1.0, atol=1e-13)

    def test_flat_region_exclusivity(self):
        part = unit_square_partition((2, 2))
        # deep inside box (0, 0): |z| <= 3/4 on both axes, so the bump of
        # every other box vanishes there
        y = np.array([0.25, -0.5])
        weights = basis.pou_tensor_normalized(part, "phi_b", y)
        np.testing.assert_allclose(weights, [1.0, 0.0, 0.0, 0.0], atol=0)

    def test_degenerate_cover(self):
        part = unit_square_partition((1, 1))
        with pytest.raises(DegenerateCoverError):
            basis.pou_tensor_normalized(part, "phi_a", np.array([5.0, 0.0]))

    def test_support(self):
        part = unit_square_partition((2, 2))
        pts = np.array([[0.9, 0.9]])
        psi_a, _ = basis.pou_raw_batch(part, "phi_a", pts)
        assert psi_a[0, 0] == 0.0  # outside box 0
        psi_b, _ = basis.pou_raw_batch(part, "phi_b", pts)
        # box 0 spans x in [0, 0.5]: |z| = (0.9 - 0.25) / 0.25 = 2.6 >= 5/4
        assert psi_b[0, 0] == 0.0


class TestFeatureEval:
    def test_zero_weights(self):
        part = unit_square_partition((1, 1))
        weights = basis.FeatureWeights(w=np.zeros((1, 1, 2)),
                                       b=np.zeros((1, 1)),
                                       range_b=1.0, seed=0)
        model = basis.FeatureModel(partition=part, weights=weights)
        value, grad = basis.feature_eval(model, 0, 0, np.array([0.3, 0.2]))
        assert value == 0.0
        np.testing.assert_array_equal(grad, [0.0, 0.0])

    def test_sine_activation_peak(self):
        part = unit_square_partition((1, 1))
        weights = basis.FeatureWeights(w=np.zeros((1, 1, 2)),
                                       b=np.full((1, 1), 0.5),
                                       range_b=1.0, seed=0)
        model = basis.FeatureModel(partition=part, weights=weights,
                                   activation="sine-pi")
        value, _ = basis.feature_eval(model, 0, 0, np.array([0.5, 0.0]))
        assert value == pytest.approx(1.0, abs=1e-15)

    def test_index_out_of_range(self):
        model = basis.make_model(unit_square_partition((1, 1)), 4, seed=0)
        with pytest.raises(ValueError):
            basis.feature_eval(model, 0, 4, np.array([0.5, 0.0]))

    @pytest.mark.parametrize("activation", ["tanh", "sine-pi"])
    def test_gradient_matches_finite_differences(self, activation):
        part = basis.uniform_partition([(0.0, 1.0), (-1.0, 1.0)], (2, 2))
        model = basis.make_model(part, 5, seed=11, range_b=2.0,
                                 activation=activation)
        rng = np.random.default_rng(3)
        h = 1e-6
        checked = 0
        while checked < 100:
            y = rng.uniform([0, -1], [1, 1])
            i = rng.integers(model.n_boxes)
            j = rng.integers(model.n_features)
            _, grad = basis.feature_eval(model, i, j, y)
            fd = np.empty_like(y)
            for axis in range(2):
                step = np.zeros(2)
                step[axis] = h
                up, _ = basis.feature_eval(model, i, j, y + step)
                dn, _ = basis.feature_eval(model, i, j, y - step)
                fd[axis] = (up - dn) / (2 * h)
            scale = max(np.abs(fd).max(), 1.0)
            np.testing.assert_allclose(grad, fd, atol=1e-6 * scale)
            checked += 1

    def test_glued_column_gradient_matches_finite_differences(self):
        # gradient of the normalized-bump-times-neuron columns, checked off
        # the bump joints |z| in {3/4, 5/4}
        part = basis.uniform_partition([(0.0, 1.0), (-1.0, 1.0)], (2, 2))
        model = basis.make_model(part, 4, seed=5)
        rng = np.random.default_rng(19)
        h = 1e-6
        joints = np.array([0.75, 1.25])

        def off_joints(point):
            z = (point[None, :] - part.centers) / part.radii
            return np.all(np.abs(np.abs(z)[:, :, None] - joints) > 1e-3)

        checked = 0
        while checked < 60:
            y = rng.uniform([0.01, -0.99], [0.99, 0.99])
            if not off_joints(y):
                continue
            _, dchi = basis.column_batch(model, y[None, :])
            fd = np.empty((model.n_columns, 2))
            for axis in range(2):
                step = np.zeros(2)
                step[axis] = h
                up, _ = basis.column_batch(model, (y + step)[None, :])
                dn, _ = basis.column_batch(model, (y - step)[None, :])
                fd[:, axis] = (up[0] - dn[0]) / (2 * h)
            scale = max(np.abs(fd).max(), 1.0)
            np.testing.assert_allclose(dchi[0], fd, atol=2e-6 * scale)
            checked += 1


class TestFeatureWeights:
    def test_regeneration_is_bit_identical(self):
        a = basis.FeatureWeights.generate(42, 3, 7, 2, 1.0)
        b = basis.FeatureWeights.generate(42, 3, 7, 2, 1.0)
        assert np.array_equal(a.w, b.w) and np.array_equal(a.b, b.b)

    def test_different_seeds_differ(self):
        a = basis.FeatureWeights.generate(1, 2, 4, 2, 1.0)
        b = basis.FeatureWeights.generate(2, 2, 4, 2, 1.0)
        assert not np.array_equal(a.w, b.w)

    def test_entries_within_range(self):
        w = basis.FeatureWeights.generate(9, 4, 16, 3, 0.5)
        assert np.all(np.abs(w.w) <= 0.5) and np.all(np.abs(w.b) <= 0.5)

    def test_per_feature_streams_independent_of_counts(self):
        # entry (i, j) depends only on (seed, i, j), not on M or J
        small = basis.FeatureWeights.generate(4, 2, 3, 2, 1.0)
        large = basis.FeatureWeights.generate(4, 5, 8, 2, 1.0)
        np.testing.assert_array_equal(small.w, large.w[:2, :3])
        np.testing.assert_array_equal(small.b, large.b[:2, :3])


class TestModelEval:
    def test_zero_coefficients(self):
        model = basis.make_model(unit_square_partition((2, 1)), 3, seed=0)
        assert basis.model_eval(model, np.zeros(6), np.array([0.4, 0.1])) == 0.0

    def test_single_feature_factorization(self):
        part = unit_square_partition((1, 1))
        model = basis.make_model(part, 1, seed=8)
        y = np.array([0.3, -0.4])
        c = 2.5
        psi = basis.pou_tensor_normalized(part, "phi_b", y)[0]
        phi, _ = basis.feature_eval(model, 0, 0, y)
        assert basis.model_eval(model, np.array([c]), y) == \
            pytest.approx(psi * c * phi, rel=1e-15)

    def test_linearity(self):
        model = basis.make_model(unit_square_partition((2, 2)), 6, seed=2)
        rng = np.random.default_rng(0)
        for _ in range(20):
            c1 = rng.standard_normal(model.n_columns)
            c2 = rng.standard_normal(model.n_columns)
            y = rng.uniform([0, -1], [1, 1])
            lhs = basis.model_eval(model, c1 + c2, y)
            rhs = basis.model_eval(model, c1, y) + basis.model_eval(model, c2, y)
            assert lhs == pytest.approx(rhs, abs=1e-13)

    def test_length_mismatch(self):
        model = basis.make_model(unit_square_partition((1, 1)), 4, seed=0)
        with pytest.raises(ValueError):
            basis.model_eval(model, np.zeros(3), np.array([0.5, 0.0]))


class TestPartitionConstruction:
    def test_shared_faces(self):
        part = basis.uniform_partition([(0.0, 1.0)], (4,))
        for left, right in zip(part.boxes[:-1], part.boxes[1:]):
            assert left.hi[0] == right.lo[0]

    def test_invalid_box(self):
        with pytest.raises(ValueError):
            basis.Box(np.array([1.0]), np.array([0.0]))

    def test_weight_shape_checked(self):
        part = unit_square_partition((2, 1))
        weights = basis.FeatureWeights.generate(0, 1, 4, 2, 1.0)
        with pytest.raises(ValueError):
            basis.FeatureModel(partition=part, weights=weights)
