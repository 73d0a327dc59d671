import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from usaug.core import DimensionMismatch, column_tops, validate_pair
from usaug.deform import (
    DeformParams,
    compute_displacement_field,
    deform_augment,
    invert_axial_field,
    warp_axial,
    warp_mask,
)

from conftest import random_mask, rect_phantom
from oracles import naive_displacement_field


class TestField:
    def test_single_column_ramp(self):
        m = np.zeros((10, 1), np.uint8)
        m[5:, 0] = 1
        f = compute_displacement_field(m, DeformParams(10, sigma_lateral=0))
        np.testing.assert_allclose(f[:, 0], [0, -2, -4, -6, -8, -10, -10, -10, -10, -10])

    def test_column_without_bone_is_zero(self):
        m = np.zeros((10, 3), np.uint8)
        m[4, 0] = 1
        f = compute_displacement_field(m, DeformParams(8, sigma_lateral=0))
        assert not f[:, 1:].any()

    def test_bone_at_transducer_moves_whole_column(self):
        m = np.zeros((6, 2), np.uint8)
        m[0, 0] = 1
        f = compute_displacement_field(m, DeformParams(4, sigma_lateral=0))
        np.testing.assert_array_equal(f[:, 0], -4)

    def test_zero_d_is_zero(self, rect_sample):
        assert not compute_displacement_field(rect_sample.mask, DeformParams(0)).any()

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_naive(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mask(rng, (40, 30))
        d = float(rng.uniform(0, 50))
        got = compute_displacement_field(m, DeformParams(d, sigma_lateral=0))
        assert np.max(np.abs(got - naive_displacement_field(m, d))) <= 1e-9

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0, 80), st.sampled_from([0.0, 3.0, 15.0]))
    def test_range_and_monotone(self, seed, d, sigma):
        m = random_mask(np.random.default_rng(seed), (48, 40))
        f = compute_displacement_field(m, DeformParams(d, sigma_lateral=sigma))
        assert f.min() >= -d and f.max() <= 0
        # displacement magnitude never shrinks with depth
        assert np.all(np.diff(f, axis=0) <= 1e-12)

    def test_smoothing_spreads_laterally(self):
        m = np.zeros((40, 60), np.uint8)
        m[20:, 25:35] = 1
        f = compute_displacement_field(m, DeformParams(10, sigma_lateral=3))
        assert f[30, 20] < 0
        assert f[30, 30] > -10
        assert f[30, 0] == 0.0


class TestWarp:
    def test_column_shift_example(self):
        img = np.arange(8, dtype=float)[:, None] / 10
        out = warp_axial(img, np.full((8, 1), -3.0))
        np.testing.assert_allclose(out[:, 0], [0.3, 0.4, 0.5, 0.6, 0.7, 0, 0, 0])

    def test_bilinear_midpoint(self):
        img = np.array([[0.2], [0.6], [1.0]])
        out = warp_axial(img, np.array([[-0.5], [-0.5], [0.0]]))
        np.testing.assert_allclose(out[:, 0], [0.4, 0.8, 1.0])

    def test_nearest(self):
        img = np.array([[0.2], [0.6], [1.0]])
        out = warp_axial(img, np.full((3, 1), -0.6), interpolation="nearest")
        np.testing.assert_allclose(out[:, 0], [0.6, 1.0, 0.0])

    def test_zero_field_exact_copy(self, rng):
        img = rng.random((20, 30))
        out = warp_axial(img, np.zeros_like(img))
        np.testing.assert_array_equal(out, img)
        assert out is not img

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            warp_axial(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_mask_stays_binary(self, rng):
        m = random_mask(rng, (30, 30))
        f = -rng.uniform(0, 7, size=(30, 30))
        out = warp_mask(m, f)
        assert out.dtype == np.uint8 and set(np.unique(out)) <= {0, 1}


class TestInverse:
    def test_inverse_of_uniform_shift(self):
        f = np.full((10, 1), -3.0)
        back = invert_axial_field(f)
        np.testing.assert_allclose(back[:7, 0], -3.0)

    def test_forward_then_backward_lands_on_source(self):
        m = np.zeros((50, 4), np.uint8)
        m[30:, :] = 1
        f = compute_displacement_field(m, DeformParams(12, sigma_lateral=0))
        back = invert_axial_field(f)
        rows = np.arange(50.0)
        for x in range(30):
            y = x + f[x, 0]
            # backward field evaluated at the landing row points back to x
            src = y - np.interp(y, rows, back[:, 0])
            assert src == pytest.approx(x, abs=1e-9)


class TestDeformAugment:
    @pytest.mark.parametrize("d", [30, 65, 100])
    def test_rect_top_moves_up(self, d):
        s = rect_phantom(shape=(256, 96), top=150, bottom=170)
        out = deform_augment(s, DeformParams(d, sigma_lateral=0))
        top = int(np.flatnonzero(out.mask.any(axis=1))[0])
        assert abs(top - (150 - d)) <= 1
        assert out.mask.sum() == s.mask.sum()

    def test_bone_intensity_follows_mask(self):
        s = rect_phantom(shape=(200, 96), top=120, bottom=140)
        out = deform_augment(s, DeformParams(40, sigma_lateral=0))
        np.testing.assert_allclose(out.image[out.mask == 1], 0.9)

    def test_zero_d_returns_same(self, rect_sample):
        out = deform_augment(rect_sample, DeformParams(0))
        np.testing.assert_array_equal(out.image, rect_sample.image)
        np.testing.assert_array_equal(out.mask, rect_sample.mask)

    def test_empty_mask_is_identity(self, rng):
        s = validate_pair(rng.random((32, 32)), np.zeros((32, 32), np.uint8))
        out = deform_augment(s, DeformParams(50))
        np.testing.assert_array_equal(out.image, s.image)

    def test_smoothed_mask_binary_and_columns_kept(self, rect_sample):
        out = deform_augment(rect_sample, DeformParams(40))
        assert set(np.unique(out.mask)) <= {0, 1}
        before = column_tops(rect_sample.mask) >= 0
        after = column_tops(out.mask) >= 0
        np.testing.assert_array_equal(before, after)

    def test_revealed_rows_take_fill(self):
        s = rect_phantom(shape=(128, 64), top=60, bottom=70, left=0, right=64)
        out = deform_augment(s, DeformParams(20, sigma_lateral=0, fill=0.0))
        np.testing.assert_array_equal(out.image[-20:], 0.0)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            DeformParams(-1)
        with pytest.raises(ValueError):
            DeformParams(10, interpolation="cubic")
