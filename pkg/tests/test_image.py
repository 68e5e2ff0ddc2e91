import numpy as np
import pytest
from PIL import Image as PILImage

from diffilt.image import (
    convolve2d,
    gaussian_blur,
    gaussian_kernel,
    load_image,
    luminance,
    save_image,
    validate_image,
)
from oracles import naive_convolve


class TestLoadImage:
    def test_single_pixel_png_scales_exactly(self, tmp_path):
        path = tmp_path / "one.png"
        PILImage.fromarray(np.array([[[255, 0, 128]]], dtype=np.uint8)).save(path)
        img = load_image(path)
        assert img.shape == (1, 1, 3)
        assert img[0, 0, 0] == 1.0
        assert img[0, 0, 1] == 0.0
        assert img[0, 0, 2] == 128 / 255

    def test_black_ppm(self, tmp_path):
        path = tmp_path / "black.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
        img = load_image(path)
        assert img.shape == (2, 2, 3)
        assert (img == 0.0).all()

    def test_alpha_dropped(self, tmp_path):
        path = tmp_path / "rgba.png"
        rgba = np.zeros((2, 2, 4), dtype=np.uint8)
        rgba[..., 0] = 200
        rgba[..., 3] = 7
        PILImage.fromarray(rgba, mode="RGBA").save(path)
        img = load_image(path)
        assert img.shape == (2, 2, 3)
        assert np.allclose(img[..., 0], 200 / 255)

    def test_grayscale_replicated(self, tmp_path):
        path = tmp_path / "gray.png"
        PILImage.fromarray(np.array([[10, 20]], dtype=np.uint8), mode="L").save(path)
        img = load_image(path)
        assert np.allclose(img[0, 0], 10 / 255)
        assert np.allclose(img[0, 1], 20 / 255)

    def test_unsupported_format_rejected(self, tmp_path):
        path = tmp_path / "img.bmp"
        PILImage.fromarray(np.zeros((2, 2, 3), dtype=np.uint8)).save(path, format="BMP")
        with pytest.raises(ValueError, match="unsupported format"):
            load_image(path)

    def test_sixteen_bit_png_rejected(self, tmp_path):
        path = tmp_path / "deep.png"
        PILImage.new("I;16", (2, 2)).save(path)
        with pytest.raises(ValueError, match="mode"):
            load_image(path)

    def test_garbage_file_rejected(self, tmp_path):
        path = tmp_path / "noise.png"
        path.write_bytes(b"not an image at all")
        with pytest.raises(ValueError, match="unreadable"):
            load_image(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_image(tmp_path / "absent.png")


class TestSaveImage:
    def test_midgray_rounds_to_128(self, tmp_path):
        path = tmp_path / "g.png"
        save_image(np.full((1, 1, 3), 0.5), path)
        assert np.asarray(PILImage.open(path))[0, 0].tolist() == [128, 128, 128]

    def test_white_saturates(self, tmp_path):
        path = tmp_path / "w.png"
        save_image(np.ones((1, 1, 3)), path)
        assert np.asarray(PILImage.open(path))[0, 0].tolist() == [255, 255, 255]

    def test_round_trip_quantization_bound(self, tmp_path, rng):
        img = rng.uniform(0.0, 1.0, (9, 7, 3))
        path = tmp_path / "rt.png"
        save_image(img, path)
        back = load_image(path)
        assert np.abs(back - img).max() <= 1.0 / 510 + 1e-12

    def test_eight_bit_values_survive_exactly(self, tmp_path, rng):
        img = rng.integers(0, 256, (5, 5, 3)).astype(np.float64) / 255.0
        path = tmp_path / "exact.png"
        save_image(img, path)
        assert (load_image(path) == img).all()

    def test_rejects_out_of_range(self, tmp_path):
        with pytest.raises(ValueError):
            save_image(np.full((2, 2, 3), 1.5), tmp_path / "bad.png")


class TestValidateImage:
    def test_shape_checks(self):
        with pytest.raises(ValueError):
            validate_image(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            validate_image(np.zeros((0, 4, 3)))

    def test_nan_rejected(self):
        img = np.zeros((2, 2, 3))
        img[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            validate_image(img)


class TestLuminance:
    def test_white_is_one(self):
        assert abs(luminance(np.array([1.0, 1.0, 1.0])) - 1.0) < 1e-12

    def test_black_is_zero(self):
        assert luminance(np.array([0.0, 0.0, 0.0])) == 0.0

    def test_red_coefficient(self):
        assert luminance(np.array([1.0, 0.0, 0.0])) == 0.27

    def test_affine_per_channel(self, rng):
        base = rng.uniform(0, 1, 3)
        for c in range(3):
            lo = base.copy()
            hi = base.copy()
            lo[c] = 0.2
            hi[c] = 0.8
            mid = base.copy()
            mid[c] = 0.5
            expected = 0.5 * (luminance(lo) + luminance(hi))
            assert abs(luminance(mid) - expected) < 1e-12

    def test_stays_in_unit_interval(self, rng):
        vals = luminance(rng.uniform(0, 1, (50, 3)))
        assert (vals >= 0).all() and (vals <= 1).all()


class TestConvolve2d:
    def test_identity_one_by_one(self, rng):
        img = rng.uniform(0, 1, (6, 5, 3))
        assert (convolve2d(img, np.array([[1.0]])) == img).all()

    def test_constant_image_scales_by_kernel_sum(self, rng):
        kernel = rng.normal(size=(3, 3))
        img = np.full((8, 8, 3), 0.4)
        out = convolve2d(img, kernel)
        assert np.allclose(out, 0.4 * kernel.sum(), atol=1e-14)

    def test_box_kernel_center_is_patch_mean(self, rng):
        img = rng.uniform(0, 1, (3, 3))
        out = convolve2d(img, np.full((3, 3), 1.0 / 9.0))
        assert abs(out[1, 1] - img.mean()) < 1e-14

    def test_matches_naive_double_loop(self, rng):
        img = rng.uniform(0, 1, (7, 9))
        kernel = rng.normal(size=(5, 5))
        assert np.allclose(convolve2d(img, kernel), naive_convolve(img, kernel), atol=1e-12)

    def test_linearity(self, rng):
        a, b = 1.7, -0.4
        i1 = rng.uniform(0, 1, (6, 6, 3))
        i2 = rng.uniform(0, 1, (6, 6, 3))
        kernel = rng.normal(size=(3, 3))
        lhs = convolve2d(a * i1 + b * i2, kernel)
        rhs = a * convolve2d(i1, kernel) + b * convolve2d(i2, kernel)
        assert np.allclose(lhs, rhs, atol=1e-13)

    @pytest.mark.parametrize("side", [1, 3, 5, 7])
    def test_delta_kernel_is_identity(self, rng, side):
        img = rng.uniform(0, 1, (8, 8, 3))
        kernel = np.zeros((side, side))
        kernel[side // 2, side // 2] = 1.0
        assert np.allclose(convolve2d(img, kernel), img, atol=0)

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            convolve2d(np.zeros((4, 4, 3)), np.ones((2, 2)))


class TestGaussian:
    def test_kernel_normalized_and_symmetric(self):
        k = gaussian_kernel(13, 5.0)
        assert abs(k.sum() - 1.0) < 1e-12
        assert np.allclose(k, k.T)
        assert np.allclose(k, k[::-1, ::-1])

    def test_separable_blur_matches_full_convolution(self, rng):
        img = rng.uniform(0, 1, (12, 10, 3))
        full = convolve2d(img, gaussian_kernel(7, 2.0))
        fast = gaussian_blur(img, 7, 2.0, mode="nearest")
        assert np.allclose(full, fast, atol=1e-13)

    def test_even_side_rejected(self):
        with pytest.raises(ValueError):
            gaussian_kernel(4, 1.0)
