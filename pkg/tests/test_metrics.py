import numpy as np
import pytest

from diffilt.fit import FitConfig, combined_loss, combined_loss_grad
from diffilt.metrics import mse, mse_grad, psnr, ssim, ssim_grad
from oracles import naive_ssim


class TestMse:
    def test_identical_images(self, rng):
        img = rng.uniform(0, 1, (5, 5, 3))
        assert mse(img, img) == 0.0

    def test_black_vs_white(self):
        assert mse(np.zeros((4, 4, 3)), np.ones((4, 4, 3))) == 1.0

    def test_single_pixel(self):
        assert mse(np.full((1, 1, 3), 0.5), np.full((1, 1, 3), 0.25)) == pytest.approx(0.0625)

    def test_symmetric(self, rng):
        a = rng.uniform(0, 1, (6, 6, 3))
        b = rng.uniform(0, 1, (6, 6, 3))
        assert mse(a, b) == mse(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros((2, 2, 3)), np.zeros((3, 2, 3)))

    def test_gradient_matches_finite_differences(self, rng):
        a = rng.uniform(0.2, 0.8, (5, 5, 3))
        b = rng.uniform(0.2, 0.8, (5, 5, 3))
        d = rng.normal(size=a.shape)
        eps = 1e-7
        numeric = (mse(a + eps * d, b) - mse(a - eps * d, b)) / (2 * eps)
        assert abs(np.vdot(mse_grad(a, b), d) - numeric) < 1e-9


class TestPsnr:
    def test_twenty_db(self):
        a = np.full((10, 10, 3), 0.4)
        b = np.full((10, 10, 3), 0.5)  # squared error 0.01 everywhere
        assert psnr(a, b) == pytest.approx(20.0)

    def test_identical_capped(self, rng):
        img = rng.uniform(0, 1, (4, 4, 3))
        assert psnr(img, img) == 100.0

    def test_opposite_extremes(self):
        assert psnr(np.zeros((4, 4, 3)), np.ones((4, 4, 3))) == pytest.approx(0.0)

    def test_symmetric(self, rng):
        a = rng.uniform(0, 1, (6, 6, 3))
        b = rng.uniform(0, 1, (6, 6, 3))
        assert psnr(a, b) == psnr(b, a)


class TestSsim:
    def test_identical_is_exactly_one(self, rng):
        img = rng.uniform(0, 1, (16, 20, 3))
        assert ssim(img, img) == 1.0

    def test_identical_constants(self):
        img = np.full((12, 12, 3), 0.37)
        assert ssim(img, img) == 1.0

    def test_negated_pattern_scores_low(self, rng):
        base = 0.5 + 0.5 * np.sign(rng.normal(size=(16, 16, 3)))
        inverted = 1.0 - base
        value = ssim(base, inverted)
        assert value < 0.5
        assert value == pytest.approx(naive_ssim(base, inverted), abs=1e-10)

    def test_matches_sliding_window_oracle(self, rng):
        a = rng.uniform(0, 1, (14, 17, 3))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-10)

    def test_symmetric(self, rng):
        a = rng.uniform(0, 1, (12, 12, 3))
        b = rng.uniform(0, 1, (12, 12, 3))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-14)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="11"):
            ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))

    def test_gradient_matches_finite_differences(self, rng):
        a = rng.uniform(0.1, 0.9, (13, 15, 3))
        b = rng.uniform(0.1, 0.9, (13, 15, 3))
        value, grad = ssim_grad(a, b)
        assert value == pytest.approx(ssim(a, b))
        d = rng.normal(size=a.shape)
        eps = 1e-6
        numeric = (ssim(a + eps * d, b) - ssim(a - eps * d, b)) / (2 * eps)
        assert abs(np.vdot(grad, d) - numeric) < 1e-7 * max(1.0, abs(numeric))


class TestCombinedLoss:
    def test_identical_images_zero_for_any_weights(self, rng):
        img = rng.uniform(0, 1, (12, 12, 3))
        for w in [(1.0, 1.0), (2.0, 0.5), (1.0, 0.0), (0.0, 1.0)]:
            cfg = FitConfig(mse_weight=w[0], ssim_weight=w[1])
            assert combined_loss(img, img, cfg) == pytest.approx(0.0, abs=1e-14)

    def test_mse_only_weighting(self, rng):
        a = rng.uniform(0, 1, (12, 12, 3))
        b = rng.uniform(0, 1, (12, 12, 3))
        cfg = FitConfig(mse_weight=1.0, ssim_weight=0.0)
        assert combined_loss(a, b, cfg) == pytest.approx(mse(a, b))

    def test_gradient_matches_finite_differences(self, rng):
        a = rng.uniform(0.1, 0.9, (12, 12, 3))
        b = rng.uniform(0.1, 0.9, (12, 12, 3))
        cfg = FitConfig()
        loss, grad = combined_loss_grad(a, b, cfg)
        assert loss == pytest.approx(combined_loss(a, b, cfg))
        d = rng.normal(size=a.shape)
        eps = 1e-6
        numeric = (combined_loss(a + eps * d, b, cfg)
                   - combined_loss(a - eps * d, b, cfg)) / (2 * eps)
        assert abs(np.vdot(grad, d) - numeric) < 1e-6 * max(1.0, abs(numeric))
