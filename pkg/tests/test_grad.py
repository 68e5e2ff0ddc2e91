import numpy as np
import pytest

from diffilt.grad import (
    FILTER_NAMES,
    FilterChain,
    boundary_params,
    clamp_pass,
    finite_diff_check,
    filter_registry,
    make_filter,
    param_jvp,
    param_vjp,
)
from diffilt.harness import make_preset


def interior_image(rng, shape=(16, 16, 3)):
    return rng.uniform(0.02, 0.98, shape)


class TestJvpExamples:
    def test_gamma_derivative_is_xlogx(self, rng):
        img = interior_image(rng)
        filt = make_filter("gamma")
        got = param_jvp(filt, img, np.array([1.0]), np.array([1.0]))
        expected = np.where(img > 0, img * np.log(np.where(img > 0, img, 1.0)), 0.0)
        assert np.allclose(got, expected, atol=1e-14)

    def test_gamma_derivative_zero_at_black(self):
        img = np.zeros((2, 2, 3))
        filt = make_filter("gamma")
        got = param_jvp(filt, img, np.array([1.5]), np.array([1.0]))
        assert (got == 0).all()

    def test_white_balance_derivative_is_channel(self, rng):
        img = interior_image(rng)
        filt = make_filter("white_balance")
        got = param_jvp(filt, img, np.ones(3), np.array([1.0, 0.0, 0.0]))
        assert np.allclose(got[:, :, 0], img[:, :, 0], atol=0)
        assert (got[:, :, 1:] == 0).all()

    def test_kbl_k2_weight_derivative_is_shifted_image(self, rng):
        img = interior_image(rng, (8, 8, 3))
        filt = make_filter("kbl", kbl_ksize=3)
        params = filt.neutral()
        # K2 weight of the red channel at offset (dy, dx) = (1, 0)
        direction = np.zeros((3, 2, 3, 3))
        direction[0, 1, 2, 1] = 1.0
        got = param_jvp(filt, img, params, direction.ravel())
        shifted = np.roll(img[:, :, 0], 1, axis=0)
        shifted[0, :] = img[0, :, 0]  # replicate padding at the top edge
        assert np.allclose(got[:, :, 0], shifted, atol=1e-12)
        assert (got[:, :, 1:] == 0).all()

    def test_direction_length_mismatch(self, rng):
        filt = make_filter("gamma")
        with pytest.raises(ValueError):
            param_jvp(filt, interior_image(rng), np.array([1.0]), np.ones(2))


class TestVjp:
    def test_zero_upstream_gives_zero_gradient(self, rng):
        img = interior_image(rng)
        for name in FILTER_NAMES:
            filt = make_filter(name, kbl_ksize=3)
            g = param_vjp(filt, img, filt.sample_interior(rng), np.zeros_like(img))
            assert (g == 0).all(), name

    def test_adjoint_identity_all_filters(self, rng):
        img = interior_image(rng)
        for name in FILTER_NAMES:
            filt = make_filter(name, kbl_ksize=3)
            params = filt.sample_interior(rng)
            for _ in range(5):
                u = rng.normal(size=img.shape)
                v = rng.normal(size=filt.param_count)
                lhs = np.vdot(u, filt.jvp(img, params, v))
                rhs = np.vdot(filt.vjp(img, params, u), v)
                rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-8)
                assert rel < 1e-8, name

    def test_upstream_shape_mismatch(self, rng):
        filt = make_filter("gamma")
        with pytest.raises(ValueError):
            param_vjp(filt, interior_image(rng), np.array([1.0]), np.zeros((4, 4, 3)))

    def test_tone_scale_invariance(self, rng):
        # Scaling all slopes together leaves the map unchanged, so the
        # gradient along (1, ..., 1) vanishes at uniform parameters.
        img = interior_image(rng)
        filt = make_filter("tone")
        g = param_vjp(filt, img, np.ones(8), np.ones_like(img))
        assert abs(g.sum()) < 1e-10
        d = param_jvp(filt, img, np.ones(8), np.ones(8))
        assert np.abs(d).max() < 1e-12


class TestClampConvention:
    def test_saturated_pixels_report_zero(self, rng):
        img = rng.uniform(0.6, 0.9, (8, 8, 3))
        filt = make_filter("white_balance")
        params = np.array([2.0, 1.0, 1.0])  # red saturates everywhere
        d = param_jvp(filt, img, params, np.array([1.0, 0.0, 0.0]))
        assert (d == 0).all()

    def test_derivative_one_sided_at_exact_one(self):
        assert clamp_pass(np.array([0.0, 0.5, 1.0, -0.1, 1.1])).tolist() == [
            True, True, False, False, False]


class TestFiniteDiffCheck:
    def test_gamma_passes(self, rng):
        filt = make_filter("gamma")
        report = finite_diff_check(filt, interior_image(rng), np.array([1.5]))
        assert report.passed
        assert report.max_rel_error < 1e-3

    def test_bpw_interior_passes(self, rng):
        filt = make_filter("bpw")
        report = finite_diff_check(filt, interior_image(rng), rng.uniform(-0.8, 0.8, 12))
        assert report.passed

    def test_corrupted_analytic_derivative_fails(self, rng):
        base = make_filter("gamma")

        class Corrupted(type(base)):
            def jvp(self, image, params, direction):
                return 1.01 * super().jvp(image, params, direction)

        report = finite_diff_check(Corrupted(), interior_image(rng), np.array([1.5]))
        assert not report.passed

    def test_every_parameter_reported(self, rng):
        for name in FILTER_NAMES:
            filt = make_filter(name, kbl_ksize=3)
            report = finite_diff_check(filt, interior_image(rng), filt.sample_interior(rng))
            assert len(report.params) == filt.param_count
            assert [c.index for c in report.params] == list(range(filt.param_count))

    def test_boundary_params_rejected(self, rng):
        filt = make_filter("sharpen")
        with pytest.raises(ValueError, match="interior"):
            finite_diff_check(filt, interior_image(rng), np.array([0.0]))

    def test_bad_eps_rejected(self, rng):
        filt = make_filter("gamma")
        with pytest.raises(ValueError):
            finite_diff_check(filt, interior_image(rng), np.array([1.5]), eps=0.0)

    def test_report_serializes(self, rng):
        import json

        filt = make_filter("contrast")
        report = finite_diff_check(filt, interior_image(rng), np.array([0.4]))
        payload = json.dumps(report.to_dict())
        assert '"contrast"' in payload


class TestImageTangents:
    @pytest.mark.parametrize("name", ["gamma", "white_balance", "contrast", "tone",
                                      "sharpen", "bpw", "kbl"])
    def test_image_jvp_matches_finite_differences(self, rng, name):
        # (defog is excluded: its image tangent deliberately detaches the
        # dark channel and atmospheric light)
        filt = make_filter(name, kbl_ksize=3)
        img = rng.uniform(0.15, 0.85, (12, 12, 3))
        params = filt.sample_interior(rng)
        delta = rng.normal(size=img.shape)
        eps = 1e-6
        raw = filt.forward_raw(img, params)
        numeric = (filt.forward(img + eps * delta, params)
                   - filt.forward(img - eps * delta, params)) / (2 * eps)
        analytic = filt.image_jvp(img, params, delta)
        ok = (raw > 0.01) & (raw < 0.99)
        if name in ("tone", "bpw"):
            # keep away from segment knots where the map has kinks
            frac = (img * 8.0) % 1.0
            ok &= (frac > 0.01) & (frac < 0.99)
        err = np.abs(analytic - numeric)[ok]
        scale = np.maximum(np.abs(numeric[ok]), 1.0)
        assert (err / scale).max() < 1e-4

    def test_defog_image_tangent_detaches_transmission(self, rng):
        filt = make_filter("defog", defog_window=3)
        img = rng.uniform(0.2, 0.8, (10, 10, 3))
        params = np.array([0.5])
        delta = rng.normal(size=img.shape)
        raw, _, t, _, _ = filt._terms(img, 0.5)
        expected = np.where(clamp_pass(raw), delta / t[..., None], 0.0)
        assert np.allclose(filt.image_jvp(img, params, delta), expected, atol=0)


class TestChain:
    def test_chain_jvp_matches_finite_differences(self, rng):
        chain = make_preset("pixel_wise")
        img = rng.uniform(0.1, 0.9, (12, 12, 3))
        params = chain.sample_interior(rng)
        v = rng.normal(size=chain.param_count)
        eps = 1e-6
        numeric = (chain.forward(img, params + eps * v)
                   - chain.forward(img, params - eps * v)) / (2 * eps)
        analytic = chain.jvp(img, params, v)
        raw = chain.forward_raw(img, params)
        ok = (raw > 0.02) & (raw < 0.98)
        err = np.abs(analytic - numeric)[ok]
        scale = np.maximum(np.abs(numeric[ok]), 1.0)
        assert np.quantile(err / scale, 0.99) < 1e-4

    @pytest.mark.parametrize("preset", ["pixel_wise", "sharp_defog"])
    def test_chain_adjoint_identity(self, rng, preset):
        chain = make_preset(preset)
        img = rng.uniform(0.1, 0.9, (10, 10, 3))
        params = chain.sample_interior(rng)
        for _ in range(5):
            u = rng.normal(size=img.shape)
            v = rng.normal(size=chain.param_count)
            lhs = np.vdot(u, chain.jvp(img, params, v))
            rhs = np.vdot(chain.vjp(img, params, u), v)
            assert abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-8) < 1e-8

    def test_chain_split_join_roundtrip(self, rng):
        chain = make_preset("pixel_wise")
        params = chain.sample(rng)
        assert (chain.join(chain.split(params)) == params).all()

    def test_chain_forward_clamps_between_stages(self, rng):
        stages = [make_filter("white_balance"), make_filter("gamma")]
        chain = FilterChain(stages)
        img = rng.uniform(0.5, 0.9, (6, 6, 3))
        params = np.array([2.0, 2.0, 2.0, 0.5])
        direct = make_filter("gamma").forward(
            make_filter("white_balance").forward(img, params[:3]), params[3:])
        assert np.allclose(chain.forward(img, params), direct, atol=0)

    def test_empty_chain_rejected(self):
        with pytest.raises(ValueError):
            FilterChain([])


class TestRegistry:
    def test_all_filters_registered(self):
        reg = filter_registry()
        assert set(reg) == set(FILTER_NAMES)
        assert reg["bpw"]["count"] == 12
        assert reg["kbl"]["count"] == 2 * 81 * 3
        assert reg["tone"]["count"] == 8
        assert reg["gamma"]["lower"][0] == pytest.approx(1 / 3)

    def test_hyperparameters_respected(self):
        reg = filter_registry(kbl_ksize=3, tone_segments=4)
        assert reg["kbl"]["count"] == 2 * 9 * 3
        assert reg["tone"]["count"] == 4

    def test_unknown_filter_rejected(self):
        with pytest.raises(ValueError, match="unknown filter"):
            make_filter("swirl")

    def test_boundary_params_helper(self):
        filt = make_filter("sharpen")
        assert boundary_params(filt, np.array([0.0])) == [0]
        assert boundary_params(filt, np.array([2.5])) == []

    def test_neutral_within_bounds(self):
        for name in FILTER_NAMES:
            filt = make_filter(name)
            lo, hi = filt.bounds()
            n = filt.neutral()
            assert (n >= lo).all() and (n <= hi).all()

    def test_sampling_respects_bounds(self, rng):
        for name in FILTER_NAMES:
            filt = make_filter(name, kbl_ksize=3)
            for _ in range(10):
                p = filt.sample(rng)
                lo, hi = filt.bounds()
                assert (p >= lo).all() and (p <= hi).all()


class TestNeutralDirectionGradients:
    def test_identity_filters_have_zero_neutral_tangent(self, rng):
        # Directions that keep the filter neutral produce a zero tangent.
        img = rng.uniform(0.05, 0.95, (8, 8, 3))
        filt = make_filter("tone")
        d = filt.jvp(img, np.ones(8), np.ones(8))
        assert np.abs(d).max() < 1e-12
