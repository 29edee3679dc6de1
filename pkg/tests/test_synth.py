import numpy as np
import pytest

from shadowbench.errors import DimensionMismatchError
from shadowbench.imaging import Image, ScalarField
from shadowbench.synth import (MatteConfig, ShadowParams, compose_shadow,
                               render_matte, synth_gradients, synth_with_gradients,
                               synthetic_face_depth)

from conftest import random_image, random_mask
from test_blur import stamp_oracle

NO_BLUR = MatteConfig(sigma_min=0.0, sigma_max=0.0, scatter_spread=(1.0, 1.0, 1.0),
                      depth_gain=0.0)


def uniform_field(h, w, value=1.0, role="mask"):
    return ScalarField(np.full((h, w), value), role=role)


class TestMatteConfig:
    def test_rejects_bad_sigma_order(self):
        with pytest.raises(ValueError):
            MatteConfig(sigma_min=3.0, sigma_max=1.0)

    def test_rejects_unordered_spread(self):
        with pytest.raises(ValueError):
            MatteConfig(scatter_spread=(1.0, 1.2, 1.3))

    def test_alpha_clamped_at_construction(self):
        p = ShadowParams(alpha=1.7, mask=uniform_field(4, 4),
                         depth=uniform_field(4, 4, role="depth"))
        assert p.alpha == 0.999


class TestRenderMatte:
    def test_empty_mask_gives_empty_matte(self):
        rho = render_matte(uniform_field(8, 8, 0.0),
                           uniform_field(8, 8, role="depth"), MatteConfig())
        assert np.array_equal(rho.data, np.zeros((8, 8)))
        assert rho.role == "matte"

    def test_full_mask_no_blur_is_all_ones(self):
        cfg = MatteConfig(sigma_min=0.0, sigma_max=0.0, depth_gain=0.7)
        rho = render_matte(uniform_field(6, 6, 1.0),
                           uniform_field(6, 6, 1.0, role="depth"), cfg)
        assert np.array_equal(rho.data, np.ones((6, 6)))

    def test_single_pixel_matches_gaussian_stamp(self):
        mask = np.zeros((15, 15))
        mask[7, 7] = 1.0
        cfg = MatteConfig(sigma_min=1.0, sigma_max=1.0, depth_gain=0.0)
        rho = render_matte(ScalarField(mask),
                           uniform_field(15, 15, role="depth"), cfg)
        assert np.allclose(rho.data, stamp_oracle(15, 15, 7, 7, 1.0), atol=1e-12)
        assert rho.data.max() < 1.0

    def test_depth_modulation(self):
        cfg = MatteConfig(sigma_min=0.0, sigma_max=0.0, depth_gain=0.5)
        rho = render_matte(uniform_field(6, 6, 1.0),
                           uniform_field(6, 6, 0.4, role="depth"), cfg)
        assert np.allclose(rho.data, 1.0 - 0.5 * 0.6)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            render_matte(uniform_field(4, 4), uniform_field(5, 5, role="depth"),
                         MatteConfig())


class TestComposeShadow:
    def test_empty_mask_is_bit_exact_identity(self, rng):
        clean = random_image(rng, 9, 9, lo=0.0, hi=1.0)
        params = ShadowParams(alpha=0.37, mask=uniform_field(9, 9, 0.0),
                              depth=synthetic_face_depth(9, 9))
        out = compose_shadow(clean, params)
        assert np.array_equal(out.data, clean.data)

    def test_closed_form_single_pixel(self):
        clean = Image(np.full((1, 1, 3), 0.5))
        params = ShadowParams(alpha=0.4, mask=uniform_field(1, 1, 1.0),
                              depth=uniform_field(1, 1, 1.0, role="depth"),
                              matte=NO_BLUR)
        out = compose_shadow(clean, params)
        assert np.allclose(out.data, 0.2, atol=1e-15)  # (1 - 0.6) * 0.5

    def test_full_shadow_no_ambient_is_black(self):
        clean = Image(np.full((1, 1, 3), 0.9))
        params = ShadowParams(alpha=0.0, mask=uniform_field(1, 1, 1.0),
                              depth=uniform_field(1, 1, 1.0, role="depth"),
                              matte=NO_BLUR)
        assert np.array_equal(compose_shadow(clean, params).data, np.zeros((1, 1, 3)))

    def test_beta_tint(self):
        clean = Image(np.full((1, 1, 3), 0.5))
        beta = ((0.0, 0.1), (0.0, 0.2), (0.0, 0.3))
        params = ShadowParams(alpha=0.5, mask=uniform_field(1, 1, 1.0),
                              depth=uniform_field(1, 1, 1.0, role="depth"),
                              beta_coeffs=beta, matte=NO_BLUR)
        out = compose_shadow(clean, params).data[0, 0]
        expected = 0.5 * 0.5 + 0.5 * np.array([0.1, 0.2, 0.3])
        assert np.allclose(out, expected)

    def test_alpha_monotonicity(self, rng):
        for _ in range(50):
            h = w = 10
            clean = random_image(rng, h, w, lo=0.0, hi=1.0)
            mask = ScalarField(random_mask(rng, h, w))
            depth = synthetic_face_depth(h, w)
            a1, a2 = np.sort(rng.uniform(0.0, 0.999, 2))
            lighter = compose_shadow(clean, ShadowParams(alpha=a2, mask=mask, depth=depth))
            darker = compose_shadow(clean, ShadowParams(alpha=a1, mask=mask, depth=depth))
            assert (darker.data <= lighter.data + 1e-12).all()
            assert (lighter.data <= clean.data + 1e-12).all()

    def test_linearity_in_clean_image(self, rng):
        clean = random_image(rng, 8, 8, lo=0.0, hi=1.0)
        mask = ScalarField(random_mask(rng, 8, 8))
        depth = synthetic_face_depth(8, 8)
        params = ShadowParams(alpha=0.5, mask=mask, depth=depth)
        s = 0.73
        scaled_first = compose_shadow(Image(s * clean.data), params)
        scaled_after = s * compose_shadow(clean, params).data
        assert np.allclose(scaled_first.data, scaled_after, rtol=1e-12, atol=1e-15)

    def test_output_range(self, rng):
        clean = random_image(rng, 8, 8, lo=0.0, hi=1.0)
        params = ShadowParams(alpha=0.2, mask=ScalarField(random_mask(rng, 8, 8)),
                              depth=synthetic_face_depth(8, 8),
                              beta_coeffs=((0.5, 0.5), (0.5, 0.5), (0.5, 0.5)))
        out = compose_shadow(clean, params)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0


class TestGradients:
    def test_alpha_gradient_closed_form(self):
        clean = Image(np.full((1, 1, 3), 0.5))
        params = ShadowParams(alpha=0.4, mask=uniform_field(1, 1, 1.0),
                              depth=uniform_field(1, 1, 1.0, role="depth"),
                              matte=NO_BLUR)
        grads = synth_gradients(clean, params)
        assert np.allclose(grads.d_alpha, 0.5)

    def test_empty_mask_zero_alpha_gradient(self, rng):
        clean = random_image(rng, 8, 8)
        params = ShadowParams(alpha=0.5, mask=uniform_field(8, 8, 0.0),
                              depth=synthetic_face_depth(8, 8))
        grads = synth_gradients(clean, params)
        assert np.array_equal(grads.d_alpha, np.zeros((8, 8, 3)))

    def test_rho_gradient_formula(self, rng):
        clean = random_image(rng, 8, 8)
        alpha = 0.55
        beta = ((0.2, 0.05), (0.1, 0.0), (0.0, 0.1))
        params = ShadowParams(alpha=alpha, mask=ScalarField(random_mask(rng, 8, 8)),
                              depth=synthetic_face_depth(8, 8), beta_coeffs=beta)
        grads = synth_gradients(clean, params)
        beta_vals = np.array([a * alpha + b for a, b in beta])
        expected = -(1 - alpha) * clean.data + alpha * beta_vals
        assert np.allclose(grads.d_rho, expected)

    @pytest.mark.parametrize("seed", range(6))
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        h = w = 8
        clean = random_image(rng, h, w)
        mask = random_mask(rng, h, w)
        depth = synthetic_face_depth(h, w)
        cfg = MatteConfig(sigma_min=0.6, sigma_max=2.2, depth_gain=0.7)
        beta = ((0.15, 0.02), (0.05, 0.01), (0.0, 0.03))
        alpha = rng.uniform(0.2, 0.8)

        def synth(a, m):
            p = ShadowParams(alpha=a, mask=ScalarField(m), depth=depth,
                             beta_coeffs=beta, matte=cfg)
            return compose_shadow(clean, p).data

        params = ShadowParams(alpha=alpha, mask=ScalarField(mask), depth=depth,
                              beta_coeffs=beta, matte=cfg)
        _, grads = synth_with_gradients(clean, params)

        eps = 1e-4
        fd_alpha = (synth(alpha + eps, mask) - synth(alpha - eps, mask)) / (2 * eps)
        scale = max(np.abs(grads.d_alpha).max(), 1e-12)
        assert np.abs(fd_alpha - grads.d_alpha).max() / scale < 1e-4

        weights = rng.normal(size=(h, w, 3))
        adjoint = grads.mask_adjoint(weights)
        scale = max(np.abs(adjoint).max(), 1e-12)
        for _ in range(12):
            i, j = rng.integers(h), rng.integers(w)
            mp, mm = mask.copy(), mask.copy()
            mp[i, j] += eps
            mm[i, j] -= eps
            fd = ((synth(alpha, mp) - synth(alpha, mm)) * weights).sum() / (2 * eps)
            assert abs(fd - adjoint[i, j]) / scale < 1e-4


class TestFaceDepth:
    def test_center_pixel_is_apex(self):
        depth = synthetic_face_depth(33, 41)
        assert depth.data[16, 20] == 1.0

    def test_corner_is_zero(self):
        assert synthetic_face_depth(32, 32).data[0, 0] == 0.0

    def test_zero_exactly_outside_ellipse(self):
        h, w = 40, 50
        depth = synthetic_face_depth(h, w)
        cy, cx = (h - 1) / 2, (w - 1) / 2
        ry, rx = 0.48 * h, 0.38 * w
        yy, xx = np.mgrid[0:h, 0:w]
        outside = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 >= 1.0
        assert (depth.data[outside] == 0.0).all()
        assert (depth.data[~outside] > 0.0).all()

    def test_rejects_tiny_canvas(self):
        with pytest.raises(DimensionMismatchError):
            synthetic_face_depth(4, 4)
