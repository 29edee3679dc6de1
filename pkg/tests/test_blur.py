import numpy as np
import pytest

from shadowbench.blur import (VaryingBlur, blur_constant, boundary_distance,
                              gaussian_kernel_1d, sigma_field)

from conftest import blob_mask


def stamp_oracle(h, w, cy, cx, sigma):
    """Direct 2D discretized Gaussian stamp, normalized over its truncation."""
    radius = int(np.ceil(3 * sigma))
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    kernel = np.exp(-(yy ** 2 + xx ** 2) / (2 * sigma ** 2))
    kernel /= kernel.sum()
    out = np.zeros((h, w))
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            y, x = cy + dy, cx + dx
            if 0 <= y < h and 0 <= x < w:
                out[y, x] = kernel[dy + radius, dx + radius]
    return out


class TestKernels:
    def test_zero_sigma_is_identity(self):
        assert np.array_equal(gaussian_kernel_1d(0.0), [1.0])
        x = np.random.default_rng(0).uniform(0, 1, (5, 5))
        assert np.array_equal(blur_constant(x, 0.0), x)

    def test_kernel_normalized_and_symmetric(self):
        k = gaussian_kernel_1d(1.7)
        assert abs(k.sum() - 1.0) < 1e-12
        assert np.allclose(k, k[::-1])

    def test_constant_blur_matches_stamp_oracle(self):
        delta = np.zeros((15, 15))
        delta[7, 7] = 1.0
        out = blur_constant(delta, 1.0)
        assert np.allclose(out, stamp_oracle(15, 15, 7, 7, 1.0), atol=1e-12)
        assert out.max() < 1.0

    def test_blur_preserves_range(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, (12, 12))
        out = blur_constant(x, 2.0)
        assert out.min() >= 0.0 and out.max() <= x.max() + 1e-12


class TestBoundaryDistance:
    def test_uniform_mask_has_no_boundary(self):
        assert np.isinf(boundary_distance(np.ones((4, 4)))).all()
        assert np.isinf(boundary_distance(np.zeros((4, 4)))).all()

    def test_adjacent_pixels_are_half_a_pixel_away(self):
        m = np.zeros((5, 5))
        m[2, 2] = 1.0
        dist = boundary_distance(m)
        assert dist[2, 2] == 0.5          # foreground next to background
        assert dist[2, 3] == 0.5
        assert dist[2, 4] == 1.5

    def test_sigma_field_formula(self):
        m = np.zeros((9, 9))
        m[4, 4] = 1.0
        sig = sigma_field(m, 1.0, 4.0)
        dist = boundary_distance(m)
        expected = 1.0 + 3.0 * np.minimum(dist / 4.0, 1.0)
        assert np.allclose(sig, expected)

    def test_sigma_field_degenerate_cases(self):
        m = np.zeros((4, 4))
        assert np.array_equal(sigma_field(m, 0.0, 0.0), np.zeros((4, 4)))
        assert np.array_equal(sigma_field(m, 2.0, 2.0), np.full((4, 4), 2.0))


class TestVaryingBlur:
    def test_constant_field_equals_plain_blur(self, rng):
        x = rng.uniform(0, 1, (10, 10))
        op = VaryingBlur(np.full((10, 10), 1.3))
        assert np.allclose(op.apply(x), blur_constant(x, 1.3), atol=1e-14)

    def test_weights_partition_unity(self, rng):
        sigma = rng.uniform(0.5, 3.5, (8, 8))
        op = VaryingBlur(sigma)
        total = np.zeros((8, 8))
        for w in op.weights:
            total += w
        assert np.allclose(total, 1.0)

    def test_adjoint_identity(self, rng):
        """<A x, y> == <x, A^T y> for random vectors, spatially varying sigma."""
        for _ in range(10):
            mask = blob_mask(rng, 12, 12)
            op = VaryingBlur(sigma_field(mask, 0.5, 3.0))
            x = rng.normal(size=(12, 12))
            y = rng.normal(size=(12, 12))
            lhs = (op.apply(x) * y).sum()
            rhs = (x * op.adjoint(y)).sum()
            assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)

    def test_blur_of_zeros_is_zeros(self):
        op = VaryingBlur(np.full((6, 6), 2.0))
        assert np.array_equal(op.apply(np.zeros((6, 6))), np.zeros((6, 6)))

    def test_neighbor_difference_bounded_by_kernel_peak(self, rng):
        """Lipschitz regression: 4-neighbor matte steps stay under the
        discretized kernel's peak value for the smallest configured sigma."""
        sigma_min = 1.0
        bound = gaussian_kernel_1d(sigma_min).max() + 0.02
        for seed in range(8):
            local = np.random.default_rng(seed)
            mask = blob_mask(local, 24, 24)
            op = VaryingBlur(sigma_field(mask, sigma_min, 4.0))
            out = op.apply(mask)
            dy = np.abs(np.diff(out, axis=0)).max()
            dx = np.abs(np.diff(out, axis=1)).max()
            assert max(dy, dx) <= bound
