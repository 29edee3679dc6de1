"""Spatially-varying Gaussian blur driven by distance to the mask boundary.

The blur is realized as a bank of fixed-sigma separable Gaussian blurs with
per-pixel linear interpolation between the two bracketing sigma levels.  For
a fixed sigma field the whole operator is linear in its input, and because
every level kernel is symmetric and zero-padded, each level blur is
self-adjoint: the exact adjoint of the varying blur is

    adjoint(u) = sum_k B_k(w_k * u)

where w_k are the per-pixel interpolation weights of level k.
"""

import math

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError

_LEVEL_STEP = 0.5
_MAX_LEVELS = 9


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Discretized normalized Gaussian, truncated at radius ceil(3*sigma)."""
    if sigma <= 0.0:
        return np.array([1.0])
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def blur_constant(x: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with zero padding outside the array."""
    if sigma <= 0.0:
        return x.astype(np.float64, copy=True)
    k = gaussian_kernel_1d(sigma)
    out = ndimage.convolve1d(np.asarray(x, dtype=np.float64), k, axis=0,
                             mode="constant", cval=0.0)
    return ndimage.convolve1d(out, k, axis=1, mode="constant", cval=0.0)


def boundary_distance(mask: np.ndarray) -> np.ndarray:
    """Unsigned distance from each pixel center to the 0.5-level mask boundary.

    Computed as the Euclidean distance to the nearest pixel of the opposite
    class minus half a pixel (the boundary sits between pixel centers).  A
    uniform mask has no boundary; every distance is +inf.
    """
    fg = np.asarray(mask) >= 0.5
    if fg.all() or not fg.any():
        return np.full(fg.shape, np.inf)
    dist = np.where(fg,
                    ndimage.distance_transform_edt(fg),
                    ndimage.distance_transform_edt(~fg))
    return np.maximum(dist - 0.5, 0.0)


def sigma_field(mask: np.ndarray, sigma_min: float, sigma_max: float) -> np.ndarray:
    """Per-pixel blur width: sigma_min at the boundary, sigma_max far from it."""
    shape = np.asarray(mask).shape
    if sigma_max <= 0.0:
        return np.zeros(shape)
    if sigma_max - sigma_min <= 0.0:
        return np.full(shape, sigma_min)
    dist = boundary_distance(mask)
    ramp = np.minimum(dist / sigma_max, 1.0)
    ramp[~np.isfinite(dist)] = 1.0
    return sigma_min + (sigma_max - sigma_min) * ramp


class VaryingBlur:
    """Linear blur operator for a fixed sigma field, with exact adjoint."""

    def __init__(self, sigma: np.ndarray):
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.ndim != 2:
            raise DimensionMismatchError("sigma field must be HxW")
        self.shape = sigma.shape
        lo, hi = float(sigma.min()), float(sigma.max())
        if hi - lo <= 1e-12:
            self.levels = np.array([lo])
            self.weights = [np.ones(self.shape)]
            return
        n = min(_MAX_LEVELS, max(2, math.ceil((hi - lo) / _LEVEL_STEP) + 1))
        self.levels = np.linspace(lo, hi, n)
        step = self.levels[1] - self.levels[0]
        pos = np.clip((sigma - lo) / step, 0.0, n - 1.0)
        idx = np.minimum(pos.astype(np.intp), n - 2)
        frac = pos - idx
        self.weights = []
        for k in range(n):
            w = np.where(idx == k, 1.0 - frac, 0.0) + np.where(idx == k - 1, frac, 0.0)
            self.weights.append(w)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape != self.shape:
            raise DimensionMismatchError("input shape does not match sigma field")
        out = np.zeros(self.shape)
        for level, w in zip(self.levels, self.weights):
            if w.any():
                out += w * blur_constant(x, level)
        return out

    def adjoint(self, u: np.ndarray) -> np.ndarray:
        if u.shape != self.shape:
            raise DimensionMismatchError("input shape does not match sigma field")
        out = np.zeros(self.shape)
        for level, w in zip(self.levels, self.weights):
            if w.any():
                out += blur_constant(w * u, level)
        return out
