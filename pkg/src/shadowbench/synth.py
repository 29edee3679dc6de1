"""Physically-modeled facial shadow synthesis.

A shadow is rendered in two stages: the hard occluder mask is modulated by
face depth and softened into a matte by a boundary-distance-driven,
spatially-varying Gaussian blur (per-channel spread multipliers approximate
light scattering beneath skin, red deepest); the matte then attenuates the
clean image

    out = (1 - (1 - alpha) * rho) * clean + alpha * beta * rho

per channel, where alpha scales the surviving ambient light and the
per-channel beta = a*alpha + b models the camera response to reflected
direct light.  Analytic partial derivatives of the composite (with the
sigma field held fixed and clamps treated as zero-gradient when active)
back the adversarial attack engine.
"""

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .blur import VaryingBlur, sigma_field
from .errors import DimensionMismatchError
from .imaging import Image, ScalarField

ALPHA_MAX = 0.999


@dataclass(frozen=True)
class MatteConfig:
    """Parameters of the occluder-mask-to-matte rendering."""

    sigma_min: float = 1.0
    sigma_max: float = 4.0
    scatter_spread: tuple[float, float, float] = (1.3, 1.15, 1.0)
    depth_gain: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.sigma_min <= self.sigma_max:
            raise ValueError("need 0 <= sigma_min <= sigma_max")
        r, g, b = self.scatter_spread
        if not (r >= g >= b >= 1.0):
            raise ValueError("scatter_spread must be >= 1 and ordered r >= g >= b")
        if self.depth_gain < 0.0:
            raise ValueError("depth_gain must be >= 0")


# per-channel (a_c, b_c) with beta_c = a_c * alpha + b_c
BetaCoeffs = tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
ZERO_BETA: BetaCoeffs = ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))


@dataclass(frozen=True)
class ShadowParams:
    """Everything the composite needs: attenuation, mask, depth, matte config."""

    alpha: float
    mask: ScalarField
    depth: ScalarField
    beta_coeffs: BetaCoeffs = ZERO_BETA
    matte: MatteConfig = MatteConfig()

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(np.clip(self.alpha, 0.0, ALPHA_MAX)))
        if self.mask.data.shape != self.depth.data.shape:
            raise DimensionMismatchError("mask and depth dimensions differ")

    def beta(self) -> np.ndarray:
        a = np.array([c[0] for c in self.beta_coeffs])
        b = np.array([c[1] for c in self.beta_coeffs])
        return a * self.alpha + b

    def beta_slope(self) -> np.ndarray:
        return np.array([c[0] for c in self.beta_coeffs])


class SynthGradients(NamedTuple):
    """Partial derivatives of the shadowed image.

    d_alpha and d_rho are per-pixel, per-channel; mask_adjoint maps an
    upstream dJ/d(image) array back to dJ/d(mask) through the blur adjoint
    and the depth product.
    """

    d_alpha: np.ndarray
    d_rho: np.ndarray
    mask_adjoint: Callable[[np.ndarray], np.ndarray]


class _MatteAux(NamedTuple):
    rho: np.ndarray              # H x W x 3
    depth_factor: np.ndarray     # H x W
    p_pass: np.ndarray           # where the pre-blur product was not clamped
    blurs: tuple[VaryingBlur, VaryingBlur, VaryingBlur]


def _render_matte_channels(mask: np.ndarray, depth: np.ndarray,
                           cfg: MatteConfig) -> _MatteAux:
    depth_factor = 1.0 - cfg.depth_gain * (1.0 - depth)
    raw = mask * depth_factor
    product = np.clip(raw, 0.0, 1.0)
    p_pass = (raw >= 0.0) & (raw <= 1.0)
    base_sigma = sigma_field(mask, cfg.sigma_min, cfg.sigma_max)
    rho = np.empty(mask.shape + (3,))
    blurs = []
    for c, spread in enumerate(cfg.scatter_spread):
        op = VaryingBlur(base_sigma * spread)
        blurs.append(op)
        rho[:, :, c] = np.clip(op.apply(product), 0.0, 1.0)
    return _MatteAux(rho, depth_factor, p_pass, tuple(blurs))


def render_matte(mask: ScalarField, depth: ScalarField, cfg: MatteConfig) -> ScalarField:
    """Render the soft shadow matte for the base (unspread) blur width."""
    if mask.data.shape != depth.data.shape:
        raise DimensionMismatchError("mask and depth dimensions differ")
    depth_factor = 1.0 - cfg.depth_gain * (1.0 - depth.data)
    product = np.clip(mask.data * depth_factor, 0.0, 1.0)
    op = VaryingBlur(sigma_field(mask.data, cfg.sigma_min, cfg.sigma_max))
    return ScalarField(np.clip(op.apply(product), 0.0, 1.0), role="matte")


def _compose(clean: np.ndarray, rho: np.ndarray, alpha: float,
             beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    raw = (1.0 - (1.0 - alpha) * rho) * clean + alpha * beta * rho
    out_pass = (raw >= 0.0) & (raw <= 1.0)
    return np.clip(raw, 0.0, 1.0), out_pass


def compose_shadow(clean: Image, params: ShadowParams) -> Image:
    """Composite a shadow onto a clean image (identity wherever the matte is 0)."""
    if clean.data.shape[:2] != params.mask.data.shape:
        raise DimensionMismatchError("image and mask dimensions differ")
    aux = _render_matte_channels(params.mask.data, params.depth.data, params.matte)
    out, _ = _compose(clean.data, aux.rho, params.alpha, params.beta())
    return Image(out)


def synth_gradients(clean: Image, params: ShadowParams) -> SynthGradients:
    """Analytic partials of compose_shadow; see synth_with_gradients."""
    _, grads = synth_with_gradients(clean, params)
    return grads


def synth_with_gradients(clean: Image, params: ShadowParams) -> tuple[Image, SynthGradients]:
    """Composite a shadow and return the image together with its partials.

    Clamped pixels (either in the pre-blur depth product or in the final
    composite) carry zero gradient.  The mask adjoint treats the sigma field
    as fixed: it only sees the linear blur and the depth product, which is
    exact as long as no mask value crosses the 0.5 binarization threshold.
    """
    if clean.data.shape[:2] != params.mask.data.shape:
        raise DimensionMismatchError("image and mask dimensions differ")
    cln = clean.data
    alpha = params.alpha
    beta = params.beta()
    slope = params.beta_slope()
    aux = _render_matte_channels(params.mask.data, params.depth.data, params.matte)
    out, out_pass = _compose(cln, aux.rho, alpha, beta)

    d_alpha = out_pass * aux.rho * (cln + beta + alpha * slope)
    d_rho = out_pass * (-(1.0 - alpha) * cln + alpha * beta)

    depth_factor = aux.depth_factor
    p_pass = aux.p_pass
    blurs = aux.blurs

    def mask_adjoint(upstream: np.ndarray) -> np.ndarray:
        if upstream.shape != d_rho.shape:
            raise DimensionMismatchError("upstream gradient shape mismatch")
        acc = np.zeros(depth_factor.shape)
        for c in range(3):
            acc += blurs[c].adjoint(upstream[:, :, c] * d_rho[:, :, c])
        return acc * p_pass * depth_factor

    return Image(out), SynthGradients(d_alpha, d_rho, mask_adjoint)


def synthetic_face_depth(height: int, width: int) -> ScalarField:
    """Ellipsoidal dome depth proxy for a frontal face on a HxW canvas."""
    if height < 8 or width < 8:
        raise DimensionMismatchError("depth canvas must be at least 8x8")
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    ry, rx = 0.48 * height, 0.38 * width
    y = (np.arange(height)[:, None] - cy) / ry
    x = (np.arange(width)[None, :] - cx) / rx
    dome = np.sqrt(np.maximum(0.0, 1.0 - x ** 2 - y ** 2))
    return ScalarField(np.clip(dome, 0.0, 1.0), role="depth")
