"""Constrained sign-gradient shadow attack against a landmark-detector oracle.

The attack tunes the occluder mask M, the ambient attenuation alpha, and a
2x3 affine warp theta of the mask, maximizing the detector's loss while
keeping every variable inside an L-infinity ball around its initialization.
Gradients flow through the bilinear warp, the matte blur (adjoint), and the
shadow composite analytically; the detector supplies dJ/d(image).
"""

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Protocol

import numpy as np

from .errors import DimensionMismatchError, OracleError
from .imaging import Image, ScalarField
from .synth import MatteConfig, ShadowParams, ZERO_BETA, BetaCoeffs, synth_with_gradients

ALPHA_INIT_DEFAULT = 0.8


@dataclass(frozen=True)
class AffineParams:
    """Row-major 2x3 affine matrix acting on normalized [-1, 1] coordinates."""

    a11: float = 1.0
    a12: float = 0.0
    tx: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    ty: float = 0.0

    @classmethod
    def identity(cls) -> "AffineParams":
        return cls()

    @classmethod
    def from_array(cls, v: np.ndarray) -> "AffineParams":
        a11, a12, tx, a21, a22, ty = (float(x) for x in np.asarray(v).ravel())
        return cls(a11, a12, tx, a21, a22, ty)

    def as_array(self) -> np.ndarray:
        return np.array([self.a11, self.a12, self.tx, self.a21, self.a22, self.ty])

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12, self.tx],
                         [self.a21, self.a22, self.ty]])


@dataclass(frozen=True)
class AttackConfig:
    """Published hyperparameters of the shadow attack (L-infinity throughout)."""

    step_alpha: float = 0.01
    step_theta: float = 0.02
    step_mask: float = 0.0012
    iterations: int = 40
    eps_alpha: float = 0.4
    eps_theta: float = 0.8
    eps_mask: float = 0.048
    norm: str = "linf"

    def __post_init__(self):
        if min(self.step_alpha, self.step_theta, self.step_mask) <= 0.0:
            raise ValueError("step sizes must be > 0")
        if min(self.eps_alpha, self.eps_theta, self.eps_mask) < 0.0:
            raise ValueError("epsilon radii must be >= 0")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if self.norm != "linf":
            raise ValueError("only the L-infinity norm is supported")


@dataclass
class AttackState:
    """Current optimization variables plus their initializations."""

    mask: np.ndarray
    alpha: float
    theta: AffineParams
    mask0: np.ndarray
    alpha0: float
    theta0: AffineParams
    iteration: int = 0

    def mask_linf(self) -> float:
        return float(np.abs(self.mask - self.mask0).max())

    def theta_linf(self) -> float:
        return float(np.abs(self.theta.as_array() - self.theta0.as_array()).max())


class OracleResult(NamedTuple):
    landmarks: np.ndarray      # 68 x 2 pixel coordinates
    loss: float
    loss_gradient: np.ndarray  # H x W x 3, dJ/d(image)


class DetectorOracle(Protocol):
    def evaluate(self, image: Image, target: np.ndarray) -> OracleResult: ...


@dataclass
class TraceRecord:
    iter: int
    loss: float
    alpha: float
    theta: list[float]
    mask_linf: float

    def to_json(self) -> dict:
        return {"iter": self.iter, "loss": self.loss, "alpha": self.alpha,
                "theta": self.theta, "mask_linf": self.mask_linf}


class AttackResult(NamedTuple):
    image: Image
    state: AttackState
    trace: list[TraceRecord]


def _normalized_grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    xn = 2.0 * np.arange(w) / (w - 1) - 1.0 if w > 1 else np.zeros(w)
    yn = 2.0 * np.arange(h) / (h - 1) - 1.0 if h > 1 else np.zeros(h)
    return np.meshgrid(xn, yn)


class _WarpAux(NamedTuple):
    out: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    x0: np.ndarray
    y0: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    corners: tuple  # per-corner (value, inside) arrays


def _gather(src: np.ndarray, yi: np.ndarray, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, w = src.shape
    inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
    vals = np.zeros(yi.shape)
    vals[inside] = src[yi[inside], xi[inside]]
    return vals, inside


def _warp_core(mask: np.ndarray, theta: AffineParams) -> _WarpAux:
    h, w = mask.shape
    grid_xn, grid_yn = _normalized_grid(h, w)
    sx_n = theta.a11 * grid_xn + theta.a12 * grid_yn + theta.tx
    sy_n = theta.a21 * grid_xn + theta.a22 * grid_yn + theta.ty
    sx = (sx_n + 1.0) * (w - 1) / 2.0
    sy = (sy_n + 1.0) * (h - 1) / 2.0
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    wx = sx - x0
    wy = sy - y0
    v00, in00 = _gather(mask, y0, x0)
    v01, in01 = _gather(mask, y0, x0 + 1)
    v10, in10 = _gather(mask, y0 + 1, x0)
    v11, in11 = _gather(mask, y0 + 1, x0 + 1)
    out = ((1 - wy) * ((1 - wx) * v00 + wx * v01)
           + wy * ((1 - wx) * v10 + wx * v11))
    corners = ((v00, in00), (v01, in01), (v10, in10), (v11, in11))
    return _WarpAux(out, sx, sy, x0, y0, wx, wy, corners)


def affine_warp(mask: ScalarField, theta: AffineParams) -> ScalarField:
    """Bilinear warp: output (x, y) samples the input at theta (x_n, y_n, 1).

    Coordinates are normalized to [-1, 1]; samples outside the input read
    zero.  The identity matrix reproduces the input exactly (special-cased
    so the initialization round-trips bit-exactly).
    """
    if theta == AffineParams.identity():
        return ScalarField(mask.data, role="mask")
    aux = _warp_core(mask.data, theta)
    return ScalarField(np.clip(aux.out, 0.0, 1.0), role="mask")


def warp_gradients(mask: ScalarField | np.ndarray, theta: AffineParams,
                   upstream: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact derivatives of the bilinear sampler.

    Returns (dJ/dtheta as 6 values ordered like AffineParams.as_array, and
    dJ/dmask as an HxW array) for an upstream dJ/d(warped mask) field.
    """
    src = mask.data if isinstance(mask, ScalarField) else np.asarray(mask, dtype=np.float64)
    if upstream.shape != src.shape:
        raise DimensionMismatchError("upstream must match the mask shape")
    h, w = src.shape
    aux = _warp_core(src, theta)
    (v00, in00), (v01, in01), (v10, in10), (v11, in11) = aux.corners
    wx, wy = aux.wx, aux.wy

    d_sx = (1 - wy) * (v01 - v00) + wy * (v11 - v10)
    d_sy = (1 - wx) * (v10 - v00) + wx * (v11 - v01)

    grid_xn, grid_yn = _normalized_grid(h, w)
    gx = upstream * d_sx * (w - 1) / 2.0
    gy = upstream * d_sy * (h - 1) / 2.0
    d_theta = np.array([
        (gx * grid_xn).sum(),  # a11
        (gx * grid_yn).sum(),  # a12
        gx.sum(),              # tx
        (gy * grid_xn).sum(),  # a21
        (gy * grid_yn).sum(),  # a22
        gy.sum(),              # ty
    ])

    d_mask = np.zeros(h * w)
    flat = lambda yi, xi: yi * w + xi
    for (yi, xi, weight, inside) in (
            (aux.y0, aux.x0, (1 - wy) * (1 - wx), in00),
            (aux.y0, aux.x0 + 1, (1 - wy) * wx, in01),
            (aux.y0 + 1, aux.x0, wy * (1 - wx), in10),
            (aux.y0 + 1, aux.x0 + 1, wy * wx, in11)):
        contrib = upstream * weight
        np.add.at(d_mask, flat(yi[inside], xi[inside]), contrib[inside])
    return d_theta, d_mask.reshape(h, w)


def attack_gradients(clean: Image, depth: ScalarField, target: np.ndarray,
                     oracle: DetectorOracle, mask: np.ndarray, alpha: float,
                     theta: AffineParams, *, matte: MatteConfig = MatteConfig(),
                     beta: BetaCoeffs = ZERO_BETA
                     ) -> tuple[Image, OracleResult, float, np.ndarray, np.ndarray]:
    """One forward/backward pass of the full attack chain.

    Returns (synthesized image, oracle result, dJ/dalpha, dJ/dtheta, dJ/dmask)
    where the mask gradient is with respect to the pre-warp mask.
    """
    warped = affine_warp(ScalarField(np.clip(mask, 0.0, 1.0)), theta)
    params = ShadowParams(alpha=alpha, mask=warped, depth=depth,
                          beta_coeffs=beta, matte=matte)
    image, grads = synth_with_gradients(clean, params)
    result = oracle.evaluate(image, target)
    upstream = np.asarray(result.loss_gradient, dtype=np.float64)
    if upstream.shape != image.data.shape:
        raise DimensionMismatchError("oracle gradient shape does not match image")
    d_alpha = float((upstream * grads.d_alpha).sum())
    d_warped = grads.mask_adjoint(upstream)
    d_theta, d_mask = warp_gradients(mask, theta, d_warped)
    return image, result, d_alpha, d_theta, d_mask


def _project(value: np.ndarray | float, origin: np.ndarray | float, eps: float,
             lo: float | None = None, hi: float | None = None):
    projected = np.clip(value, origin - eps, origin + eps)
    if lo is not None:
        projected = np.clip(projected, lo, hi)
    return projected


def attack(clean: Image, depth: ScalarField, ground_truth: np.ndarray,
           oracle: DetectorOracle, cfg: AttackConfig, mask0: ScalarField, *,
           alpha0: float = ALPHA_INIT_DEFAULT,
           theta0: AffineParams | None = None,
           matte: MatteConfig = MatteConfig(),
           beta: BetaCoeffs = ZERO_BETA) -> AttackResult:
    """Run the constrained sign-gradient attack and return the best iterate.

    Each cycle evaluates the oracle, chains its image gradient back to
    (mask, alpha, theta), steps every variable by step * sign(gradient)
    (sign(0) = 0), and projects back into the epsilon balls and validity
    ranges.  The loss trace covers the initial state plus every update;
    the returned image/state belong to the highest-loss entry.
    """
    if clean.data.shape[:2] != mask0.data.shape:
        raise DimensionMismatchError("image and initial mask dimensions differ")
    theta0 = theta0 or AffineParams.identity()
    ground_truth = np.asarray(ground_truth, dtype=np.float64)

    alpha = float(np.clip(alpha0, 0.0, 0.999))
    theta0_vec = theta0.as_array()

    state = AttackState(mask=mask0.data.copy(), alpha=alpha, theta=theta0,
                        mask0=mask0.data.copy(), alpha0=alpha, theta0=theta0)

    trace: list[TraceRecord] = []
    best: tuple[float, Image, AttackState] | None = None

    def evaluate(iteration: int):
        nonlocal best
        try:
            image, result, d_alpha, d_theta, d_mask = attack_gradients(
                clean, depth, ground_truth, oracle, state.mask, state.alpha,
                state.theta, matte=matte, beta=beta)
        except (OracleError, DimensionMismatchError):
            raise
        except Exception as exc:  # oracle failures surface with the iteration index
            raise OracleError(str(exc), iteration=iteration) from exc
        trace.append(TraceRecord(iteration, float(result.loss), state.alpha,
                                 [float(v) for v in state.theta.as_array()],
                                 state.mask_linf()))
        if best is None or result.loss > best[0]:
            snapshot = AttackState(mask=state.mask.copy(), alpha=state.alpha,
                                   theta=state.theta, mask0=state.mask0,
                                   alpha0=state.alpha0, theta0=state.theta0,
                                   iteration=iteration)
            best = (float(result.loss), image, snapshot)
        return d_alpha, d_theta, d_mask

    d_alpha, d_theta, d_mask = evaluate(0)
    for it in range(1, cfg.iterations + 1):
        alpha_new = state.alpha + cfg.step_alpha * float(np.sign(d_alpha))
        theta_new = state.theta.as_array() + cfg.step_theta * np.sign(d_theta)
        mask_new = state.mask + cfg.step_mask * np.sign(d_mask)

        state.alpha = float(_project(alpha_new, state.alpha0, cfg.eps_alpha, 0.0, 0.999))
        state.theta = AffineParams.from_array(
            _project(theta_new, theta0_vec, cfg.eps_theta))
        state.mask = _project(mask_new, state.mask0, cfg.eps_mask, 0.0, 1.0)
        state.iteration = it
        d_alpha, d_theta, d_mask = evaluate(it)

    assert best is not None
    _, best_image, best_state = best
    return AttackResult(best_image, best_state, trace)


class ToyDetector:
    """Deterministic differentiable landmark regressor for desk-scale tests.

    Pipeline: adaptive 16x16 average pool per channel -> flatten -> fixed
    seeded linear map -> 68 coordinate pairs placed around the image center.
    The loss is the mean squared coordinate error against the target set;
    its image gradient is exact because every stage is linear.
    """

    POOL = 16

    def __init__(self, weights_seed: int = 0):
        rng = np.random.default_rng(weights_seed)
        n_features = self.POOL * self.POOL * 3
        self.coef = rng.normal(0.0, 1.0, (136, n_features)) / math.sqrt(n_features)

    @staticmethod
    def _pool_bounds(extent: int) -> list[tuple[int, int]]:
        p = ToyDetector.POOL
        return [(math.floor(i * extent / p), max(math.floor(i * extent / p) + 1,
                                                 math.ceil((i + 1) * extent / p)))
                for i in range(p)]

    def _pool(self, data: np.ndarray) -> np.ndarray:
        h, w, _ = data.shape
        rows = self._pool_bounds(h)
        cols = self._pool_bounds(w)
        pooled = np.empty((self.POOL, self.POOL, 3))
        for i, (r0, r1) in enumerate(rows):
            for j, (c0, c1) in enumerate(cols):
                pooled[i, j] = data[r0:r1, c0:c1].mean(axis=(0, 1))
        return pooled

    def predict(self, image: Image) -> np.ndarray:
        pooled = self._pool(image.data)
        flat = self.coef @ (pooled.ravel() - 0.5)
        h, w = image.height, image.width
        center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
        extent = np.array([w / 4.0, h / 4.0])
        return center + flat.reshape(68, 2) * extent

    def evaluate(self, image: Image, target: np.ndarray) -> OracleResult:
        target = np.asarray(target, dtype=np.float64)
        if target.shape != (68, 2):
            raise DimensionMismatchError("target landmarks must be 68x2")
        pred = self.predict(image)
        diff = pred - target
        loss = float((diff ** 2).mean())

        h, w = image.height, image.width
        extent = np.array([w / 4.0, h / 4.0])
        d_flat = (2.0 / diff.size) * diff * extent
        d_features = self.coef.T @ d_flat.ravel()
        d_pooled = d_features.reshape(self.POOL, self.POOL, 3)

        grad = np.zeros((h, w, 3))
        rows = self._pool_bounds(h)
        cols = self._pool_bounds(w)
        for i, (r0, r1) in enumerate(rows):
            for j, (c0, c1) in enumerate(cols):
                area = (r1 - r0) * (c1 - c0)
                grad[r0:r1, c0:c1] += d_pooled[i, j] / area
        return OracleResult(pred, loss, grad)


def toy_detector(weights_seed: int = 0) -> ToyDetector:
    """Fixed, deterministic stand-in for a pretrained landmark detector."""
    return ToyDetector(weights_seed)


class FiniteDifferenceOracle:
    """Wrap a loss-only black box as a full oracle via central differences.

    The black box maps an Image to a loss (optionally (loss, landmarks)).
    Gradients are estimated entry-by-entry; images above max_dense_pixels
    get a seeded random subsample of pixels (the rest read zero gradient).
    Steps shrink one-sidedly near the [0, 1] bounds so probes stay valid.
    """

    def __init__(self, black_box: Callable, h: float = 1e-3, *,
                 max_dense_pixels: int = 64 * 64,
                 sample_fraction: float = 0.25, seed: int = 0):
        if h <= 0.0:
            raise ValueError("finite-difference step must be > 0")
        self.black_box = black_box
        self.h = h
        self.max_dense_pixels = max_dense_pixels
        self.sample_fraction = sample_fraction
        self.seed = seed

    def _call(self, image: Image) -> tuple[float, np.ndarray | None]:
        out = self.black_box(image)
        if isinstance(out, tuple):
            loss, landmarks = out
            return float(loss), (None if landmarks is None
                                 else np.asarray(landmarks, dtype=np.float64))
        return float(out), None

    def evaluate(self, image: Image, target: np.ndarray) -> OracleResult:
        data = image.data
        h_img, w_img, _ = data.shape
        loss, landmarks = self._call(image)
        if landmarks is None:
            landmarks = np.zeros((68, 2))

        n_pixels = h_img * w_img
        if n_pixels <= self.max_dense_pixels:
            pixel_ids = np.arange(n_pixels)
        else:
            rng = np.random.default_rng(self.seed)
            k = max(1, int(round(self.sample_fraction * n_pixels)))
            pixel_ids = np.sort(rng.choice(n_pixels, size=k, replace=False))

        grad = np.zeros_like(data)
        work = data.copy()
        for pid in pixel_ids:
            y, x = divmod(int(pid), w_img)
            for c in range(3):
                v = data[y, x, c]
                hp = min(self.h, 1.0 - v)
                hm = min(self.h, v)
                if hp + hm == 0.0:
                    continue
                work[y, x, c] = v + hp
                f_plus, _ = self._call(Image(work))
                work[y, x, c] = v - hm
                f_minus, _ = self._call(Image(work))
                work[y, x, c] = v
                grad[y, x, c] = (f_plus - f_minus) / (hp + hm)
        return OracleResult(landmarks, loss, grad)


def fd_oracle_adapter(black_box: Callable, h: float = 1e-3, *,
                      max_dense_pixels: int = 64 * 64,
                      sample_fraction: float = 0.25,
                      seed: int = 0) -> FiniteDifferenceOracle:
    """Adapt a non-differentiable detector (Image -> loss) to the oracle contract."""
    return FiniteDifferenceOracle(black_box, h, max_dense_pixels=max_dense_pixels,
                                  sample_fraction=sample_fraction, seed=seed)
