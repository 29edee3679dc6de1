"""Mutual-attention feature fusion, the embedding recovery network, and losses.

Forward-pass reference implementation over plain NCHW numpy arrays.  The
fusion block projects the two feature streams to query/key/value spaces,
forms dot-product position similarities, cross-weights them with pixel-wise
gates predicted from the concatenated streams, applies row-softmax attention,
and emits residual outputs concatenated along channels.  No training loop or
autodiff lives here; derivative sanity is checked by finite differences in
the test suite.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DimensionMismatchError

_BN_EPS = 1e-5


def _check_nchw(x: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise DimensionMismatchError(f"{name} must be NCHW, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise DimensionMismatchError(f"{name} has a zero-sized dimension")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None,
           stride: int = 1, pad: int = 0) -> np.ndarray:
    """Plain NCHW convolution (im2col); weight is (C_out, C_in, kh, kw)."""
    x = _check_nchw(x, "conv input")
    weight = np.asarray(weight, dtype=np.float64)
    n, c_in, h, w = x.shape
    c_out, c_w, kh, kw = weight.shape
    if c_w != c_in:
        raise DimensionMismatchError(
            f"conv expects {c_w} input channels, got {c_in}")
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    h_out = (x.shape[2] - kh) // stride + 1
    w_out = (x.shape[3] - kw) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]          # n, c, h_out, w_out, kh, kw
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, h_out * w_out, c_in * kh * kw)
    out = cols @ weight.reshape(c_out, -1).T             # n, hw, c_out
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64)
    return out.transpose(0, 2, 1).reshape(n, c_out, h_out, w_out)


def batch_norm(x: np.ndarray, scale: np.ndarray, shift: np.ndarray,
               mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    """Inference-mode batch normalization with caller-supplied statistics."""
    c = x.shape[1]
    view = lambda v: np.asarray(v, dtype=np.float64).reshape(1, c, 1, 1)
    return (x - view(mean)) / np.sqrt(view(var) + _BN_EPS) * view(scale) + view(shift)


def _flatten_spatial(x: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    return x.reshape(n, c, h * w).transpose(0, 2, 1)  # n, hw, c


def nonlocal_similarity(x: np.ndarray, w_theta: np.ndarray,
                        w_phi: np.ndarray) -> np.ndarray:
    """Position-pair attention logits: (X W_theta)(X W_phi)^T per batch element."""
    x = _check_nchw(x, "similarity input")
    w_theta = np.asarray(w_theta, dtype=np.float64)
    w_phi = np.asarray(w_phi, dtype=np.float64)
    if w_theta.shape[0] != x.shape[1] or w_phi.shape[0] != x.shape[1]:
        raise DimensionMismatchError("projection rows must match input channels")
    if w_theta.shape[1] != w_phi.shape[1]:
        raise DimensionMismatchError("theta/phi projections must share output width")
    flat = _flatten_spatial(x)
    return (flat @ w_theta) @ (flat @ w_phi).transpose(0, 2, 1)


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def mutual_attention(logits_f: np.ndarray, logits_t: np.ndarray,
                     gamma_f: np.ndarray, gamma_t: np.ndarray
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Cross-weighted row-softmax attention for the two streams.

    A_f = softmax(logits_f + gamma_t * logits_t) and symmetrically for A_t;
    each gamma is a per-position field scaling the other stream's logit rows.
    """
    logits_f = np.asarray(logits_f, dtype=np.float64)
    logits_t = np.asarray(logits_t, dtype=np.float64)
    if logits_f.shape != logits_t.shape:
        raise DimensionMismatchError("similarity matrices must share shape")
    n, hw, _ = logits_f.shape
    gamma_f = np.asarray(gamma_f, dtype=np.float64).reshape(n, hw, 1)
    gamma_t = np.asarray(gamma_t, dtype=np.float64).reshape(n, hw, 1)
    a_f = _softmax_rows(logits_f + gamma_t * logits_t)
    a_t = _softmax_rows(logits_t + gamma_f * logits_f)
    return a_f, a_t


@dataclass(frozen=True)
class MAFusWeights:
    """Projection and gate parameters of the mutual-attention fusion block."""

    w_theta_f: np.ndarray
    w_phi_f: np.ndarray
    w_g_f: np.ndarray
    w_z_f: np.ndarray
    w_theta_t: np.ndarray
    w_phi_t: np.ndarray
    w_g_t: np.ndarray
    w_z_t: np.ndarray
    gamma_conv_w: np.ndarray   # (2, 2C) 1x1 conv over [F, T]
    gamma_conv_b: np.ndarray
    gamma_bn_scale: np.ndarray
    gamma_bn_shift: np.ndarray
    gamma_bn_mean: np.ndarray
    gamma_bn_var: np.ndarray

    def __post_init__(self):
        c, c_prime = self.w_theta_f.shape
        for name in ("w_theta_f", "w_phi_f", "w_g_f", "w_theta_t", "w_phi_t", "w_g_t"):
            if getattr(self, name).shape != (c, c_prime):
                raise DimensionMismatchError(f"{name} must be {c}x{c_prime}")
        for name in ("w_z_f", "w_z_t"):
            if getattr(self, name).shape != (c_prime, c):
                raise DimensionMismatchError(f"{name} must be {c_prime}x{c}")
        if self.gamma_conv_w.shape != (2, 2 * c):
            raise DimensionMismatchError("gamma predictor must map 2C channels to 2")
        for name in ("gamma_conv_b", "gamma_bn_scale", "gamma_bn_shift",
                     "gamma_bn_mean", "gamma_bn_var"):
            if getattr(self, name).shape != (2,):
                raise DimensionMismatchError(f"{name} must have shape (2,)")

    @property
    def channels(self) -> int:
        return self.w_theta_f.shape[0]

    @classmethod
    def random(cls, rng: np.random.Generator, channels: int,
               inner: int | None = None) -> "MAFusWeights":
        inner = inner or max(1, channels // 2)
        mk = lambda *shape: rng.normal(0.0, 1.0 / np.sqrt(shape[0]), shape)
        return cls(
            w_theta_f=mk(channels, inner), w_phi_f=mk(channels, inner),
            w_g_f=mk(channels, inner), w_z_f=mk(inner, channels),
            w_theta_t=mk(channels, inner), w_phi_t=mk(channels, inner),
            w_g_t=mk(channels, inner), w_z_t=mk(inner, channels),
            gamma_conv_w=mk(2 * channels, 2).T / 4.0,
            gamma_conv_b=np.zeros(2),
            gamma_bn_scale=np.ones(2), gamma_bn_shift=np.zeros(2),
            gamma_bn_mean=np.zeros(2), gamma_bn_var=np.ones(2))

    def to_tensors(self) -> dict[str, np.ndarray]:
        from dataclasses import fields
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, np.ndarray]) -> "MAFusWeights":
        from dataclasses import fields
        return cls(**{f.name: np.asarray(tensors[f.name], dtype=np.float64)
                      for f in fields(cls)})


def gamma_fields(f: np.ndarray, t: np.ndarray,
                 weights: MAFusWeights) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-wise fusion gates from a 1x1 conv + BN + ReLU over [F, T]."""
    cat = np.concatenate([f, t], axis=1)
    conv = conv2d(cat, weights.gamma_conv_w[:, :, None, None], weights.gamma_conv_b)
    gated = relu(batch_norm(conv, weights.gamma_bn_scale, weights.gamma_bn_shift,
                            weights.gamma_bn_mean, weights.gamma_bn_var))
    return gated[:, 0], gated[:, 1]  # gamma_f, gamma_t


def mafus_forward(f: np.ndarray, t: np.ndarray, weights: MAFusWeights) -> np.ndarray:
    """Fuse two NCHW feature streams into a 2C-channel tensor.

    Each stream's attention output enters as a residual (Z = attn W_z + X),
    so zero W_z matrices reduce the block to plain channel concatenation.
    """
    f = _check_nchw(f, "F")
    t = _check_nchw(t, "T")
    if f.shape != t.shape:
        raise DimensionMismatchError("F and T must share N, C, H, W")
    if f.shape[1] != weights.channels:
        raise DimensionMismatchError(
            f"weights expect {weights.channels} channels, got {f.shape[1]}")
    n, c, h, w = f.shape
    gamma_f, gamma_t = gamma_fields(f, t, weights)
    logits_f = nonlocal_similarity(f, weights.w_theta_f, weights.w_phi_f)
    logits_t = nonlocal_similarity(t, weights.w_theta_t, weights.w_phi_t)
    a_f, a_t = mutual_attention(logits_f, logits_t,
                                gamma_f.reshape(n, h * w), gamma_t.reshape(n, h * w))
    flat_f = _flatten_spatial(f)
    flat_t = _flatten_spatial(t)
    z_f = (a_f @ (flat_f @ weights.w_g_f)) @ weights.w_z_f + flat_f
    z_t = (a_t @ (flat_t @ weights.w_g_t)) @ weights.w_z_t + flat_t
    stack = np.concatenate([z_f, z_t], axis=2)          # n, hw, 2c
    return stack.transpose(0, 2, 1).reshape(n, 2 * c, h, w)


def fuse_features(f: np.ndarray, t: np.ndarray, weights: MAFusWeights | None = None,
                  mode: str = "mutual") -> np.ndarray:
    """Configurable fusion: "concat" stacks [F, T]; "mutual" runs the full block."""
    if mode == "concat":
        f = _check_nchw(f, "F")
        t = _check_nchw(t, "T")
        if f.shape != t.shape:
            raise DimensionMismatchError("F and T must share N, C, H, W")
        return np.concatenate([f, t], axis=1)
    if mode == "mutual":
        if weights is None:
            raise ValueError("mutual fusion requires weights")
        return mafus_forward(f, t, weights)
    raise ValueError(f"unknown fusion mode {mode!r}")


_RECOVERY_LAYERS = ("conv1_1", "conv1_2", "conv2_1", "conv2_2",
                    "conv3_1", "conv3_2", "conv_fuse")


@dataclass(frozen=True)
class RecoveryNetWeights:
    """Seven-layer embedding recovery net: three 3x3 conv pairs whose branch
    outputs concatenate into a 1x1 fusion conv (e.g. 256+128+64 -> 256)."""

    conv1_1: tuple[np.ndarray, np.ndarray]
    conv1_2: tuple[np.ndarray, np.ndarray]
    conv2_1: tuple[np.ndarray, np.ndarray]
    conv2_2: tuple[np.ndarray, np.ndarray]
    conv3_1: tuple[np.ndarray, np.ndarray]
    conv3_2: tuple[np.ndarray, np.ndarray]
    conv_fuse: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        chain = [self.conv1_1, self.conv1_2, self.conv2_1, self.conv2_2,
                 self.conv3_1, self.conv3_2]
        for name, (w, b) in zip(_RECOVERY_LAYERS, chain):
            if w.ndim != 4 or w.shape[2:] != (3, 3):
                raise DimensionMismatchError(f"{name} must be a 3x3 convolution")
            if b.shape != (w.shape[0],):
                raise DimensionMismatchError(f"{name} bias shape mismatch")
        for prev, nxt in zip(chain, chain[1:]):
            if nxt[0].shape[1] != prev[0].shape[0]:
                raise DimensionMismatchError("recovery conv chain channels mismatch")
        fuse_w, fuse_b = self.conv_fuse
        if fuse_w.ndim != 4 or fuse_w.shape[2:] != (1, 1):
            raise DimensionMismatchError("conv_fuse must be a 1x1 convolution")
        branch_sum = (self.conv1_2[0].shape[0] + self.conv2_2[0].shape[0]
                      + self.conv3_2[0].shape[0])
        if fuse_w.shape[1] != branch_sum:
            raise DimensionMismatchError(
                f"conv_fuse expects {fuse_w.shape[1]} input channels but the "
                f"branches concatenate to {branch_sum}")
        if fuse_b.shape != (fuse_w.shape[0],):
            raise DimensionMismatchError("conv_fuse bias shape mismatch")

    @property
    def input_channels(self) -> int:
        return self.conv1_1[0].shape[1]

    @classmethod
    def random(cls, rng: np.random.Generator, base: int = 256) -> "RecoveryNetWeights":
        """Table-shaped weights: base -> base -> base/2 -> base/2 -> base/4 -> base/4."""
        half, quarter = base // 2, base // 4

        def layer(c_out, c_in, k):
            fan = c_in * k * k
            return (rng.normal(0.0, 1.0 / np.sqrt(fan), (c_out, c_in, k, k)),
                    rng.normal(0.0, 0.01, c_out))

        return cls(conv1_1=layer(base, base, 3), conv1_2=layer(base, base, 3),
                   conv2_1=layer(half, base, 3), conv2_2=layer(half, half, 3),
                   conv3_1=layer(quarter, half, 3), conv3_2=layer(quarter, quarter, 3),
                   conv_fuse=layer(base, base + half + quarter, 1))

    def to_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name in _RECOVERY_LAYERS:
            w, b = getattr(self, name)
            out[f"{name}.weight"] = w
            out[f"{name}.bias"] = b
        return out

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, np.ndarray]) -> "RecoveryNetWeights":
        kwargs = {name: (np.asarray(tensors[f"{name}.weight"], dtype=np.float64),
                         np.asarray(tensors[f"{name}.bias"], dtype=np.float64))
                  for name in _RECOVERY_LAYERS}
        return cls(**kwargs)


def recovery_forward(f: np.ndarray, weights: RecoveryNetWeights) -> np.ndarray:
    """Recovery net forward pass; spatial dims are preserved throughout."""
    f = _check_nchw(f, "recovery input")
    if f.shape[1] != weights.input_channels:
        raise DimensionMismatchError(
            f"recovery net expects {weights.input_channels} channels, got {f.shape[1]}")
    x1 = relu(conv2d(relu(conv2d(f, *weights.conv1_1, pad=1)), *weights.conv1_2, pad=1))
    x2 = relu(conv2d(relu(conv2d(x1, *weights.conv2_1, pad=1)), *weights.conv2_2, pad=1))
    x3 = relu(conv2d(relu(conv2d(x2, *weights.conv3_1, pad=1)), *weights.conv3_2, pad=1))
    cat = np.concatenate([x1, x2, x3], axis=1)
    return relu(conv2d(cat, *weights.conv_fuse))


@dataclass(frozen=True)
class LossReport:
    pix: float
    det: float
    pep: float
    cons: float
    total: float


def losses(i_hat: np.ndarray, i_cln: np.ndarray, h_hat: np.ndarray,
           h_star: np.ndarray, f_hat: np.ndarray, f_star: np.ndarray,
           t: np.ndarray, *, lambda_det: float = 0.1,
           lambda_pep: float = 10.0) -> LossReport:
    """Training losses (mean-reduced): reconstruction L1 between the restored
    and clean images, heatmap MSE, embedding-alignment MSE, and the
    consistency MSE tying the recovered embedding to the clean one.

    total = pix + lambda_det * det + cons + lambda_pep * pep
    """
    pairs = (("reconstruction", i_hat, i_cln), ("heatmap", h_hat, h_star),
             ("embedding", f_hat, f_star), ("consistency", f_star, t))
    for name, a, b in pairs:
        if np.asarray(a).shape != np.asarray(b).shape:
            raise DimensionMismatchError(f"{name} loss operands differ in shape")
    pix = float(np.abs(np.asarray(i_cln, dtype=np.float64)
                       - np.asarray(i_hat, dtype=np.float64)).mean())
    mse = lambda a, b: float(((np.asarray(a, dtype=np.float64)
                               - np.asarray(b, dtype=np.float64)) ** 2).mean())
    det = mse(h_hat, h_star)
    pep = mse(f_star, f_hat)
    cons = mse(f_star, t)
    total = pix + lambda_det * det + cons + lambda_pep * pep
    return LossReport(pix, det, pep, cons, total)


_CONTAINER_FORMAT = "flat-tensors-v1"


def save_weights(path: str | Path, tensors: Mapping[str, np.ndarray]) -> None:
    """Serialize named tensors: one JSON header line, then raw <f4 bytes."""
    entries, blobs, offset = [], [], 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw = arr.tobytes()
        entries.append({"name": name, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"format": _CONTAINER_FORMAT, "dtype": "<f4",
                         "tensors": entries})
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        for raw in blobs:
            fh.write(raw)


def load_weights(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != _CONTAINER_FORMAT:
            raise ValueError(f"{path}: unknown weight container format")
        data = fh.read()
    out = {}
    for entry in header["tensors"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        arr = np.frombuffer(data[start:start + nbytes], dtype="<f4")
        out[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float64)
    return out
