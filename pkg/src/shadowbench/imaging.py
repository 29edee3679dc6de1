"""Image / mask / depth containers, PNG I/O, and CIELAB conversion.

All pixel data lives in float64 numpy arrays normalized to [0, 1].  Colors
are treated as sRGB with a D65 white point throughout; the LAB conversion
uses the standard sRGB -> linear -> XYZ -> CIELAB pipeline.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

import cv2
import numpy as np

from .errors import CorruptImageError, DimensionMismatchError, UnsupportedImageError

Role = Literal["mask", "depth", "matte"]

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# sRGB <-> XYZ (D65, 2 degree observer).  The white point is taken as the
# exact row sums of the forward matrix so that (1,1,1) maps to L=100, a=b=0.
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_XYZ_TO_RGB = np.array([
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
])
_WHITE = _RGB_TO_XYZ.sum(axis=1)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)  # always copy; containers own their data
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Image:
    """H x W x 3 RGB image with every channel in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DimensionMismatchError(f"expected HxWx3 image, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatchError("image must be at least 1x1")
        if not np.isfinite(arr).all():
            raise ValueError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image channels must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ScalarField:
    """H x W field of values in [0, 1]: an occluder mask, depth map, or matte."""

    data: np.ndarray
    role: Role = "mask"

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"expected HxW field, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("field contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(f"{self.role} values must lie in [0, 1]")
        if self.role not in ("mask", "depth", "matte"):
            raise ValueError(f"unknown field role {self.role!r}")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class LabImage:
    """H x W x 3 CIELAB image: L in [0, 100], a and b in [-128, 127]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DimensionMismatchError(f"expected HxWx3 LAB image, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("LAB image contains non-finite values")
        L, a, b = arr[..., 0], arr[..., 1], arr[..., 2]
        if L.min() < -1e-9 or L.max() > 100.0 + 1e-9:
            raise ValueError("L channel out of [0, 100]")
        if min(a.min(), b.min()) < -128.0 or max(a.max(), b.max()) > 127.0:
            raise ValueError("a/b channels out of [-128, 127]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def _png_bit_depth(raw: bytes, path: Path) -> int:
    """Parse the PNG signature + IHDR and return the declared bit depth."""
    if len(raw) < 33 or raw[:8] != _PNG_SIGNATURE:
        raise UnsupportedImageError(f"{path}: not a PNG file")
    length, tag = struct.unpack(">I4s", raw[8:16])
    if tag != b"IHDR" or length != 13:
        raise CorruptImageError(f"{path}: malformed IHDR chunk")
    _w, _h, bit_depth, _color, _comp, _filt, _inter = struct.unpack(">IIBBBBB", raw[16:29])
    return bit_depth


def _decode_png(path: str | Path) -> np.ndarray:
    """Decode a PNG to a float array in [0, 1], keeping its channel layout."""
    path = Path(path)
    raw = path.read_bytes()  # raises FileNotFoundError for missing files
    bit_depth = _png_bit_depth(raw, path)
    if bit_depth not in (8, 16):
        raise UnsupportedImageError(f"{path}: unsupported bit depth {bit_depth}")
    decoded = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_UNCHANGED)
    if decoded is None:
        raise CorruptImageError(f"{path}: PNG stream failed to decode")
    max_code = 65535.0 if decoded.dtype == np.uint16 else 255.0
    return decoded.astype(np.float64) / max_code


def load_image(path: str | Path) -> Image:
    """Load an 8-bit or 16-bit PNG as an RGB Image.

    Channel values are normalized by the maximum code value; grayscale is
    promoted to three channels and an alpha channel, if present, is dropped.
    """
    arr = _decode_png(path)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    elif arr.shape[2] == 2:  # gray + alpha
        arr = np.repeat(arr[:, :, :1], 3, axis=2)
    elif arr.shape[2] in (3, 4):
        arr = arr[:, :, 2::-1]  # BGR(A) -> RGB, alpha dropped
    else:
        raise UnsupportedImageError(f"{path}: unsupported channel count {arr.shape[2]}")
    return Image(arr)


def save_image(img: Image, path: str | Path) -> None:
    """Write an 8-bit PNG; values quantized by round(v * 255)."""
    codes = np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)
    ok, buf = cv2.imencode(".png", codes[:, :, ::-1])
    if not ok:
        raise CorruptImageError(f"{path}: PNG encoding failed")
    Path(path).write_bytes(buf.tobytes())


def load_scalar_field(path: str | Path, role: Role = "mask") -> ScalarField:
    """Load a single-channel PNG as a mask / depth / matte field."""
    arr = _decode_png(path)
    if arr.ndim == 3:
        if arr.shape[2] == 2:
            arr = arr[:, :, 0]
        elif np.ptp(arr[:, :, :3], axis=2).max() == 0.0:
            arr = arr[:, :, 0]  # gray stored as RGB
        else:
            raise UnsupportedImageError(f"{path}: expected a single-channel PNG")
    return ScalarField(arr, role=role)


def save_scalar_field(fld: ScalarField, path: str | Path) -> None:
    """Write a field as an 8-bit single-channel PNG."""
    codes = np.clip(np.rint(fld.data * 255.0), 0, 255).astype(np.uint8)
    ok, buf = cv2.imencode(".png", codes)
    if not ok:
        raise CorruptImageError(f"{path}: PNG encoding failed")
    Path(path).write_bytes(buf.tobytes())


def _srgb_to_linear(v: np.ndarray) -> np.ndarray:
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(v: np.ndarray) -> np.ndarray:
    v = np.maximum(v, 0.0)
    return np.where(v <= 0.0031308, v * 12.92, 1.055 * v ** (1.0 / 2.4) - 0.055)


_LAB_DELTA = 6.0 / 29.0


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _LAB_DELTA ** 3, np.cbrt(t), t / (3 * _LAB_DELTA ** 2) + 4.0 / 29.0)


def _lab_f_inv(t: np.ndarray) -> np.ndarray:
    return np.where(t > _LAB_DELTA, t ** 3, 3 * _LAB_DELTA ** 2 * (t - 4.0 / 29.0))


def rgb_to_lab(img: Image) -> LabImage:
    """Convert sRGB (D65) to CIELAB."""
    linear = _srgb_to_linear(img.data)
    xyz = linear @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return LabImage(np.stack([L, a, b], axis=-1))


def lab_to_rgb(lab: LabImage) -> Image:
    """Invert rgb_to_lab; out-of-gamut results are clipped to [0, 1]."""
    L, a, b = lab.data[..., 0], lab.data[..., 1], lab.data[..., 2]
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE
    rgb = _linear_to_srgb(xyz @ _XYZ_TO_RGB.T)
    return Image(np.clip(rgb, 0.0, 1.0))


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    """Write records as UTF-8 JSON lines with stable key order."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
