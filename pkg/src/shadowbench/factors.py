"""Shadow factor sampling, silhouette complexity binning, and grid generation.

The benchmark controls four shadow factors (intensity, size, shape, location)
at three severities each; a full grid is the 3^4 = 81 cells per clean image.
Shape severity is assigned by ranking silhouettes with a contour-based
complexity score and splitting the ranking into terciles, so only the
ordering of the score matters.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage
from skimage import measure

from .errors import (DimensionMismatchError, EmptyMaskError, MaskScaleError,
                     MultipleComponentsError)
from .imaging import Image, ScalarField
from .synth import MatteConfig, ShadowParams, ZERO_BETA, BetaCoeffs, compose_shadow

SEVERITIES = (1, 2, 3)
ALPHA_RANGES = {1: (0.8, 1.0), 2: (0.4, 0.6), 3: (0.0, 0.2)}
AREA_RANGES = {1: (0.10, 0.20), 2: (0.45, 0.55), 3: (0.80, 0.90)}
AREA_TOLERANCE = 0.01
_MAX_BISECTIONS = 20


@dataclass(frozen=True)
class FactorSpec:
    """One cell of the factor grid."""

    intensity: int
    size: int
    shape: int
    location: int
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("intensity", "size", "shape", "location"):
            if getattr(self, name) not in SEVERITIES:
                raise ValueError(f"{name} severity must be in {SEVERITIES}")

    @property
    def cell_index(self) -> int:
        return (((self.intensity - 1) * 3 + (self.size - 1)) * 3
                + (self.shape - 1)) * 3 + (self.location - 1)

    @property
    def code(self) -> str:
        return f"i{self.intensity}s{self.size}h{self.shape}l{self.location}"

    def to_json(self) -> dict:
        return {"intensity": self.intensity, "size": self.size,
                "shape": self.shape, "location": self.location,
                "rng_seed": self.rng_seed}

    @classmethod
    def from_json(cls, d: dict) -> "FactorSpec":
        return cls(d["intensity"], d["size"], d["shape"], d["location"],
                   d.get("rng_seed", 0))


@dataclass(frozen=True)
class SilhouetteEntry:
    id: str
    mask: ScalarField
    complexity: float
    severity_bin: int


@dataclass
class DatasetManifestRecord:
    source_image: str
    output_image: str
    factor_spec: FactorSpec
    alpha: float
    mask_id: str
    area_fraction: float
    centroid: tuple[float, float]
    complexity: float
    clip_fraction: float = 0.0
    mask_image: str = ""
    attack: bool = False

    def to_json(self) -> dict:
        d = {
            "source_image": self.source_image,
            "output_image": self.output_image,
            "factor_spec": self.factor_spec.to_json(),
            "alpha": self.alpha,
            "mask_id": self.mask_id,
            "area_fraction": self.area_fraction,
            "centroid": [self.centroid[0], self.centroid[1]],
            "complexity": self.complexity,
            "clip_fraction": self.clip_fraction,
            "mask_image": self.mask_image,
        }
        if self.attack:
            d["attack"] = True
        return d

    @classmethod
    def from_json(cls, d: dict) -> "DatasetManifestRecord":
        return cls(
            source_image=d["source_image"],
            output_image=d["output_image"],
            factor_spec=FactorSpec.from_json(d["factor_spec"]),
            alpha=d["alpha"],
            mask_id=d["mask_id"],
            area_fraction=d["area_fraction"],
            centroid=(d["centroid"][0], d["centroid"][1]),
            complexity=d["complexity"],
            clip_fraction=d.get("clip_fraction", 0.0),
            mask_image=d.get("mask_image", ""),
            attack=d.get("attack", False),
        )


def sample_intensity(severity: int, rng: np.random.Generator) -> float:
    """Uniform ambient attenuation from the severity's range (1 light, 3 heavy)."""
    if severity not in SEVERITIES:
        raise ValueError(f"intensity severity must be in {SEVERITIES}")
    lo, hi = ALPHA_RANGES[severity]
    return float(rng.uniform(lo, hi))


def shape_complexity(mask: ScalarField | np.ndarray) -> float:
    """Contour irregularity score used (ordinally) for shape severity.

    Let d_i be the distance of the i-th outer contour point to the shape's
    centroid, normalized by mean(d).  The score blends the spread of the
    distance distribution with the contour's roughness:

        E = 0.5 * std(d) + 0.5 * mean_i |d_{i+1} - 2 d_i + d_{i-1}|

    with cyclic indexing.  Scale-free up to rasterization.
    """
    arr = mask.data if isinstance(mask, ScalarField) else np.asarray(mask, dtype=np.float64)
    fg = arr >= 0.5
    if not fg.any():
        raise EmptyMaskError("cannot score an empty mask")
    _, n_components = ndimage.label(fg)
    if n_components != 1:
        raise MultipleComponentsError(f"expected one component, found {n_components}")
    padded = np.pad(arr, 1)  # keep edge-touching contours closed
    contours = measure.find_contours(padded, 0.5)
    outer = max(contours, key=len)
    cy, cx = ndimage.center_of_mass(padded >= 0.5)
    d = np.hypot(outer[:, 0] - cy, outer[:, 1] - cx)
    d = d / d.mean()
    second_diff = np.abs(np.roll(d, -1) - 2.0 * d + np.roll(d, 1))
    return float(0.5 * d.std() + 0.5 * second_diff.mean())


def bin_silhouettes(library: Iterable[tuple[str, ScalarField]]) -> list[SilhouetteEntry]:
    """Rank silhouettes by complexity and split into terciles (bin 1 = simplest).

    Ties are broken by id; extra items go to the earliest bins (a library of
    4 splits 2/1/1).
    """
    items = list(library)
    if not items:
        raise EmptyMaskError("silhouette library is empty")
    scored = sorted(((shape_complexity(m), sid, m) for sid, m in items),
                    key=lambda t: (t[0], t[1]))
    n = len(scored)
    base, rem = divmod(n, 3)
    sizes = [base + (1 if i < rem else 0) for i in range(3)]
    entries, start = [], 0
    for bin_idx, size in enumerate(sizes, start=1):
        for complexity, sid, m in scored[start:start + size]:
            entries.append(SilhouetteEntry(sid, m, complexity, bin_idx))
        start += size
    return entries


def load_silhouette_library(directory: str | Path) -> list[tuple[str, ScalarField]]:
    """Load <dir>/<id>.png silhouettes, sorted by id."""
    from .imaging import load_scalar_field
    directory = Path(directory)
    paths = sorted(directory.glob("*.png"))
    if not paths:
        raise EmptyMaskError(f"no silhouette PNGs in {directory}")
    return [(p.stem, load_scalar_field(p, role="mask")) for p in paths]


def _render_scaled(src: np.ndarray, src_centroid: tuple[float, float],
                   scale: float, dims: tuple[int, int],
                   offset: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Rasterize src scaled about its centroid onto the canvas center.

    offset shifts the render grid by a sub-pixel amount; grid-aligned shapes
    otherwise only hit even/odd side lengths and skip area plateaus.
    """
    h, w = dims
    cy, cx = (h - 1) / 2.0 + offset[0], (w - 1) / 2.0 + offset[1]
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    coords = np.stack([src_centroid[0] + (yy - cy) / scale,
                       src_centroid[1] + (xx - cx) / scale])
    sampled = ndimage.map_coordinates(src, coords, order=1, mode="constant", cval=0.0)
    return (sampled >= 0.5).astype(np.float64)


def mask_area_fraction(mask: ScalarField | np.ndarray) -> float:
    arr = mask.data if isinstance(mask, ScalarField) else np.asarray(mask)
    return float((arr >= 0.5).mean())


def rescale_mask_to_area(mask: ScalarField, target_range: tuple[float, float],
                         image_dims: tuple[int, int],
                         rng: np.random.Generator) -> ScalarField:
    """Scale a silhouette onto the canvas until its area fraction hits a
    uniformly drawn target from target_range, within +/- 1% absolute.

    Bisection on the isotropic scale factor, at most 20 steps after
    bracketing.  Raises MaskScaleError when the target is unreachable.
    """
    lo_t, hi_t = target_range
    if not (0.0 < lo_t <= hi_t < 1.0):
        raise ValueError("target range must lie inside (0, 1)")
    target = float(rng.uniform(lo_t, hi_t))
    src = mask.data
    if not (src >= 0.5).any():
        raise EmptyMaskError("cannot rescale an empty mask")
    src_centroid = ndimage.center_of_mass(src >= 0.5)

    # grid-aligned shapes can only realize every other side length for a
    # given grid phase; retry with sub-pixel offsets to reach the plateaus
    # in between
    best_err = np.inf
    for offset in ((0.0, 0.0), (0.5, 0.5), (0.0, 0.5), (0.5, 0.0)):
        rendered, err = _bisect_scale(src, src_centroid, target, image_dims, offset)
        if rendered is not None:
            return ScalarField(rendered, role="mask")
        best_err = min(best_err, err)
    raise MaskScaleError(
        f"area target {target:.3f} unreachable (off by {best_err:.3f})")


def _bisect_scale(src: np.ndarray, src_centroid: tuple[float, float], target: float,
                  image_dims: tuple[int, int], offset: tuple[float, float]
                  ) -> tuple[np.ndarray | None, float]:
    def frac(scale: float) -> float:
        return mask_area_fraction(_render_scaled(src, src_centroid, scale,
                                                 image_dims, offset))

    lo, hi = 1.0, 1.0
    f = frac(1.0)
    if f < target:
        while frac(hi) < target:
            hi *= 2.0
            if hi > 256.0:
                return None, abs(frac(hi) - target)
        lo = hi / 2.0
    elif f > target:
        while frac(lo) > target:
            lo /= 2.0
            if lo < 1.0 / 256.0:
                return None, abs(frac(lo) - target)
        hi = lo * 2.0

    best_scale, best_err = 1.0, abs(f - target)
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        f = frac(mid)
        err = abs(f - target)
        if err < best_err:
            best_scale, best_err = mid, err
        if err <= AREA_TOLERANCE:
            break
        if f < target:
            lo = mid
        else:
            hi = mid
    if best_err > AREA_TOLERANCE:
        return None, best_err
    return _render_scaled(src, src_centroid, best_scale, image_dims, offset), best_err


def location_target(severity: int, image_dims: tuple[int, int]) -> tuple[float, float]:
    """Centroid target (x, y) for top / middle / bottom placement."""
    h, w = image_dims
    ys = {1: h / 6.0, 2: h / 2.0, 3: 5.0 * h / 6.0}
    if severity not in ys:
        raise ValueError(f"location severity must be in {SEVERITIES}")
    return (w / 2.0, ys[severity])


def _shift_int(arr: np.ndarray, dy: int, dx: int) -> np.ndarray:
    out = np.zeros_like(arr)
    h, w = arr.shape
    ys = slice(max(dy, 0), min(h + dy, h))
    xs = slice(max(dx, 0), min(w + dx, w))
    ys_src = slice(max(-dy, 0), min(h - dy, h))
    xs_src = slice(max(-dx, 0), min(w - dx, w))
    out[ys, xs] = arr[ys_src, xs_src]
    return out


def place_mask(mask: ScalarField, location_severity: int,
               image_dims: tuple[int, int]) -> ScalarField:
    """Translate the mask so its centroid lands on the severity's region center.

    Content pushed past the canvas edge is clipped (zero-filled); the caller
    can compare area fractions before and after to record the clipped share.
    """
    h, w = image_dims
    if mask.data.shape != (h, w):
        raise DimensionMismatchError("mask must already live on the target canvas")
    fg = mask.data >= 0.5
    if not fg.any():
        raise EmptyMaskError("cannot place an empty mask")
    tx, ty = location_target(location_severity, image_dims)
    cy, cx = ndimage.center_of_mass(fg)
    shifted = _shift_int(mask.data, int(round(ty - cy)), int(round(tx - cx)))
    return ScalarField(shifted, role="mask")


def mask_centroid(mask: ScalarField | np.ndarray) -> tuple[float, float]:
    """Foreground centroid as (x, y) pixels."""
    arr = mask.data if isinstance(mask, ScalarField) else np.asarray(mask)
    fg = arr >= 0.5
    if not fg.any():
        raise EmptyMaskError("mask has no foreground")
    cy, cx = ndimage.center_of_mass(fg)
    return (float(cx), float(cy))


def cell_rng(seed: int, cell_index: int) -> np.random.Generator:
    """Deterministic per-cell generator, independent of evaluation order."""
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, cell_index])


def iter_factor_grid(seed: int) -> list[FactorSpec]:
    specs = []
    for i in SEVERITIES:
        for s in SEVERITIES:
            for sh in SEVERITIES:
                for l in SEVERITIES:
                    specs.append(FactorSpec(i, s, sh, l, rng_seed=seed))
    return specs


def generate_cell(clean: Image, depth: ScalarField, entries: Sequence[SilhouetteEntry],
                  spec: FactorSpec, seed: int, *, source_name: str = "face",
                  matte: MatteConfig = MatteConfig(),
                  beta: BetaCoeffs = ZERO_BETA
                  ) -> tuple[Image, ScalarField, DatasetManifestRecord]:
    """Generate one grid cell: shadowed image, placed mask, manifest record."""
    dims = (clean.height, clean.width)
    rng = cell_rng(seed, spec.cell_index)
    alpha = sample_intensity(spec.intensity, rng)
    bin_members = [e for e in entries if e.severity_bin == spec.shape]
    if not bin_members:
        raise EmptyMaskError(f"no silhouettes in shape bin {spec.shape}")
    # unreachable area targets are re-drawn (fresh silhouette + target)
    last_error: MaskScaleError | None = None
    for _ in range(5):
        entry = bin_members[int(rng.integers(len(bin_members)))]
        try:
            scaled = rescale_mask_to_area(entry.mask, AREA_RANGES[spec.size], dims, rng)
            break
        except MaskScaleError as exc:
            last_error = exc
    else:
        raise last_error if last_error else MaskScaleError("rescale failed")
    pre_area = mask_area_fraction(scaled)
    placed = place_mask(scaled, spec.location, dims)
    post_area = mask_area_fraction(placed)
    clip_fraction = 0.0 if pre_area == 0 else max(0.0, 1.0 - post_area / pre_area)
    shadowed = compose_shadow(clean, ShadowParams(
        alpha=alpha, mask=placed, depth=depth, beta_coeffs=beta, matte=matte))
    stem = Path(source_name).stem
    record = DatasetManifestRecord(
        source_image=source_name,
        output_image=f"images/{stem}__{spec.code}.png",
        factor_spec=spec,
        alpha=alpha,
        mask_id=entry.id,
        area_fraction=pre_area,
        centroid=mask_centroid(placed),
        complexity=entry.complexity,
        clip_fraction=clip_fraction,
        mask_image=f"masks/{stem}__{spec.code}.png",
    )
    return shadowed, placed, record


def generate_grid(clean: Image, depth: ScalarField,
                  entries: Sequence[SilhouetteEntry], seed: int, *,
                  source_name: str = "face",
                  matte: MatteConfig = MatteConfig(),
                  beta: BetaCoeffs = ZERO_BETA
                  ) -> list[tuple[Image, ScalarField, DatasetManifestRecord]]:
    """All 81 factor cells for one clean image, deterministically from seed."""
    return [generate_cell(clean, depth, entries, spec, seed, source_name=source_name,
                          matte=matte, beta=beta)
            for spec in iter_factor_grid(seed)]
