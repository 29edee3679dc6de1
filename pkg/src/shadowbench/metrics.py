"""Restoration-quality and landmark-accuracy metrics with region splits.

Image error is the root-mean-square of per-pixel Euclidean CIELAB distances,
reported over the shadow region, the non-shadow region, and the whole image.
A compatibility mode reports the mean (not RMS) of the per-pixel distances,
since much of the restoration literature publishes that quantity under the
same name.  Landmark error is the inter-ocular-normalized mean point error,
as a percentage.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Mapping, Sequence

import numpy as np

from .errors import DegenerateLandmarksError, DimensionMismatchError, EmptyRegionError
from .factors import DatasetManifestRecord, SEVERITIES
from .imaging import Image, ScalarField, rgb_to_lab

MetricMode = Literal["rms", "mae_compat"]

# iBUG 68-point indices of the outer eye corners (0-indexed)
OUTER_LEFT_EYE = 36
OUTER_RIGHT_EYE = 45

FACTOR_NAMES = ("intensity", "size", "shape", "location")


def validate_landmarks(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.shape != (68, 2):
        raise DimensionMismatchError(f"expected 68x2 landmarks, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("landmarks contain non-finite coordinates")
    return arr


def load_landmarks(path: str | Path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return validate_landmarks(json.load(fh))


def save_landmarks(points, path: str | Path) -> None:
    arr = validate_landmarks(points)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([[float(x), float(y)] for x, y in arr], fh)


def nme(pred, gt) -> float:
    """Mean landmark error normalized by the inter-ocular distance, in percent."""
    pred = validate_landmarks(pred)
    gt = validate_landmarks(gt)
    inter_ocular = float(np.linalg.norm(gt[OUTER_LEFT_EYE] - gt[OUTER_RIGHT_EYE]))
    if inter_ocular <= 0.0:
        raise DegenerateLandmarksError("coincident outer eye corners")
    errors = np.linalg.norm(pred - gt, axis=1)
    return float(100.0 * errors.mean() / inter_ocular)


def _lab_sq_distances(a: Image, b: Image) -> np.ndarray:
    if a.data.shape != b.data.shape:
        raise DimensionMismatchError("images must share dimensions")
    diff = rgb_to_lab(a).data - rgb_to_lab(b).data
    return (diff ** 2).sum(axis=2)


def _region_error(sq: np.ndarray, region: np.ndarray, mode: MetricMode) -> float:
    if not region.any():
        raise EmptyRegionError("metric region contains no pixels")
    if mode == "rms":
        return float(np.sqrt(sq[region].mean()))
    if mode == "mae_compat":
        return float(np.sqrt(sq[region]).mean())
    raise ValueError(f"unknown metric mode {mode!r}")


def rmse_lab(a: Image, b: Image, region_mask: ScalarField | None = None, *,
             mode: MetricMode = "rms") -> float:
    """CIELAB error between two images, optionally restricted to mask >= 0.5."""
    sq = _lab_sq_distances(a, b)
    if region_mask is None:
        region = np.ones(sq.shape, dtype=bool)
    else:
        if region_mask.data.shape != sq.shape:
            raise DimensionMismatchError("region mask must match image dimensions")
        region = region_mask.data >= 0.5
    return _region_error(sq, region, mode)


@dataclass(frozen=True)
class RegionReport:
    """Error split by shadow region; empty regions are reported as absent."""

    rmse_shadow: float | None
    rmse_non_shadow: float | None
    rmse_all: float
    n_shadow: int
    n_non_shadow: int
    n_all: int
    mode: MetricMode = "rms"

    def to_json(self) -> dict:
        return {"rmse_shadow": self.rmse_shadow,
                "rmse_non_shadow": self.rmse_non_shadow,
                "rmse_all": self.rmse_all,
                "n_shadow": self.n_shadow,
                "n_non_shadow": self.n_non_shadow,
                "n_all": self.n_all,
                "mode": self.mode}


def region_report(clean: Image, restored: Image, shadow_mask: ScalarField, *,
                  mode: MetricMode = "rms") -> RegionReport:
    """Error over shadow (mask >= 0.5), non-shadow, and all pixels."""
    sq = _lab_sq_distances(clean, restored)
    if shadow_mask.data.shape != sq.shape:
        raise DimensionMismatchError("shadow mask must match image dimensions")
    shadow = shadow_mask.data >= 0.5
    non_shadow = ~shadow
    return RegionReport(
        rmse_shadow=_region_error(sq, shadow, mode) if shadow.any() else None,
        rmse_non_shadow=_region_error(sq, non_shadow, mode) if non_shadow.any() else None,
        rmse_all=_region_error(sq, np.ones(sq.shape, dtype=bool), mode),
        n_shadow=int(shadow.sum()),
        n_non_shadow=int(non_shadow.sum()),
        n_all=int(sq.size),
        mode=mode)


def relative_gain(base: float, value: float) -> float:
    """Percent drop relative to a baseline: 100 * (base - value) / base."""
    if base == 0.0:
        raise ZeroDivisionError("baseline metric is zero")
    return 100.0 * (base - value) / base


def _mean_of(values: Sequence[float]) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def aggregate_report(records: Sequence[DatasetManifestRecord],
                     per_item: Mapping[str, Mapping[str, float | None]]) -> dict:
    """Group per-record metrics by (factor, severity) and overall.

    per_item maps record.output_image to a metric dict (e.g. rmse_all, nme).
    Records without metrics are flagged in the "missing" list; means are
    taken over whatever is present and are independent of record order.
    """
    missing = [r.output_image for r in records if r.output_image not in per_item]
    present = [r for r in records if r.output_image in per_item]
    metric_names = sorted({k for r in present for k in per_item[r.output_image]})

    def group_mean(rows: Sequence[DatasetManifestRecord]) -> dict:
        out: dict = {"count": len(rows)}
        for name in metric_names:
            out[name] = _mean_of([per_item[r.output_image].get(name) for r in rows])
        return out

    by_factor: dict = {}
    for factor in FACTOR_NAMES:
        by_factor[factor] = {
            str(sev): group_mean([r for r in present
                                  if getattr(r.factor_spec, factor) == sev])
            for sev in SEVERITIES}
    return {"overall": group_mean(present),
            "by_factor": by_factor,
            "missing": sorted(missing)}
