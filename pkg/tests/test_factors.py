import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowbench.errors import EmptyMaskError, MultipleComponentsError
from shadowbench.factors import (ALPHA_RANGES, AREA_RANGES, AREA_TOLERANCE,
                                 DatasetManifestRecord, FactorSpec, bin_silhouettes,
                                 generate_grid, load_silhouette_library,
                                 location_target, mask_area_fraction, mask_centroid,
                                 place_mask, rescale_mask_to_area, sample_intensity,
                                 shape_complexity)
from shadowbench.imaging import ScalarField
from shadowbench.silhouettes import starter_silhouettes, write_starter_library
from shadowbench.synth import synthetic_face_depth

from conftest import random_image


def disk_mask(size, radius, center=None):
    cy = cx = (size - 1) / 2 if center is None else center
    yy, xx = np.mgrid[0:size, 0:size]
    return ((yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2).astype(np.float64)


class TestIntensity:
    @pytest.mark.parametrize("severity,lo,hi", [(1, 0.8, 1.0), (2, 0.4, 0.6),
                                                (3, 0.0, 0.2)])
    def test_ranges(self, severity, lo, hi):
        rng = np.random.default_rng(0)
        draws = [sample_intensity(severity, rng) for _ in range(500)]
        assert all(lo <= a < hi for a in draws)

    def test_same_seed_same_alpha(self):
        a = sample_intensity(2, np.random.default_rng(99))
        b = sample_intensity(2, np.random.default_rng(99))
        assert a == b

    def test_invalid_severity(self):
        with pytest.raises(ValueError):
            sample_intensity(4, np.random.default_rng(0))

    @settings(max_examples=60, deadline=None)
    @given(severity=st.sampled_from([1, 2, 3]), seed=st.integers(0, 2 ** 31))
    def test_alpha_always_in_declared_range(self, severity, seed):
        alpha = sample_intensity(severity, np.random.default_rng(seed))
        lo, hi = ALPHA_RANGES[severity]
        assert lo <= alpha < hi


class TestShapeComplexity:
    def test_disk_is_simple(self):
        assert shape_complexity(disk_mask(128, 50)) < 0.02

    def test_scale_invariance(self):
        small = shape_complexity(disk_mask(128, 32))
        large = shape_complexity(disk_mask(256, 64))
        assert abs(small - large) < 0.005

    def test_translation_invariance(self):
        mask = disk_mask(128, 30)
        shifted = np.roll(mask, (17, -9), axis=(0, 1))  # same rasterization, moved
        assert abs(shape_complexity(mask) - shape_complexity(shifted)) < 1e-9

    def test_severity_exemplars_rank_in_order(self):
        shapes = starter_silhouettes()
        low = shape_complexity(shapes["ellipse"])
        mid = shape_complexity(shapes["star5"])
        high = shape_complexity(shapes["hand"])
        assert low < mid < high

    def test_empty_mask_rejected(self):
        with pytest.raises(EmptyMaskError):
            shape_complexity(np.zeros((16, 16)))

    def test_multiple_components_rejected(self):
        m = np.zeros((32, 32))
        m[4:8, 4:8] = 1.0
        m[20:24, 20:24] = 1.0
        with pytest.raises(MultipleComponentsError):
            shape_complexity(m)


class TestBinning:
    def test_starter_library_partitions_evenly(self, silhouette_entries):
        sizes = [sum(e.severity_bin == b for e in silhouette_entries) for b in (1, 2, 3)]
        assert sizes == [4, 4, 4]

    def test_three_masks_one_per_bin(self):
        masks = [("a", ScalarField(disk_mask(64, 20))),
                 ("b", ScalarField(starter_silhouettes(64)["star5"].data)),
                 ("c", ScalarField(starter_silhouettes(64)["hand"].data))]
        entries = bin_silhouettes(masks)
        by_id = {e.id: e.severity_bin for e in entries}
        assert by_id == {"a": 1, "b": 2, "c": 3}

    def test_four_masks_split_ceil_first(self):
        shapes = starter_silhouettes(64)
        masks = [(n, shapes[n]) for n in ("disk", "ellipse", "star5", "hand")]
        entries = bin_silhouettes(masks)
        sizes = [sum(e.severity_bin == b for e in entries) for b in (1, 2, 3)]
        assert sizes == [2, 1, 1]

    def test_partition_properties(self, silhouette_entries):
        ids = [e.id for e in silhouette_entries]
        assert len(set(ids)) == len(ids) == 12
        complexities = [e.complexity for e in silhouette_entries]
        # bins respect the complexity ordering
        for a, b in zip(silhouette_entries, silhouette_entries[1:]):
            if a.severity_bin == b.severity_bin:
                continue
        bin_of = {}
        for e in silhouette_entries:
            bin_of.setdefault(e.severity_bin, []).append(e.complexity)
        assert max(bin_of[1]) <= min(bin_of[2]) + 1e-12
        assert max(bin_of[2]) <= min(bin_of[3]) + 1e-12
        assert sorted(complexities) == sorted(complexities)

    def test_132_masks_bin_44_each(self):
        # rank-tercile arithmetic on a synthetic complexity ladder
        base = disk_mask(48, 14)
        entries = bin_silhouettes([(f"m{i:03d}", ScalarField(base)) for i in range(132)])
        sizes = [sum(e.severity_bin == b for e in entries) for b in (1, 2, 3)]
        assert sizes == [44, 44, 44]


class TestRescale:
    @pytest.mark.parametrize("severity", [1, 2, 3])
    def test_area_lands_in_range(self, severity, silhouette_entries):
        rng = np.random.default_rng(severity)
        lo, hi = AREA_RANGES[severity]
        for entry in silhouette_entries[:6]:
            scaled = rescale_mask_to_area(entry.mask, AREA_RANGES[severity],
                                          (64, 64), rng)
            frac = mask_area_fraction(scaled)
            assert lo - AREA_TOLERANCE <= frac <= hi + AREA_TOLERANCE

    def test_target_equal_to_current_keeps_mask(self):
        mask = ScalarField(disk_mask(64, 20))
        frac = mask_area_fraction(mask)
        rng = np.random.default_rng(0)
        out = rescale_mask_to_area(mask, (frac, frac), (64, 64), rng)
        inter = ((out.data >= 0.5) & (mask.data >= 0.5)).sum()
        union = ((out.data >= 0.5) | (mask.data >= 0.5)).sum()
        assert inter / union > 0.95

    def test_rejects_bad_range(self):
        with pytest.raises(ValueError):
            rescale_mask_to_area(ScalarField(disk_mask(32, 8)), (0.0, 1.2),
                                 (32, 32), np.random.default_rng(0))

    @settings(max_examples=100, deadline=None)
    @given(severity=st.sampled_from([1, 2, 3]), seed=st.integers(0, 2 ** 31))
    def test_drawn_targets_stay_in_severity_interval(self, severity, seed):
        rng = np.random.default_rng(seed)
        lo, hi = AREA_RANGES[severity]
        assert lo <= rng.uniform(lo, hi) < hi


class TestPlacement:
    def test_middle_square_canvas(self):
        mask = ScalarField(disk_mask(100, 20))
        placed = place_mask(mask, 2, (100, 100))
        cx, cy = mask_centroid(placed)
        assert abs(cx - 50.0) <= 1.0 and abs(cy - 50.0) <= 1.0

    def test_top_tall_canvas(self):
        # canvas 120 rows x 60 cols: top target is (x, y) = (30, 20)
        mask = ScalarField(disk_mask(60, 10)[np.newaxis, :, :].repeat(2, 0)
                           .reshape(120, 60)[:120])
        canvas = np.zeros((120, 60))
        canvas[40:60, 20:40] = disk_mask(20, 9)
        placed = place_mask(ScalarField(canvas), 1, (120, 60))
        cx, cy = mask_centroid(placed)
        assert abs(cx - 30.0) <= 1.0 and abs(cy - 20.0) <= 1.0

    def test_bottom_position(self):
        canvas = np.zeros((90, 90))
        canvas[10:30, 10:30] = 1.0
        placed = place_mask(ScalarField(canvas), 3, (90, 90))
        cx, cy = mask_centroid(placed)
        assert abs(cx - 45.0) <= 1.0 and abs(cy - 75.0) <= 1.0

    def test_already_centered_is_identity(self):
        mask = disk_mask(64, 12)  # centered on (31.5, 31.5)
        placed = place_mask(ScalarField(mask), 2, (64, 64))
        assert np.array_equal(placed.data, mask)

    def test_location_targets(self):
        assert location_target(1, (120, 60)) == (30.0, 20.0)
        assert location_target(2, (100, 100)) == (50.0, 50.0)
        assert location_target(3, (60, 60)) == (30.0, 50.0)


class TestGrid:
    @pytest.fixture(scope="class")
    def grid_output(self, silhouette_entries):
        rng = np.random.default_rng(5)
        clean = random_image(rng, 64, 64)
        depth = synthetic_face_depth(64, 64)
        return generate_grid(clean, depth, silhouette_entries, seed=2024,
                             source_name="face.png")

    def test_exactly_81_cells(self, grid_output):
        assert len(grid_output) == 81
        codes = {rec.factor_spec.code for _, _, rec in grid_output}
        assert len(codes) == 81

    def test_manifest_values_in_declared_ranges(self, grid_output):
        for _, _, rec in grid_output:
            lo, hi = ALPHA_RANGES[rec.factor_spec.intensity]
            assert lo <= rec.alpha < hi
            lo, hi = AREA_RANGES[rec.factor_spec.size]
            assert lo - AREA_TOLERANCE <= rec.area_fraction <= hi + AREA_TOLERANCE

    def test_deterministic(self, silhouette_entries):
        rng = np.random.default_rng(5)
        clean = random_image(rng, 64, 64)
        depth = synthetic_face_depth(64, 64)
        a = generate_grid(clean, depth, silhouette_entries, seed=7)
        b = generate_grid(clean, depth, silhouette_entries, seed=7)
        for (img_a, mask_a, rec_a), (img_b, mask_b, rec_b) in zip(a, b):
            assert np.array_equal(img_a.data, img_b.data)
            assert np.array_equal(mask_a.data, mask_b.data)
            assert rec_a.to_json() == rec_b.to_json()

    def test_record_roundtrip(self, grid_output):
        _, _, rec = grid_output[13]
        again = DatasetManifestRecord.from_json(rec.to_json())
        assert again.to_json() == rec.to_json()

    def test_manifest_key_order(self, grid_output):
        _, _, rec = grid_output[0]
        keys = list(rec.to_json().keys())
        assert keys[:8] == ["source_image", "output_image", "factor_spec", "alpha",
                            "mask_id", "area_fraction", "centroid", "complexity"]


class TestLibraryIO:
    def test_load_from_directory(self, tmp_path):
        write_starter_library(tmp_path / "sils", size=96)
        lib = load_silhouette_library(tmp_path / "sils")
        assert len(lib) == 12
        assert [sid for sid, _ in lib] == sorted(sid for sid, _ in lib)

    def test_empty_directory_rejected(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(EmptyMaskError):
            load_silhouette_library(tmp_path / "empty")
