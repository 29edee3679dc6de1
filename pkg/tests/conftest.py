import numpy as np
import pytest

from shadowbench.factors import bin_silhouettes
from shadowbench.imaging import Image, ScalarField
from shadowbench.silhouettes import starter_silhouettes
from shadowbench.synth import synthetic_face_depth


@pytest.fixture(scope="session")
def silhouette_entries():
    return bin_silhouettes(sorted(starter_silhouettes().items()))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, h, w, lo=0.15, hi=0.9):
    """Image with interior values so composites never clamp."""
    return Image(rng.uniform(lo, hi, (h, w, 3)))


def random_mask(rng, h, w):
    """Continuous mask with values kept away from the 0.5 binarization edge."""
    m = rng.uniform(0.0, 1.0, (h, w))
    near = np.abs(m - 0.5) < 0.03
    m[near] = np.where(m[near] >= 0.5, 0.56, 0.44)
    return m


def blob_mask(rng, h, w, radius_frac=0.3):
    """Random soft-edged binary blob with a single component."""
    cy = rng.uniform(0.35, 0.65) * h
    cx = rng.uniform(0.35, 0.65) * w
    yy, xx = np.mgrid[0:h, 0:w]
    ang = np.arctan2(yy - cy, xx - cx)
    wobble = 1.0 + 0.25 * np.cos(3 * ang + rng.uniform(0, 2 * np.pi))
    rad = np.hypot(yy - cy, xx - cx)
    return (rad <= radius_frac * min(h, w) * wobble).astype(np.float64)


@pytest.fixture
def small_scene(rng):
    h = w = 16
    return {
        "clean": random_image(rng, h, w),
        "mask": ScalarField(random_mask(rng, h, w)),
        "depth": synthetic_face_depth(h, w),
    }
