"""Procedural starter silhouettes for tests and demos.

Twelve single-component occluder shapes of increasing contour irregularity,
rasterized on a square canvas with a margin so the outer contour is always
closed.  Real benchmark runs should point at a directory of silhouette PNGs
instead; this set exists so the toolkit works out of the box.
"""

from pathlib import Path

import numpy as np

from .imaging import ScalarField, save_scalar_field


def _radial(size: int, radius_fn) -> np.ndarray:
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    ang = np.arctan2(yy - c, xx - c)
    rad = np.hypot(yy - c, xx - c)
    return (rad <= radius_fn(ang)).astype(np.float64)


def _ellipse(size: int, ry_frac: float, rx_frac: float) -> np.ndarray:
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    e = ((yy - c) / (ry_frac * size)) ** 2 + ((xx - c) / (rx_frac * size)) ** 2
    return (e <= 1.0).astype(np.float64)


def _polygon(size: int, n_sides: int, radius_frac: float, phase: float = 0.0) -> np.ndarray:
    # regular polygon as an angular radius profile
    r0 = radius_frac * size

    def radius(ang):
        a = (ang - phase) % (2 * np.pi / n_sides) - np.pi / n_sides
        return r0 * np.cos(np.pi / n_sides) / np.cos(a)

    return _radial(size, radius)


def _star(size: int, points: int, r_in_frac: float, r_out_frac: float) -> np.ndarray:
    r_mid = 0.5 * (r_in_frac + r_out_frac) * size
    r_amp = 0.5 * (r_out_frac - r_in_frac) * size
    return _radial(size, lambda ang: r_mid + r_amp * np.cos(points * ang))


def _blob(size: int, lobes: int, wobble: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0, 2 * np.pi, lobes)
    amps = rng.uniform(0.4, 1.0, lobes)
    amps *= wobble / amps.sum()

    def radius(ang):
        r = np.full_like(ang, 0.3)
        for k, (ph, am) in enumerate(zip(phases, amps), start=2):
            r = r + am * np.cos(k * ang + ph)
        return r * size

    return _radial(size, radius)


def _crescent(size: int) -> np.ndarray:
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    outer = np.hypot(yy - c, xx - c) <= 0.36 * size
    bite = np.hypot(yy - c, xx - (c + 0.22 * size)) <= 0.28 * size
    return (outer & ~bite).astype(np.float64)


def _hand(size: int) -> np.ndarray:
    # palm disk with five finger capsules
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    out = np.hypot(yy - (c + 0.12 * size), xx - c) <= 0.2 * size
    for k, ang in enumerate(np.linspace(-0.55 * np.pi, -0.05 * np.pi, 5)):
        length = (0.30 if k in (1, 2, 3) else 0.24) * size
        fx = c + np.cos(ang) * (0.16 * size + np.linspace(0, length, 24))
        fy = (c + 0.06 * size) + np.sin(ang) * (0.16 * size + np.linspace(0, length, 24))
        for px, py in zip(fx, fy):
            out |= np.hypot(yy - py, xx - px) <= 0.045 * size
    return out.astype(np.float64)


def starter_silhouettes(size: int = 128) -> dict[str, ScalarField]:
    """The built-in 12-shape library, keyed by id, on a size x size canvas."""
    shapes = {
        "disk": _radial(size, lambda ang: np.full_like(ang, 0.36 * size)),
        "ellipse": _ellipse(size, 0.38, 0.24),
        "capsule": _ellipse(size, 0.42, 0.17),
        "triangle": _polygon(size, 3, 0.40, phase=np.pi / 2),
        "square": _polygon(size, 4, 0.36, phase=np.pi / 4),
        "pentagon": _polygon(size, 5, 0.38),
        "blob3": _blob(size, 3, 0.10, seed=11),
        "blob5": _blob(size, 5, 0.14, seed=23),
        "leaf": _radial(size, lambda ang: (0.26 + 0.14 * np.abs(np.cos(ang))) * size),
        "crescent": _crescent(size),
        "star5": _star(size, 5, 0.18, 0.42),
        "hand": _hand(size),
    }
    return {name: ScalarField(arr, role="mask") for name, arr in shapes.items()}


def write_starter_library(directory: str | Path, size: int = 128) -> list[Path]:
    """Write the starter shapes as single-channel PNGs: <dir>/<id>.png."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, fld in sorted(starter_silhouettes(size).items()):
        p = directory / f"{name}.png"
        save_scalar_field(fld, p)
        paths.append(p)
    return paths
