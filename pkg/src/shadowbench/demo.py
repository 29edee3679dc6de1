"""Synthetic demo data: smooth face-like images and a 68-point landmark template.

Real runs should use an annotated face dataset; these generators make the
toolkit (and its tests) runnable without one.
"""

import json
from pathlib import Path

import cv2
import numpy as np

from .imaging import Image, save_image
from .metrics import save_landmarks
from .silhouettes import write_starter_library
from .synth import synthetic_face_depth


def template_landmarks(height: int, width: int) -> np.ndarray:
    """A frontal 68-point layout (iBUG ordering) scaled to the canvas.

    Only the semantic anchors matter for the metrics: indices 36 and 45 are
    the outer eye corners, so the inter-ocular normalizer is well-defined.
    """
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    sx, sy = width / 2.6, height / 2.6
    pts = np.zeros((68, 2))
    jaw_ang = np.linspace(-np.pi * 0.05, np.pi * 1.05, 17)
    pts[0:17, 0] = cx - np.cos(jaw_ang) * sx
    pts[0:17, 1] = cy + np.sin(jaw_ang) * sy * 0.9
    for side, sl in ((-1, slice(17, 22)), (1, slice(22, 27))):
        xs = np.linspace(0.15, 0.62, 5) * side
        pts[sl, 0] = cx + xs[::side] * sx
        pts[sl, 1] = cy - 0.52 * sy - 0.06 * sy * np.sin(np.linspace(0, np.pi, 5))
    pts[27:31] = np.stack([np.full(4, cx), cy + np.linspace(-0.35, 0.05, 4) * sy], axis=1)
    pts[31:36] = np.stack([cx + np.linspace(-0.16, 0.16, 5) * sx,
                           np.full(5, cy + 0.16 * sy)], axis=1)
    for outer_first, sl in ((True, slice(36, 42)), (False, slice(42, 48))):
        side = -1 if outer_first else 1
        ang = np.linspace(0, 2 * np.pi, 6, endpoint=False)
        ex = cx + side * 0.40 * sx
        ey = cy - 0.30 * sy
        eye = np.stack([ex + np.cos(ang) * 0.14 * sx, ey + np.sin(ang) * 0.07 * sy],
                       axis=1)
        order = np.argsort(side * -eye[:, 0])  # outer corner first in iBUG order
        pts[sl] = eye[order]
    mouth_ang = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    pts[48:60] = np.stack([cx + np.cos(mouth_ang) * 0.26 * sx,
                           cy + 0.45 * sy + np.sin(mouth_ang) * 0.12 * sy], axis=1)
    inner_ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    pts[60:68] = np.stack([cx + np.cos(inner_ang) * 0.15 * sx,
                           cy + 0.45 * sy + np.sin(inner_ang) * 0.05 * sy], axis=1)
    return pts


def demo_face(seed: int, height: int = 64, width: int = 64) -> tuple[Image, np.ndarray]:
    """Seeded smooth face-like image plus landmarks.

    Low-frequency color noise shaded by the synthetic depth dome; values stay
    inside (0.18, 0.86) so shadow composites never saturate.  The landmark
    template is shifted per seed so annotations vary across faces.
    """
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(0.25, 0.85, (6, 6, 3))
    base = cv2.resize(coarse, (width, height), interpolation=cv2.INTER_LINEAR)
    dome = synthetic_face_depth(height, width).data[:, :, None]
    img = Image(base * (0.75 + 0.25 * dome))
    shift = rng.uniform(-1.0 / 6.0, 1.0 / 6.0, 2) * (width, height)
    return img, template_landmarks(height, width) + shift


def write_demo_tree(directory: str | Path, faces: int = 4, size: int = 64,
                    seed: int = 0) -> Path:
    """Create a runnable input tree: faces/, landmarks/, silhouettes/, config.json."""
    directory = Path(directory)
    (directory / "faces").mkdir(parents=True, exist_ok=True)
    (directory / "landmarks").mkdir(exist_ok=True)
    write_starter_library(directory / "silhouettes")
    for i in range(faces):
        img, pts = demo_face(seed + i, size, size)
        save_image(img, directory / "faces" / f"face{i:03d}.png")
        save_landmarks(pts, directory / "landmarks" / f"face{i:03d}.json")
    config = {
        "seed": seed,
        "input_dir": str(directory / "faces"),
        "silhouette_dir": str(directory / "silhouettes"),
        "landmark_dir": str(directory / "landmarks"),
        "output_dir": str(directory / "out"),
    }
    config_path = directory / "config.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return config_path
