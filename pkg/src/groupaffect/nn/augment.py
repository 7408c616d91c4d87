from dataclasses import dataclass

import numpy as np

from ..imaging import bilinear_sample


@dataclass(frozen=True)
class AugmentConfig:
    rotation_deg_max: float = 40.0
    zoom_fraction: float = 0.1
    horizontal_flip: bool = True

    def __post_init__(self):
        if not 0 <= self.rotation_deg_max <= 180:
            raise ValueError("rotation_deg_max must lie in [0, 180]")
        if not 0 <= self.zoom_fraction < 1:
            raise ValueError("zoom_fraction must lie in [0, 1)")


def affine(image, angle_deg=0.0, zoom=1.0, flip=False):
    """Rotate by ``angle_deg`` and scale by ``zoom`` about the image center, then optionally mirror.

    Bilinear sampling; pixels mapped from outside the source are 0.
    """
    h, w = image.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    theta = np.deg2rad(angle_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    dy, dx = (yy - cy) / zoom, (xx - cx) / zoom
    # inverse map: output pixel -> source pixel
    src_y = cy + cos * dy - sin * dx
    src_x = cx + sin * dy + cos * dx
    out = bilinear_sample(image, src_y, src_x, mode="zero").astype(image.dtype, copy=False)
    if flip:
        out = out[:, ::-1]
    return np.clip(out, 0.0, 1.0)


def sample_transform(cfg: AugmentConfig, rng):
    angle = rng.uniform(-cfg.rotation_deg_max, cfg.rotation_deg_max)
    zoom = rng.uniform(1.0 - cfg.zoom_fraction, 1.0 + cfg.zoom_fraction)
    flip = bool(cfg.horizontal_flip and rng.random() < 0.5)
    return angle, zoom, flip


def augment(image, cfg: AugmentConfig, rng):
    """Random rotation, zoom and horizontal flip of one H x W x C image in [0, 1]."""
    angle, zoom, flip = sample_transform(cfg, rng)
    return affine(image, angle, zoom, flip)


def augment_batch(images, cfg: AugmentConfig, rng):
    return np.stack([augment(img, cfg, rng) for img in images])
