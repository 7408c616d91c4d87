"""Bilinear resampling shared by preprocessing and augmentation."""

import numpy as np


def bilinear_sample(img, ys, xs, mode="zero"):
    """Sample ``img`` (H x W x C) at fractional pixel coordinates.

    ``ys``/``xs`` are arrays of equal shape in pixel-center coordinates.
    ``mode="zero"`` treats everything outside the image as 0; ``mode="edge"``
    clamps to the border pixels.
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    wy = (ys - y0).astype(img.dtype if img.dtype.kind == "f" else np.float64)
    wx = (xs - x0).astype(wy.dtype)
    out = np.zeros(ys.shape + img.shape[2:], dtype=wy.dtype)
    for dy, fy in ((0, 1 - wy), (1, wy)):
        for dx, fx in ((0, 1 - wx), (1, wx)):
            yy, xx = y0 + dy, x0 + dx
            weight = fy * fx
            if mode == "edge":
                vals = img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
            else:
                inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
                vals = img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
                weight = np.where(inside, weight, 0)
            out += weight[..., None] * vals if img.ndim == 3 else weight * vals
    return out


def resize_bilinear(img, out_h, out_w):
    """Half-pixel-aligned bilinear resize with edge clamping."""
    h, w = img.shape[:2]
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return bilinear_sample(img, yy, xx, mode="edge")
