"""Synthetic group-image corpora for tests and the acceptance suite.

Faces are ellipses whose dominant colour channel encodes a class (red =
positive, green = neutral, blue = negative).  Scene descriptors are drawn from
class-specific word lists plus a shared pool, so the two modules see partly
independent, imperfect evidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import CLASSES, NUM_CLASSES
from . import rng as rngmod
from .preprocess import FaceBox, ImageRecord, write_manifest

CANVAS = 192
CELL = 64


def face_patch(cls, h, w, rng):
    """uint8 ``h x w x 3`` face: an ellipse dominated by channel ``cls`` on a grey field."""
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = (h - 1) / 2, (w - 1) / 2
    inside = ((yy - cy) / (0.45 * h)) ** 2 + ((xx - cx) / (0.4 * w)) ** 2 <= 1.0
    img = np.full((h, w, 3), 110.0)
    colour = rng.uniform(30, 90, size=3)
    colour[cls] = rng.uniform(150, 230)
    img[inside] = colour
    img += rng.normal(0, 12, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def face_task(n, seed, size=64, label_noise=0.0):
    """``n`` normalized ``size x size x 3`` faces and their labels, classes balanced."""
    rng = rngmod.stream(seed, rngmod.SYNTH, 0)
    labels = np.arange(n) % NUM_CLASSES
    rng.shuffle(labels)
    images = np.empty((n, size, size, 3), dtype=np.float32)
    for i, y in enumerate(labels):
        shown = _noisy_class(y, label_noise, rng)
        images[i] = face_patch(shown, size, size, rng) / 255.0
    return images, labels.astype(np.int64)


def _noisy_class(y, noise, rng):
    if noise > 0 and rng.random() < noise:
        return int((y + rng.integers(1, NUM_CLASSES)) % NUM_CLASSES)
    return int(y)


@dataclass(frozen=True)
class CorpusConfig:
    n_images: int = 600
    label_noise: float = 0.2
    no_face_rate: float = 0.1
    max_faces: int = 4
    words_per_class: int = 6
    shared_words: int = 6
    p_own: float = 0.3
    p_other: float = 0.12
    p_shared: float = 0.3


def vocabulary(cfg: CorpusConfig):
    own = {c: [f"{c[:3]}_w{i}" for i in range(cfg.words_per_class)] for c in CLASSES}
    shared = [f"shared_w{i}" for i in range(cfg.shared_words)]
    return own, shared


def sample_descriptors(y, cfg: CorpusConfig, rng):
    own, shared = vocabulary(cfg)
    words = []
    for c_idx, c in enumerate(CLASSES):
        p = cfg.p_own if c_idx == y else cfg.p_other
        words += [w for w in own[c] if rng.random() < p]
    words += [w for w in shared if rng.random() < cfg.p_shared]
    return words


def make_group_image(y, cfg: CorpusConfig, rng):
    img = rng.normal(70, 15, size=(CANVAS, CANVAS, 3))
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    n_faces = 0 if rng.random() < cfg.no_face_rate else int(rng.integers(1, cfg.max_faces + 1))
    cells = rng.permutation((CANVAS // CELL) ** 2)[:n_faces]
    boxes = []
    for cell in sorted(cells):
        r, c = divmod(int(cell), CANVAS // CELL)
        h, w = int(rng.integers(36, CELL + 1)), int(rng.integers(36, CELL + 1))
        y0 = r * CELL + int(rng.integers(0, CELL - h + 1))
        x0 = c * CELL + int(rng.integers(0, CELL - w + 1))
        img[y0:y0 + h, x0:x0 + w] = face_patch(_noisy_class(y, cfg.label_noise, rng), h, w, rng)
        boxes.append(FaceBox(x0, y0, w, h))
    return img, tuple(boxes)


def make_corpus(out_dir, seed=0, cfg: CorpusConfig = CorpusConfig(),
                splits=(("train", 0.5), ("val", 0.25), ("test", 0.25))):
    """Write PNG group images and one manifest per split; returns ``{split: manifest_path}``."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    rng = rngmod.stream(seed, rngmod.SYNTH, 1)
    labels = np.arange(cfg.n_images) % NUM_CLASSES
    rng.shuffle(labels)
    records = []
    for i, y in enumerate(labels):
        img, boxes = make_group_image(int(y), cfg, rng)
        path = out_dir / "images" / f"{i:04d}.png"
        Image.fromarray(img).save(path, format="PNG")
        records.append(ImageRecord(str(path), CLASSES[y], boxes,
                                   tuple(sample_descriptors(int(y), cfg, rng))))
    manifests, start = {}, 0
    for k, (name, frac) in enumerate(splits):
        stop = cfg.n_images if k == len(splits) - 1 else start + int(round(frac * cfg.n_images))
        manifests[name] = out_dir / f"{name}.jsonl"
        write_manifest(records[start:stop], manifests[name])
        start = stop
    return manifests
