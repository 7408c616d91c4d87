"""Manifest ingestion and face-crop preprocessing.

A manifest is JSON Lines, one group image per line::

    {"image": "img/0001.png", "label": "positive",
     "faces": [[x, y, w, h], ...], "descriptors": ["party", "fun"]}

``label``, ``faces`` and ``descriptors`` are optional.  Relative image paths
resolve against the manifest's directory.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import class_index
from .errors import EmptyDatasetError, ImageReadError, InvalidBoxError, ManifestError
from .imaging import resize_bilinear

log = logging.getLogger(__name__)

FACE_SIZE = 64
SUPPORTED_FORMATS = ("PNG", "JPEG")


@dataclass(frozen=True)
class FaceBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"face box needs positive extents, got {self}")

    @property
    def area(self):
        return self.w * self.h

    def clamp(self, height, width):
        """Intersect with the image; ``None`` if nothing is left."""
        x0, y0 = max(self.x, 0), max(self.y, 0)
        x1, y1 = min(self.x + self.w, width), min(self.y + self.h, height)
        if x1 <= x0 or y1 <= y0:
            return None
        return FaceBox(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class ImageRecord:
    image_path: str
    label: str | None = None
    faces: tuple = ()
    descriptors: tuple = ()

    @property
    def label_index(self):
        return None if self.label is None else class_index(self.label)


def clean_descriptors(raw):
    out = []
    for d in raw:
        if not isinstance(d, str):
            raise ManifestError(f"descriptor {d!r} is not a string")
        d = d.strip().lower()
        if d:
            out.append(d)
    return tuple(out)


def parse_record(obj, base_dir=None, line_no=None):
    where = f"line {line_no}" if line_no is not None else "record"
    if not isinstance(obj, dict) or "image" not in obj:
        raise ManifestError(f"{where}: expected an object with an 'image' field")
    label = obj.get("label")
    if label is not None:
        label = str(label).strip().lower()
        class_index(label)
    faces = []
    for j, box in enumerate(obj.get("faces") or []):
        try:
            x, y, w, h = (int(v) for v in box)
            faces.append(FaceBox(x, y, w, h))
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"{where}: face {j} is not a valid [x, y, w, h] box ({exc})") from None
    path = str(obj["image"])
    if base_dir is not None and not Path(path).is_absolute():
        path = str(Path(base_dir) / path)
    return ImageRecord(path, label, tuple(faces), clean_descriptors(obj.get("descriptors") or []))


def read_manifest(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc.strerror or exc}") from None
    records = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{n}: invalid JSON ({exc.msg})") from None
        records.append(parse_record(obj, base_dir=path.parent, line_no=n))
    return records


def record_to_json(rec: ImageRecord, base_dir=None):
    image = rec.image_path
    if base_dir is not None:
        try:
            image = str(Path(image).relative_to(base_dir))
        except ValueError:
            pass
    obj = {"image": image}
    if rec.label is not None:
        obj["label"] = rec.label
    obj["faces"] = [[b.x, b.y, b.w, b.h] for b in rec.faces]
    obj["descriptors"] = list(rec.descriptors)
    return obj


def write_manifest(records, path):
    path = Path(path)
    lines = [json.dumps(record_to_json(r, path.parent), sort_keys=True) for r in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_image(path):
    """Decode a PNG or JPEG into an ``H x W x 3`` uint8 array."""
    try:
        with Image.open(path) as im:
            if im.format not in SUPPORTED_FORMATS:
                raise ImageReadError(f"{path}: unsupported image format {im.format}")
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageReadError(f"cannot read image {path}: {exc}") from None


def crop_faces(image, boxes):
    """Pixel-exact crops, one per box.  Boxes are clamped to the image first."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] == 0 or image.shape[1] == 0:
        raise ValueError(f"expected a non-empty H x W x C image, got shape {image.shape}")
    h, w = image.shape[:2]
    crops = []
    for i, box in enumerate(boxes):
        c = box.clamp(h, w)
        if c is None:
            raise InvalidBoxError(f"face box {i} {box} lies outside the {w}x{h} image", index=i)
        crops.append(image[c.y:c.y + c.h, c.x:c.x + c.w].copy())
    return crops


def scale_to_64(crop, size=FACE_SIZE):
    """Fit the longest side to ``size`` (bilinear) and center on a zero canvas."""
    crop = np.asarray(crop, dtype=np.float64)
    h, w = crop.shape[:2]
    if h < 1 or w < 1:
        raise ValueError("crop must be at least 1x1")
    if h >= w:
        nh, nw = size, max(1, int(round(w * size / h)))
    else:
        nh, nw = max(1, int(round(h * size / w))), size
    scaled = crop if (nh, nw) == (h, w) else resize_bilinear(crop, nh, nw)
    canvas = np.zeros((size, size) + crop.shape[2:], dtype=np.float64)
    top, left = (size - nh) // 2, (size - nw) // 2
    canvas[top:top + nh, left:left + nw] = scaled
    return canvas


def normalize(img):
    return np.asarray(img, dtype=np.float64) / 255.0


def preprocess_face(crop, dtype=np.float32):
    return normalize(scale_to_64(crop)).astype(dtype)


@dataclass
class IsolatedFaces:
    """Face crops with inherited labels and a face -> (record, box) provenance index."""

    images: np.ndarray
    labels: np.ndarray
    provenance: list
    skipped: list = field(default_factory=list)
    rejected_boxes: list = field(default_factory=list)

    def class_counts(self, num_classes=3):
        return np.bincount(self.labels, minlength=num_classes)


def extract_faces(record: ImageRecord, image=None):
    """Preprocessed faces of one record plus ``(kept_box_indices, rejected)``."""
    if not record.faces:
        return [], [], []
    if image is None:
        image = load_image(record.image_path)
    faces, kept, rejected = [], [], []
    for j, box in enumerate(record.faces):
        try:
            (crop,) = crop_faces(image, [box])
        except InvalidBoxError as exc:
            rejected.append((j, str(exc)))
            continue
        faces.append(preprocess_face(crop))
        kept.append(j)
    return faces, kept, rejected


def build_isolated_dataset(records, require_labels=True):
    images, labels, provenance, skipped, rejected_boxes = [], [], [], [], []
    for r, rec in enumerate(records):
        if require_labels and rec.label is None:
            raise ManifestError(f"record {r} ({rec.image_path}) has no label")
        if not rec.faces:
            skipped.append((r, "no face boxes"))
            continue
        try:
            faces, kept, rejected = extract_faces(rec)
        except ImageReadError as exc:
            log.warning("skipping record %d: %s", r, exc)
            skipped.append((r, str(exc)))
            continue
        rejected_boxes += [(r, j, msg) for j, msg in rejected]
        if not faces:
            skipped.append((r, "all face boxes rejected"))
        for face, j in zip(faces, kept):
            images.append(face)
            labels.append(rec.label_index if rec.label is not None else -1)
            provenance.append((r, j))
    if not images:
        raise EmptyDatasetError("manifest produced no faces")
    return IsolatedFaces(np.stack(images), np.asarray(labels, dtype=np.int64), provenance,
                         skipped, rejected_boxes)
