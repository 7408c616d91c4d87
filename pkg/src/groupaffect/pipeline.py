"""End-to-end pipeline pieces shared by the CLI and the acceptance suite."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import CLASSES, NUM_CLASSES
from . import rng as rngmod
from .bottom_up import predict_group
from .errors import EmptyDatasetError, InputError
from .evaluation import evaluate
from .fusion import FusionMode, build_cnn_cpt, fuse
from .preprocess import IsolatedFaces, extract_faces
from .top_down import infer_posterior, set_evidence

log = logging.getLogger(__name__)

ARCHIVE_FILES = ("faces.npy", "labels.npy", "provenance.json")


# -- isolated-faces archive -------------------------------------------------

def save_archive(ds: IsolatedFaces, out_dir, records=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    np.save(out_dir / "faces.npy", ds.images.astype(np.float32), allow_pickle=False)
    np.save(out_dir / "labels.npy", ds.labels.astype(np.int64), allow_pickle=False)
    prov = [{"record": r, "box": b,
             "image": records[r].image_path if records is not None else None}
            for r, b in ds.provenance]
    summary = {
        "n_faces": int(len(ds.labels)),
        "class_counts": {c: int(n) for c, n in zip(CLASSES, ds.class_counts())},
        "skipped_records": [{"record": r, "reason": why} for r, why in ds.skipped],
        "rejected_boxes": [{"record": r, "box": b, "reason": why} for r, b, why in ds.rejected_boxes],
        "provenance": prov,
    }
    (out_dir / "provenance.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")


def load_archive(path):
    path = Path(path)
    try:
        images = np.load(path / "faces.npy", allow_pickle=False)
        labels = np.load(path / "labels.npy", allow_pickle=False)
        meta = json.loads((path / "provenance.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read archive {path}: {exc}") from None
    if images.ndim != 4 or len(images) != len(labels):
        raise InputError(f"archive {path} is inconsistent: {images.shape} faces, {labels.shape} labels")
    prov = [(p["record"], p["box"]) for p in meta.get("provenance", [])]
    return IsolatedFaces(images, labels, prov)


def split_by_source(ds: IsolatedFaces, val_fraction=0.2, seed=0):
    """Train/val index arrays; faces from one source image stay on one side."""
    sources = sorted({r for r, _ in ds.provenance})
    if len(sources) < 2:
        raise EmptyDatasetError("need faces from at least two source images to split")
    perm = rngmod.stream(seed, rngmod.SPLIT).permutation(len(sources))
    n_val = min(max(1, int(round(val_fraction * len(sources)))), len(sources) - 1)
    val_sources = {sources[i] for i in perm[:n_val]}
    is_val = np.array([r in val_sources for r, _ in ds.provenance])
    return np.flatnonzero(~is_val), np.flatnonzero(is_val)


# -- per-record prediction --------------------------------------------------

@dataclass
class RecordResult:
    face_probs: list
    bottom: object          # GroupPrediction
    top: np.ndarray
    fused: np.ndarray | None
    fused_class: int | None
    unknown_descriptors: tuple
    warnings: list

    def to_json(self, image=None):
        b = self.bottom
        out = {
            "bottom_up": {"probs": None if b.mean_probs is None else [float(v) for v in b.mean_probs],
                          "class": None if b.predicted is None else CLASSES[b.predicted],
                          "n_faces": b.n_faces},
            "top_down": {"probs": [float(v) for v in self.top], "class": CLASSES[int(np.argmax(self.top))]},
            "fused": {"probs": None if self.fused is None else [float(v) for v in self.fused],
                      "class": None if self.fused_class is None else CLASSES[self.fused_class]},
            "faces": [[float(v) for v in p] for p in self.face_probs],
            "unknown_descriptors": list(self.unknown_descriptors),
            "warnings": list(self.warnings),
        }
        if image is not None:
            out = {"image": image, **out}
        return out


def run_record(record, models, bn, mode: FusionMode | None, weight_by_area=False):
    faces, kept, rejected = extract_faces(record)
    warnings = [f"face box {j} rejected: {msg}" for j, msg in rejected]
    weights = [record.faces[j].area for j in kept] if weight_by_area and faces else None
    face_preds, group = predict_group(models, faces, weights=weights, sources=kept)
    evidence = set_evidence(bn, record.descriptors)
    top = infer_posterior(bn, evidence)
    if not faces and not evidence.observed:
        warnings.append("no faces and no known descriptors: top-down posterior is the prior")
    fused, fused_class = (None, None)
    if mode is not None:
        fused, fused_class = fuse(mode, group, bn, record.descriptors)
    return RecordResult([p.probs for p in face_preds], group, top, fused, fused_class,
                        evidence.unknown, warnings)


def run_records(records, models, bn, mode):
    return [run_record(r, models, bn, mode) for r in records]


def bottom_up_confusion(results, records):
    """3x3 counts ``[true, predicted]`` over records with at least one face."""
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for res, rec in zip(results, records):
        if rec.label is None:
            raise InputError(f"record {rec.image_path} has no label")
        if res.bottom.predicted is not None:
            counts[rec.label_index, res.bottom.predicted] += 1
    return counts


def calibrate(models, records, bn, alpha=1.0):
    """Attach the classifier's validation confusion (as a CPT) to ``bn``."""
    results = [run_record(r, models, bn, None) for r in records]
    counts = bottom_up_confusion(results, records)
    return bn.with_cnn_cpt(build_cnn_cpt(counts, alpha)), counts


def evaluate_results(results, records):
    """Reports for the bottom-up, top-down and fused predictions."""
    truth = []
    for rec in records:
        if rec.label is None:
            raise InputError(f"record {rec.image_path} has no label")
        truth.append(rec.label_index)
    return {
        "bottom_up": evaluate([(t, r.bottom.predicted) for t, r in zip(truth, results)]),
        "top_down": evaluate([(t, int(np.argmax(r.top))) for t, r in zip(truth, results)]),
        "fused": evaluate([(t, r.fused_class) for t, r in zip(truth, results)]),
    }
