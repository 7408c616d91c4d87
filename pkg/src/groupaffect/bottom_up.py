"""Per-face classification, ensembling, and group averaging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import NUM_CLASSES
from .errors import InputError
from .nn.serialize import load_model
from .nn.train import predict_proba

DRIFT_TOL = 1e-6


class Classifier:
    """A trained network used read-only for inference."""

    def __init__(self, spec, params, name=None):
        self.spec = spec
        self.params = params
        self.name = name

    @classmethod
    def load(cls, path):
        spec, params = load_model(path)
        return cls(spec, params, name=str(path))

    def predict_proba(self, faces):
        return predict_proba(self.spec, self.params, faces).astype(np.float64)


@dataclass(frozen=True)
class FacePrediction:
    probs: np.ndarray
    source_face: object = None


@dataclass(frozen=True)
class GroupPrediction:
    mean_probs: np.ndarray | None
    predicted: int | None
    n_faces: int


def argmax_low(v):
    """Argmax with ties resolved to the lowest index."""
    return int(np.argmax(np.asarray(v)))


def _mean_probs(prob_rows):
    mean = np.mean(prob_rows, axis=0)
    total = mean.sum(axis=-1, keepdims=True)
    if np.any(np.abs(total - 1.0) > DRIFT_TOL):
        mean = mean / total
    return mean


def ensemble_proba(models, faces):
    """Unweighted mean of member probabilities for a batch of faces."""
    if not models:
        raise InputError("an ensemble needs at least one model")
    faces = np.asarray(faces)
    return _mean_probs(np.stack([m.predict_proba(faces) for m in models]))


def ensemble_predict(models, face, source_face=None):
    return FacePrediction(ensemble_proba(models, face[None])[0], source_face)


def group_average(faces, weights=None):
    """Mean face probabilities and their argmax; no faces gives ``predicted=None``.

    ``weights`` (e.g. face box areas) switches to a weighted mean.
    """
    n = len(faces)
    if n == 0:
        return GroupPrediction(None, None, 0)
    probs = np.stack([np.asarray(f.probs, dtype=np.float64) for f in faces])
    if weights is None:
        mean = probs.sum(axis=0) / n
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
            raise InputError("face weights must be non-negative with a positive sum")
        mean = (w[:, None] * probs).sum(axis=0) / w.sum()
    return GroupPrediction(mean, argmax_low(mean), n)


def predict_group(models, faces, weights=None, sources=None):
    """Face-level and group-level predictions for a list of preprocessed faces."""
    if len(faces) == 0:
        return [], GroupPrediction(None, None, 0)
    probs = ensemble_proba(models, np.stack(faces))
    sources = sources if sources is not None else range(len(faces))
    preds = [FacePrediction(p, s) for p, s in zip(probs, sources)]
    assert probs.shape[1] == NUM_CLASSES
    return preds, group_average(preds, weights)
