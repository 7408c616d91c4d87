"""Combining the bottom-up group prediction with the scene network.

``redirection`` feeds the bottom-up predicted class into the network as an
extra evidence node whose CPT comes from the classifier's validation
confusion matrix.  ``mean`` and ``weighted`` average the two posteriors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import NUM_CLASSES
from .errors import InputError, MissingCnnCptError
from .top_down import infer_posterior, set_evidence


@dataclass(frozen=True)
class FusionMode:
    kind: str = "redirection"
    weight: float = 0.5

    def __post_init__(self):
        if self.kind not in ("redirection", "mean", "weighted"):
            raise ValueError(f"unknown fusion mode {self.kind!r}")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"fusion weight must lie in [0, 1], got {self.weight}")

    @classmethod
    def parse(cls, text):
        """``redirection``, ``mean`` or ``weighted:W``."""
        text = text.strip().lower()
        if text.startswith("weighted"):
            _, _, w = text.partition(":")
            try:
                return cls("weighted", float(w) if w else 0.5)
            except ValueError:
                raise InputError(f"bad weighted fusion weight in {text!r}") from None
        try:
            return cls(text)
        except ValueError as exc:
            raise InputError(str(exc)) from None

    def __str__(self):
        return f"weighted:{self.weight!r}" if self.kind == "weighted" else self.kind


def build_cnn_cpt(confusion, smoothing_alpha=1.0):
    """``[k, y] = P(classifier says k | true class y)`` from ``confusion[y, k]`` counts."""
    confusion = np.asarray(confusion, dtype=np.float64)
    if confusion.shape != (NUM_CLASSES, NUM_CLASSES) or np.any(confusion < 0):
        raise InputError("confusion must be a 3x3 matrix of non-negative counts")
    alpha = float(smoothing_alpha)
    totals = confusion.sum(axis=1)
    if alpha <= 0 and np.any(totals == 0):
        raise InputError(f"true class {int(np.flatnonzero(totals == 0)[0])} has no validation "
                         "samples; use smoothing_alpha > 0")
    rows = (confusion + alpha) / (totals[:, None] + NUM_CLASSES * alpha)
    return rows.T.copy()


def fuse(mode: FusionMode, bottom, model, descriptors):
    """Fused posterior and predicted class.

    Without a bottom-up prediction (no faces) every mode falls back to the
    scene network alone.
    """
    if mode.kind == "redirection" and model.cnn_cpt is None:
        raise MissingCnnCptError("redirection fusion needs a BN file with cnn_cpt (run calibrate)")
    top = infer_posterior(model, set_evidence(model, descriptors))
    if bottom is None or bottom.predicted is None:
        return top, int(np.argmax(top))
    if mode.kind == "redirection":
        post = infer_posterior(model, set_evidence(model, descriptors, cnn_class=bottom.predicted))
    else:
        w = 0.5 if mode.kind == "mean" else mode.weight
        post = w * np.asarray(bottom.mean_probs) + (1.0 - w) * top
    return post, int(np.argmax(post))
