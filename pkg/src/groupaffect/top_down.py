"""Scene-descriptor Bayesian network.

The emotion node ``y`` is the root; each vocabulary descriptor is a Bernoulli
child with CPT ``P(x_i = true | y)``.  Optionally a three-state child carries
the bottom-up classifier's predicted class (see :mod:`groupaffect.fusion`).
Descriptors that are not reported for an image stay unobserved.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import CLASSES, NUM_CLASSES
from .errors import (BNFormatError, InputError, ManifestError, VocabularyTooLargeError,
                     ZeroLikelihoodError)

BRUTE_FORCE_LIMIT = 20


@dataclass(frozen=True)
class DescriptorCounts:
    vocabulary: tuple
    n_true: np.ndarray        # (V, 3) images per class listing the descriptor
    class_counts: np.ndarray  # (3,)

    @property
    def n_false(self):
        return self.class_counts[None, :] - self.n_true


@dataclass(frozen=True)
class ScenePosteriorModel:
    prior: np.ndarray          # (3,)
    vocabulary: tuple
    p_true: np.ndarray         # (V, 3): P(x_i = true | y)
    alpha: float = 1.0
    cnn_cpt: np.ndarray | None = None  # (3, 3): [k, y] = P(cnn = k | y)
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {d: i for i, d in enumerate(self.vocabulary)})

    def index(self, descriptor):
        return self._index.get(descriptor)

    def cpt(self, descriptor):
        """3 x 2 table with columns ``P(true | y)``, ``P(false | y)``."""
        p = self.p_true[self._index[descriptor]]
        return np.stack([p, 1.0 - p], axis=1)

    def with_cnn_cpt(self, table):
        return ScenePosteriorModel(self.prior, self.vocabulary, self.p_true, self.alpha,
                                   None if table is None else np.asarray(table, dtype=np.float64))


@dataclass(frozen=True)
class Evidence:
    observed: tuple                # sorted vocabulary descriptors observed true
    unknown: tuple = ()            # reported descriptors outside the vocabulary
    cnn_class: int | None = None


def count_from_manifest(records) -> DescriptorCounts:
    """Per-class image counts of each descriptor (presence per image)."""
    class_counts = np.zeros(NUM_CLASSES, dtype=np.int64)
    per_image = []
    for i, rec in enumerate(records):
        if rec.label is None:
            raise ManifestError(f"record {i} ({rec.image_path}) has no label")
        y = rec.label_index
        class_counts[y] += 1
        per_image.append((y, set(rec.descriptors)))
    vocabulary = tuple(sorted(set().union(*(s for _, s in per_image))))
    index = {d: i for i, d in enumerate(vocabulary)}
    n_true = np.zeros((len(vocabulary), NUM_CLASSES), dtype=np.int64)
    for y, present in per_image:
        for d in present:
            n_true[index[d], y] += 1
    return DescriptorCounts(vocabulary, n_true, class_counts)


def fit(counts: DescriptorCounts, smoothing_alpha=1.0) -> ScenePosteriorModel:
    """Smoothed maximum-likelihood CPTs; ``smoothing_alpha=0`` gives raw count ratios."""
    alpha = float(smoothing_alpha)
    if alpha < 0:
        raise InputError("smoothing_alpha must be >= 0")
    cc = np.asarray(counts.class_counts)
    if np.any(cc < 1):
        empty = [CLASSES[i] for i in np.flatnonzero(cc < 1)]
        raise InputError(f"no training images for class(es) {empty}")
    n_true = np.asarray(counts.n_true, dtype=np.float64)
    p_true = (n_true + alpha) / (cc[None, :] + 2 * alpha)
    prior = cc / cc.sum()
    return ScenePosteriorModel(prior, tuple(counts.vocabulary), p_true, alpha)


def set_evidence(model: ScenePosteriorModel, descriptors, cnn_class=None) -> Evidence:
    seen, unknown = set(), []
    for d in descriptors:
        d = d.strip().lower()
        if not d:
            continue
        if model.index(d) is None:
            if d not in unknown:
                unknown.append(d)
        else:
            seen.add(d)
    if cnn_class is not None and cnn_class not in range(NUM_CLASSES):
        raise InputError(f"cnn_class must be in 0..{NUM_CLASSES - 1}, got {cnn_class}")
    return Evidence(tuple(sorted(seen)), tuple(unknown), cnn_class)


def log_likelihood(model: ScenePosteriorModel, evidence: Evidence):
    """Unnormalized log posterior per class."""
    with np.errstate(divide="ignore"):
        logp = np.log(model.prior).copy()
        if evidence.observed:
            rows = [model.index(d) for d in evidence.observed]
            logp += np.log(model.p_true[rows]).sum(axis=0)
        if evidence.cnn_class is not None:
            if model.cnn_cpt is None:
                raise InputError("evidence carries a cnn class but the model has no cnn_cpt")
            logp += np.log(model.cnn_cpt[evidence.cnn_class])
    return logp


def infer_posterior(model: ScenePosteriorModel, evidence: Evidence):
    """Exact posterior over the emotion node.

    Unobserved leaves sum out to one, so eliminating them leaves the product
    of the prior and the observed children's CPT entries.
    """
    logp = log_likelihood(model, evidence)
    top = np.max(logp)
    if not np.isfinite(top):
        raise ZeroLikelihoodError(
            "zero-likelihood evidence: every class has probability 0 "
            f"(observed={list(evidence.observed)}, cnn_class={evidence.cnn_class}); use alpha > 0")
    w = np.exp(logp - top)
    return w / w.sum()


def predict(model, descriptors, cnn_class=None):
    post = infer_posterior(model, set_evidence(model, descriptors, cnn_class))
    return post, int(np.argmax(post))


def brute_force_joint(model: ScenePosteriorModel, evidence: Evidence):
    """Posterior by summing the full joint over every unobserved node.

    Exponential in the vocabulary size; a test oracle for small models.
    """
    V = len(model.vocabulary)
    if V > BRUTE_FORCE_LIMIT:
        raise VocabularyTooLargeError(f"vocabulary of {V} exceeds brute-force limit {BRUTE_FORCE_LIMIT}")
    observed = {model.index(d) for d in evidence.observed}
    if evidence.cnn_class is not None and model.cnn_cpt is None:
        raise InputError("evidence carries a cnn class but the model has no cnn_cpt")
    use_cnn = model.cnn_cpt is not None
    cnn_states = range(NUM_CLASSES) if use_cnn else [None]
    totals = [0.0] * NUM_CLASSES
    for y in range(NUM_CLASSES):
        prior = float(model.prior[y])
        for xs in itertools.product((True, False), repeat=V):
            if any(not xs[i] for i in observed):
                continue
            p = prior
            for i, x in enumerate(xs):
                pt = float(model.p_true[i, y])
                p *= pt if x else 1.0 - pt
            for k in cnn_states:
                if k is None:
                    totals[y] += p
                elif evidence.cnn_class is None or evidence.cnn_class == k:
                    totals[y] += p * float(model.cnn_cpt[k, y])
    z = sum(totals)
    if z == 0.0:
        raise ZeroLikelihoodError("zero-likelihood evidence")
    return np.array([t / z for t in totals])


def to_json(model: ScenePosteriorModel):
    return {
        "classes": list(CLASSES),
        "prior": [float(v) for v in model.prior],
        "alpha": model.alpha,
        "cpt": {d: [float(v) for v in model.p_true[i]] for i, d in enumerate(model.vocabulary)},
        "cnn_cpt": None if model.cnn_cpt is None else [[float(v) for v in row] for row in model.cnn_cpt],
    }


def from_json(obj) -> ScenePosteriorModel:
    try:
        if list(obj["classes"]) != list(CLASSES):
            raise BNFormatError(f"class order {obj['classes']} differs from {list(CLASSES)}")
        prior = np.asarray(obj["prior"], dtype=np.float64)
        vocab = tuple(obj["cpt"].keys())
        p_true = np.asarray([obj["cpt"][d] for d in vocab], dtype=np.float64).reshape(len(vocab), NUM_CLASSES)
        cnn = obj.get("cnn_cpt")
        cnn = None if cnn is None else np.asarray(cnn, dtype=np.float64)
        alpha = float(obj["alpha"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BNFormatError(f"malformed BN parameter file: {exc!r}") from None
    if prior.shape != (NUM_CLASSES,) or abs(prior.sum() - 1.0) > 1e-9:
        raise BNFormatError("prior must be a 3-vector summing to 1")
    if np.any((p_true < 0) | (p_true > 1)):
        raise BNFormatError("cpt entries must lie in [0, 1]")
    if cnn is not None and (cnn.shape != (NUM_CLASSES, NUM_CLASSES)
                            or np.any(np.abs(cnn.sum(axis=0) - 1.0) > 1e-9)):
        raise BNFormatError("cnn_cpt must be 3x3 with columns summing to 1")
    return ScenePosteriorModel(prior, vocab, p_true, alpha, cnn)


def save_bn(model, path):
    Path(path).write_text(json.dumps(to_json(model), indent=2) + "\n", encoding="utf-8")


def load_bn(path):
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise BNFormatError(f"cannot read BN file {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise BNFormatError(f"{path} is not valid JSON: {exc.msg}") from None
    return from_json(obj)
