"""Accuracy, confusion matrices with a "None" column, and random hyperparameter search."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import CLASSES, NUM_CLASSES
from . import rng as rngmod
from .errors import InputError

PREDICTED_COLUMNS = CLASSES + ("None",)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # (3, 4): true class x predicted (positive, neutral, negative, None)
    per_class_recall: np.ndarray
    n_samples: int

    def to_json(self):
        return {
            "accuracy": self.accuracy,
            "n_samples": self.n_samples,
            "classes": list(CLASSES),
            "predicted_columns": list(PREDICTED_COLUMNS),
            "confusion": self.confusion.tolist(),
            "per_class_recall": [None if math.isnan(r) else float(r) for r in self.per_class_recall],
        }

    def confusion_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\predicted", *PREDICTED_COLUMNS])
        for name, row in zip(CLASSES, self.confusion):
            w.writerow([name, *(int(v) for v in row)])
        return buf.getvalue()


def evaluate(pairs) -> EvalReport:
    """Score ``(true_class, predicted_class_or_None)`` pairs; None counts as wrong."""
    pairs = list(pairs)
    if not pairs:
        raise InputError("nothing to evaluate")
    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES + 1), dtype=np.int64)
    for truth, pred in pairs:
        col = NUM_CLASSES if pred is None else int(pred)
        confusion[int(truth), col] += 1
    n = len(pairs)
    correct = int(np.trace(confusion[:, :NUM_CLASSES]))
    rows = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        recall = np.where(rows > 0, np.diag(confusion[:, :NUM_CLASSES]) / rows, np.nan)
    return EvalReport(correct / n, confusion, recall, n)


# -- random search ----------------------------------------------------------

@dataclass(frozen=True)
class Range:
    low: float
    high: float
    log: bool = False
    integer: bool = False

    def __post_init__(self):
        if not self.low <= self.high:
            raise InputError(f"empty range [{self.low}, {self.high}]")
        if self.log and self.low <= 0:
            raise InputError("log-uniform range needs low > 0")

    def sample(self, rng):
        if self.log:
            v = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
            v = min(max(v, self.low), self.high)
        else:
            v = rng.uniform(self.low, self.high)
        return int(round(v)) if self.integer else float(v)

    def contains(self, v):
        return self.low <= v <= self.high


@dataclass(frozen=True)
class Choice:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise InputError("empty choice set")

    def sample(self, rng):
        v = self.values[int(rng.integers(len(self.values)))]
        return v.item() if hasattr(v, "item") else v

    def contains(self, v):
        return v in self.values


@dataclass(frozen=True)
class SearchSpace:
    params: dict
    trials: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise InputError("trials must be >= 1")
        if not self.params:
            raise InputError("search space has no parameters")

    @classmethod
    def from_json(cls, obj):
        """``{"trials": n, "seed": s, "params": {name: spec}}`` where a spec is
        ``{"low": a, "high": b, "log": bool, "integer": bool}`` or ``{"choice": [...]}``."""
        params = {}
        try:
            for name, spec in obj["params"].items():
                if "choice" in spec:
                    params[name] = Choice(tuple(spec["choice"]))
                else:
                    params[name] = Range(float(spec["low"]), float(spec["high"]),
                                         bool(spec.get("log", False)), bool(spec.get("integer", False)))
            return cls(params, int(obj.get("trials", 10)), int(obj.get("seed", 0)))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise InputError(f"malformed search space: {exc!r}") from None


def default_space(trials=10, seed=0):
    """Ranges around the reference training hyperparameters."""
    return SearchSpace({
        "learning_rate": Range(1e-4, 1e-2, log=True),
        "batch_size": Choice((32, 64, 128)),
        "dropout": Range(0.0, 0.6),
        "fc1": Choice((256, 512, 1024)),
        "fc2": Choice((256, 512, 1024)),
    }, trials=trials, seed=seed)


@dataclass
class Trial:
    index: int
    seed: int
    config: dict
    score: float


@dataclass
class SearchResult:
    best: Trial
    trials: list = field(default_factory=list)

    def trials_csv(self):
        names = sorted(self.best.config)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "seed", *names, "score"])
        for t in self.trials:
            w.writerow([t.index, t.seed, *(repr(t.config[n]) for n in names), repr(t.score)])
        return buf.getvalue()


def sample_config(space: SearchSpace, index: int):
    rng = rngmod.stream(space.seed, rngmod.SEARCH, index)
    return {name: space.params[name].sample(rng) for name in sorted(space.params)}


def random_search(space: SearchSpace, objective) -> SearchResult:
    """Evaluate ``objective(config, seed)`` on ``space.trials`` independent samples.

    Trial ``i`` draws its config and seed from ``(space.seed, i)`` alone, so
    trials can run in any order.  Ties go to the earliest trial.
    """
    trials = []
    for i in range(space.trials):
        config = sample_config(space, i)
        seed = int(rngmod.stream(space.seed, rngmod.SEARCH, i, 1).integers(0, 2**63))
        trials.append(Trial(i, seed, config, float(objective(config, seed))))
    best = trials[0]
    for t in trials[1:]:
        if t.score > best.score:
            best = t
    return SearchResult(best, trials)


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
