import numpy as np

from ..errors import NotNormalizedError

PROB_FLOOR = 1e-12


def cross_entropy(probs, labels, check=True):
    """Mean categorical cross-entropy and its gradient w.r.t. the pre-softmax logits.

    The gradient is the fused softmax + cross-entropy form ``(p - onehot) / batch``.
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ValueError(f"probs {probs.shape} and labels {labels.shape} disagree")
    if check:
        sums = probs.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-6)
        if bad.size:
            raise NotNormalizedError(f"row {bad[0]} sums to {sums[bad[0]]!r}, not 1")
        if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
            raise ValueError(f"labels must lie in [0, {probs.shape[1]})")
    n = probs.shape[0]
    picked = probs[np.arange(n), labels]
    loss = float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1
    return loss, grad / n
