"""Mini-batch training with Adam, augmentation and early stopping."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from .. import rng as rngmod
from ..errors import EmptyDatasetError, ShapeError
from .augment import AugmentConfig, augment_batch
from .layers import backward, forward
from .losses import cross_entropy
from .model import ModelSpec, check_params
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    max_epochs: int = 20
    early_stop_patience: int = 3
    seed: int = 0
    learning_rate: float = 0.001
    augmentation: AugmentConfig | None = field(default_factory=AugmentConfig)
    # gradient of a batch is accumulated over chunks of this size to bound memory
    micro_batch: int = 32

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1 or self.early_stop_patience < 1:
            raise ValueError("max_epochs and early_stop_patience must be >= 1")
        if self.micro_batch < 1:
            raise ValueError("micro_batch must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class History:
    epochs: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def to_rows(self):
        return [(r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc) for r in self.epochs]


class EarlyStopping:
    """Tracks the best validation loss; ``update`` returns True when training should stop."""

    def __init__(self, patience):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch, val_loss):
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience


def predict_proba(spec: ModelSpec, params, images, chunk=64):
    """Inference-mode class probabilities for a batch of images."""
    images = np.asarray(images)
    if images.ndim == len(spec.input_shape):
        images = images[None]
    if images.shape[1:] != spec.input_shape:
        raise ShapeError(f"model expects {spec.input_shape} inputs, got {images.shape[1:]}",
                         layer_index=0, expected=spec.input_shape, got=images.shape[1:])
    dtype = next(iter(params.values()))["W"].dtype if params else np.float64
    out = [forward(spec, params, images[i:i + chunk].astype(dtype, copy=False))[0]
           for i in range(0, len(images), chunk)]
    return np.concatenate(out) if out else np.zeros((0, spec.num_classes))


def evaluate_split(spec, params, images, labels):
    probs = predict_proba(spec, params, images)
    loss, _ = cross_entropy(probs, labels, check=False)
    acc = float(np.mean(np.argmax(probs, axis=1) == labels))
    return loss, acc


def _dropout_rngs(spec, seed, epoch, batch):
    return {i: rngmod.stream(seed, rngmod.DROPOUT, epoch, batch, i)
            for i, layer in enumerate(spec.layers) if layer.kind == "dropout"}


def batch_gradients(spec, params, x, y, n_total, seed=0, epoch=0, batch=0, micro_batch=32):
    """Loss and parameter gradients for one mini-batch, accumulated over micro-chunks.

    ``n_total`` is the batch size the mean loss is taken over.
    """
    grads = None
    loss_sum = 0.0
    for c, start in enumerate(range(0, len(x), micro_batch)):
        xb, yb = x[start:start + micro_batch], y[start:start + micro_batch]
        rngs = _dropout_rngs(spec, seed, epoch, batch * 100_000 + c)
        logits_probs, caches = forward(spec, params, xb, training=True, rngs=rngs,
                                       stop_before_softmax=True)
        probs = _softmax_rows(logits_probs)
        loss, grad_logits = cross_entropy(probs, yb, check=False)
        scale = len(xb) / n_total
        loss_sum += loss * scale
        _, g = backward(spec, caches, grad_logits * scale)
        if grads is None:
            grads = g
        else:
            for i, gp in g.items():
                for name in gp:
                    grads[i][name] += gp[name]
    return loss_sum, grads


def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fit(spec: ModelSpec, params, train_x, train_y, val_x, val_y, cfg: TrainConfig,
        on_epoch=None):
    """Train ``params`` (not modified) and return ``(best_params, history)``.

    Batches are reshuffled every epoch from the seeded stream; augmentation is
    applied to training batches only.  The returned parameters are those of
    the epoch with the lowest validation loss.
    """
    train_x = np.asarray(train_x)
    train_y = np.asarray(train_y, dtype=np.int64)
    val_y = np.asarray(val_y, dtype=np.int64)
    if len(train_x) == 0:
        raise EmptyDatasetError("training set is empty")
    if len(val_x) == 0:
        raise EmptyDatasetError("validation set is empty")
    check_params(spec, params)
    params = copy.deepcopy(params)
    dtype = next(iter(params.values()))["W"].dtype
    train_x = train_x.astype(dtype, copy=False)
    val_x = np.asarray(val_x).astype(dtype, copy=False)

    state = AdamState(alpha=cfg.learning_rate)
    stopper = EarlyStopping(cfg.early_stop_patience)
    history = History()
    best_params = copy.deepcopy(params)
    n = len(train_x)

    for epoch in range(1, cfg.max_epochs + 1):
        order = rngmod.stream(cfg.seed, rngmod.SHUFFLE, epoch).permutation(n)
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            xb = train_x[idx]
            if cfg.augmentation is not None:
                xb = augment_batch(xb, cfg.augmentation, rngmod.stream(cfg.seed, rngmod.AUGMENT, epoch, b))
            _, grads = batch_gradients(spec, params, xb, train_y[idx], len(idx), seed=cfg.seed,
                                       epoch=epoch, batch=b, micro_batch=cfg.micro_batch)
            adam_step(state, params, grads)

        train_loss, train_acc = evaluate_split(spec, params, train_x, train_y)
        val_loss, val_acc = evaluate_split(spec, params, val_x, val_y)
        record = EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc)
        history.epochs.append(record)
        log.info("epoch %d train_loss=%.4f train_acc=%.4f val_loss=%.4f val_acc=%.4f",
                 epoch, train_loss, train_acc, val_loss, val_acc)
        if on_epoch is not None:
            on_epoch(record)

        stop = stopper.update(epoch, val_loss)
        if stopper.best_epoch == epoch:
            best_params = copy.deepcopy(params)
        if stop:
            history.stopped_early = epoch < cfg.max_epochs
            break

    history.best_epoch = stopper.best_epoch
    return best_params, history
