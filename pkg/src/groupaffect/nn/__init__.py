"""Minimal feed-forward network engine (NHWC, numpy)."""

from .augment import AugmentConfig, augment
from .layers import Cache, backward, forward, layer_backward, layer_forward, softmax
from .losses import cross_entropy
from .model import (LayerSpec, ModelSpec, compact_model, infer_shapes, init_params,
                    param_shapes, reference_model, vgg_style)
from .optim import AdamState, adam_step
from .serialize import load_model, save_model
from .train import EarlyStopping, History, TrainConfig, fit, predict_proba

__all__ = [
    "AdamState", "AugmentConfig", "Cache", "EarlyStopping", "History", "LayerSpec", "ModelSpec",
    "TrainConfig", "adam_step", "augment", "backward", "compact_model", "cross_entropy", "fit",
    "forward", "infer_shapes", "init_params", "layer_backward", "layer_forward", "load_model",
    "param_shapes", "predict_proba", "reference_model", "save_model", "softmax", "vgg_style",
]
