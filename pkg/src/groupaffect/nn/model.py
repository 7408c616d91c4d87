"""Layer and model descriptions, shape inference, and parameter init.

Activations are NHWC (batch, height, width, channels).  Conv weights are
stored HWIO as ``(kernel_h, kernel_w, in_channels, out_channels)``; dense
weights as ``(in_features, out_features)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import NUM_CLASSES
from ..errors import ShapeError

KINDS = ("conv", "relu", "maxpool", "flatten", "dense", "dropout", "softmax")
PARAM_KINDS = ("conv", "dense")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int = 0
    kernel: int = 3
    stride: int = 1
    padding: int = 1
    out_neurons: int = 0
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv" and self.out_channels < 1:
            raise ValueError("conv layer needs out_channels >= 1")
        if self.kind == "dense" and self.out_neurons < 1:
            raise ValueError("dense layer needs out_neurons >= 1")
        if self.kind == "dropout" and not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.rate}")
        if self.kind in ("conv", "maxpool") and (self.kernel < 1 or self.stride < 1 or self.padding < 0):
            raise ValueError("kernel and stride must be >= 1, padding >= 0")

    @property
    def has_params(self) -> bool:
        return self.kind in PARAM_KINDS

    def describe(self) -> str:
        if self.kind == "conv":
            return (f"conv out_channels={self.out_channels} kernel={self.kernel} "
                    f"stride={self.stride} padding={self.padding}")
        if self.kind == "maxpool":
            return f"maxpool kernel={self.kernel} stride={self.stride}"
        if self.kind == "dense":
            return f"dense out_neurons={self.out_neurons}"
        if self.kind == "dropout":
            return f"dropout rate={self.rate!r}"
        return self.kind


def conv(out_channels, stride=1, padding=1, kernel=3):
    return LayerSpec("conv", out_channels=out_channels, kernel=kernel, stride=stride, padding=padding)


def maxpool(kernel=2, stride=2):
    return LayerSpec("maxpool", kernel=kernel, stride=stride, padding=0)


def dense(n):
    return LayerSpec("dense", out_neurons=n)


def dropout(rate):
    return LayerSpec("dropout", rate=rate)


RELU = LayerSpec("relu")
FLATTEN = LayerSpec("flatten")
SOFTMAX = LayerSpec("softmax")


@dataclass(frozen=True)
class ModelSpec:
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, ...] = (64, 64, 3)
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        if not self.layers or self.layers[-1].kind != "softmax":
            raise ValueError("the last layer must be softmax")
        shapes = infer_shapes(self)
        if shapes[-1] != (self.num_classes,):
            raise ShapeError(
                f"network emits {shapes[-1]} but num_classes is {self.num_classes}",
                layer_index=len(self.layers) - 1, expected=(self.num_classes,), got=shapes[-1])


def conv_out(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


def layer_output_shape(layer: LayerSpec, in_shape, index=None):
    """Per-sample output shape of ``layer`` for a per-sample ``in_shape``."""
    in_shape = tuple(in_shape)
    kind = layer.kind
    if kind in ("conv", "maxpool"):
        if len(in_shape) != 3:
            raise ShapeError(f"layer {index} ({kind}) expects an HxWxC input, got {in_shape}",
                             layer_index=index, expected="(H, W, C)", got=in_shape)
        h, w, c = in_shape
        ho = conv_out(h, layer.kernel, layer.stride, layer.padding)
        wo = conv_out(w, layer.kernel, layer.stride, layer.padding)
        if ho < 1 or wo < 1:
            raise ShapeError(f"layer {index} ({kind}) collapses input {in_shape} to nothing",
                             layer_index=index, expected="spatial >= kernel", got=in_shape)
        return (ho, wo, layer.out_channels if kind == "conv" else c)
    if kind == "flatten":
        return (int(np.prod(in_shape)),)
    if kind == "dense":
        if len(in_shape) != 1:
            raise ShapeError(f"layer {index} (dense) expects a flat input, got {in_shape}",
                             layer_index=index, expected="(features,)", got=in_shape)
        return (layer.out_neurons,)
    if kind == "softmax" and len(in_shape) != 1:
        raise ShapeError(f"layer {index} (softmax) expects a flat input, got {in_shape}",
                         layer_index=index, expected="(classes,)", got=in_shape)
    return in_shape


def infer_shapes(model: ModelSpec):
    """Return ``[input_shape, out_0, out_1, ...]``, raising on inconsistency."""
    shapes = [tuple(model.input_shape)]
    for i, layer in enumerate(model.layers):
        shapes.append(layer_output_shape(layer, shapes[-1], i))
    return shapes


def param_shapes(model: ModelSpec):
    """``{layer_index: {"W": shape, "b": shape}}`` for every parametrized layer."""
    shapes = infer_shapes(model)
    out = {}
    for i, layer in enumerate(model.layers):
        if layer.kind == "conv":
            cin = shapes[i][2]
            out[i] = {"W": (layer.kernel, layer.kernel, cin, layer.out_channels),
                      "b": (layer.out_channels,)}
        elif layer.kind == "dense":
            out[i] = {"W": (shapes[i][0], layer.out_neurons), "b": (layer.out_neurons,)}
    return out


def init_params(model: ModelSpec, rng: np.random.Generator, dtype=np.float32):
    """He-uniform weights, zero biases."""
    params = {}
    for i, shp in param_shapes(model).items():
        w_shape = shp["W"]
        fan_in = int(np.prod(w_shape[:-1]))
        limit = np.sqrt(6.0 / fan_in)
        params[i] = {
            "W": rng.uniform(-limit, limit, size=w_shape).astype(dtype),
            "b": np.zeros(shp["b"], dtype=dtype),
        }
    return params


def check_params(model: ModelSpec, params):
    expected = param_shapes(model)
    if set(params) != set(expected):
        raise ShapeError(f"parameter layers {sorted(params)} != expected {sorted(expected)}")
    for i, shp in expected.items():
        for name, s in shp.items():
            got = tuple(params[i][name].shape)
            if got != tuple(s):
                raise ShapeError(f"layer {i} {name}: expected {tuple(s)}, got {got}",
                                 layer_index=i, expected=tuple(s), got=got)


def vgg_style(channels=(32, 32, 64, 64, 128, 128, 128), fc=(1024, 512), dropout_rate=0.5,
              input_shape=(64, 64, 3), num_classes=NUM_CLASSES) -> ModelSpec:
    """Seven 3x3 convs in three pooled blocks (2, 2, 3), then two hidden dense layers.

    With the defaults this is the reference architecture: 64 -> 32 -> 16 -> 8
    spatial, dense 1024 -> 512 -> 3 with dropout between the dense layers.
    """
    if len(channels) != 7:
        raise ValueError("expected seven conv widths")
    blocks = (channels[0:2], channels[2:4], channels[4:7])
    layers = []
    for block in blocks:
        for c in block:
            layers += [conv(c), RELU]
        layers.append(maxpool())
    layers.append(FLATTEN)
    for n in fc:
        layers += [dense(n), RELU]
        if dropout_rate > 0:
            layers.append(dropout(dropout_rate))
    layers += [dense(num_classes), SOFTMAX]
    return ModelSpec(tuple(layers), input_shape=input_shape, num_classes=num_classes)


def reference_model(dropout_rate=0.5) -> ModelSpec:
    return vgg_style(dropout_rate=dropout_rate)


def compact_model(dropout_rate=0.5) -> ModelSpec:
    """Same topology as the reference with narrow convs, for single-core runs."""
    return vgg_style(channels=(8, 8, 16, 16, 32, 32, 32), dropout_rate=dropout_rate)


@dataclass
class Network:
    """A model description paired with its parameters."""

    spec: ModelSpec
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        check_params(self.spec, self.params)
