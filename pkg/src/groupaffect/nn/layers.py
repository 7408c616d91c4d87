"""Forward and backward passes for each layer kind.

``layer_forward`` returns the output together with a :class:`Cache` that
``layer_backward`` consumes.  Inputs carry a leading batch axis; all shape
checks are against the per-sample shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import CacheMismatchError, ShapeError
from .model import LayerSpec, layer_output_shape


@dataclass
class Cache:
    layer: LayerSpec
    input_shape: tuple
    data: dict


def softmax(z):
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _windows(xp, k, stride, ho, wo):
    # (N, Ho, Wo, C, k, k) view over the padded input
    win = sliding_window_view(xp, (k, k), axis=(1, 2))
    return win[:, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]


def _im2col(xp, k, stride, ho, wo):
    win = _windows(xp, k, stride, ho, wo)
    n, c = xp.shape[0], xp.shape[3]
    # row layout (kh, kw, cin) matches the HWIO weight reshape
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, k * k * c)


def _conv_forward(layer, params, x):
    k, s, p = layer.kernel, layer.stride, layer.padding
    n, h, w, c = x.shape
    ho, wo, cout = layer_output_shape(layer, (h, w, c))
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
    cols = _im2col(xp, k, s, ho, wo)
    out = cols @ params["W"].reshape(k * k * c, cout) + params["b"]
    return out.reshape(n, ho, wo, cout), {"xp": xp, "W": params["W"], "out_hw": (ho, wo)}


def _conv_backward(layer, cache, g):
    k, s, p = layer.kernel, layer.stride, layer.padding
    xp, w = cache.data["xp"], cache.data["W"]
    ho, wo = cache.data["out_hw"]
    n, _, _, c = xp.shape
    cout = w.shape[-1]
    g2 = g.reshape(n * ho * wo, cout)
    cols = _im2col(xp, k, s, ho, wo)
    dw = (cols.T @ g2).reshape(w.shape)
    db = g2.sum(axis=0)
    dcols = (g2 @ w.reshape(k * k * c, cout).T).reshape(n, ho, wo, k, k, c)
    dxp = np.zeros_like(xp)
    for i in range(k):
        for j in range(k):
            dxp[:, i : i + (ho - 1) * s + 1 : s, j : j + (wo - 1) * s + 1 : s, :] += dcols[:, :, :, i, j, :]
    h, wd = cache.input_shape[0], cache.input_shape[1]
    dx = dxp[:, p : p + h, p : p + wd, :] if p else dxp
    return dx, {"W": dw, "b": db}


def _pool_forward(layer, x):
    k, s = layer.kernel, layer.stride
    n, h, w, c = x.shape
    ho, wo, _ = layer_output_shape(layer, (h, w, c))
    win = _windows(x, k, s, ho, wo).reshape(n, ho, wo, c, k * k)
    arg = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, {"arg": arg, "out_hw": (ho, wo)}


def _pool_backward(layer, cache, g):
    k, s = layer.kernel, layer.stride
    arg = cache.data["arg"]
    ho, wo = cache.data["out_hw"]
    n = g.shape[0]
    h, w, c = cache.input_shape
    dx = np.zeros((n, h, w, c), dtype=g.dtype)
    # first maximum in each window receives the gradient
    di, dj = np.divmod(arg, k)
    rows = np.arange(ho)[None, :, None, None] * s + di
    cols = np.arange(wo)[None, None, :, None] * s + dj
    bi = np.broadcast_to(np.arange(n)[:, None, None, None], arg.shape)
    ci = np.broadcast_to(np.arange(c)[None, None, None, :], arg.shape)
    np.add.at(dx, (bi, rows, cols, ci), g)
    return dx


def layer_forward(layer: LayerSpec, params, x, training=False, rng=None, index=None):
    out_shape = layer_output_shape(layer, x.shape[1:], index)
    if layer.has_params:
        w = params["W"]
        expected_in = w.shape[2] if layer.kind == "conv" else w.shape[0]
        got_in = x.shape[-1]
        if got_in != expected_in:
            raise ShapeError(
                f"layer {index} ({layer.kind}) expects {expected_in} input features/channels, "
                f"got input shape {tuple(x.shape[1:])}",
                layer_index=index, expected=expected_in, got=tuple(x.shape[1:]))

    kind = layer.kind
    data = {}
    if kind == "conv":
        out, data = _conv_forward(layer, params, x)
    elif kind == "relu":
        out = np.maximum(x, 0)
        data = {"mask": x > 0}
    elif kind == "maxpool":
        out, data = _pool_forward(layer, x)
    elif kind == "flatten":
        out = x.reshape(x.shape[0], -1)
    elif kind == "dense":
        out = x @ params["W"] + params["b"]
        data = {"x": x, "W": params["W"]}
    elif kind == "dropout":
        if training and layer.rate > 0:
            if rng is None:
                raise ValueError("dropout in training mode needs an rng")
            keep = rng.random(x.shape) >= layer.rate
            scale = 1.0 / (1.0 - layer.rate)
            mask = keep.astype(x.dtype) * x.dtype.type(scale)
            out = x * mask
            data = {"mask": mask}
        else:
            out = x
            data = {"mask": None}
    else:  # softmax
        out = softmax(x)
        data = {"p": out}
    assert out.shape[1:] == tuple(out_shape), (kind, out.shape, out_shape)
    return out, Cache(layer, tuple(x.shape[1:]), data)


def layer_backward(layer: LayerSpec, cache: Cache, grad_out):
    """Return ``(grad_in, grad_params)``; ``grad_params`` is empty for parameter-free layers."""
    if not isinstance(cache, Cache) or cache.layer != layer:
        raise CacheMismatchError(
            f"cache was produced by {getattr(cache, 'layer', None)!r}, not {layer!r}")
    kind = layer.kind
    if kind == "conv":
        return _conv_backward(layer, cache, grad_out)
    if kind == "relu":
        return grad_out * cache.data["mask"], {}
    if kind == "maxpool":
        return _pool_backward(layer, cache, grad_out), {}
    if kind == "flatten":
        return grad_out.reshape((grad_out.shape[0],) + cache.input_shape), {}
    if kind == "dense":
        x, w = cache.data["x"], cache.data["W"]
        return grad_out @ w.T, {"W": x.T @ grad_out, "b": grad_out.sum(axis=0)}
    if kind == "dropout":
        mask = cache.data["mask"]
        return (grad_out if mask is None else grad_out * mask), {}
    p = cache.data["p"]
    return p * (grad_out - np.sum(grad_out * p, axis=-1, keepdims=True)), {}


def forward(spec, params, x, training=False, rngs=None, stop_before_softmax=False):
    """Run the whole network; returns ``(output, caches)``.

    ``rngs`` maps dropout layer indices to generators (only used in training).
    """
    caches = []
    layers = spec.layers
    if stop_before_softmax and layers[-1].kind == "softmax":
        layers = layers[:-1]
    for i, layer in enumerate(layers):
        rng = rngs.get(i) if rngs else None
        x, cache = layer_forward(layer, params.get(i), x, training=training, rng=rng, index=i)
        caches.append(cache)
    return x, caches


def backward(spec, caches, grad):
    """Backpropagate ``grad`` (w.r.t. the output of the last cached layer)."""
    grads = {}
    for i in range(len(caches) - 1, -1, -1):
        layer = spec.layers[i]
        grad, gp = layer_backward(layer, caches[i], grad)
        if gp:
            grads[i] = gp
    return grad, grads
