"""Central finite-difference gradients for checking backward passes."""

import numpy as np

from .layers import layer_backward, layer_forward


def numerical_gradient(f, x, h=1e-5):
    """Central differences of scalar ``f`` w.r.t. every entry of ``x`` (modified in place, restored)."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        grad[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-8):
    """Largest elementwise ``|a - n| / max(|a| + |n|, floor)``."""
    a, n = np.asarray(analytic, dtype=np.float64), np.asarray(numeric, dtype=np.float64)
    return float(np.max(np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), floor), initial=0.0))


def check_layer(layer, params, x, rng, h=1e-5, mask_rng_seed=0):
    """Max relative error of input and parameter gradients for ``sum(out * R)``.

    Dropout is checked with a frozen mask (same seed for every evaluation).
    """
    training = layer.kind == "dropout"

    def run():
        gen = np.random.default_rng(mask_rng_seed) if training else None
        return layer_forward(layer, params, x, training=training, rng=gen)

    out, cache = run()
    proj = rng.normal(size=out.shape)
    grad_in, grad_params = layer_backward(layer, cache, proj)

    def loss():
        return float(np.sum(run()[0] * proj))

    errors = {"input": relative_error(grad_in, numerical_gradient(loss, x, h))}
    for name, g in grad_params.items():
        errors[name] = relative_error(g, numerical_gradient(loss, params[name], h))
    return errors
