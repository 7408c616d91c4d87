from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


@dataclass
class AdamState:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_moments(m, v, g, t, beta1=0.9, beta2=0.999):
    """Biased moments after step ``t`` and their bias-corrected estimates.

    Returns ``(m_t, v_t, m_hat, v_hat)``.  The corrected estimates are
    expanded over the moment recurrence, ``m_hat = (b1 m + (1 - b1) g) / c1``,
    so that at ``t = 1`` the gradient coefficient is exactly 1 and
    ``m_hat == g`` bit for bit.
    """
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    g2 = g * g
    m_hat = (beta1 / c1) * m + ((1.0 - beta1) / c1) * g
    v_hat = (beta2 / c2) * v + ((1.0 - beta2) / c2) * g2
    m_new = beta1 * m + (1.0 - beta1) * g
    v_new = beta2 * v + (1.0 - beta2) * g2
    return m_new, v_new, m_hat, v_hat


def adam_step(state: AdamState, params, grads):
    """One Adam update, in place on ``params`` and ``state``.

    ``params`` and ``grads`` are nested ``{layer: {name: array}}`` mappings;
    any flat ``{name: array}`` mapping works as well.
    """
    state.t += 1
    for key, theta, g in _leaves(params, grads):
        if g.shape != theta.shape:
            raise ShapeError(f"gradient {key} has shape {g.shape}, parameter {theta.shape}")
        m = state.m.get(key)
        if m is None:
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
        else:
            v = state.v[key]
        m, v, m_hat, v_hat = adam_moments(m, v, g.astype(theta.dtype, copy=False), state.t,
                                          state.beta1, state.beta2)
        state.m[key], state.v[key] = m, v
        theta -= (state.alpha * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(theta.dtype, copy=False)
    return params, state


def _leaves(params, grads):
    for k, p in params.items():
        if isinstance(p, dict):
            g = grads.get(k, {})
            for name, theta in p.items():
                if name in g:
                    yield (k, name), theta, np.asarray(g[name])
        elif k in grads:
            yield k, p, np.asarray(grads[k])
