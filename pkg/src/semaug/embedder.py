"""Small fully connected embedding network.

Hidden layers use the rectifier max(a, 0); the final linear output is
L2-normalized onto the unit sphere.  Gradients flow through the
normalization via its exact Jacobian.  An all-zero pre-normalization
output (possible when every rectifier unit is off) is replaced by the
first basis vector and counted in ``fallback_count``; its local gradient
is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TINY = 1e-12


@dataclass
class ForwardCache:
    x: np.ndarray
    pre: list            # preactivations of hidden layers
    hidden: list         # rectified hidden outputs
    v: np.ndarray        # final linear output, before normalization
    prenorm: float
    f: np.ndarray
    fallback: bool


class TinyEmbedder:
    """MLP d_in -> hidden... -> F with unit-norm output.

    ``layer_sizes`` includes input and output dims; with exactly two
    entries the network is a single linear layer.  Pass ``rng=None`` to
    get zero-initialized parameters (used when loading a snapshot).
    """

    def __init__(self, layer_sizes, rng=None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"layer_sizes needs >= 2 positive entries, got {layer_sizes}")
        self.layer_sizes = sizes
        self.weights = []
        self.biases = []
        self.fallback_count = 0
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if rng is None:
                W = np.zeros((fan_out, fan_in))
            else:
                W = rng.standard_normal((fan_out, fan_in)) * math.sqrt(2.0 / fan_in)
            self.weights.append(W)
            self.biases.append(np.zeros(fan_out))

    @property
    def dim_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def dim_out(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list:
        """Flat parameter list in a fixed order (weights and biases interleaved)."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.append(W)
            out.append(b)
        return out

    def forward(self, x) -> tuple[np.ndarray, ForwardCache]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim_in,):
            raise ValueError(f"input has shape {x.shape}, expected ({self.dim_in},)")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input")
        h = x
        pre, hidden = [], []
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = W @ h + b
            h = np.maximum(a, 0.0)
            pre.append(a)
            hidden.append(h)
        v = self.weights[-1] @ h + self.biases[-1]
        n = float(np.linalg.norm(v))
        if n < _TINY:
            self.fallback_count += 1
            f = np.zeros(self.dim_out)
            f[0] = 1.0
            cache = ForwardCache(x=x, pre=pre, hidden=hidden, v=v, prenorm=n, f=f, fallback=True)
        else:
            f = v / n
            cache = ForwardCache(x=x, pre=pre, hidden=hidden, v=v, prenorm=n, f=f, fallback=False)
        return f, cache

    def backward(self, cache: ForwardCache, grad_f) -> list[tuple[np.ndarray, np.ndarray]]:
        """Parameter gradients for an upstream dL/df, one (dW, db) pair per
        layer in forward order."""
        if cache is None:
            raise ValueError("backward needs the ForwardCache from forward")
        g = np.asarray(grad_f, dtype=float)
        if g.shape != (self.dim_out,):
            raise ValueError(f"grad has shape {g.shape}, expected ({self.dim_out},)")
        if cache.fallback:
            delta = np.zeros(self.dim_out)  # output locally constant
        else:
            delta = (g - (g @ cache.f) * cache.f) / cache.prenorm
        grads = [None] * len(self.weights)
        inputs = [cache.x] + cache.hidden
        for layer in range(len(self.weights) - 1, -1, -1):
            grads[layer] = (np.outer(delta, inputs[layer]), delta.copy())
            if layer > 0:
                delta = (self.weights[layer].T @ delta) * (cache.pre[layer - 1] > 0.0)
        return grads
