"""Self-contained MLP with analytic reverse-mode gradients.

Affine layers with an elementwise nonlinearity (ELU by default, tanh
optional) on every layer but the last.  ``forward`` returns an activation
cache that ``backward`` consumes to produce exact parameter gradients and
the input gradient.  An optional constant per-channel input scale
conditions raw physical observations without any trainable state.
"""

from __future__ import annotations

import numpy as np


def _elu(z):
    # clip the exponent argument: np.where evaluates both branches
    return np.where(z > 0.0, z, np.expm1(np.minimum(z, 0.0)))


def _elu_grad(z, h):
    # for z <= 0, d/dz expm1(z) = exp(z) = h + 1
    return np.where(z > 0.0, 1.0, h + 1.0)


def _tanh(z):
    return np.tanh(z)


def _tanh_grad(z, h):
    return 1.0 - h * h


_ACTS = {"elu": (_elu, _elu_grad), "tanh": (_tanh, _tanh_grad)}


class MLP:
    def __init__(self, sizes: list[int], rng: np.random.Generator,
                 activation: str = "elu", out_scale: float = 1.0,
                 input_scale: np.ndarray | None = None,
                 dtype: np.dtype = np.float64):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = list(sizes)
        self.activation = activation
        self.dtype = np.dtype(dtype)
        self.act, self.act_grad = _ACTS[activation]
        self.input_scale = (np.ones(sizes[0]) if input_scale is None
                            else np.asarray(input_scale, dtype=float)
                            ).astype(self.dtype)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        n_layers = len(sizes) - 1
        for i in range(n_layers):
            fan_in = sizes[i]
            scale = np.sqrt(2.0 / fan_in)
            if i == n_layers - 1:
                scale *= out_scale
            self.weights.append(
                rng.normal(0.0, scale, (sizes[i], sizes[i + 1])).astype(self.dtype))
            self.biases.append(np.zeros(sizes[i + 1], dtype=self.dtype))

    # ------------------------------------------------------------- params

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.append(W)
            out.append(b)
        return out

    def zero_grads(self) -> list[np.ndarray]:
        return [np.zeros_like(p) for p in self.param_arrays()]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.param_arrays()])

    def set_flat(self, vec: np.ndarray) -> None:
        at = 0
        for p in self.param_arrays():
            p[...] = vec[at:at + p.size].reshape(p.shape)
            at += p.size
        if at != vec.size:
            raise ValueError("flat vector size mismatch")

    def copy(self) -> "MLP":
        clone = MLP.__new__(MLP)
        clone.sizes = list(self.sizes)
        clone.activation = self.activation
        clone.dtype = self.dtype
        clone.act, clone.act_grad = self.act, self.act_grad
        clone.input_scale = self.input_scale.copy()
        clone.weights = [W.copy() for W in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    # ------------------------------------------------------------ forward

    def forward(self, x: np.ndarray, need_cache: bool = True):
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input (B, {self.sizes[0]}), got {x.shape}")
        if not np.isfinite(x).all():
            raise ValueError("non-finite network input")
        h = x.astype(self.dtype, copy=False) * self.input_scale
        hs = [h]
        zs = []
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            h = z if i == last else self.act(z)
            zs.append(z)
            hs.append(h)
        cache = (hs, zs) if need_cache else None
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x, need_cache=False)[0]

    # ----------------------------------------------------------- backward

    def backward(self, cache, gy: np.ndarray):
        """Exact gradients for a forward pass.

        Returns (param grads aligned with param_arrays(), input gradient).
        """
        hs, zs = cache
        if gy.shape != (hs[0].shape[0], self.sizes[-1]):
            raise ValueError(f"output gradient shape {gy.shape} mismatch")
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        g = gy.astype(self.dtype, copy=False)
        for i in range(len(self.weights) - 1, -1, -1):
            if i != len(self.weights) - 1:
                g = g * self.act_grad(zs[i], hs[i + 1])
            grads[2 * i] = hs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, g * self.input_scale
