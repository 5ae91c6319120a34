"""Adaptive-moment optimizer with global gradient-norm clipping."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 3e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 grad_clip: float = 0.0):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.grad_clip = grad_clip
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> float:
        """Apply one update; returns the (pre-clip) global gradient norm."""
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameters")
        # accumulate in float64: float32 squares can overflow before clipping
        norm = float(np.sqrt(sum(
            float(np.sum(np.square(g, dtype=np.float64))) for g in grads)))
        scale = 1.0
        if self.grad_clip > 0.0 and norm > self.grad_clip:
            scale = self.grad_clip / norm
        self.t += 1
        b1t = 1.0 - self.b1**self.t
        b2t = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = g * scale
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
        return norm

    def state_arrays(self) -> list[np.ndarray]:
        return self.m + self.v
