from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from ..diffcore import ParamStore


class Adam:
    """Adam with bias correction, updating a ParamStore in place.

    The store is consolidated so one vectorized update covers every parameter.
    """

    def __init__(self, params: ParamStore, lr: float = 1e-4, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.buffer = params.consolidate()
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.t = 0
        self.m = np.zeros_like(self.buffer)
        self.v = np.zeros_like(self.buffer)

    def flatten(self, grads: Mapping[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([np.ravel(grads[name]) for name in self.params])

    def step(self, grads) -> None:
        """Apply one update from a name -> gradient mapping or a flat vector."""
        g = grads if isinstance(grads, np.ndarray) else self.flatten(grads)
        self.t += 1
        self.m *= self.b1
        self.m += (1.0 - self.b1) * g
        self.v *= self.b2
        self.v += (1.0 - self.b2) * g * g
        m_hat = self.m / (1.0 - self.b1**self.t)
        v_hat = self.v / (1.0 - self.b2**self.t)
        self.buffer -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
