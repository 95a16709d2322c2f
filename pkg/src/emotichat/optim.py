"""Adam and Adamax optimizers over named parameter dictionaries."""

from __future__ import annotations

import numpy as np


class _MomentOptimizer:
    def __init__(
        self,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        decay: float = 0.0,
    ) -> None:
        if learning_rate < 0:
            raise ValueError(f"learning rate must be >= 0, got {learning_rate}")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.decay = decay
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def _state(self, name: str, like: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if name not in self._m:
            self._m[name] = np.zeros_like(like)
            self._v[name] = np.zeros_like(like)
        return self._m[name], self._v[name]

    def _current_lr(self) -> float:
        # multiplicative per-step decay applied before each update
        return self.learning_rate * (1.0 - self.decay) ** self.step_count

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        raise NotImplementedError


class Adam(_MomentOptimizer):
    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        lr = self._current_lr()
        self.step_count += 1
        t = self.step_count
        for name, grad in grads.items():
            m, v = self._state(name, grad)
            m *= self.beta1
            m += (1 - self.beta1) * grad
            v *= self.beta2
            v += (1 - self.beta2) * grad * grad
            m_hat = m / (1 - self.beta1**t)
            v_hat = v / (1 - self.beta2**t)
            params[name] -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Adamax(_MomentOptimizer):
    """Adam variant tracking the infinity norm of past gradients."""

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        lr = self._current_lr()
        self.step_count += 1
        t = self.step_count
        for name, grad in grads.items():
            m, u = self._state(name, grad)
            m *= self.beta1
            m += (1 - self.beta1) * grad
            np.maximum(self.beta2 * u, np.abs(grad), out=u)
            params[name] -= (lr / (1 - self.beta1**t)) * m / (u + self.eps)


OPTIMIZERS = {"adam": Adam, "adamax": Adamax}


def make_optimizer(name: str, learning_rate: float, decay: float = 0.0, **kwargs) -> _MomentOptimizer:
    try:
        cls = OPTIMIZERS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}; choose from {sorted(OPTIMIZERS)}") from None
    return cls(learning_rate, decay=decay, **kwargs)
