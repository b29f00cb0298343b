"""First-order optimizers over a single flat parameter vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 0.1
    steps: int = 1000
    beta1: float = 0.9
    beta2: float = 0.99
    eps_hat: float = 1e-8
    momentum: float = 0.0

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be a positive integer")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")

    def build(self):
        if self.kind == "adam":
            return Adam(self.lr, self.beta1, self.beta2, self.eps_hat)
        return SGD(self.lr, self.momentum)


class Adam:
    """Adam without weight decay."""

    def __init__(self, lr=0.1, beta1=0.9, beta2=0.99, eps_hat=1e-8):
        self.lr, self.beta1, self.beta2, self.eps_hat = lr, beta1, beta2, eps_hat
        self.m = None
        self.v = None
        self.n = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.n += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.n)
        v_hat = self.v / (1 - self.beta2**self.n)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps_hat)


class SGD:
    """Heavy-ball SGD; ``momentum=0`` is plain gradient descent."""

    def __init__(self, lr=0.1, momentum=0.0):
        self.lr, self.momentum = lr, momentum
        self.velocity = None

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.velocity is None:
            self.velocity = np.zeros_like(params)
        self.velocity = self.momentum * self.velocity + grad
        return params - self.lr * self.velocity
