"""Discrete variance-preserving noise schedule.

Timesteps are 1-indexed: ``t = 1`` is the least noisy state and ``t = T``
the most noisy one. The forward marginal is

    x_t = alpha_t * x_0 + sigma_t * eps,    alpha_t**2 + sigma_t**2 = 1

with ``alpha_t**2 = prod_{i<=t} (1 - beta_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Immutable table of per-step diffusion coefficients.

    ``beta``, ``alpha`` and ``sigma`` are length-``T`` arrays indexed by
    ``t - 1``. Prefer :func:`build_schedule` over direct construction.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        for name in ("beta", "alpha", "sigma"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.T,):
                raise ValueError(f"{name} must have shape ({self.T},), got {arr.shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def check_t(self, t: int) -> int:
        t = int(t)
        if not 1 <= t <= self.T:
            raise IndexError(f"timestep {t} outside 1..{self.T}")
        return t

    def alpha_at(self, t: int) -> float:
        return float(self.alpha[self.check_t(t) - 1])

    def sigma_at(self, t: int) -> float:
        return float(self.sigma[self.check_t(t) - 1])

    @property
    def snr_table(self) -> np.ndarray:
        """alpha_t / sigma_t for t = 1..T."""
        return self.alpha / self.sigma


def build_schedule(beta_min: float = 1e-4, beta_max: float = 0.02, T: int = 1000) -> NoiseSchedule:
    """Linear-beta VP schedule.

    The cumulative product of ``1 - beta_i`` is accumulated as a sum of
    ``log1p(-beta_i)``; ``sigma_t`` comes from ``-expm1`` of that sum so it
    stays accurate when ``alpha_t`` is close to one.
    """
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    T = int(T)
    if not (0.0 < beta_min < 1.0 and 0.0 < beta_max < 1.0):
        raise ValueError(f"betas must lie in (0, 1), got ({beta_min}, {beta_max})")
    if beta_min > beta_max:
        raise ValueError(f"beta_min={beta_min} exceeds beta_max={beta_max}")

    i = np.arange(T, dtype=np.float64)
    beta = beta_min + i / max(T - 1, 1) * (beta_max - beta_min)
    log_abar = np.cumsum(np.log1p(-beta))
    alpha = np.exp(0.5 * log_abar)
    sigma = np.sqrt(-np.expm1(log_abar))
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, sigma=sigma)


def snr(s: NoiseSchedule, t: int) -> float:
    """Signal-to-noise ratio alpha_t / sigma_t."""
    return s.alpha_at(t) / s.sigma_at(t)


def diffuse(s: NoiseSchedule, x0, t: int, eps) -> np.ndarray:
    """Forward diffusion ``alpha_t * x0 + sigma_t * eps``."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"x0 shape {x0.shape} does not match eps shape {eps.shape}")
    return s.alpha_at(t) * x0 + s.sigma_at(t) * eps


def variational_marginal_score(s: NoiseSchedule, mu, sigma_q: float, x_t, t: int) -> np.ndarray:
    """Score of q(x_t) = N(alpha_t mu, (alpha_t^2 sigma_q^2 + sigma_t^2) I) at ``x_t``."""
    if sigma_q < 0:
        raise ValueError("sigma_q must be nonnegative")
    mu = np.asarray(mu, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    if mu.shape != x_t.shape:
        raise ValueError(f"mu shape {mu.shape} does not match x_t shape {x_t.shape}")
    a, sg = s.alpha_at(t), s.sigma_at(t)
    return -(x_t - a * mu) / (a * a * sigma_q * sigma_q + sg * sg)
