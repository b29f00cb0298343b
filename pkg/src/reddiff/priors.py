"""Analytic score priors.

A prior maps a noisy state ``x_t`` at timestep ``t`` to a noise prediction
``eps_theta(x_t; t) = -sigma_t * grad log p_t(x_t)``, where ``p_t`` is the
data distribution pushed through the forward process. Gaussian and isotropic
Gaussian-mixture data distributions stay in their family under diffusion, so
their scores are exact.

All ``predict_eps`` / ``log_density`` implementations broadcast over leading
batch axes: ``x_t`` may have shape ``(dim,)`` or ``(..., dim)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .schedule import NoiseSchedule


class DegenerateAlphaError(ZeroDivisionError):
    """alpha_t underflowed to zero, so the MMSE denoiser is undefined."""


@runtime_checkable
class ScorePrior(Protocol):
    dim: int

    def predict_eps(self, x_t: np.ndarray, t: int, s: NoiseSchedule) -> np.ndarray: ...


def _as_state(x_t, dim: int) -> np.ndarray:
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1:] != (dim,):
        raise ValueError(f"expected trailing dimension {dim}, got shape {x_t.shape}")
    return x_t


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    """Isotropic Gaussian N(mean, variance * I)."""

    mean: np.ndarray
    variance: float = 1.0

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        mean.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    @classmethod
    def standard(cls, dim: int) -> "GaussianPrior":
        return cls(np.zeros(dim), 1.0)

    @property
    def dim(self) -> int:
        return self.mean.size

    def marginal_variance(self, t: int, s: NoiseSchedule) -> float:
        a, sg = s.alpha_at(t), s.sigma_at(t)
        return a * a * self.variance + sg * sg

    def predict_eps(self, x_t, t, s):
        return gaussian_eps(self, x_t, t, s)

    def log_density(self, x_t, t, s) -> np.ndarray:
        """log p_t(x_t) of the diffused marginal."""
        x_t = _as_state(x_t, self.dim)
        v = self.marginal_variance(t, s)
        d = x_t - s.alpha_at(t) * self.mean
        return -0.5 * (np.sum(d * d, axis=-1) / v + self.dim * np.log(2 * np.pi * v))

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        shape = (self.dim,) if n is None else (n, self.dim)
        return self.mean + np.sqrt(self.variance) * rng.standard_normal(shape)


@dataclass(frozen=True, eq=False)
class GaussianMixturePrior:
    """Mixture of isotropic Gaussians ``sum_k w_k N(m_k, v_k I)``."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        m = np.array(self.means, dtype=np.float64)
        if m.ndim == 1:
            m = m[:, None]
        v = np.array(self.variances, dtype=np.float64).reshape(-1)
        k = w.size
        if k < 1:
            raise ValueError("mixture needs at least one component")
        if m.shape[0] != k or v.size != k:
            raise ValueError(f"got {k} weights, {m.shape[0]} means, {v.size} variances")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(v <= 0):
            raise ValueError("variances must be positive")
        for name, arr in (("weights", w), ("means", m), ("variances", v)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.weights.size

    def _component_terms(self, x_t, t, s):
        x_t = _as_state(x_t, self.dim)
        a, sg = s.alpha_at(t), s.sigma_at(t)
        var = a * a * self.variances + sg * sg  # (K,)
        diff = x_t[..., None, :] - a * self.means  # (..., K, d)
        log_comp = (
            np.log(self.weights)
            - 0.5 * self.dim * np.log(2 * np.pi * var)
            - 0.5 * np.sum(diff * diff, axis=-1) / var
        )
        return log_comp, diff, var

    def log_density(self, x_t, t, s) -> np.ndarray:
        log_comp, _, _ = self._component_terms(x_t, t, s)
        top = log_comp.max(axis=-1, keepdims=True)
        return top[..., 0] + np.log(np.exp(log_comp - top).sum(axis=-1))

    def responsibilities(self, x_t, t, s) -> np.ndarray:
        log_comp, _, _ = self._component_terms(x_t, t, s)
        log_comp = log_comp - log_comp.max(axis=-1, keepdims=True)
        r = np.exp(log_comp)
        return r / r.sum(axis=-1, keepdims=True)

    def predict_eps(self, x_t, t, s):
        return gmm_eps(self, x_t, t, s)

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        count = 1 if n is None else n
        k = rng.choice(self.n_components, size=count, p=self.weights)
        z = rng.standard_normal((count, self.dim))
        x = self.means[k] + np.sqrt(self.variances[k])[:, None] * z
        return x[0] if n is None else x


def gaussian_eps(prior: GaussianPrior, x_t, t: int, s: NoiseSchedule) -> np.ndarray:
    x_t = _as_state(x_t, prior.dim)
    return s.sigma_at(t) * (x_t - s.alpha_at(t) * prior.mean) / prior.marginal_variance(t, s)


def gmm_eps(prior: GaussianMixturePrior, x_t, t: int, s: NoiseSchedule) -> np.ndarray:
    log_comp, diff, var = prior._component_terms(x_t, t, s)
    log_comp = log_comp - log_comp.max(axis=-1, keepdims=True)
    r = np.exp(log_comp)
    r /= r.sum(axis=-1, keepdims=True)
    score = -np.sum((r / var)[..., None] * diff, axis=-2)
    return -s.sigma_at(t) * score


def mmse_estimate(x_t, t: int, eps_pred, s: NoiseSchedule) -> np.ndarray:
    """Tweedie denoiser ``(x_t - sigma_t * eps_pred) / alpha_t``."""
    a = s.alpha_at(t)
    if a == 0.0:
        raise DegenerateAlphaError(f"alpha_{t} is zero")
    return (np.asarray(x_t, dtype=np.float64) - s.sigma_at(t) * np.asarray(eps_pred)) / a
