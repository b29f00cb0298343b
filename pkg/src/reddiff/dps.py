"""Minimal DPS-style guided reverse diffusion, kept as a comparison baseline."""

from __future__ import annotations

import numpy as np

from .operators import Measurement
from .priors import ScorePrior, mmse_estimate
from .sampler import NonFiniteLossError, uniform_timesteps
from .schedule import NoiseSchedule


def _coeffs(s: NoiseSchedule, t: int) -> tuple[float, float]:
    if t == 0:
        return 1.0, 0.0
    return s.alpha_at(t), s.sigma_at(t)


def eps_vjp(prior: ScorePrior, s: NoiseSchedule, x_t, t: int, v, h: float = 1e-5) -> np.ndarray:
    """``J_eps(x_t)^T v`` by one central difference along ``v``.

    eps_theta = -sigma_t * grad log p_t has a symmetric Jacobian (a scaled
    Hessian), so the directional derivative along ``v`` equals the
    vector-Jacobian product.
    """
    norm = np.linalg.norm(v)
    if norm == 0:
        return np.zeros_like(v)
    d = v / norm
    hi = prior.predict_eps(x_t + h * d, t, s)
    lo = prior.predict_eps(x_t - h * d, t, s)
    return norm * (hi - lo) / (2 * h)


def guidance_gradient(m: Measurement, prior: ScorePrior, s: NoiseSchedule, x_t, t: int):
    """Gradient in ``x_t`` of ``||y - f(x0_hat(x_t))||^2`` and the residual norm."""
    a, sg = s.alpha_at(t), s.sigma_at(t)
    eps_pred = prior.predict_eps(x_t, t, s)
    x0 = mmse_estimate(x_t, t, eps_pred, s)
    resid = m.operator.apply(x0) - m.y
    g0 = 2.0 * m.operator.vjp(x0, resid)
    grad = (g0 - sg * eps_vjp(prior, s, x_t, t, g0)) / a
    return grad, float(np.linalg.norm(resid))


def dps_baseline_sample(
    m: Measurement,
    prior: ScorePrior,
    s: NoiseSchedule,
    steps: int = 1000,
    zeta_scale: float = 0.1,
    seed: int = 0,
    n_samples: int | None = None,
) -> np.ndarray:
    """Ancestral sampling over ``steps`` evenly spaced timesteps with guidance.

    Each step denoises to ``x0_hat``, takes a DDPM step toward the previous
    timestep and subtracts ``zeta_i * grad ||y - f(x0_hat)||^2`` with
    ``zeta_i = zeta_scale / ||y - f(x0_hat)||``. With ``n_samples`` set,
    independent chains run side by side and an ``(n_samples, dim)`` array is
    returned.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = np.random.default_rng(seed)
    dim = m.operator.in_dim
    x = rng.standard_normal((n_samples or 1, dim))
    ts = list(uniform_timesteps(s.T, steps)) + [0]

    for t, t_prev in zip(ts[:-1], ts[1:]):
        a, sg = _coeffs(s, t)
        a_prev, sg_prev = _coeffs(s, t_prev)
        eps_pred = prior.predict_eps(x, t, s)
        x0 = mmse_estimate(x, t, eps_pred, s)
        tau = 1.0 - (a * sg_prev / (a_prev * sg)) ** 2
        z = rng.standard_normal(x.shape)
        x_next = a_prev * x0 + sg_prev * np.sqrt(1.0 - tau) * eps_pred + sg_prev * np.sqrt(tau) * z
        if zeta_scale:
            for i in range(x.shape[0]):
                grad, rnorm = guidance_gradient(m, prior, s, x[i], t)
                if rnorm == 0:
                    continue
                step = (zeta_scale / rnorm) * grad
                if not np.all(np.isfinite(step)):
                    raise NonFiniteLossError(f"non-finite guidance at t={t}")
                x_next[i] -= step
        x = x_next

    return x if n_samples else x[0]
