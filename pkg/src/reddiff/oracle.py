"""Independent ground truth for tests and the ``check`` command.

Nothing here calls into the sampler; these are closed forms and brute-force
evaluations used to judge it.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, localcontext

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from .operators import Measurement
from .priors import GaussianMixturePrior, GaussianPrior
from .schedule import NoiseSchedule


def extended_precision_alpha(beta_min: float, beta_max: float, T: int, t: int, digits: int = 50) -> Decimal:
    """alpha_t of the linear-beta schedule in ``digits``-digit decimal arithmetic."""
    with localcontext() as ctx:
        ctx.prec = digits
        lo, hi = Decimal(beta_min), Decimal(beta_max)
        span = Decimal(max(T - 1, 1))
        total = Decimal(0)
        for i in range(t):
            beta = lo + (hi - lo) * Decimal(i) / span
            total += (1 - beta).ln()
        return (total / 2).exp()


def gmm_diffused_log_density(prior: GaussianMixturePrior, x, t: int, s: NoiseSchedule) -> float:
    """log p_t(x) of a diffused isotropic mixture, via scipy densities."""
    a, sg = s.alpha_at(t), s.sigma_at(t)
    terms = [
        np.log(w) + multivariate_normal.logpdf(x, mean=a * m, cov=(a * a * v + sg * sg) * np.eye(prior.dim))
        for w, m, v in zip(prior.weights, prior.means, prior.variances)
    ]
    return float(logsumexp(terms))


@dataclass(frozen=True, eq=False)
class LinearGaussianProblem:
    """y = A x + N(0, sigma_v^2 I) with prior x ~ N(prior_mean, prior_var I)."""

    A: np.ndarray
    sigma_v: float
    prior_mean: np.ndarray
    prior_var: float = 1.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        mean = np.asarray(self.prior_mean, dtype=np.float64).reshape(-1)
        if mean.size != A.shape[1]:
            raise ValueError(f"prior mean has {mean.size} entries, A has {A.shape[1]} columns")
        if not (self.sigma_v > 0 and self.prior_var > 0):
            raise ValueError("sigma_v and prior_var must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "prior_mean", mean)


def analytic_map(p: LinearGaussianProblem, y) -> np.ndarray:
    """Posterior mode (= mean) of the linear-Gaussian problem."""
    y = np.asarray(y, dtype=np.float64)
    A, sv2, tau2 = p.A, p.sigma_v**2, p.prior_var
    H = A.T @ A / sv2 + np.eye(A.shape[1]) / tau2
    rhs = A.T @ y / sv2 + p.prior_mean / tau2
    return cho_solve(cho_factor(H), rhs)


def calibrated_lambda(p: LinearGaussianProblem, s: NoiseSchedule) -> float:
    """lambda for which RED-diff's expected stationary point is the MAP.

    Valid for a standard-normal prior under inverse-SNR weighting, where the
    expected regularizer gradient at timestep t is lambda * sigma_t^2 * mu.
    """
    if p.prior_var != 1.0 or np.any(p.prior_mean != 0):
        raise ValueError("calibration assumes a standard-normal prior")
    return 2.0 * p.sigma_v**2 / float(np.mean(s.sigma**2))


def finite_diff_grad(fun, x, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not h > 0:
        raise ValueError("h must be positive")
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def gaussian_kl(mean_q, var_q: float, mean_p, var_p: float) -> float:
    """KL(N(mean_q, var_q I) || N(mean_p, var_p I))."""
    d = np.asarray(mean_q, dtype=np.float64) - np.asarray(mean_p, dtype=np.float64)
    n = d.size
    return 0.5 * (n * var_q / var_p + float(d @ d) / var_p - n - n * np.log(var_q / var_p))


def weighted_diffused_kl(mu, sigma_q: float, prior: GaussianPrior, s: NoiseSchedule, t: int, lam_t: float) -> float:
    """``lam_t / SNR_t * KL(q_t || p_t)`` for q = N(mu, sigma_q^2 I).

    Both marginals are Gaussian after diffusion. The 1/SNR_t factor converts
    the KL to the scale on which the mean gradient is ``E[lam_t eps_theta]``.
    """
    a, sg = s.alpha_at(t), s.sigma_at(t)
    kl = gaussian_kl(
        a * np.asarray(mu), a * a * sigma_q**2 + sg * sg,
        a * prior.mean, a * a * prior.variance + sg * sg,
    )
    return lam_t * (sg / a) * kl


@dataclass(frozen=True)
class GridPosterior:
    points: np.ndarray
    density: np.ndarray

    @property
    def argmax(self) -> float:
        return float(self.points[np.argmax(self.density)])

    @property
    def cell(self) -> float:
        return float(self.points[1] - self.points[0])


def grid_posterior_1d(prior, m: Measurement, lo: float, hi: float, n: int = 2001) -> GridPosterior:
    """Brute-force posterior of a scalar unknown on ``n`` grid points."""
    if m.operator.in_dim != 1:
        raise ValueError("grid posterior needs a scalar unknown")
    if n < 100:
        raise ValueError("use at least 100 grid points")
    pts = np.linspace(lo, hi, n)
    if isinstance(prior, GaussianPrior):
        prior = GaussianMixturePrior([1.0], prior.mean[None, :], [prior.variance])
    log_prior = np.array([_log_prior0(prior, x) for x in pts])
    sv = m.operator.effective_sigma_v
    log_lik = np.array([-0.5 * np.sum((m.y - m.operator.apply(np.array([x]))) ** 2) / sv**2 for x in pts])
    logp = log_prior + log_lik
    dens = np.exp(logp - logp.max())
    mass = np.trapezoid(dens, pts)
    if not (np.isfinite(mass) and mass > 0):
        raise ValueError("posterior mass vanished on the grid")
    return GridPosterior(pts, dens / mass)


def _log_prior0(prior: GaussianMixturePrior, x: float) -> float:
    d = x - prior.means[:, 0]
    log_comp = np.log(prior.weights) - 0.5 * np.log(2 * np.pi * prior.variances) - 0.5 * d * d / prior.variances
    top = log_comp.max()
    return float(top + np.log(np.exp(log_comp - top).sum()))
