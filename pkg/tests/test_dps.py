import numpy as np
import pytest

from reddiff import operators as ops
from reddiff.dps import dps_baseline_sample, eps_vjp, guidance_gradient
from reddiff.oracle import finite_diff_grad, grid_posterior_1d
from reddiff.priors import GaussianMixturePrior, GaussianPrior, mmse_estimate
from reddiff.sampler import sample


def test_unconditional_matches_prior(sched):
    m = ops.Measurement(np.zeros(2), ops.make_dense_linear(np.eye(2)))
    x = dps_baseline_sample(m, GaussianPrior.standard(2), sched, 1000, 0.0, 0, n_samples=10_000)
    n = len(x)
    assert np.all(np.abs(x.mean(axis=0)) <= 3 / np.sqrt(n))
    # var/cov of a standard normal have standard error ~ sqrt(2/n) and sqrt(1/n)
    cov = np.cov(x.T)
    assert np.all(np.abs(np.diag(cov) - 1) <= 3 * np.sqrt(2 / n))
    assert abs(cov[0, 1]) <= 3 / np.sqrt(n)


def test_identity_concentrates_on_y(sched):
    y = np.array([0.3, -0.7])
    m = ops.Measurement(y, ops.make_dense_linear(np.eye(2), 1e-3))
    x = dps_baseline_sample(m, GaussianPrior.standard(2), sched, 1000, 0.01, 0, n_samples=10)
    assert np.max(np.linalg.norm(x - y, axis=1)) < 0.03


def test_eps_vjp_matches_jacobian(sched, rng):
    prior = GaussianMixturePrior([0.4, 0.6], [[0, 1, 0], [1, -1, 2]], [0.3, 0.6])
    x, v, t = rng.standard_normal(3), rng.standard_normal(3), 250
    J = np.stack([finite_diff_grad(lambda z: prior.predict_eps(z, t, sched)[i], x) for i in range(3)])
    assert np.allclose(J, J.T, atol=1e-7)
    assert np.allclose(eps_vjp(prior, sched, x, t, v), J.T @ v, atol=1e-7)
    assert np.array_equal(eps_vjp(prior, sched, x, t, np.zeros(3)), np.zeros(3))


def test_guidance_gradient_finite_difference(sched, rng):
    prior = GaussianPrior(np.array([0.2, -0.1, 0.0]), 0.5)
    op = ops.make_dense_linear(rng.standard_normal((2, 3)))
    m = ops.Measurement(rng.standard_normal(2), op)
    x, t = rng.standard_normal(3), 400

    def loss(z):
        x0 = mmse_estimate(z, t, prior.predict_eps(z, t, sched), sched)
        return np.sum((m.y - op.apply(x0)) ** 2)

    grad, rnorm = guidance_gradient(m, prior, sched, x, t)
    assert rnorm == pytest.approx(np.sqrt(loss(x)))
    fd = finite_diff_grad(loss, x)
    assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(fd)


def test_same_mode_as_red_diff(sched):
    prior = GaussianMixturePrior([0.5, 0.5], [[-1.0], [1.0]], [0.1, 0.1])
    m = ops.Measurement([0.6], ops.make_dense_linear([[1.0]], 0.3))
    grid = grid_posterior_1d(prior, m, -3, 3, 4001)
    assert grid.argmax > 0
    dps = dps_baseline_sample(m, prior, sched, 500, 0.1, 0, n_samples=20)[:, 0]
    red = sample(m, prior, sched, seed=0).mu[0]
    assert np.mean(dps > 0) >= 0.9
    assert red > 0


def test_single_chain_shape(sched):
    m = ops.Measurement([0.5], ops.make_inpainting_mask([True, False]))
    out = dps_baseline_sample(m, GaussianPrior.standard(2), sched, 20, 0.1, 3)
    assert out.shape == (2,)
    with pytest.raises(ValueError):
        dps_baseline_sample(m, GaussianPrior.standard(2), sched, 0)
