import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reddiff import operators as ops
from reddiff.oracle import (
    GridPosterior,
    LinearGaussianProblem,
    analytic_map,
    calibrated_lambda,
    finite_diff_grad,
    gaussian_kl,
    grid_posterior_1d,
    weighted_diffused_kl,
)
from reddiff.priors import GaussianMixturePrior, GaussianPrior
from reddiff.schedule import NoiseSchedule


def test_scalar_map():
    p = LinearGaussianProblem([[1.0]], 1.0, [0.0])
    assert analytic_map(p, [2.0]) == pytest.approx([1.0], abs=1e-15)


def test_zero_operator_returns_prior_mean():
    p = LinearGaussianProblem(np.zeros((3, 2)), 0.5, [0.3, -0.2], 2.0)
    assert np.allclose(analytic_map(p, np.ones(3)), [0.3, -0.2])


def test_map_stationarity(rng):
    A = rng.standard_normal((6, 4))
    p = LinearGaussianProblem(A, 0.4, rng.standard_normal(4), 1.7)
    y = rng.standard_normal(6)
    mu = analytic_map(p, y)
    g = A.T @ (A @ mu - y) / p.sigma_v**2 + (mu - p.prior_mean) / p.prior_var
    assert np.max(np.abs(g)) <= 1e-10


def test_problem_validation():
    with pytest.raises(ValueError):
        LinearGaussianProblem(np.eye(2), 0.0, np.zeros(2))
    with pytest.raises(ValueError):
        LinearGaussianProblem(np.eye(2), 1.0, np.zeros(3))


def test_calibrated_lambda(sched):
    flat = NoiseSchedule(T=2, beta=[0.5, 0.5], alpha=[0.0, 0.0], sigma=[1.0, 1.0])
    assert calibrated_lambda(LinearGaussianProblem([[1.0]], 1.0, [0.0]), flat) == 2.0
    p = LinearGaussianProblem([[1.0]], 0.5, [0.0])
    direct = sum(float(sched.sigma_at(t)) ** 2 for t in range(1, 1001)) / 1000
    assert calibrated_lambda(p, sched) == pytest.approx(0.5 / direct, rel=1e-12)
    p2 = LinearGaussianProblem([[1.0]], 1.0, [0.0])
    assert calibrated_lambda(p2, sched) == pytest.approx(4 * calibrated_lambda(p, sched), rel=1e-14)
    with pytest.raises(ValueError):
        calibrated_lambda(LinearGaussianProblem([[1.0]], 1.0, [0.0], 2.0), sched)


def test_calibration_makes_map_stationary(sched, rng):
    """At the MAP the expected RED-diff gradient vanishes when averaged over t."""
    A = rng.standard_normal((5, 5))
    p = LinearGaussianProblem(A, 0.3, np.zeros(5))
    y = rng.standard_normal(5)
    x = analytic_map(p, y)
    lam = calibrated_lambda(p, sched)
    expected = 2 * A.T @ (A @ x - y) + lam * np.mean(sched.sigma**2) * x
    assert np.max(np.abs(expected)) <= 1e-12


def test_finite_diff_examples():
    assert finite_diff_grad(lambda x: x @ x, np.array([1.0, 2.0])) == pytest.approx([2.0, 4.0], abs=1e-6)
    c = np.array([0.5, -3.0, 2.0])
    assert finite_diff_grad(lambda x: c @ x, np.zeros(3)) == pytest.approx(c, rel=1e-9)
    with pytest.raises(ValueError):
        finite_diff_grad(lambda x: 0.0, np.zeros(2), h=0.0)


def test_finite_diff_against_gaussian_log_density(sched, rng):
    prior = GaussianPrior(rng.standard_normal(3), 0.8)
    x = rng.standard_normal(3)
    analytic = -(x - sched.alpha_at(100) * prior.mean) / prior.marginal_variance(100, sched)
    fd = finite_diff_grad(lambda z: prior.log_density(z, 100, sched), x)
    assert np.linalg.norm(fd - analytic) <= 1e-6 * np.linalg.norm(analytic)


def test_gaussian_kl_basics(rng):
    m = rng.standard_normal(4)
    assert gaussian_kl(m, 0.7, m, 0.7) == pytest.approx(0.0, abs=1e-14)
    assert gaussian_kl(m, 0.5, np.zeros(4), 1.0) > 0


def test_weighted_kl_scale(sched):
    prior = GaussianPrior.standard(2)
    t = 300
    a, sg = sched.alpha_at(t), sched.sigma_at(t)
    ref = gaussian_kl(a * np.ones(2), a * a * 0.09 + sg * sg, np.zeros(2), 1.0)
    assert weighted_diffused_kl(np.ones(2), 0.3, prior, sched, t, 2.0) == pytest.approx(2.0 * sg / a * ref, rel=1e-14)


def test_grid_matches_analytic_map():
    p = LinearGaussianProblem([[2.0]], 0.5, [0.3], 0.7)
    m = ops.Measurement([1.1], ops.make_dense_linear(p.A, p.sigma_v))
    grid = grid_posterior_1d(GaussianPrior(np.array([0.3]), 0.7), m, -4, 4, 4001)
    assert abs(grid.argmax - analytic_map(p, m.y)[0]) <= grid.cell


def test_grid_symmetry_and_normalization():
    prior = GaussianMixturePrior([0.5, 0.5], [[-1.0], [1.0]], [0.2, 0.2])
    m = ops.Measurement([0.0], ops.make_dense_linear([[1.0]], 1e4))
    g = grid_posterior_1d(prior, m, -4, 4, 2001)
    assert np.allclose(g.density, g.density[::-1], rtol=0, atol=1e-8)
    assert np.trapezoid(g.density, g.points) == pytest.approx(1.0, abs=1e-10)


def test_grid_errors():
    m = ops.Measurement([0.0, 0.0], ops.make_dense_linear(np.eye(2)))
    with pytest.raises(ValueError):
        grid_posterior_1d(GaussianPrior.standard(2), m, -1, 1)
    m1 = ops.Measurement([0.0], ops.make_dense_linear([[1.0]]))
    with pytest.raises(ValueError):
        grid_posterior_1d(GaussianPrior.standard(1), m1, -1, 1, n=10)
    assert isinstance(grid_posterior_1d(GaussianPrior.standard(1), m1, -1, 1), GridPosterior)


@settings(max_examples=30, deadline=None)
@given(
    y=st.floats(-3, 3),
    a=st.floats(0.2, 3),
    sv=st.floats(0.1, 2),
)
def test_scalar_map_property(y, a, sv):
    p = LinearGaussianProblem([[a]], sv, [0.0])
    expected = a * y / (a * a + sv * sv)
    assert analytic_map(p, [y])[0] == pytest.approx(expected, rel=1e-12, abs=1e-14)
