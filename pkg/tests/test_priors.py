import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from reddiff.oracle import finite_diff_grad, gmm_diffused_log_density
from reddiff.priors import (
    DegenerateAlphaError,
    GaussianMixturePrior,
    GaussianPrior,
    gaussian_eps,
    gmm_eps,
    mmse_estimate,
)
from reddiff.schedule import NoiseSchedule, build_schedule, diffuse

from conftest import t_where_snr


def _table(alpha, sigma):
    # single-step schedule with prescribed coefficients
    return NoiseSchedule(T=1, beta=[1 - alpha**2], alpha=[alpha], sigma=[sigma])


def test_standard_gaussian_eps_is_sigma_x(sched, rng):
    p = GaussianPrior.standard(3)
    x = rng.standard_normal(3)
    for t in (1, 400, 1000):
        assert np.allclose(gaussian_eps(p, x, t, sched), sched.sigma_at(t) * x, rtol=1e-12)


def test_gaussian_hand_value():
    s = _table(0.6, 0.8)
    out = GaussianPrior.standard(1).predict_eps([1.0], 1, s)
    assert out == pytest.approx([0.8], abs=1e-15)
    # cross-check by finite differences of the log density
    fd = finite_diff_grad(lambda z: GaussianPrior.standard(1).log_density(z, 1, s), np.array([1.0]))
    assert -0.8 * fd == pytest.approx([0.8], rel=1e-8)


def test_gaussian_zero_at_mode(sched):
    p = GaussianPrior(np.array([0.5, -1.0]), 2.0)
    assert np.allclose(p.predict_eps(sched.alpha_at(50) * p.mean, 50, sched), 0.0)


def test_batch_broadcast(sched, rng):
    p = GaussianMixturePrior([0.3, 0.7], [[0, 1], [1, 0]], [0.2, 0.5])
    xs = rng.standard_normal((6, 2))
    batch = p.predict_eps(xs, 300, sched)
    rows = np.array([p.predict_eps(x, 300, sched) for x in xs])
    assert batch.shape == (6, 2)
    assert np.allclose(batch, rows, rtol=1e-14)


def test_single_component_matches_gaussian(sched, rng):
    mean = rng.standard_normal(3)
    g = GaussianPrior(mean, 0.4)
    m = GaussianMixturePrior([1.0], [mean], [0.4])
    x = rng.standard_normal(3)
    for t in (2, 700):
        assert np.allclose(gmm_eps(m, x, t, sched), gaussian_eps(g, x, t, sched), rtol=1e-12, atol=1e-15)


def test_symmetric_mixture_zero_at_origin(sched):
    m = GaussianMixturePrior([0.5, 0.5], [[1.0, 2.0], [-1.0, -2.0]], [0.1, 0.1])
    assert np.allclose(m.predict_eps(np.zeros(2), 100, sched), 0.0, atol=1e-15)


def test_gmm_score_vs_finite_differences(sched):
    rng = np.random.default_rng(7)
    m = GaussianMixturePrior([0.2, 0.3, 0.5], rng.normal(0, 1.5, (3, 2)), [0.3, 0.5, 1.0])
    for t in (1, 10, 250, 600, 1000):
        x = rng.standard_normal(2)
        score = -m.predict_eps(x, t, sched) / sched.sigma_at(t)
        fd = finite_diff_grad(lambda z: gmm_diffused_log_density(m, z, t, sched), x)
        assert np.linalg.norm(score - fd) <= 1e-6 * np.linalg.norm(fd)


def test_gmm_log_density_matches_scipy(sched, rng):
    m = GaussianMixturePrior([0.4, 0.6], [[0, 0], [2, 1]], [0.5, 0.2])
    x = rng.standard_normal(2)
    assert m.log_density(x, 90, sched) == pytest.approx(gmm_diffused_log_density(m, x, 90, sched), rel=1e-12)


def test_gmm_stable_far_from_modes(sched):
    m = GaussianMixturePrior([0.5, 0.5], [[-1, -1], [1, 1]], [1e-4, 1e-4])
    out = m.predict_eps(np.array([500.0, -300.0]), 1, sched)
    assert np.all(np.isfinite(out))
    r = m.responsibilities(np.array([500.0, -300.0]), 1, sched)
    assert r.sum() == pytest.approx(1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(weights=[0.5, 0.6], means=[[0], [1]], variances=[1, 1]),
        dict(weights=[1.0], means=[[0]], variances=[0.0]),
        dict(weights=[0.5, 0.5], means=[[0], [1]], variances=[1]),
        dict(weights=[-0.5, 1.5], means=[[0], [1]], variances=[1, 1]),
    ],
)
def test_gmm_validation(kwargs):
    with pytest.raises(ValueError):
        GaussianMixturePrior(**kwargs)


def test_gaussian_validation():
    with pytest.raises(ValueError):
        GaussianPrior(np.zeros(2), 0.0)


def test_mmse_inverts_diffusion(sched, rng):
    x0, eps = rng.standard_normal(4), rng.standard_normal(4)
    t = 333
    x_t = diffuse(sched, x0, t, eps)
    assert np.allclose(mmse_estimate(x_t, t, eps, sched), x0, rtol=1e-12, atol=1e-12)
    assert np.allclose(mmse_estimate(x_t, t, np.zeros(4), sched), x_t / sched.alpha_at(t))


def test_mmse_degenerate_alpha():
    s = build_schedule(0.999999, 0.999999, 200)
    assert s.alpha_at(200) == 0.0
    with pytest.raises(DegenerateAlphaError):
        mmse_estimate(np.ones(2), 200, np.zeros(2), s)


@settings(max_examples=60, deadline=None)
@given(
    mu=arrays(np.float64, 3, elements=st.floats(-5, 5)),
    eps=arrays(np.float64, 3, elements=st.floats(-5, 5)),
    pred=arrays(np.float64, 3, elements=st.floats(-5, 5)),
    t=st.integers(1, 1000),
)
def test_signal_noise_residual_identity(mu, eps, pred, t):
    s = build_schedule()
    x_t = diffuse(s, mu, t, eps)
    lhs = mu - mmse_estimate(x_t, t, pred, s)
    rhs = s.sigma_at(t) / s.alpha_at(t) * (pred - eps)
    # absolute slack scales with the amplification sigma_t / alpha_t (up to ~160)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-12 * (1 + s.sigma_at(t) / s.alpha_at(t)))


def test_sampling_moments(rng):
    m = GaussianMixturePrior([0.25, 0.75], [[-2.0], [2.0]], [0.5, 0.5])
    x = m.sample(rng, 200_000)[:, 0]
    assert x.mean() == pytest.approx(0.25 * -2 + 0.75 * 2, abs=0.02)
    assert x.var() == pytest.approx(0.5 + 4 - 1.0, abs=0.05)


def test_snr_helper(sched):
    t = t_where_snr(sched, 1.0)
    assert abs(sched.alpha_at(t) / sched.sigma_at(t) - 1) < 0.01
