"""RED-diff variational sampler.

The posterior is approximated by a point mass (or narrow Gaussian) at ``mu``.
Each optimizer step picks a timestep ``t``, diffuses ``mu`` with fresh noise,
and descends the per-step surrogate

    ||y - f(mu)||^2 + lambda_t * sg[eps_theta(x_t; t) - eps]^T mu

where ``sg`` marks a constant: the prior is only ever evaluated, never
differentiated.
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, field, fields

import numpy as np

from .operators import Measurement
from .optim import OptimizerConfig
from .priors import ScorePrior, mmse_estimate
from .schedule import NoiseSchedule


class NonFiniteLossError(FloatingPointError):
    pass


# --------------------------------------------------------------------------
# weighting


@dataclass(frozen=True)
class WeightSchedule:
    """Per-timestep regularization weight ``lambda_t``.

    kind="inv_snr_power": lam / SNR_t**power (power=1 is the signal-domain
    weighting, power=0 is constant).
    kind="constant": lam.
    kind="max_likelihood": lam * 2 T sigma_v^2 (alpha_t / sigma_t) omega'(t),
    with ``omega_prime`` tabulated on t = 1..T.
    """

    kind: str = "inv_snr_power"
    lam: float = 0.25
    power: float = 1.0
    omega_prime: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("inv_snr_power", "constant", "max_likelihood"):
            raise ValueError(f"unknown weighting {self.kind!r}")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if self.power < 0:
            raise ValueError("power must be nonnegative")
        if self.kind == "max_likelihood":
            if self.omega_prime is None:
                raise ValueError("max_likelihood weighting needs an omega_prime table")
            op = np.asarray(self.omega_prime, dtype=np.float64)
            omega = np.cumsum(op)
            if omega[0] > omega.min():
                raise ValueError("omega must start at its minimum (omega(0) = 0)")
            object.__setattr__(self, "omega_prime", tuple(op.tolist()))

    @classmethod
    def inv_snr(cls, lam: float = 0.25, power: float = 1.0) -> "WeightSchedule":
        return cls("inv_snr_power", lam, power)

    @classmethod
    def constant(cls, lam: float) -> "WeightSchedule":
        return cls("constant", lam, 0.0)

    @classmethod
    def max_likelihood(cls, omega_prime, lam: float = 1.0) -> "WeightSchedule":
        return cls("max_likelihood", lam, 0.0, tuple(np.asarray(omega_prime, dtype=float)))


def lambda_at(w: WeightSchedule, s: NoiseSchedule, t: int, sigma_v: float | None = None) -> float:
    a, sg = s.alpha_at(t), s.sigma_at(t)
    if w.kind == "constant":
        return w.lam
    if w.kind == "inv_snr_power":
        return w.lam * (sg / a) ** w.power
    if sigma_v is None:
        raise ValueError("max_likelihood weighting needs sigma_v")
    if len(w.omega_prime) != s.T:
        raise ValueError(f"omega_prime has {len(w.omega_prime)} entries, schedule has T={s.T}")
    return w.lam * 2 * s.T * sigma_v**2 * (a / sg) * w.omega_prime[t - 1]


def lambda_table(w: WeightSchedule, s: NoiseSchedule, sigma_v: float | None = None) -> np.ndarray:
    return np.array([lambda_at(w, s, t, sigma_v) for t in range(1, s.T + 1)])


# --------------------------------------------------------------------------
# timestep plans

PLAN_KINDS = ("descending", "ascending", "random", "minibatch_random", "minibatch_descending")


def uniform_timesteps(T: int, n: int) -> np.ndarray:
    """``n`` descending timesteps evenly spread over T..1, starting at T.

    For ``n <= T`` the values are distinct; for ``n > T`` each timestep is
    visited ``n / T`` times (up to rounding).
    """
    i = np.arange(n)
    return T - (i * T) // n


@dataclass(frozen=True)
class TimestepPlan:
    kind: str = "descending"
    steps: int = 1000
    batch: int = 1
    epochs: int = 1

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise ValueError(f"unknown timestep plan {self.kind!r}")
        if self.steps < 1 or self.batch < 1 or self.epochs < 1:
            raise ValueError("steps, batch and epochs must be >= 1")
        if not self.kind.startswith("minibatch") and self.batch != 1:
            raise ValueError(f"plan {self.kind!r} takes one timestep per step")

    @property
    def total_steps(self) -> int:
        return self.steps * self.epochs

    def timesteps(self, T: int, rng: np.random.Generator) -> np.ndarray:
        """Integer array of shape ``(steps * epochs, batch)``."""
        n, b = self.steps, self.batch
        epochs = []
        for _ in range(self.epochs):
            if self.kind == "descending":
                ts = uniform_timesteps(T, n)[:, None]
            elif self.kind == "ascending":
                ts = uniform_timesteps(T, n)[::-1, None]
            elif self.kind == "random":
                ts = rng.integers(1, T + 1, size=(n, 1))
            elif self.kind == "minibatch_random":
                ts = rng.integers(1, T + 1, size=(n, b))
            else:
                ts = uniform_timesteps(T, n * b).reshape(n, b)
            epochs.append(ts)
        return np.concatenate(epochs).astype(np.int64)


# --------------------------------------------------------------------------
# trace


@dataclass(frozen=True)
class TraceRecord:
    step: int
    t: int
    loss: float
    recon: float
    reg_inner: float
    eps_residual_norm: float
    signal_residual_norm: float


TRACE_COLUMNS = tuple(f.name for f in fields(TraceRecord))


@dataclass
class RunTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in astuple(r)])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "RunTrace":
        rows = list(csv.reader(io.StringIO(text)))
        if tuple(rows[0]) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {rows[0]}")
        records = [
            TraceRecord(int(r[0]), int(r[1]), *(float(v) for v in r[2:])) for r in rows[1:]
        ]
        return cls(records)


# --------------------------------------------------------------------------
# single step


@dataclass(frozen=True)
class VariationalState:
    mu: np.ndarray
    sigma_q: float = 0.0

    def __post_init__(self):
        if self.sigma_q < 0:
            raise ValueError("sigma_q must be nonnegative")


@dataclass(frozen=True)
class StepResult:
    loss: float
    grad_mu: np.ndarray
    record: TraceRecord


def reconstruction(m: Measurement, mu: np.ndarray) -> tuple[float, np.ndarray]:
    """``||y - f(mu)||^2`` and its gradient."""
    op = m.operator
    resid = op.apply(mu) - m.y
    return float(resid @ resid), 2.0 * op.vjp(mu, resid)


def denoising_residual(prior: ScorePrior, s: NoiseSchedule, mu, t: int, eps):
    """Diffuse ``mu`` and return ``(x_t, eps_theta(x_t; t) - eps, mmse estimate)``."""
    a, sg = s.alpha_at(t), s.sigma_at(t)
    x_t = a * mu + sg * eps
    eps_pred = prior.predict_eps(x_t, t, s)
    return x_t, eps_pred - eps, mmse_estimate(x_t, t, eps_pred, s)


def red_diff_step_loss(
    state: VariationalState,
    m: Measurement,
    prior: ScorePrior,
    s: NoiseSchedule,
    w: WeightSchedule,
    t: int,
    eps,
    step: int = 0,
) -> StepResult:
    mu = np.asarray(state.mu, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != mu.shape:
        raise ValueError(f"eps shape {eps.shape} does not match mu shape {mu.shape}")
    lam_t = lambda_at(w, s, t, m.operator.effective_sigma_v)
    recon, grad_recon = reconstruction(m, mu)
    _, r, mu_hat = denoising_residual(prior, s, mu, t, eps)
    reg_inner = lam_t * float(r @ mu)
    loss = recon + reg_inner
    record = TraceRecord(
        step, int(t), loss, recon, reg_inner,
        float(np.linalg.norm(r)), float(np.linalg.norm(mu_hat - mu)),
    )
    return StepResult(loss, grad_recon + lam_t * r, record)


# --------------------------------------------------------------------------
# sampling loops


@dataclass
class SampleResult:
    mu: np.ndarray
    trace: RunTrace
    sigma_q: float = 0.0


def _check_finite(step, t, loss, grad):
    if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
        raise NonFiniteLossError(f"non-finite loss/gradient at step {step} (t={t}): loss={loss}")


def _start(m: Measurement, plan: TimestepPlan, opt: OptimizerConfig, mu0):
    if plan.steps != opt.steps:
        raise ValueError(f"plan has {plan.steps} steps but optimizer has {opt.steps}")
    mu = m.operator.initial_estimate(m.y) if mu0 is None else np.array(mu0, dtype=np.float64)
    if mu.shape != (m.operator.in_dim,):
        raise ValueError(f"initial estimate has shape {mu.shape}, expected ({m.operator.in_dim},)")
    return mu


def sample(
    m: Measurement,
    prior: ScorePrior,
    s: NoiseSchedule,
    w: WeightSchedule = WeightSchedule(),
    plan: TimestepPlan = TimestepPlan(),
    opt: OptimizerConfig = OptimizerConfig(),
    seed: int = 0,
    mu0=None,
) -> SampleResult:
    """Run RED-diff and return the final ``mu`` with one trace record per step.

    Minibatch plans average losses and gradients over the batch; the trace
    record then reports the first timestep of the batch and its residuals.
    """
    mu = _start(m, plan, opt, mu0)
    rng = np.random.default_rng(seed)
    schedule_t = plan.timesteps(s.T, rng)
    optimizer = opt.build()
    sigma_v = m.operator.effective_sigma_v
    trace = RunTrace()

    for step, ts in enumerate(schedule_t, start=1):
        recon, grad = reconstruction(m, mu)
        reg_total = 0.0
        first = None
        for t in ts:
            eps = rng.standard_normal(mu.shape)
            lam_t = lambda_at(w, s, t, sigma_v)
            _, r, mu_hat = denoising_residual(prior, s, mu, t, eps)
            reg_total += lam_t * float(r @ mu)
            grad = grad + (lam_t / len(ts)) * r
            if first is None:
                first = (float(np.linalg.norm(r)), float(np.linalg.norm(mu_hat - mu)))
        reg_inner = reg_total / len(ts)
        loss = recon + reg_inner
        _check_finite(step, int(ts[0]), loss, grad)
        trace.records.append(TraceRecord(step, int(ts[0]), loss, recon, reg_inner, *first))
        mu = optimizer.step(mu, grad)

    return SampleResult(mu, trace)


def dispersion_eta(s: NoiseSchedule, t: int, sigma_q: float) -> float:
    """``sqrt(1 + sigma_q^2 SNR_t^2)``: inflation of the diffused noise."""
    ratio = sigma_q * s.alpha_at(t) / s.sigma_at(t)
    return float(np.sqrt(1.0 + ratio * ratio))


def dispersion_gradients(mu, sigma_q: float, prior: ScorePrior, s: NoiseSchedule, t: int, eps, lam_t: float):
    """Regularizer gradients for q = N(mu, sigma_q^2 I) at one timestep.

    ``eps`` may carry a leading batch axis; results are per draw.
    Returns ``(grad_mu, grad_sigma, eps_pred, eta)`` where

        grad_mu    = lam_t * eps_theta(x_t; t)
        grad_sigma = sigma_q * lam_t / eta * SNR_t * eps^T (eps_theta - eps / eta)
        x_t        = alpha_t mu + eta sigma_t eps
    """
    a, sg = s.alpha_at(t), s.sigma_at(t)
    eta = dispersion_eta(s, t, sigma_q)
    eps = np.asarray(eps, dtype=np.float64)
    x_t = a * np.asarray(mu) + eta * sg * eps
    eps_pred = prior.predict_eps(x_t, t, s)
    grad_mu = lam_t * eps_pred
    grad_sigma = sigma_q * lam_t / eta * (a / sg) * np.sum(eps * (eps_pred - eps / eta), axis=-1)
    return grad_mu, grad_sigma, eps_pred, eta


def sample_with_dispersion(
    m: Measurement,
    prior: ScorePrior,
    s: NoiseSchedule,
    w: WeightSchedule = WeightSchedule(),
    plan: TimestepPlan = TimestepPlan(),
    opt: OptimizerConfig = OptimizerConfig(),
    seed: int = 0,
    sigma_init: float = 0.0,
    mu0=None,
) -> SampleResult:
    """RED-diff with a learned isotropic dispersion ``sigma_q``.

    ``mu`` and ``sigma_q`` share one optimizer; ``sigma_q`` is clamped at zero
    after each update. The reconstruction term is evaluated at ``mu``. Trace
    residuals are taken against the injected noise ``eta_t * eps``.
    """
    if sigma_init < 0:
        raise ValueError("sigma_init must be nonnegative")
    mu = _start(m, plan, opt, mu0)
    params = np.append(mu, float(sigma_init))
    rng = np.random.default_rng(seed)
    schedule_t = plan.timesteps(s.T, rng)
    optimizer = opt.build()
    sigma_v = m.operator.effective_sigma_v
    trace = RunTrace()

    for step, ts in enumerate(schedule_t, start=1):
        mu, sigma_q = params[:-1], float(params[-1])
        recon, grad_recon = reconstruction(m, mu)
        g_mu = np.zeros_like(mu)
        g_sigma = 0.0
        reg_total = 0.0
        first = None
        for t in ts:
            eps = rng.standard_normal(mu.shape)
            lam_t = lambda_at(w, s, t, sigma_v)
            gm, gs, eps_pred, eta = dispersion_gradients(mu, sigma_q, prior, s, t, eps, lam_t)
            g_mu += gm / len(ts)
            g_sigma += float(gs) / len(ts)
            reg_total += lam_t * float(eps_pred @ mu)
            if first is None:
                x_t = s.alpha_at(t) * mu + eta * s.sigma_at(t) * eps
                mu_hat = mmse_estimate(x_t, t, eps_pred, s)
                first = (float(np.linalg.norm(eps_pred - eta * eps)), float(np.linalg.norm(mu_hat - mu)))
        reg_inner = reg_total / len(ts)
        loss = recon + reg_inner
        grad = np.append(grad_recon + g_mu, g_sigma)
        _check_finite(step, int(ts[0]), loss, grad)
        trace.records.append(TraceRecord(step, int(ts[0]), loss, recon, reg_inner, *first))
        params = optimizer.step(params, grad)
        params[-1] = max(params[-1], 0.0)

    return SampleResult(params[:-1], trace, float(params[-1]))
