"""Linear-Gaussian problems: where RED-diff lands relative to the MAP.

For a standard-normal prior, lambda_t = lambda / SNR_t gives an expected
regularizer gradient of lambda * sigma_t^2 * mu. Averaged over t, the
stationary point is the MAP once lambda = 2 sigma_v^2 / mean(sigma_t^2).

The descending plan does not average over t: its last steps have sigma_t
near zero, so the regularizer fades and Adam follows the data term towards
least squares. Uniformly random timesteps with a small step size do the
averaging and land on the MAP.
"""

import numpy as np

from reddiff import GaussianPrior, Measurement, OptimizerConfig, TimestepPlan, WeightSchedule
from reddiff import build_schedule, make_dense_linear, sample
from reddiff.checks import map_problem
from reddiff.oracle import analytic_map, calibrated_lambda

s = build_schedule()
p, y = map_problem()
x_map = analytic_map(p, y)
x_ls = np.linalg.lstsq(p.A, y, rcond=None)[0]
lam = calibrated_lambda(p, s)
m = Measurement(y, make_dense_linear(p.A, p.sigma_v))
prior = GaussianPrior.standard(16)
gap = lambda x: np.linalg.norm(x - x_map) / np.linalg.norm(x_map)

print(f"calibrated lambda = {lam:.4f}; least squares sits {gap(x_ls):.3f} from the MAP")
runs = [
    ("descending, lr 0.1, 2000 steps", TimestepPlan("descending", 2000), OptimizerConfig(lr=0.1, steps=2000)),
    ("random, lr 0.01, 2000 steps", TimestepPlan("random", 2000), OptimizerConfig(lr=0.01, steps=2000)),
    ("random, lr 0.001, 20000 steps", TimestepPlan("random", 20000), OptimizerConfig(lr=1e-3, steps=20000)),
]
for label, plan, opt in runs:
    res = sample(m, prior, s, WeightSchedule.inv_snr(lam), plan, opt, seed=0)
    print(f"  {label:32s} distance to MAP {gap(res.mu):.3f}")
