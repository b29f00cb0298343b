"""Noise schedule and why late timesteps are noisy.

The MMSE denoiser turns an error in the noise prediction into an error in the
signal estimate scaled by sigma_t / alpha_t. That factor is tiny at t = 1 and
above a hundred at t = 1000. In the bands below the noise residual drops by two
orders of magnitude towards t = 1000 while the signal residual does not.
"""

import numpy as np

from reddiff import GaussianMixturePrior, Measurement, OptimizerConfig, TimestepPlan, WeightSchedule
from reddiff import build_schedule, make_inpainting_mask, sample

s = build_schedule(1e-4, 0.02, 1000)
print(f"alpha_1 = {s.alpha_at(1):.6f}  alpha_1000 = {s.alpha_at(1000):.6f}")
print(f"max |alpha^2 + sigma^2 - 1| = {np.max(np.abs(s.alpha**2 + s.sigma**2 - 1)):.1e}")

for t in (1, 100, 500, 900, 1000):
    print(f"t={t:4d}  sigma/alpha = {s.sigma_at(t) / s.alpha_at(t):9.4f}")

prior = GaussianMixturePrior([0.5, 0.5], [[-1.0, -1.0], [1.0, 1.0]], [0.05, 0.05])
m = Measurement(np.array([0.9]), make_inpainting_mask([True, False], sigma_v=0.05))
res = sample(m, prior, s, WeightSchedule.inv_snr(0.25), TimestepPlan("random", 2000), OptimizerConfig(steps=2000), seed=0)

t = res.trace.column("t")
noise = res.trace.column("eps_residual_norm")
signal = res.trace.column("signal_residual_norm")
print("\nmean residual norms by timestep band (random plan):")
for lo, hi in ((1, 200), (200, 600), (600, 900), (900, 1001)):
    sel = (t >= lo) & (t < hi)
    print(f"  t in [{lo:4d},{hi:4d})  noise {noise[sel].mean():.3f}  signal {signal[sel].mean():8.3f}")

ratio = signal / (s.sigma[t - 1] / s.alpha[t - 1] * noise)
print(f"\nresidual identity holds to {np.max(np.abs(ratio - 1)):.1e} on {len(t)} records")
