"""RED-diff: posterior sampling for inverse problems as variational optimization
regularized by a denoising diffusion prior. Priors are analytic (Gaussian and
Gaussian mixtures) so every quantity has an exact reference."""

from .metrics import MetricReport, mse, psnr, report, ssim
from .operators import (
    DenseLinear,
    DFTMagnitude,
    DownsampleAvg,
    ForwardOperator,
    GaussianBlur,
    HDRClip,
    Inpainting,
    Measurement,
    make_dense_linear,
    make_dft_magnitude,
    make_downsample_avg,
    make_gaussian_blur,
    make_hdr_clip,
    make_inpainting_mask,
)
from .optim import OptimizerConfig
from .priors import GaussianMixturePrior, GaussianPrior, mmse_estimate
from .sampler import (
    NonFiniteLossError,
    RunTrace,
    TimestepPlan,
    WeightSchedule,
    red_diff_step_loss,
    sample,
    sample_with_dispersion,
)
from .schedule import NoiseSchedule, build_schedule, diffuse, snr

__version__ = "0.1.0"
