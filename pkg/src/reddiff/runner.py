"""Run a configured experiment and write its output directory.

An output directory holds exactly: ``config.json`` (snapshot), ``trace.csv``,
``mu.bin`` + ``mu.json``, ``summary.json`` and, when enabled and the unknown
is an image, ``truth``/``mu`` images.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io, metrics
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .dps import dps_baseline_sample
from .operators import Measurement
from .oracle import LinearGaussianProblem, analytic_map
from .priors import GaussianPrior
from .sampler import RunTrace, sample, sample_with_dispersion

log = logging.getLogger(__name__)

OUTPUT_ENV = "REDDIFF_OUTPUT_DIR"
SWEEP_PARAMS = ("lambda", "lr", "steps", "weighting", "plan", "epochs")


def make_measurement(cfg: ExperimentConfig) -> tuple[np.ndarray, Measurement]:
    """Ground truth and a noisy observation of it."""
    if cfg.truth_file is not None:
        x0 = io.read_tensor(cfg.truth_file).reshape(-1)
        if x0.size != cfg.prior.dim:
            raise ConfigError(f"{cfg.truth_file}: {x0.size} values, prior has dimension {cfg.prior.dim}")
        rng = np.random.default_rng(cfg.seed)
    else:
        rng = np.random.default_rng(cfg.truth_seed)
        x0 = cfg.prior.sample(rng)
    op = cfg.operator
    y = op.apply(x0) + op.sigma_v * rng.standard_normal(op.out_dim)
    return x0, Measurement(y, op)


def linear_gaussian_map(cfg: ExperimentConfig, m: Measurement) -> np.ndarray | None:
    """Closed-form MAP when the prior is Gaussian and the operator linear."""
    if not isinstance(cfg.prior, GaussianPrior) or not m.operator.linear or m.operator.in_dim > 4096:
        return None
    p = LinearGaussianProblem(m.operator.matrix(), m.operator.effective_sigma_v, cfg.prior.mean, cfg.prior.variance)
    return analytic_map(p, m.y)


def solve(cfg: ExperimentConfig, m: Measurement, seed: int):
    if cfg.method == "reddiff":
        res = sample(m, cfg.prior, cfg.schedule, cfg.weighting, cfg.plan, cfg.optimizer, seed)
        return res.mu, res.trace, None
    if cfg.method == "reddiff_dispersion":
        res = sample_with_dispersion(
            m, cfg.prior, cfg.schedule, cfg.weighting, cfg.plan, cfg.optimizer, seed, cfg.sigma_init
        )
        return res.mu, res.trace, res.sigma_q
    mu = dps_baseline_sample(m, cfg.prior, cfg.schedule, cfg.dps_steps, cfg.zeta_scale, seed)
    # no optimizer steps, so the trace is header-only
    return mu, RunTrace(), None


def run_experiment(cfg: ExperimentConfig, out_dir=None, seed: int | None = None, snapshot: bytes | None = None) -> dict:
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else seed

    x0, m = make_measurement(cfg)
    mu, trace, sigma_q = solve(cfg, m, seed)

    shape = m.operator.shape or (m.operator.in_dim,)
    (out / "config.json").write_bytes(snapshot if snapshot is not None else cfg.text.encode())
    trace.write_csv(out / "trace.csv")
    io.write_tensor(out / "mu.bin", mu.reshape(shape))

    resid = m.operator.apply(mu) - m.y
    image_shape = shape if len(shape) >= 2 else None
    summary = {
        "method": cfg.method,
        "seed": seed,
        "steps": len(trace),
        "final_loss": trace.records[-1].loss if len(trace) else float(resid @ resid),
        "final_recon": float(resid @ resid),
        "vs_truth": metrics.report(mu, x0, cfg.peak, image_shape).to_dict(),
    }
    if sigma_q is not None:
        summary["sigma_q"] = sigma_q
    x_map = linear_gaussian_map(cfg, m)
    if x_map is not None:
        summary["vs_map"] = metrics.report(mu, x_map, cfg.peak, image_shape).to_dict()
        summary["map_gap"] = float(np.linalg.norm(mu - x_map) / max(np.linalg.norm(x_map), 1e-300))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    if cfg.emit_images and image_shape is not None:
        ext = "ppm" if len(image_shape) == 3 else "pgm"
        io.write_image(out / f"truth.{ext}", x0.reshape(image_shape), cfg.value_range)
        io.write_image(out / f"mu.{ext}", mu.reshape(image_shape), cfg.value_range)
    log.info("wrote %s", out)
    return summary


def run_config_file(path, out_dir=None, seed=None) -> dict:
    cfg = load_config(path)
    return run_experiment(cfg, out_dir, seed, Path(path).read_bytes())


# --------------------------------------------------------------------------
# sweeps


def _parse_weighting_value(value: str) -> dict:
    if value == "constant":
        return {"kind": "inv_snr_power", "power": 0.0}
    if value.startswith("p="):
        return {"kind": "inv_snr_power", "power": float(value[2:])}
    raise ValueError(f"weighting value {value!r} must look like 'p=0.5' or 'constant'")


def apply_override(data: dict, param: str, value: str) -> dict:
    """Copy of the config dict with one sweep parameter set."""
    data = copy.deepcopy(data)
    sampler = data.setdefault("sampler", {})
    if param == "lambda":
        sampler.setdefault("weighting", {})["lambda"] = float(value)
    elif param == "lr":
        sampler.setdefault("optimizer", {})["lr"] = float(value)
    elif param == "steps":
        sampler.setdefault("plan", {})["steps"] = int(value)
        sampler.setdefault("optimizer", {})["steps"] = int(value)
    elif param == "epochs":
        sampler.setdefault("plan", {})["epochs"] = int(value)
    elif param == "weighting":
        sampler.setdefault("weighting", {}).update(_parse_weighting_value(value))
    elif param == "plan":
        kind, _, batch = value.partition(":")
        plan = sampler.setdefault("plan", {})
        plan["kind"] = kind
        plan["batch"] = int(batch) if batch else 1
    else:
        raise ValueError(f"unknown sweep parameter {param!r} (expected one of {', '.join(SWEEP_PARAMS)})")
    return data


def _sweep_one(args):
    data, base, out, source = args
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    cfg = parse_config(data, text, source, Path(base))
    return run_experiment(cfg, out, snapshot=text.encode())


def sweep(path, param: str, values: list[str], out_dir=None, workers: int = 1) -> Path:
    """One run directory per value plus ``sweep.csv`` with the headline numbers."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r} (expected one of {', '.join(SWEEP_PARAMS)})")
    if not values:
        raise ValueError("sweep needs at least one value")
    cfg = load_config(path)
    root = Path(out_dir or cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    jobs = []
    for value in values:
        data = apply_override(cfg.data, param, value)
        parse_config(data, cfg.text, path, Path(path).parent)  # fail fast before any run
        jobs.append((data, str(Path(path).parent), root / f"{param}={value}", str(path)))

    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            summaries = list(pool.map(_sweep_one, jobs))
    else:
        summaries = [_sweep_one(job) for job in jobs]

    with open(root / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["value", "final_loss", "psnr", "map_gap"])
        for value, summ in zip(values, summaries):
            writer.writerow([value, repr(summ["final_loss"]), summ["vs_truth"]["psnr_db"], summ.get("map_gap", "")])
    return root
