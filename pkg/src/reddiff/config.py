"""Experiment configuration: one JSON document describing a full run.

Example::

    {
      "schedule": {"beta_min": 1e-4, "beta_max": 0.02, "T": 1000},
      "prior": {"kind": "gmm", "weights": [0.5, 0.5],
                "means": [[-1, -1], [1, 1]], "variances": [0.05, 0.05]},
      "operator": {"kind": "inpainting", "mask": [1, 0], "sigma_v": 0.01},
      "truth_source": {"synthetic_seed": 0},
      "sampler": {"method": "reddiff", "seed": 0,
                  "weighting": {"kind": "inv_snr_power", "lambda": 0.25, "power": 1},
                  "plan": {"kind": "descending", "steps": 1000},
                  "optimizer": {"kind": "adam", "lr": 0.1}},
      "output": {"directory": "runs/gmm", "emit_images": false}
    }

Only ``prior`` and ``operator`` are required. Relative file paths resolve
against the config file's directory.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import operators as ops
from .optim import OptimizerConfig
from .priors import GaussianMixturePrior, GaussianPrior
from .sampler import TimestepPlan, WeightSchedule
from .schedule import NoiseSchedule, build_schedule

METHODS = ("reddiff", "reddiff_dispersion", "dps")


class ConfigError(ValueError):
    pass


def _locate(text: str, path: tuple[str, ...]) -> int | None:
    """Best-effort line number of the key at ``path`` inside the JSON text."""
    pos = 0
    for key in path:
        match = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if match is None:
            return None
        pos = match.start()
    return text.count("\n", 0, pos) + 1


class _Section:
    """Dict wrapper that reports missing/invalid keys with their location."""

    def __init__(self, data, path, source, text):
        if not isinstance(data, dict):
            raise ConfigError(f"{source}: {'.'.join(path) or 'top level'} must be an object")
        self.data, self.path, self.source, self.text = data, path, source, text

    def error(self, key, msg) -> ConfigError:
        full = self.path + ((key,) if key else ())
        line = _locate(self.text, full) or _locate(self.text, self.path)
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: {'.'.join(full)}: {msg}")

    def get(self, key, default=None, kind=None, required=False):
        if key not in self.data:
            if required:
                raise self.error(None, f"missing required key {key!r}")
            return default
        value = self.data[key]
        if kind is not None:
            try:
                value = kind(value)
            except (TypeError, ValueError) as exc:
                raise self.error(key, f"invalid value {value!r} ({exc})") from None
        return value

    def sub(self, key, required=False) -> "_Section":
        if key not in self.data:
            if required:
                raise self.error(None, f"missing required section {key!r}")
            return _Section({}, self.path + (key,), self.source, self.text)
        return _Section(self.data[key], self.path + (key,), self.source, self.text)


@dataclass
class ExperimentConfig:
    schedule: NoiseSchedule
    prior: GaussianPrior | GaussianMixturePrior
    operator: ops.ForwardOperator
    truth_seed: int | None
    truth_file: Path | None
    method: str
    seed: int
    weighting: WeightSchedule
    plan: TimestepPlan
    optimizer: OptimizerConfig
    sigma_init: float = 0.0
    dps_steps: int = 1000
    zeta_scale: float = 0.1
    output_dir: Path = Path("runs/default")
    emit_images: bool = False
    image_format: str = "pgm"
    peak: float = 1.0
    value_range: tuple[float, float] = (0.0, 1.0)
    data: dict = field(default_factory=dict)
    text: str = ""
    source: Path | None = None


def _array(x):
    return np.asarray(x, dtype=np.float64)


def _parse_prior(sec: _Section):
    kind = sec.get("kind", required=True)
    try:
        if kind == "gaussian":
            mean = sec.get("mean", 0.0)
            if np.ndim(mean) == 0:
                dim = sec.get("dim", required=True, kind=int)
                mean = np.full(dim, float(mean))
            return GaussianPrior(_array(mean), sec.get("variance", 1.0, float))
        if kind == "gmm":
            return GaussianMixturePrior(
                sec.get("weights", required=True),
                sec.get("means", required=True),
                sec.get("variances", required=True),
            )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise sec.error(None, str(exc)) from None
    raise sec.error("kind", f"unknown prior kind {kind!r} (expected gaussian or gmm)")


def _parse_operator(sec: _Section, dim: int, base: Path):
    kind = sec.get("kind", required=True)
    sigma_v = sec.get("sigma_v", 0.0, float)
    shape = sec.get("shape")
    try:
        if shape is not None and int(np.prod(shape)) != dim and kind != "dft_magnitude":
            raise sec.error("shape", f"shape {shape} does not hold {dim} values")
        if kind == "identity":
            return ops.make_dense_linear(np.eye(dim), sigma_v)
        if kind == "inpainting":
            if "mask_file" in sec.data:
                mask = ops.load_mask(base / sec.get("mask_file"))
            elif "mask" in sec.data:
                mask = np.asarray(sec.get("mask"))
            else:
                keep = sec.get("keep_fraction", 0.5, float)
                rng = np.random.default_rng(sec.get("mask_seed", 0, int))
                mask = rng.random(dim) < keep
            mask = np.asarray(mask).reshape(-1)
            if mask.size != dim:
                raise sec.error("mask", f"mask has {mask.size} entries, prior has dimension {dim}")
            return ops.make_inpainting_mask(mask, sigma_v, shape)
        if kind == "downsample_avg":
            return ops.make_downsample_avg(_need_shape(sec, shape), sec.get("factor", 2, int), sigma_v)
        if kind == "gaussian_blur":
            return ops.make_gaussian_blur(
                _need_shape(sec, shape), sec.get("kernel_std", 1.0, float), sec.get("kernel_size", 5, int), sigma_v
            )
        if kind == "hdr_clip":
            return ops.make_hdr_clip(dim, sigma_v, shape)
        if kind == "dft_magnitude":
            signal_shape = shape if shape is not None else (dim,)
            if int(np.prod(signal_shape)) != dim:
                raise sec.error("shape", f"shape {shape} does not hold {dim} values")
            return ops.make_dft_magnitude(signal_shape, sec.get("oversample", 2, int), sigma_v)
        if kind == "dense_linear":
            if "A" in sec.data:
                A = _array(sec.get("A"))
            else:
                rows = sec.get("rows", dim, int)
                rng = np.random.default_rng(sec.get("matrix_seed", 0, int))
                A = rng.standard_normal((rows, dim)) / np.sqrt(dim)
            if A.ndim != 2 or A.shape[1] != dim:
                raise sec.error("A", f"matrix shape {A.shape} incompatible with dimension {dim}")
            return ops.make_dense_linear(A, sigma_v)
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise sec.error(None, str(exc)) from None
    raise sec.error("kind", f"unknown operator kind {kind!r}")


def _need_shape(sec, shape):
    if shape is None:
        raise sec.error(None, f"operator {sec.data.get('kind')!r} needs an image 'shape'")
    return shape


def _parse_weighting(sec: _Section) -> WeightSchedule:
    kind = sec.get("kind", "inv_snr_power")
    try:
        return WeightSchedule(
            kind,
            sec.get("lambda", 0.25 if kind != "max_likelihood" else 1.0, float),
            sec.get("power", 1.0 if kind == "inv_snr_power" else 0.0, float),
            None if "omega_prime" not in sec.data else tuple(sec.get("omega_prime")),
        )
    except ValueError as exc:
        raise sec.error(None, str(exc)) from None


def _parse_plan(sec: _Section) -> TimestepPlan:
    try:
        return TimestepPlan(
            sec.get("kind", "descending"),
            sec.get("steps", 1000, int),
            sec.get("batch", 1, int),
            sec.get("epochs", 1, int),
        )
    except ValueError as exc:
        raise sec.error(None, str(exc)) from None


def _parse_optimizer(sec: _Section, steps: int) -> OptimizerConfig:
    try:
        return OptimizerConfig(
            kind=sec.get("kind", "adam"),
            lr=sec.get("lr", 0.1, float),
            steps=sec.get("steps", steps, int),
            beta1=sec.get("beta1", 0.9, float),
            beta2=sec.get("beta2", 0.99, float),
            eps_hat=sec.get("eps_hat", 1e-8, float),
            momentum=sec.get("momentum", 0.0, float),
        )
    except ValueError as exc:
        raise sec.error(None, str(exc)) from None


def parse_config(data: dict, text: str = "", source="<config>", base: Path = Path(".")) -> ExperimentConfig:
    top = _Section(data, (), str(source), text)

    sched = top.sub("schedule")
    try:
        schedule = build_schedule(
            sched.get("beta_min", 1e-4, float), sched.get("beta_max", 0.02, float), sched.get("T", 1000, int)
        )
    except ValueError as exc:
        raise sched.error(None, str(exc)) from None

    prior = _parse_prior(top.sub("prior", required=True))
    operator = _parse_operator(top.sub("operator", required=True), prior.dim, base)

    truth = top.sub("truth_source")
    truth_file = truth.get("tensor_file")
    truth_seed = truth.get("synthetic_seed", None if truth_file else 0, int)

    samp = top.sub("sampler")
    method = samp.get("method", "reddiff")
    if method not in METHODS:
        raise samp.error("method", f"unknown method {method!r} (expected one of {', '.join(METHODS)})")
    plan = _parse_plan(samp.sub("plan"))
    optimizer = _parse_optimizer(samp.sub("optimizer"), plan.steps)
    if optimizer.steps != plan.steps:
        raise samp.error("optimizer", f"optimizer steps {optimizer.steps} differ from plan steps {plan.steps}")
    dps = samp.sub("dps")

    out = top.sub("output")
    image_format = out.get("image_format", "pgm")
    if image_format not in ("pgm", "ppm"):
        raise out.error("image_format", f"unsupported image format {image_format!r}")
    value_range = tuple(out.get("value_range", [0.0, 1.0]))
    if len(value_range) != 2 or not value_range[1] > value_range[0]:
        raise out.error("value_range", f"invalid range {value_range}")

    return ExperimentConfig(
        schedule=schedule,
        prior=prior,
        operator=operator,
        truth_seed=truth_seed,
        truth_file=None if truth_file is None else base / truth_file,
        method=method,
        seed=samp.get("seed", 0, int),
        weighting=_parse_weighting(samp.sub("weighting")),
        plan=plan,
        optimizer=optimizer,
        sigma_init=samp.get("sigma_init", 0.0, float),
        dps_steps=dps.get("steps", 1000, int),
        zeta_scale=dps.get("zeta_scale", 0.1, float),
        output_dir=Path(out.get("directory", "runs/default")),
        emit_images=bool(out.get("emit_images", False)),
        image_format=image_format,
        peak=out.get("peak", 1.0, float),
        value_range=(float(value_range[0]), float(value_range[1])),
        data=data,
        text=text,
        source=None if source == "<config>" else Path(source),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(data, text, path, path.parent)
