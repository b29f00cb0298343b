"""File formats: raw f64 tensors with a JSON sidecar, and 8-bit PGM/PPM images."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_tensor(path, array) -> None:
    """Little-endian float64, row-major, plus ``<stem>.json`` with the shape."""
    array = np.ascontiguousarray(array, dtype="<f8")
    Path(path).write_bytes(array.tobytes(order="C"))
    meta = {"shape": list(array.shape), "dtype": "f64", "order": "row-major"}
    sidecar_path(path).write_text(json.dumps(meta) + "\n")


def read_tensor(path) -> np.ndarray:
    meta = json.loads(sidecar_path(path).read_text())
    if meta.get("dtype") != "f64" or meta.get("order", "row-major") != "row-major":
        raise ValueError(f"{path}: unsupported tensor metadata {meta}")
    data = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    shape = tuple(meta["shape"])
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: {data.size} values do not fill shape {shape}")
    return data.reshape(shape).astype(np.float64)


def to_8bit(img, value_range=(0.0, 1.0)) -> np.ndarray:
    lo, hi = value_range
    scaled = (np.asarray(img, dtype=np.float64) - lo) / (hi - lo)
    return np.round(np.clip(scaled, 0.0, 1.0) * 255).astype(np.uint8)


def write_image(path, img, value_range=(0.0, 1.0)) -> None:
    """Binary PGM for (H, W) arrays, PPM for (H, W, 3)."""
    data = to_8bit(img, value_range)
    if data.ndim == 2:
        magic = b"P5"
    elif data.ndim == 3 and data.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot write image of shape {data.shape}")
    h, w = data.shape[:2]
    Path(path).write_bytes(magic + f"\n{w} {h}\n255\n".encode() + data.tobytes())


def read_image(path) -> np.ndarray:
    """Inverse of :func:`write_image` for files it wrote; returns uint8."""
    raw = Path(path).read_bytes()
    magic, dims, maxval, body = raw.split(b"\n", 3)
    w, h = (int(v) for v in dims.split())
    if int(maxval) != 255:
        raise ValueError("only 8-bit images are supported")
    shape = (h, w) if magic == b"P5" else (h, w, 3)
    return np.frombuffer(body, dtype=np.uint8).reshape(shape)
