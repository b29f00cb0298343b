"""Measurement operators ``y = f(x) + v`` with ``v ~ N(0, sigma_v^2 I)``.

Every operator works on flat float64 vectors. Image operators carry a
``shape`` of ``(H, W)`` or ``(H, W, C)`` and reshape internally, acting on
the two spatial axes.

``vjp(x, u)`` returns ``J_f(x)^T u``; for linear operators it ignores ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Smallest observation noise the sampler and oracles will assume.
SIGMA_V_FLOOR = 1e-3


class ForwardOperator:
    """Base class; subclasses set ``in_dim``, ``out_dim``, ``sigma_v``."""

    linear: bool = True
    in_dim: int
    out_dim: int
    sigma_v: float
    shape: tuple[int, ...] | None = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def vjp(self, x: np.ndarray | None, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def initial_estimate(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def effective_sigma_v(self) -> float:
        return max(float(self.sigma_v), SIGMA_V_FLOOR)

    def _x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.in_dim,):
            raise ValueError(f"{type(self).__name__}: expected input of length {self.in_dim}, got {x.shape}")
        return x

    def _u(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.out_dim,):
            raise ValueError(f"{type(self).__name__}: expected cotangent of length {self.out_dim}, got {u.shape}")
        return u

    def matrix(self) -> np.ndarray:
        """Dense matrix of a linear operator, built column by column."""
        if not self.linear:
            raise TypeError(f"{type(self).__name__} is nonlinear")
        eye = np.eye(self.in_dim)
        return np.stack([self.apply(e) for e in eye], axis=1)


def _check_sigma_v(sigma_v: float) -> float:
    sigma_v = float(sigma_v)
    if not sigma_v >= 0:
        raise ValueError(f"sigma_v must be nonnegative, got {sigma_v}")
    return sigma_v


def _check_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(n) for n in shape)
    if len(shape) not in (2, 3) or min(shape) < 1:
        raise ValueError(f"image shape must be (H, W) or (H, W, C), got {shape}")
    return shape


@dataclass(frozen=True)
class Measurement:
    y: np.ndarray
    operator: ForwardOperator

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if y.size != self.operator.out_dim:
            raise ValueError(f"observation has {y.size} entries, operator produces {self.operator.out_dim}")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)


class Inpainting(ForwardOperator):
    def __init__(self, mask, sigma_v: float = 0.0, shape=None):
        mask = np.asarray(mask).astype(bool).reshape(-1)
        if not mask.any():
            raise ValueError("mask observes no entries")
        self.mask = mask
        self.index = np.flatnonzero(mask)
        self.in_dim = mask.size
        self.out_dim = self.index.size
        self.sigma_v = _check_sigma_v(sigma_v)
        if shape is not None:
            shape = _check_shape(shape)
            if int(np.prod(shape)) != mask.size:
                raise ValueError(f"mask of {mask.size} entries does not fit shape {shape}")
        self.shape = shape

    def apply(self, x):
        return self._x(x)[self.index]

    def vjp(self, x, u):
        out = np.zeros(self.in_dim)
        out[self.index] = self._u(u)
        return out

    def initial_estimate(self, y):
        return self.vjp(None, y)


class DownsampleAvg(ForwardOperator):
    """Average-pool ``factor x factor`` blocks."""

    def __init__(self, shape, factor: int, sigma_v: float = 0.0):
        shape = _check_shape(shape)
        factor = int(factor)
        if factor < 1:
            raise ValueError("factor must be >= 1")
        h, w = shape[:2]
        if h % factor or w % factor:
            raise ValueError(f"image {h}x{w} is not divisible by factor {factor}")
        self.shape = shape
        self.factor = factor
        self.low_shape = (h // factor, w // factor) + shape[2:]
        self.in_dim = int(np.prod(shape))
        self.out_dim = int(np.prod(self.low_shape))
        self.sigma_v = _check_sigma_v(sigma_v)

    def _blocks(self, img):
        h, w = self.low_shape[:2]
        f = self.factor
        return img.reshape((h, f, w, f) + self.shape[2:])

    def apply(self, x):
        img = self._x(x).reshape(self.shape)
        return self._blocks(img).mean(axis=(1, 3)).reshape(-1)

    def _upsample(self, y):
        low = y.reshape(self.low_shape)
        return np.repeat(np.repeat(low, self.factor, axis=0), self.factor, axis=1).reshape(-1)

    def vjp(self, x, u):
        return self._upsample(self._u(u)) / self.factor**2

    def initial_estimate(self, y):
        return self._upsample(self._u(y))


def gaussian_kernel(std: float, size: int) -> np.ndarray:
    size = int(size)
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel_size must be odd and positive, got {size}")
    if size == 1:
        return np.ones((1, 1))
    if not std > 0:
        raise ValueError("kernel_std must be positive")
    r = np.arange(size) - size // 2
    g = np.exp(-0.5 * (r / std) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


class GaussianBlur(ForwardOperator):
    """Same-size convolution with a normalized Gaussian kernel, reflect padding.

    The adjoint correlates with the kernel over the padded domain and folds the
    padded border back onto the pixels it was reflected from.
    """

    def __init__(self, shape, kernel_std: float, kernel_size: int, sigma_v: float = 0.0):
        self.shape = _check_shape(shape)
        self.kernel = gaussian_kernel(kernel_std, kernel_size)
        self.radius = self.kernel.shape[0] // 2
        h, w = self.shape[:2]
        if self.radius >= min(h, w):
            raise ValueError(f"kernel radius {self.radius} too large for {h}x{w} image")
        self.rows = np.pad(np.arange(h), self.radius, mode="reflect")
        self.cols = np.pad(np.arange(w), self.radius, mode="reflect")
        self.in_dim = self.out_dim = int(np.prod(self.shape))
        self.sigma_v = _check_sigma_v(sigma_v)

    def apply(self, x):
        img = self._x(x).reshape(self.shape)
        padded = img[np.ix_(self.rows, self.cols)]
        h, w = self.shape[:2]
        out = np.zeros(self.shape)
        k = self.kernel.shape[0]
        # kernel is symmetric, so convolution and correlation coincide
        for i in range(k):
            for j in range(k):
                out += self.kernel[i, j] * padded[i:i + h, j:j + w]
        return out.reshape(-1)

    def vjp(self, x, u):
        g = self._u(u).reshape(self.shape)
        h, w = self.shape[:2]
        k = self.kernel.shape[0]
        padded = np.zeros((h + k - 1, w + k - 1) + self.shape[2:])
        for i in range(k):
            for j in range(k):
                padded[i:i + h, j:j + w] += self.kernel[i, j] * g
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows[:, None], self.cols[None, :]), padded)
        return out.reshape(-1)

    def initial_estimate(self, y):
        return self._u(y).copy()


class HDRClip(ForwardOperator):
    """``clip(2x, -1, 1)`` elementwise."""

    linear = False

    def __init__(self, dim: int, sigma_v: float = 0.0, shape=None):
        self.in_dim = self.out_dim = int(dim)
        self.sigma_v = _check_sigma_v(sigma_v)
        self.shape = None if shape is None else _check_shape(shape)

    def apply(self, x):
        return np.clip(2.0 * self._x(x), -1.0, 1.0)

    def derivative(self, x) -> np.ndarray:
        return np.where(np.abs(2.0 * self._x(x)) < 1.0, 2.0, 0.0)

    def vjp(self, x, u):
        return self.derivative(x) * self._u(u)

    def initial_estimate(self, y):
        return self._u(y) / 2.0


class DFTMagnitude(ForwardOperator):
    """Fourier magnitudes of the zero-padded signal.

    ``signal_shape`` is ``(n,)`` for 1-D signals or ``(H, W)`` for images;
    each axis is zero-padded to ``oversample`` times its length.
    """

    linear = False

    def __init__(self, signal_shape, oversample: int = 2, sigma_v: float = 0.0):
        if int(oversample) < 1:
            raise ValueError("oversample must be >= 1")
        self.signal_shape = tuple(int(n) for n in np.atleast_1d(signal_shape))
        self.oversample = int(oversample)
        self.padded_shape = tuple(self.oversample * n for n in self.signal_shape)
        self.in_dim = int(np.prod(self.signal_shape))
        self.out_dim = int(np.prod(self.padded_shape))
        self.sigma_v = _check_sigma_v(sigma_v)
        self.shape = self.signal_shape if len(self.signal_shape) == 2 else None

    def transform(self, x) -> np.ndarray:
        axes = tuple(range(len(self.signal_shape)))
        return np.fft.fftn(self._x(x).reshape(self.signal_shape), s=self.padded_shape, axes=axes)

    def apply(self, x):
        return np.abs(self.transform(x)).reshape(-1)

    def vjp(self, x, u):
        z = self.transform(x)
        mag = np.abs(z)
        phase = np.divide(z, mag, out=np.zeros_like(z), where=mag > 0)
        w = self._u(u).reshape(self.padded_shape) * phase
        # adjoint of the unnormalized DFT is size * ifft
        back = np.fft.ifftn(w).real * self.out_dim
        crop = tuple(slice(0, n) for n in self.signal_shape)
        return back[crop].reshape(-1)

    def initial_estimate(self, y):
        self._u(y)
        return np.zeros(self.in_dim)


class DenseLinear(ForwardOperator):
    def __init__(self, A, sigma_v: float = 0.0):
        A = np.array(A, dtype=np.float64)
        if A.ndim != 2:
            raise ValueError(f"A must be a matrix, got shape {A.shape}")
        A.flags.writeable = False
        self.A = A
        self.out_dim, self.in_dim = A.shape
        self.sigma_v = _check_sigma_v(sigma_v)

    def apply(self, x):
        return self.A @ self._x(x)

    def vjp(self, x, u):
        return self.A.T @ self._u(u)

    def initial_estimate(self, y):
        return self.vjp(None, y)

    def matrix(self):
        return np.array(self.A)


def make_inpainting_mask(mask, sigma_v: float = 0.0, shape=None) -> Inpainting:
    return Inpainting(mask, sigma_v, shape)


def make_downsample_avg(shape, factor: int, sigma_v: float = 0.0) -> DownsampleAvg:
    return DownsampleAvg(shape, factor, sigma_v)


def make_gaussian_blur(shape, kernel_std: float, kernel_size: int, sigma_v: float = 0.0) -> GaussianBlur:
    return GaussianBlur(shape, kernel_std, kernel_size, sigma_v)


def make_hdr_clip(dim: int, sigma_v: float = 0.0, shape=None) -> HDRClip:
    return HDRClip(dim, sigma_v, shape)


def make_dft_magnitude(signal_shape, oversample: int = 2, sigma_v: float = 0.0) -> DFTMagnitude:
    return DFTMagnitude(signal_shape, oversample, sigma_v)


def make_dense_linear(A, sigma_v: float = 0.0) -> DenseLinear:
    return DenseLinear(A, sigma_v)


def load_mask(path) -> np.ndarray:
    """Read a 0/1 mask from a text grid (one row per line) or raw 0/1 bytes.

    Text grids may separate digits by whitespace or write them contiguously.
    Returns a boolean array, 2-D for multi-row text grids.
    """
    raw = open(path, "rb").read()
    text_chars = set(b"01 \t\r\n,")
    if raw and set(raw) <= text_chars:
        rows = []
        for line in raw.decode("ascii").splitlines():
            digits = [c for c in line if c in "01"]
            if digits:
                rows.append([c == "1" for c in digits])
        if len({len(r) for r in rows}) != 1:
            raise ValueError(f"{path}: ragged mask rows")
        mask = np.array(rows, dtype=bool)
        return mask[0] if mask.shape[0] == 1 else mask
    data = np.frombuffer(raw, dtype=np.uint8)
    if not np.isin(data, (0, 1)).all():
        raise ValueError(f"{path}: binary mask bytes must be 0 or 1")
    return data.astype(bool)
