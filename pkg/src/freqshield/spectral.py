"""2D spectra, radial binary masks, and hard frequency filtering.

The transform is an iterative radix-2 FFT, so spatial dims must be
powers of two; :func:`pad_to_pow2` exists for everything else. Forward
transforms are unnormalized and returned center-shifted with the zero
frequency at (H//2, W//2); the inverse applies the 1/(H*W) factor.

Masks are binary and defined on normalized radial distance, where the
center bin sits at distance 0 and the (0,0) corner at exactly 1. A
low-pass keeps distance <= r (boundary inclusive); the high-pass is the
strict complement, so the two masks always sum to all-ones. Masks built
this way are point-symmetric, which keeps filtered real images real and
makes the filter its own adjoint: the backward rule is simply the same
filter applied to the incoming gradient.

Internally all transforms run in complex128 regardless of the active
default dtype; results are cast back to the caller's dtype.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, accumulate_grad, result_tensor

_FILTER_KINDS = ("low_pass", "high_pass")


def _require_pow2(n: int, axis_name: str) -> None:
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(
            f"{axis_name} size {n} is not a power of two; pad with pad_to_pow2() first"
        )


@functools.lru_cache(maxsize=64)
def _bit_reversed_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def _fft_last_axis(a: np.ndarray, inverse: bool) -> np.ndarray:
    """Radix-2 Cooley-Tukey along the last axis, no normalization."""
    n = a.shape[-1]
    out = a[..., _bit_reversed_indices(n)].astype(np.complex128, copy=True)
    sign = 1.0 if inverse else -1.0
    m = 2
    while m <= n:
        half = m // 2
        w = np.exp(sign * 2j * np.pi * np.arange(half) / m)
        v = out.reshape(out.shape[:-1] + (n // m, m))
        even = v[..., :half]
        odd = v[..., half:] * w
        out = np.concatenate([even + odd, even - odd], axis=-1).reshape(out.shape)
        m *= 2
    return out


def _fft2_raw(a: np.ndarray, inverse: bool) -> np.ndarray:
    out = _fft_last_axis(a, inverse)
    out = _fft_last_axis(out.swapaxes(-1, -2), inverse).swapaxes(-1, -2)
    return out


@dataclass
class Spectrum:
    """Center-shifted complex 2D spectrum (zero frequency at H//2, W//2)."""

    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[-2], self.values.shape[-1]


def fft2(image: Tensor | np.ndarray) -> Spectrum:
    """Unnormalized forward transform of a 2D image, center-shifted.

    Raises ValueError when either dim is not a power of two.
    """
    data = image.data if isinstance(image, Tensor) else np.asarray(image)
    if data.ndim != 2:
        raise ValueError(f"fft2 expects a 2-d image, got shape {data.shape}")
    h, w = data.shape
    _require_pow2(h, "fft2 height")
    _require_pow2(w, "fft2 width")
    raw = _fft2_raw(data.astype(np.complex128), inverse=False)
    return Spectrum(np.roll(raw, (h // 2, w // 2), axis=(-2, -1)))


def ifft2(spectrum: Spectrum) -> tuple[Tensor, float]:
    """Invert a center-shifted spectrum.

    Returns:
        (real image as a Tensor in the active default dtype,
         largest absolute imaginary residual discarded in the process).
    """
    vals = spectrum.values
    if vals.ndim != 2:
        raise ValueError(f"ifft2 expects a 2-d spectrum, got shape {vals.shape}")
    h, w = vals.shape
    _require_pow2(h, "ifft2 height")
    _require_pow2(w, "ifft2 width")
    unshifted = np.roll(vals, (-(h // 2), -(w // 2)), axis=(-2, -1))
    out = _fft2_raw(unshifted.astype(np.complex128), inverse=True) / (h * w)
    residual = float(np.abs(out.imag).max())
    return Tensor(out.real), residual


@dataclass(frozen=True)
class FilterSpec:
    """A band selection: kind, normalized radius, and grid shape."""

    kind: str
    radius: float
    shape: tuple[int, int]

    def __post_init__(self):
        if self.kind not in _FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; expected one of {_FILTER_KINDS}")
        if not 0.0 <= self.radius <= 1.0:
            raise ValueError(f"filter radius must lie in [0, 1], got {self.radius}")
        if len(self.shape) != 2 or self.shape[0] < 1 or self.shape[1] < 1:
            raise ValueError(f"filter shape must be two positive dims, got {self.shape}")


def normalized_distance(shape: tuple[int, int]) -> np.ndarray:
    """Radial distance of every bin from the centered zero frequency.

    Scaled so the center is 0.0 and the (0,0) corner exactly 1.0.
    """
    h, w = shape
    cy, cx = h // 2, w // 2
    yy = np.arange(h)[:, None] - cy
    xx = np.arange(w)[None, :] - cx
    corner = np.sqrt(float(cy * cy + cx * cx))
    if corner == 0.0:
        return np.zeros((h, w))
    return np.sqrt((yy * yy + xx * xx).astype(np.float64)) / corner


@functools.lru_cache(maxsize=256)
def _mask_cached(kind: str, radius: float, shape: tuple[int, int]) -> np.ndarray:
    d = normalized_distance(shape)
    # r=0 passes nothing, not just the mean bin: the zero-radius filter
    # is the transmits-nothing control, and a mean color is far from
    # nothing. The complement rule keeps LP(r)+HP(r) an exact partition
    # at every radius.
    if radius == 0.0:
        low = np.zeros(shape, dtype=np.float64)
    else:
        low = (d <= radius).astype(np.float64)
    mask = low if kind == "low_pass" else 1.0 - low
    mask.setflags(write=False)
    return mask


def make_mask(spec: FilterSpec) -> np.ndarray:
    """Materialize the binary {0,1} mask for a filter spec."""
    return _mask_cached(spec.kind, spec.radius, spec.shape)


def filter_array(arr: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Apply a hard band mask to (..., H, W); pure numpy, no gradients.

    The imaginary residual left after masking is asserted negligible
    before being discarded, which guards against asymmetric masks.
    """
    if arr.ndim < 2:
        raise ValueError(f"filter_array expects at least 2 dims, got shape {arr.shape}")
    h, w = arr.shape[-2], arr.shape[-1]
    if (h, w) != spec.shape:
        raise ValueError(f"image dims {(h, w)} do not match filter shape {spec.shape}")
    _require_pow2(h, "filter height")
    _require_pow2(w, "filter width")
    mask = make_mask(spec)
    raw = _fft2_raw(arr.astype(np.complex128), inverse=False)
    shifted = np.roll(raw, (h // 2, w // 2), axis=(-2, -1))
    shifted *= mask
    unshifted = np.roll(shifted, (-(h // 2), -(w // 2)), axis=(-2, -1))
    out = _fft2_raw(unshifted, inverse=True) / (h * w)
    residual = float(np.abs(out.imag).max())
    scale = float(np.abs(arr).max()) if arr.size else 0.0
    if residual > 1e-6 * max(scale, 1.0):
        raise ArithmeticError(
            f"filtering produced imaginary residual {residual:.3e}; mask is not point-symmetric"
        )
    return out.real.astype(arr.dtype, copy=False)


def apply_filter(image: Tensor, spec: FilterSpec) -> Tensor:
    """Differentiable hard filtering of (..., H, W) image tensors.

    Channels (and any batch axes) are filtered independently. The map is
    linear and self-adjoint, so the backward rule applies the identical
    filter to the upstream gradient.
    """
    if not isinstance(image, Tensor):
        raise TypeError(f"apply_filter expects a Tensor, got {type(image).__name__}")
    arr = filter_array(image.data, spec)

    def rule(g: np.ndarray) -> None:
        accumulate_grad(image, filter_array(g, spec))

    return result_tensor(arr, (image,), rule)


@dataclass(frozen=True)
class PadExtent:
    """Original spatial size remembered across pad_to_pow2 / crop."""

    height: int
    width: int


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length() if n > 1 else 1


def pad_to_pow2(image: Tensor | np.ndarray) -> tuple[Tensor, PadExtent]:
    """Zero-pad the trailing two dims up to the next powers of two.

    Padding goes on the bottom/right so the original content stays at
    the origin; :func:`crop_to_extent` undoes it exactly.
    """
    data = image.data if isinstance(image, Tensor) else np.asarray(image)
    if data.ndim < 2:
        raise ValueError(f"pad_to_pow2 expects at least 2 dims, got shape {data.shape}")
    h, w = data.shape[-2], data.shape[-1]
    th, tw = _next_pow2(h), _next_pow2(w)
    pad = [(0, 0)] * (data.ndim - 2) + [(0, th - h), (0, tw - w)]
    padded = np.pad(data, pad) if (th != h or tw != w) else data.copy()
    return Tensor(padded), PadExtent(h, w)


def crop_to_extent(image: Tensor | np.ndarray, extent: PadExtent) -> Tensor:
    """Crop the trailing two dims back to a recorded original extent."""
    data = image.data if isinstance(image, Tensor) else np.asarray(image)
    if data.shape[-2] < extent.height or data.shape[-1] < extent.width:
        raise ValueError(
            f"cannot crop shape {data.shape} to {extent.height}x{extent.width}"
        )
    return Tensor(data[..., :extent.height, :extent.width])
