"""Similarity and accuracy metrics.

Images arrive in the storage domain [0, 1] and every metric converts to
the 8-bit convention (0..255) internally, so the constants match the
values quoted in the literature. Structural similarity uses an 11x11
Gaussian window (sigma 1.5) evaluated at valid positions only; when an
image or pyramid level is smaller than 11 the window shrinks to the
largest odd size that fits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autodiff import Tensor

PEAK = 255.0
_C1 = (0.01 * PEAK) ** 2
_C2 = (0.03 * PEAK) ** 2
_MS_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def _as_image_array(x, name: str) -> np.ndarray:
    arr = x.data if isinstance(x, Tensor) else np.asarray(x)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be (H, W) or (C, H, W), got shape {arr.shape}")
    return arr.astype(np.float64) * PEAK


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    x = _as_image_array(a, "first image")
    y = _as_image_array(b, "second image")
    if x.shape != y.shape:
        raise ValueError(f"image shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def mse(a, b) -> float:
    """Mean squared error on the 0..255 scale."""
    x, y = _pair(a, b)
    return float(np.mean((x - y) ** 2))


def l1(a, b) -> float:
    """Mean absolute error on the 0..255 scale."""
    x, y = _pair(a, b)
    return float(np.mean(np.abs(x - y)))


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; identical images give +inf."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / err)


@lru_cache(maxsize=None)
def _gaussian_window(size: int, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    w /= w.sum()
    w.setflags(write=False)
    return w


def _window_size(h: int, w: int) -> int:
    size = min(11, h, w)
    return size if size % 2 == 1 else size - 1


def _ssim_terms(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(mean full similarity, mean contrast-structure term) per channel."""
    size = _window_size(*x.shape)
    win = _gaussian_window(size)

    def wmean(img: np.ndarray) -> np.ndarray:
        views = np.lib.stride_tricks.sliding_window_view(img, (size, size))
        return np.einsum("ijkl,kl->ij", views, win, optimize=False)

    mu_x = wmean(x)
    mu_y = wmean(y)
    var_x = wmean(x * x) - mu_x ** 2
    var_y = wmean(y * y) - mu_y ** 2
    cov = wmean(x * y) - mu_x * mu_y
    lum = (2.0 * mu_x * mu_y + _C1) / (mu_x ** 2 + mu_y ** 2 + _C1)
    cs = (2.0 * cov + _C2) / (var_x + var_y + _C2)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def ssim(a, b) -> float:
    """Structural similarity, averaged over channels."""
    x, y = _pair(a, b)
    return float(np.mean([_ssim_terms(x[c], y[c])[0] for c in range(x.shape[0])]))


def _halve(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    img = img[: h - h % 2, : w - w % 2]
    return (img[0::2, 0::2] + img[0::2, 1::2] + img[1::2, 0::2] + img[1::2, 1::2]) / 4.0


def ms_ssim(a, b) -> float:
    """Multi-scale structural similarity with size-adaptive depth.

    The scale count is the largest that keeps the coarsest level at
    least 8 pixels on its short side, capped at the usual five; the
    canonical weights for the retained scales are renormalized to sum
    to one. Contrast-structure means are clamped at zero so fractional
    powers stay real.
    """
    x, y = _pair(a, b)
    short = min(x.shape[1], x.shape[2])
    if short < 8:
        raise ValueError(f"ms_ssim needs images at least 8 pixels wide, got {x.shape}")
    n_scales = min(len(_MS_WEIGHTS), int(math.floor(math.log2(short / 8))) + 1)
    weights = np.asarray(_MS_WEIGHTS[:n_scales])
    weights = weights / weights.sum()

    per_channel = []
    for c in range(x.shape[0]):
        xc, yc = x[c], y[c]
        score = 1.0
        for level in range(n_scales):
            full, cs = _ssim_terms(xc, yc)
            term = full if level == n_scales - 1 else cs
            score *= max(term, 0.0) ** weights[level]
            if level < n_scales - 1:
                xc, yc = _halve(xc), _halve(yc)
        per_channel.append(score)
    return float(np.mean(per_channel))


def accuracy(logits, labels) -> float:
    """Percent of argmax predictions matching integer labels.

    Ties resolve to the lowest class index.
    """
    z = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    y = np.asarray(labels)
    if z.ndim != 2 or y.ndim != 1 or z.shape[0] != y.shape[0]:
        raise ValueError(f"logits (N, K) and labels (N,) required, got {z.shape}, {y.shape}")
    return float(100.0 * np.mean(np.argmax(z, axis=1) == y))


@dataclass
class SimilarityReport:
    """Aggregate image-similarity scores; lower mse/l1 and higher
    ssim/ms_ssim/psnr mean a more faithful reconstruction."""

    mse: float
    l1: float
    ssim: float
    ms_ssim: float
    psnr: float

    def as_dict(self) -> dict[str, float]:
        return {
            "mse": self.mse, "l1": self.l1, "ssim": self.ssim,
            "ms_ssim": self.ms_ssim, "psnr": self.psnr,
        }

    def worse_than(self, other: "SimilarityReport") -> int:
        """How many of the five metrics say self reconstructs worse."""
        count = 0
        count += self.mse > other.mse
        count += self.l1 > other.l1
        count += self.ssim < other.ssim
        count += self.ms_ssim < other.ms_ssim
        count += self.psnr < other.psnr
        return int(count)


def similarity_suite(pairs) -> SimilarityReport:
    """Average all five metrics over (reference, candidate) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("similarity_suite needs at least one image pair")
    rows = [(mse(a, b), l1(a, b), ssim(a, b), ms_ssim(a, b), psnr(a, b))
            for a, b in pairs]
    cols = list(zip(*rows))
    return SimilarityReport(
        mse=float(np.mean(cols[0])), l1=float(np.mean(cols[1])),
        ssim=float(np.mean(cols[2])), ms_ssim=float(np.mean(cols[3])),
        psnr=float(np.mean(cols[4])),
    )
