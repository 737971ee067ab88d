"""Binary netpbm writers for sample dumps.

P6 (color) and P5 (grayscale) with maxval 255; inputs are channel-first
floats in [0, 1]. Netpbm needs no dependency and every image viewer
opens it, which is all the sample dumps require.
"""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor


def _to_bytes(image) -> np.ndarray:
    arr = image.data if isinstance(image, Tensor) else np.asarray(image)
    return np.clip(np.rint(arr.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path, image) -> None:
    """Write a (3, H, W) image in [0, 1] as binary P6."""
    arr = _to_bytes(image)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"write_ppm expects (3, H, W), got shape {arr.shape}")
    _, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.transpose(1, 2, 0).tobytes())


def write_pgm(path, image) -> None:
    """Write an (H, W) or (1, H, W) image in [0, 1] as binary P5."""
    arr = _to_bytes(image)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ValueError(f"write_pgm expects (H, W) or (1, H, W), got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())
