"""Structured primitives: convolution, pooling, resampling, losses.

Everything here is built on the tape machinery in :mod:`.autodiff`.
Convolution is cross-correlation (no kernel flip) in NCHW layout with
OIKK kernels, lowered to a single matrix product per call so the hot
path stays inside numpy. The backward pass reuses the lowered buffers,
which costs memory for the lifetime of one tape and buys a large
constant factor.
"""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor, accumulate_grad, result_tensor


def _require_ndim(name: str, t: Tensor, ndim: int) -> None:
    if t.ndim != ndim:
        raise ValueError(f"{name} expects a {ndim}-d tensor, got shape {t.shape}")


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlate ``x`` (N,C,H,W) with ``kernel`` (O,I,Kh,Kw).

    Args:
        x: input activations, NCHW.
        kernel: filter bank; I must equal the input channel count.
        stride: positive step between window positions.
        padding: zero-padding applied symmetrically to H and W.

    Returns:
        Tensor of shape (N, O, Ho, Wo) with floor-division output dims.
    """
    _require_ndim("conv2d input", x, 4)
    _require_ndim("conv2d kernel", kernel, 4)
    if not isinstance(stride, int) or stride < 1:
        raise ValueError(f"conv2d stride must be a positive int, got {stride!r}")
    if not isinstance(padding, int) or padding < 0:
        raise ValueError(f"conv2d padding must be a non-negative int, got {padding!r}")
    n, cin, h, w = x.shape
    cout, cin_k, kh, kw = kernel.shape
    if cin_k != cin:
        raise ValueError(
            f"conv2d channel mismatch: input has {cin} channels, kernel expects {cin_k}"
        )
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ValueError(
            f"conv2d output would be empty: input {h}x{w}, kernel {kh}x{kw}, "
            f"stride {stride}, padding {padding}"
        )

    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride][:, :, :ho, :wo]
    # (N, Ho, Wo, C, Kh, Kw) -> one GEMM against the flattened kernel.
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5))
    cols_m = cols.reshape(n * ho * wo, cin * kh * kw)
    k_m = kernel.data.reshape(cout, cin * kh * kw)
    out = (cols_m @ k_m.T).reshape(n, ho, wo, cout).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)

    def rule(g: np.ndarray) -> None:
        g_m = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * ho * wo, cout)
        if kernel.requires_grad:
            accumulate_grad(kernel, (g_m.T @ cols_m).reshape(kernel.shape))
        if x.requires_grad:
            g_cols = (g_m @ k_m).reshape(n, ho, wo, cin, kh, kw).transpose(0, 3, 4, 5, 1, 2)
            gx = np.zeros_like(xp)
            for ki in range(kh):
                for kj in range(kw):
                    gx[:, :, ki:ki + ho * stride:stride, kj:kj + wo * stride:stride] += (
                        g_cols[:, :, ki, kj]
                    )
            if padding:
                gx = gx[:, :, padding:padding + h, padding:padding + w]
            accumulate_grad(x, gx)

    return result_tensor(out, (x, kernel), rule)


def channel_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a per-channel bias vector to an NCHW tensor."""
    _require_ndim("channel_bias input", x, 4)
    if bias.ndim != 1 or bias.shape[0] != x.shape[1]:
        raise ValueError(
            f"channel_bias expects a ({x.shape[1]},) vector, got shape {bias.shape}"
        )
    arr = x.data + bias.data[None, :, None, None]

    def rule(g: np.ndarray) -> None:
        accumulate_grad(x, g)
        accumulate_grad(bias, g.sum(axis=(0, 2, 3)))

    return result_tensor(arr, (x, bias), rule)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map (N,F) @ (F,K) + bias."""
    _require_ndim("linear input", x, 2)
    _require_ndim("linear weight", weight, 2)
    if x.shape[1] != weight.shape[0]:
        raise ValueError(
            f"linear dimension mismatch: input features {x.shape[1]}, weight rows {weight.shape[0]}"
        )
    if bias is not None and (bias.ndim != 1 or bias.shape[0] != weight.shape[1]):
        raise ValueError(f"linear bias must have shape ({weight.shape[1]},), got {bias.shape}")
    arr = np.einsum("nf,fk->nk", x.data, weight.data)
    if bias is not None:
        arr = arr + bias.data[None, :]

    def rule(g: np.ndarray) -> None:
        accumulate_grad(x, np.einsum("nk,fk->nf", g, weight.data))
        accumulate_grad(weight, np.einsum("nf,nk->fk", x.data, g))
        if bias is not None:
            accumulate_grad(bias, g.sum(axis=0))

    return result_tensor(arr, (x, weight, bias), rule)


def _pool_windows(x: Tensor, name: str) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    _require_ndim(name, x, 4)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"{name} needs even spatial dims, got {h}x{w}")
    v = x.data.reshape(n, c, h // 2, 2, w // 2, 2)
    v = v.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    return v, (n, c, h, w)


def _unpool_windows(g4: np.ndarray, dims: tuple[int, int, int, int]) -> np.ndarray:
    n, c, h, w = dims
    g = g4.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(g.reshape(n, c, h, w))


def maxpool2(x: Tensor) -> Tensor:
    """2x2/stride-2 max pooling; gradient routes to the window argmax.

    Ties route to the first maximum in row-major window order, so the
    backward pass is deterministic.
    """
    v, dims = _pool_windows(x, "maxpool2")
    idx = v.argmax(axis=-1)
    out = np.take_along_axis(v, idx[..., None], axis=-1)[..., 0]

    def rule(g: np.ndarray) -> None:
        g4 = np.zeros_like(v)
        np.put_along_axis(g4, idx[..., None], g[..., None], axis=-1)
        accumulate_grad(x, _unpool_windows(g4, dims))

    return result_tensor(np.ascontiguousarray(out), (x,), rule)


def avgpool2(x: Tensor) -> Tensor:
    """2x2/stride-2 average pooling."""
    v, dims = _pool_windows(x, "avgpool2")
    out = v.mean(axis=-1)

    def rule(g: np.ndarray) -> None:
        g4 = np.repeat(g[..., None] * 0.25, 4, axis=-1)
        accumulate_grad(x, _unpool_windows(g4, dims))

    return result_tensor(np.ascontiguousarray(out), (x,), rule)


def upsample_nearest2(x: Tensor) -> Tensor:
    """Double both spatial dims by pixel repetition."""
    _require_ndim("upsample_nearest2", x, 4)
    n, c, h, w = x.shape
    arr = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def rule(g: np.ndarray) -> None:
        accumulate_grad(x, g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)))

    return result_tensor(arr, (x,), rule)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial dims: (N,C,H,W) -> (N,C)."""
    _require_ndim("global_avg_pool", x, 4)
    n, c, h, w = x.shape
    arr = x.data.mean(axis=(2, 3))

    def rule(g: np.ndarray) -> None:
        accumulate_grad(x, np.broadcast_to(g[:, :, None, None] / (h * w), x.shape).copy())

    return result_tensor(arr, (x,), rule)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two NCHW tensors along the channel axis."""
    _require_ndim("concat_channels", a, 4)
    _require_ndim("concat_channels", b, 4)
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ValueError(f"concat_channels shape mismatch: {a.shape} vs {b.shape}")
    ca = a.shape[1]
    arr = np.concatenate([a.data, b.data], axis=1)

    def rule(g: np.ndarray) -> None:
        accumulate_grad(a, g[:, :ca])
        accumulate_grad(b, g[:, ca:])

    return result_tensor(arr, (a, b), rule)


def mean_all_squared_error(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of squared differences over every element; scalar output.

    The target is treated as a constant: gradients flow into ``pred``
    only, which is what a reconstruction loss wants.
    """
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    arr = np.asarray((diff * diff).mean(), dtype=pred.dtype)

    def rule(g: np.ndarray) -> None:
        accumulate_grad(pred, g * (2.0 / diff.size) * diff)

    return result_tensor(arr, (pred,), rule)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean cross-entropy of raw logits (N,K) against integer labels.

    The softmax is computed with max subtraction so large logits do not
    overflow. Returns a scalar tensor.
    """
    _require_ndim("softmax_cross_entropy logits", logits, 2)
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != logits.shape[0]:
        raise ValueError(
            f"labels must be a length-{logits.shape[0]} vector, got shape {y.shape}"
        )
    if not np.issubdtype(y.dtype, np.integer):
        raise TypeError(f"labels must be integers, got dtype {y.dtype}")
    n, k = logits.shape
    if y.min() < 0 or y.max() >= k:
        bad = int(y[(y < 0) | (y >= k)][0])
        raise IndexError(f"label {bad} out of range for {k} classes")
    z = logits.data
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    arr = np.asarray(-log_probs[np.arange(n), y].mean(), dtype=z.dtype)

    def rule(g: np.ndarray) -> None:
        p = np.exp(log_probs)
        p[np.arange(n), y] -= 1.0
        accumulate_grad(logits, (g / n) * p)

    return result_tensor(arr, (logits,), rule)
