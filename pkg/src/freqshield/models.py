"""Model zoo: bottleneck encoder, convolutional classifier, reconstructor.

The encoder is a small two-level U-shaped net: two conv/pool stages, a
bottleneck, two upsample/skip-concat stages, and a 1x1 conv head that
corrects the input in log-odds space before a sigmoid, so outputs land
in [0, 1] like the inputs and a fresh encoder is a near-copy. The
reconstructor reuses the same topology. Widths scale from a single base channel count.

An :class:`Obfuscator` bundles the privacy transform actually applied
to images before any downstream consumer sees them; besides the learned
encoder-plus-filter path it exposes the ablation and baseline modes
(encoder alone, filter alone, additive noise, identity) behind one
switch so training and attack code stays mode-agnostic.
"""
from __future__ import annotations

import hashlib
import math

import numpy as np

from .autodiff import Tensor, clamp, relu, sigmoid
from .errors import ConfigError
from .ops import (channel_bias, concat_channels, conv2d, global_avg_pool,
                  linear, maxpool2, upsample_nearest2)
from .spectral import FilterSpec, apply_filter

OBFUSCATION_MODES = ("learned", "noise", "lp_only", "unet_only", "identity")


class Conv2dLayer:
    """3x3 (or 1x1) convolution with per-channel bias."""

    def __init__(self, in_channels: int, out_channels: int,
                 kernel_size: int = 3, padding: int = 1,
                 init_scale: float = 1.0):
        self.weight = Tensor(
            np.zeros((out_channels, in_channels, kernel_size, kernel_size)),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)
        self.padding = padding
        self.init_scale = init_scale

    @property
    def fan_in(self) -> int:
        _, cin, kh, kw = self.weight.shape
        return cin * kh * kw

    def __call__(self, x: Tensor) -> Tensor:
        return channel_bias(conv2d(x, self.weight, stride=1, padding=self.padding), self.bias)


class LinearLayer:
    """Dense layer over flattened features."""

    def __init__(self, in_features: int, out_features: int):
        self.weight = Tensor(np.zeros((in_features, out_features)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    @property
    def fan_in(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)


class _LayeredModel:
    """Shared bookkeeping: ordered layer registry and parameter walks."""

    def __init__(self):
        self._layers: list[tuple[str, Conv2dLayer | LinearLayer]] = []

    def _add(self, name: str, layer):
        self._layers.append((name, layer))
        return layer

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for name, layer in self._layers:
            out.append((f"{name}.weight", layer.weight))
            out.append((f"{name}.bias", layer.bias))
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(t.size for t in self.parameters())


_LOGIT_EPS = 1e-4


def _logit_image(x: Tensor) -> Tensor:
    # Constant branch, off the tape on purpose: gradients reach the
    # encoder through its conv head only, never through the input copy.
    p = np.clip(x.data, _LOGIT_EPS, 1.0 - _LOGIT_EPS)
    return Tensor(np.log(p) - np.log1p(-p), dtype=x.dtype)


class EncoderModel(_LayeredModel):
    """Two-level U-shaped encoder mapping images to images in [0, 1].

    The head is residual in log-odds space: the final 1x1 conv adds a
    correction to logit(x) before the sigmoid, and its weights start 20x
    smaller than the other layers. A freshly initialized encoder is
    therefore a near-copy, and it moves away from the copy only as far
    as its own training pressure pushes it. Without this a random conv
    stack already scrambles images at init, and how much of the input
    survives task-only training becomes an accident of the seed instead
    of a property of the method.
    """

    def __init__(self, channels: int = 3, base_width: int = 8):
        super().__init__()
        if channels < 1 or base_width < 1:
            raise ValueError(f"channels and base_width must be positive, got {channels}, {base_width}")
        self.channels = channels
        self.base_width = base_width
        w = base_width
        self.down1a = self._add("down1a", Conv2dLayer(channels, w))
        self.down1b = self._add("down1b", Conv2dLayer(w, w))
        self.down2a = self._add("down2a", Conv2dLayer(w, 2 * w))
        self.down2b = self._add("down2b", Conv2dLayer(2 * w, 2 * w))
        self.mid_a = self._add("mid_a", Conv2dLayer(2 * w, 4 * w))
        self.mid_b = self._add("mid_b", Conv2dLayer(4 * w, 4 * w))
        self.up2a = self._add("up2a", Conv2dLayer(4 * w + 2 * w, 2 * w))
        self.up2b = self._add("up2b", Conv2dLayer(2 * w, 2 * w))
        self.up1a = self._add("up1a", Conv2dLayer(2 * w + w, w))
        self.up1b = self._add("up1b", Conv2dLayer(w, w))
        self.head = self._add("head", Conv2dLayer(w, channels, kernel_size=1,
                                                  padding=0, init_scale=0.05))

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ValueError(
                f"encoder expects (N,{self.channels},H,W), got shape {x.shape}"
            )
        h, w = x.shape[2], x.shape[3]
        if h % 4 or w % 4:
            raise ValueError(f"encoder spatial dims must be divisible by 4, got {h}x{w}")
        skip1 = relu(self.down1b(relu(self.down1a(x))))
        skip2 = relu(self.down2b(relu(self.down2a(maxpool2(skip1)))))
        mid = relu(self.mid_b(relu(self.mid_a(maxpool2(skip2)))))
        up2 = concat_channels(upsample_nearest2(mid), skip2)
        up2 = relu(self.up2b(relu(self.up2a(up2))))
        up1 = concat_channels(upsample_nearest2(up2), skip1)
        up1 = relu(self.up1b(relu(self.up1a(up1))))
        return sigmoid(self.head(up1) + _logit_image(x))


class ReconstructorModel(EncoderModel):
    """Same topology as the encoder, trained to undo an obfuscator."""


class ClassifierModel(_LayeredModel):
    """Four conv/pool blocks, global average pooling, linear head."""

    WIDTHS = (16, 32, 64, 64)

    def __init__(self, in_channels: int, num_classes: int):
        super().__init__()
        if num_classes < 2:
            raise ValueError(f"classifier needs at least 2 classes, got {num_classes}")
        self.in_channels = in_channels
        self.num_classes = num_classes
        prev = in_channels
        self.blocks: list[Conv2dLayer] = []
        for i, width in enumerate(self.WIDTHS, start=1):
            self.blocks.append(self._add(f"block{i}", Conv2dLayer(prev, width)))
            prev = width
        self.head = self._add("head", LinearLayer(prev, num_classes))

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"classifier expects (N,{self.in_channels},H,W), got shape {x.shape}"
            )
        h, w = x.shape[2], x.shape[3]
        if h < 16 or w < 16 or h % 16 or w % 16:
            raise ValueError(
                f"classifier spatial dims must be >= 16 and divisible by 16, got {h}x{w}"
            )
        out = x
        for block in self.blocks:
            out = maxpool2(relu(block(out)))
        return self.head(global_avg_pool(out))


def initialize_parameters(model: _LayeredModel, seed) -> None:
    """Kaiming-uniform (fan-in) weights, zero biases, fixed by the seed.

    Draws happen in declared layer order, so a given seed pins every
    parameter bit-exactly. Layers carrying an ``init_scale`` (the
    encoder head) get their draw shrunk by it.
    """
    rng = np.random.default_rng(seed)
    for name, layer in model._layers:
        bound = math.sqrt(6.0 / layer.fan_in)
        sample = rng.uniform(-bound, bound, size=layer.weight.shape)
        sample *= getattr(layer, "init_scale", 1.0)
        layer.weight.data = sample.astype(layer.weight.dtype)
        layer.bias.data = np.zeros_like(layer.bias.data)


def parameter_digest(model: _LayeredModel) -> str:
    """SHA-256 over names and raw parameter bytes; cheap change detector."""
    h = hashlib.sha256()
    for name, t in model.named_parameters():
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(t.data).tobytes())
    return h.hexdigest()


class Obfuscator:
    """The privacy transform applied to every image before release.

    Modes:
        learned: band-limited encoder output (encoder + hard filter).
        unet_only: encoder output with no band limit.
        lp_only: hard filter with no encoder.
        noise: additive Gaussian noise, clamped back to [0, 1].
        identity: images pass through untouched.
    """

    def __init__(self, mode: str, encoder: EncoderModel | None = None,
                 filter_spec: FilterSpec | None = None,
                 noise_var: float = 0.64, seed=0):
        if mode not in OBFUSCATION_MODES:
            raise ConfigError(f"unknown obfuscation mode {mode!r}; expected one of {OBFUSCATION_MODES}")
        if mode in ("learned", "unet_only") and encoder is None:
            raise ConfigError(f"mode {mode!r} requires an encoder")
        if mode in ("learned", "lp_only") and filter_spec is None:
            raise ConfigError(f"mode {mode!r} requires a filter spec")
        if noise_var < 0:
            raise ConfigError(f"noise variance must be non-negative, got {noise_var}")
        self.mode = mode
        self.encoder = encoder
        self.filter_spec = filter_spec
        self.noise_var = noise_var
        self._rng = np.random.default_rng(seed)

    @property
    def trainable(self) -> bool:
        return self.mode in ("learned", "unet_only")

    def __call__(self, x: Tensor) -> Tensor:
        if self.mode == "identity":
            return x
        if self.mode == "noise":
            sigma = math.sqrt(self.noise_var)
            noise = self._rng.normal(0.0, sigma, size=x.shape).astype(x.dtype)
            return clamp(x + Tensor(noise, dtype=x.dtype), 0.0, 1.0)
        if self.mode == "lp_only":
            return apply_filter(x, self.filter_spec)
        if self.mode == "unet_only":
            return self.encoder(x)
        return apply_filter(self.encoder(x), self.filter_spec)
