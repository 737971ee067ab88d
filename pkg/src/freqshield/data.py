"""Datasets: synthetic frequency-structured images and IDX loading.

The synthetic generator is built so the two labels live in disjoint
frequency bands by construction. The utility attribute is the
background hue (warm vs cool), carried by the image mean and a gentle
shading ramp, i.e. the lowest few bins. The privacy attribute is the
orientation of a sinusoidal stripe pattern at integer frequencies well
outside any small low-pass band. Two closed-form oracles (mean-color
threshold, spectral peak angle) are evaluated on every generated
dataset so the separation is checked rather than assumed.

IDX files (big-endian image/label containers) are parsed with explicit
offsets in every error message, scaled to [0, 1], and padded up to
power-of-two dims so the spectral code accepts them.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .autodiff import Tensor
from .errors import ConfigError, IdxFormatError
from .spectral import FilterSpec, filter_array, normalized_distance, pad_to_pow2

UTILITY_CLASSES = 2
PRIVACY_CLASSES = 4

# Warm and cool background colors, RGB in [0,1].
_HUE_BASES = ((0.75, 0.40, 0.25), (0.25, 0.40, 0.75))
_HUE_JITTER = 0.08
_SHADE_RANGE = 0.05
_STRIPE_AMP = 0.25
_STRIPE_AMP_JITTER = 0.05
# Narrow enough that the class-conditional mean still carries the
# stripe template (an attacker reading through heavy additive noise
# needs that linear route; with free phase its convergence was a seed
# lottery), wide enough that no single matched filter is exact.
_PHASE_JITTER = 0.6
# One integer frequency index per stripe family, periods 3.6 px (axis)
# and 3.8 px (diagonal); concentrating each class in a single bin keeps
# the orientation learnable even under heavy additive noise. Index 9
# rather than 8: a period-4 stripe is commensurate with the encoder's
# two 2x2 pooling stages and pools to an orientation-dependent
# constant, exactly the kind of near-DC summary a band limit cannot
# remove.
_AXIS_FREQS = (9,)
_DIAG_FREQS = (6,)
# Label-free smooth blobs: content an obfuscator has no reason to hide
# but a band limit necessarily destroys.
_BLOB_COUNT = 3
_BLOB_AMP = 0.30
_BLOB_SIGMA = (2.0, 3.0)
# Stripes fade to zero over this many edge pixels. A stripe cut off
# hard at the border leaves an orientation-dependent discontinuity
# that zero-padded convolutions turn into whole-image sine components,
# which sit inside any low-pass band and leak the orientation.
_EDGE_TAPER = 3
_ORACLE_EXCLUDE_RADIUS = 0.3
_SEPARABILITY_FLOOR = 95.0


@dataclass
class LabeledExample:
    """One image with its two task labels."""

    image: np.ndarray  # (C, H, W) float32 in [0, 1]
    utility_label: int
    privacy_label: int


@dataclass
class DatasetSplit:
    """Disjoint train/test example lists plus label-space sizes."""

    train: list[LabeledExample]
    test: list[LabeledExample]
    utility_classes: int
    privacy_classes: int
    seed: int

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.train[0].image.shape)


@dataclass
class SynthConfig:
    """Knobs for the synthetic generator.

    noise is the per-pixel Gaussian sigma added after composing
    background, shading, and stripes.
    """

    n_examples: int = 512
    height: int = 32
    width: int = 32
    channels: int = 3
    noise: float = 0.05
    seed: int = 42

    def __post_init__(self):
        minimum = 8 * UTILITY_CLASSES * PRIVACY_CLASSES
        if self.n_examples < minimum:
            raise ConfigError(
                f"n_examples={self.n_examples} cannot balance "
                f"{UTILITY_CLASSES}x{PRIVACY_CLASSES} label combinations; need >= {minimum}"
            )
        for name, v in (("height", self.height), ("width", self.width)):
            if v < 16 or (v & (v - 1)) != 0:
                raise ConfigError(f"{name} must be a power of two >= 16, got {v}")
        if self.channels != 3:
            raise ConfigError(f"synthetic images are RGB; channels must be 3, got {self.channels}")
        if not 0.0 <= self.noise <= 0.5:
            raise ConfigError(f"noise sigma must lie in [0, 0.5], got {self.noise}")


def _edge_window(n: int) -> np.ndarray:
    ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(_EDGE_TAPER) + 0.5) / _EDGE_TAPER)
    win = np.ones(n)
    win[:_EDGE_TAPER] = ramp
    win[-_EDGE_TAPER:] = ramp[::-1]
    return win


def _stripe_field(privacy_label: int, h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    yy = np.arange(h)[:, None] / h
    xx = np.arange(w)[None, :] / w
    if privacy_label == 0:  # horizontal stripes, varying down the rows
        fy, fx = int(rng.choice(_AXIS_FREQS)), 0
    elif privacy_label == 1:  # vertical stripes
        fy, fx = 0, int(rng.choice(_AXIS_FREQS))
    elif privacy_label == 2:  # diagonal
        k = int(rng.choice(_DIAG_FREQS))
        fy, fx = k, k
    else:  # anti-diagonal
        k = int(rng.choice(_DIAG_FREQS))
        fy, fx = k, -k
    # Near-fixed phase keeps the class-conditional mean informative, so
    # an attacking classifier can find the orientation without first
    # discovering a quadratic matched filter; fully random phase made
    # attack convergence a seed lottery under heavy additive noise.
    phase = rng.uniform(-_PHASE_JITTER, _PHASE_JITTER)
    amp = _STRIPE_AMP + rng.uniform(-_STRIPE_AMP_JITTER, _STRIPE_AMP_JITTER)
    field = amp * np.sin(2.0 * math.pi * (fy * yy + fx * xx) + phase)
    return field * (_edge_window(h)[:, None] * _edge_window(w)[None, :])


def _blob_field(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    yy = np.arange(h)[:, None]
    xx = np.arange(w)[None, :]
    field = np.zeros((h, w))
    for _ in range(_BLOB_COUNT):
        cy, cx = rng.uniform(0.0, h), rng.uniform(0.0, w)
        sigma = rng.uniform(*_BLOB_SIGMA)
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        field += sign * _BLOB_AMP * np.exp(
            -((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma * sigma))
    return field


def _synth_image(utility_label: int, privacy_label: int, cfg: SynthConfig,
                 rng: np.random.Generator) -> np.ndarray:
    h, w = cfg.height, cfg.width
    base = np.array(_HUE_BASES[utility_label])
    base = base + rng.uniform(-_HUE_JITTER, _HUE_JITTER, size=3)
    yy = np.arange(h)[:, None] / (h - 1) - 0.5
    xx = np.arange(w)[None, :] / (w - 1) - 0.5
    shade = rng.uniform(-_SHADE_RANGE, _SHADE_RANGE) * yy + \
        rng.uniform(-_SHADE_RANGE, _SHADE_RANGE) * xx
    stripes = _stripe_field(privacy_label, h, w, rng)
    blobs = _blob_field(h, w, rng)
    img = base[:, None, None] + (shade + stripes + blobs)[None, :, :]
    if cfg.noise > 0:
        img = img + rng.normal(0.0, cfg.noise, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def mean_color_accuracy(examples: Sequence[LabeledExample],
                        radius: float = 0.05) -> float:
    """Accuracy of a mean-color threshold on low-pass filtered images.

    Classifies warm-vs-cool purely from which of the red/blue channel
    means is larger after a low-pass at ``radius``; used as evidence
    that the utility signal survives band limiting.
    """
    images = np.stack([ex.image for ex in examples]).astype(np.float64)
    h, w = images.shape[-2], images.shape[-1]
    spec = FilterSpec("low_pass", radius, (h, w))
    filtered = filter_array(images, spec)
    means = filtered.mean(axis=(2, 3))  # (N, C)
    pred = (means[:, 0] <= means[:, 2]).astype(int)  # warm (label 0) has R > B
    labels = np.array([ex.utility_label for ex in examples])
    return float((pred == labels).mean() * 100.0)


def stripe_peak_accuracy(examples: Sequence[LabeledExample],
                         exclude_below: float = _ORACLE_EXCLUDE_RADIUS) -> float:
    """Accuracy of a spectral-peak-angle rule on unfiltered images.

    Finds the strongest bin outside the low-frequency disk and snaps
    its angle to the nearest of the four stripe orientations.
    """
    from .spectral import _fft2_raw  # local import to keep the public surface tidy

    images = np.stack([ex.image for ex in examples]).astype(np.float64)
    gray = images.mean(axis=1)  # (N, H, W)
    h, w = gray.shape[-2], gray.shape[-1]
    raw = _fft2_raw(gray.astype(np.complex128), inverse=False)
    spec = np.roll(raw, (h // 2, w // 2), axis=(-2, -1))
    mag = np.abs(spec)
    mag[:, normalized_distance((h, w)) <= exclude_below] = 0.0
    flat = mag.reshape(mag.shape[0], -1).argmax(axis=1)
    du = flat // w - h // 2
    dv = flat % w - w // 2
    angle = np.mod(np.arctan2(du, dv), math.pi)
    targets = np.array([math.pi / 2, 0.0, math.pi / 4, 3 * math.pi / 4])
    diff = np.abs(angle[:, None] - targets[None, :])
    diff = np.minimum(diff, math.pi - diff)  # circular distance mod pi
    pred = diff.argmin(axis=1)
    labels = np.array([ex.privacy_label for ex in examples])
    return float((pred == labels).mean() * 100.0)


def gen_synthetic(cfg: SynthConfig) -> DatasetSplit:
    """Generate a stratified synthetic dataset and verify separability.

    The (utility, privacy) label grid is filled round-robin so joint
    counts differ by at most one, then split 80/20 within each label
    combination. Both closed-form oracles must clear 95% or generation
    fails with a ConfigError.
    """
    combos = [(t, p) for t in range(UTILITY_CLASSES) for p in range(PRIVACY_CLASSES)]
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    examples = []
    for i in range(cfg.n_examples):
        t, p = combos[i % len(combos)]
        examples.append(LabeledExample(_synth_image(t, p, cfg, rng), t, p))

    split_rng = np.random.default_rng([cfg.seed, 0x51])
    train: list[LabeledExample] = []
    test: list[LabeledExample] = []
    for idx, (t, p) in enumerate(combos):
        members = [ex for j, ex in enumerate(examples) if j % len(combos) == idx]
        order = split_rng.permutation(len(members))
        cut = round(0.8 * len(members))
        train.extend(members[j] for j in order[:cut])
        test.extend(members[j] for j in order[cut:])
    if not test:
        raise ConfigError(f"n_examples={cfg.n_examples} leaves an empty test split")

    split = DatasetSplit(train, test, UTILITY_CLASSES, PRIVACY_CLASSES, cfg.seed)
    utility_sep = mean_color_accuracy(examples)
    privacy_sep = stripe_peak_accuracy(examples)
    if utility_sep < _SEPARABILITY_FLOOR or privacy_sep < _SEPARABILITY_FLOOR:
        raise ConfigError(
            f"generated data is not separable enough (utility oracle {utility_sep:.1f}%, "
            f"privacy oracle {privacy_sep:.1f}%); lower the noise setting"
        )
    return split


def separability_scores(split: DatasetSplit) -> tuple[float, float]:
    """(utility oracle %, privacy oracle %) over train and test together."""
    everything = list(split.train) + list(split.test)
    return mean_color_accuracy(everything), stripe_peak_accuracy(everything)


# --------------------------------------------------------------------------
# IDX container parsing

_IDX_IMAGE_MAGIC = 0x00000803
_IDX_LABEL_MAGIC = 0x00000801


def _read_idx_images(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise IdxFormatError(f"{path}: header truncated at byte offset {len(blob)} (need 16 bytes)")
    magic, count, rows, cols = struct.unpack_from(">IIII", blob, 0)
    if magic != _IDX_IMAGE_MAGIC:
        raise IdxFormatError(
            f"{path}: bad image magic 0x{magic:08x} at byte offset 0 "
            f"(expected 0x{_IDX_IMAGE_MAGIC:08x})"
        )
    expected = count * rows * cols
    if len(blob) - 16 != expected:
        raise IdxFormatError(
            f"{path}: image payload at byte offset 16 has {len(blob) - 16} bytes, "
            f"expected {expected} for {count} images of {rows}x{cols}"
        )
    data = np.frombuffer(blob, dtype=np.uint8, offset=16).reshape(count, rows, cols)
    return data


def _read_idx_labels(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise IdxFormatError(f"{path}: header truncated at byte offset {len(blob)} (need 8 bytes)")
    magic, count = struct.unpack_from(">II", blob, 0)
    if magic != _IDX_LABEL_MAGIC:
        raise IdxFormatError(
            f"{path}: bad label magic 0x{magic:08x} at byte offset 0 "
            f"(expected 0x{_IDX_LABEL_MAGIC:08x})"
        )
    if len(blob) - 8 != count:
        raise IdxFormatError(
            f"{path}: label payload at byte offset 8 has {len(blob) - 8} bytes, expected {count}"
        )
    return np.frombuffer(blob, dtype=np.uint8, offset=8)


@dataclass
class RawIdxData:
    """Parsed IDX pair: images scaled to [0,1] and padded, integer labels."""

    images: np.ndarray  # (N, 1, H, W) float32, power-of-two dims
    labels: np.ndarray  # (N,) int64
    original_size: tuple[int, int]


def load_idx(images_path, labels_path) -> RawIdxData:
    """Load an images/labels IDX pair into normalized padded arrays."""
    images = _read_idx_images(images_path)
    labels = _read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image/label count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    scaled = (images.astype(np.float32) / 255.0)[:, None, :, :]
    padded, _ = pad_to_pow2(scaled)
    return RawIdxData(
        padded.data.astype(np.float32),
        labels.astype(np.int64),
        (images.shape[1], images.shape[2]),
    )


def derive_tasks(raw: RawIdxData, scheme: str = "parity_vs_digit",
                 seed: int = 42) -> DatasetSplit:
    """Derive the paired labels from raw digit data and split 80/20.

    parity_vs_digit: utility = digit parity (2 classes), privacy = the
    digit itself (10 classes). The split is stratified per digit.
    """
    if scheme != "parity_vs_digit":
        raise ConfigError(f"unknown task derivation scheme {scheme!r}")
    labels = raw.labels
    if labels.size == 0:
        raise ConfigError("cannot derive tasks from an empty dataset")
    if labels.max() > 9:
        raise ConfigError(
            f"parity_vs_digit expects 10-class labels in 0..9, found label {int(labels.max())}"
        )
    rng = np.random.default_rng([seed, 0x1D])
    train: list[LabeledExample] = []
    test: list[LabeledExample] = []
    for digit in range(10):
        idx = np.flatnonzero(labels == digit)
        if idx.size == 0:
            continue
        order = idx[rng.permutation(idx.size)]
        cut = round(0.8 * order.size)
        for j in order[:cut]:
            train.append(LabeledExample(raw.images[j], int(labels[j]) % 2, int(labels[j])))
        for j in order[cut:]:
            test.append(LabeledExample(raw.images[j], int(labels[j]) % 2, int(labels[j])))
    if not train or not test:
        raise ConfigError("dataset too small to produce non-empty train and test splits")
    return DatasetSplit(train, test, 2, 10, seed)


def batches(examples: Sequence[LabeledExample], batch_size: int,
            seed: int, epoch: int) -> Iterator[tuple[Tensor, np.ndarray, np.ndarray]]:
    """Shuffled minibatches; order depends only on (seed, epoch).

    The final partial batch is kept. Yields (images, utility labels,
    privacy labels).
    """
    n = len(examples)
    if batch_size < 1 or batch_size > n:
        raise ValueError(f"batch_size {batch_size} invalid for {n} examples")
    order = np.random.default_rng([seed, epoch]).permutation(n)
    for start in range(0, n, batch_size):
        chunk = order[start:start + batch_size]
        images = np.stack([examples[j].image for j in chunk])
        yt = np.array([examples[j].utility_label for j in chunk], dtype=np.int64)
        yp = np.array([examples[j].privacy_label for j in chunk], dtype=np.int64)
        yield Tensor(images), yt, yp


def eval_batches(examples: Sequence[LabeledExample],
                 batch_size: int = 64) -> Iterator[tuple[Tensor, np.ndarray, np.ndarray]]:
    """Deterministic unshuffled batches for evaluation passes."""
    for start in range(0, len(examples), batch_size):
        chunk = examples[start:start + batch_size]
        images = np.stack([ex.image for ex in chunk])
        yt = np.array([ex.utility_label for ex in chunk], dtype=np.int64)
        yp = np.array([ex.privacy_label for ex in chunk], dtype=np.int64)
        yield Tensor(images), yt, yp


# --------------------------------------------------------------------------
# Directory export / import

_MANIFEST_NAME = "manifest.json"
_EXPORT_VERSION = 1


def export_split(split: DatasetSplit, directory) -> None:
    """Write raw little-endian image tensors plus a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "format_version": _EXPORT_VERSION,
        "utility_classes": split.utility_classes,
        "privacy_classes": split.privacy_classes,
        "seed": split.seed,
        "arrays": {},
    }
    for part_name, part in (("train", split.train), ("test", split.test)):
        images = np.stack([ex.image for ex in part]).astype("<f4")
        file_name = f"{part_name}_images.bin"
        images.tofile(directory / file_name)
        manifest["arrays"][part_name] = {
            "file": file_name,
            "shape": list(images.shape),
            "dtype": "<f4",
        }
        manifest[f"{part_name}_utility_labels"] = [ex.utility_label for ex in part]
        manifest[f"{part_name}_privacy_labels"] = [ex.privacy_label for ex in part]
    with open(directory / _MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_split(directory) -> DatasetSplit:
    """Load a dataset exported by :func:`export_split`."""
    directory = Path(directory)
    manifest_path = directory / _MANIFEST_NAME
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != _EXPORT_VERSION:
        raise ConfigError(
            f"{manifest_path}: unsupported dataset format version {manifest.get('format_version')!r}"
        )
    parts: dict[str, list[LabeledExample]] = {}
    for part_name in ("train", "test"):
        entry = manifest["arrays"][part_name]
        shape = tuple(entry["shape"])
        images = np.fromfile(directory / entry["file"], dtype=entry["dtype"])
        if images.size != int(np.prod(shape)):
            raise ConfigError(
                f"{directory / entry['file']}: expected {int(np.prod(shape))} values, "
                f"found {images.size}"
            )
        images = images.reshape(shape).astype(np.float32)
        yt = manifest[f"{part_name}_utility_labels"]
        yp = manifest[f"{part_name}_privacy_labels"]
        if len(yt) != shape[0] or len(yp) != shape[0]:
            raise ConfigError(f"{manifest_path}: label counts do not match {part_name} images")
        parts[part_name] = [
            LabeledExample(images[i], int(yt[i]), int(yp[i])) for i in range(shape[0])
        ]
    return DatasetSplit(
        parts["train"], parts["test"],
        int(manifest["utility_classes"]), int(manifest["privacy_classes"]),
        int(manifest["seed"]),
    )
