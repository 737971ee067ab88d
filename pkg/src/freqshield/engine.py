"""Alternating three-player training, post-hoc attacks, and sweeps.

Per batch the order is fixed: (1) the proxy adversary descends its own
classification loss, (2) the task model descends its loss, (3) the
encoder descends task loss minus the weighted adversary loss, with both
classifier forwards recomputed against the just-updated players. Each
step updates exactly one player's parameters; stray gradients that the
shared backward pass deposits on the other players are cleared before
anyone can consume them.

Modes without a trainable encoder (noise, lp_only, identity) reduce to
plain supervised training of the task model; the proxy adversary has
nothing to push against and is skipped entirely. Privacy is always
measured afterwards by a freshly initialized attacker against the
frozen obfuscator, never by the proxy used during training.
"""
from __future__ import annotations

import dataclasses
import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .autodiff import Tape, Tensor, backward, clear_gradients
from .data import DatasetSplit, batches, eval_batches
from .errors import ConfigError, TrainingDivergedError
from .metrics import SimilarityReport, accuracy, similarity_suite
from .models import (ClassifierModel, EncoderModel, Obfuscator,
                     OBFUSCATION_MODES, ReconstructorModel, initialize_parameters,
                     parameter_digest)
from .ops import mean_all_squared_error, softmax_cross_entropy
from .optim import Adam
from .spectral import FilterSpec

logger = logging.getLogger(__name__)

# Role tags mixed into the base seed so each component draws from its
# own deterministic stream.
_TAG_ENCODER = 1
_TAG_TASK = 2
_TAG_ADVERSARY = 3
_TAG_BATCHES = 4
_TAG_NOISE = 5
_TAG_ATTACKER = 6
_TAG_ATTACK_BATCHES = 7
_TAG_RECONSTRUCTOR = 8
_TAG_RECON_BATCHES = 9


def derive_seed(base: int, tag: int) -> int:
    """Deterministic per-role child seed."""
    return (base * 1000003 + tag) % (2 ** 63)


@dataclass
class ArlConfig:
    """Everything a training run needs besides the data itself."""

    mode: str = "learned"
    filter_kind: str = "low_pass"
    radius: float = 0.05
    adversary_weight: float = 1.0
    epochs: int = 10
    batch_size: int = 32
    lr_encoder: float = 1e-4
    lr_classifiers: float = 1e-3
    seed: int = 42
    schedule: tuple[int, int, int] = (1, 1, 1)
    noise_var: float = 0.64
    encoder_width: int = 8
    attack_epochs: int | None = None

    def __post_init__(self):
        if self.mode not in OBFUSCATION_MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {OBFUSCATION_MODES}")
        if not 0.0 <= self.radius <= 1.0:
            raise ConfigError(f"radius must lie in [0, 1], got {self.radius}")
        if self.adversary_weight < 0:
            raise ConfigError(f"adversary_weight must be non-negative, got {self.adversary_weight}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError(
                f"epochs and batch_size must be positive, got {self.epochs}, {self.batch_size}"
            )
        if self.lr_encoder <= 0 or self.lr_classifiers <= 0:
            raise ConfigError("learning rates must be positive")
        if (len(self.schedule) != 3 or any(int(s) != s or s < 0 for s in self.schedule)
                or sum(self.schedule) == 0):
            raise ConfigError(f"schedule must be three non-negative ints, got {self.schedule}")
        if self.attack_epochs is not None and self.attack_epochs < 1:
            raise ConfigError(f"attack_epochs must be positive, got {self.attack_epochs}")
        if self.encoder_width < 1:
            raise ConfigError(f"encoder_width must be positive, got {self.encoder_width}")
        if self.noise_var < 0:
            raise ConfigError(f"noise_var must be non-negative, got {self.noise_var}")

    @property
    def uses_filter(self) -> bool:
        return self.mode in ("learned", "lp_only")


@dataclass
class TrainedSystem:
    """Result of a training run: the players plus their loss traces."""

    obfuscator: Obfuscator
    task_model: ClassifierModel
    adversary_model: ClassifierModel | None
    loss_history: dict[str, list[float]]
    config: ArlConfig


@dataclass
class AttackResult:
    """Outcome of one post-hoc attack against a frozen obfuscator."""

    kind: str
    model: object
    metrics: dict | SimilarityReport


@dataclass
class SweepPoint:
    radius: float
    utility: float
    privacy: float
    delta: float


def _check_finite(loss: Tensor, player: str, step: int, epoch: int, batch: int) -> None:
    value = loss.item()
    if not np.isfinite(value):
        raise TrainingDivergedError(
            f"non-finite {player} loss at global step {step} (epoch {epoch}, batch {batch})",
            player=player, step=step,
        )


def build_obfuscator(cfg: ArlConfig, image_shape: tuple[int, int, int],
                     encoder: EncoderModel | None) -> Obfuscator:
    """Assemble the obfuscator for a config against concrete image dims."""
    c, h, w = image_shape
    spec = FilterSpec(cfg.filter_kind, cfg.radius, (h, w)) if cfg.uses_filter else None
    return Obfuscator(cfg.mode, encoder=encoder, filter_spec=spec,
                      noise_var=cfg.noise_var, seed=derive_seed(cfg.seed, _TAG_NOISE))


def train_arl(cfg: ArlConfig, data: DatasetSplit,
              step_callback: Callable[[dict], None] | None = None) -> TrainedSystem:
    """Run the alternating training loop and return the trained players.

    Args:
        cfg: run configuration; ``cfg.mode`` picks the obfuscator.
        data: train/test split; only the train part is touched here.
        step_callback: optional hook invoked after every optimizer
            sub-step with a dict describing it (used by tests to watch
            player isolation).

    Raises:
        TrainingDivergedError: the moment any loss goes non-finite.
    """
    if not data.train:
        raise ConfigError("training split is empty")
    image_shape = data.image_shape
    c = image_shape[0]

    encoder = None
    if cfg.mode in ("learned", "unet_only"):
        encoder = EncoderModel(c, cfg.encoder_width)
        initialize_parameters(encoder, derive_seed(cfg.seed, _TAG_ENCODER))
    obfuscator = build_obfuscator(cfg, image_shape, encoder)

    task_model = ClassifierModel(c, data.utility_classes)
    initialize_parameters(task_model, derive_seed(cfg.seed, _TAG_TASK))
    task_opt = Adam(task_model.parameters(), lr=cfg.lr_classifiers)

    adversary_model = None
    adversary_opt = None
    encoder_opt = None
    if obfuscator.trainable:
        adversary_model = ClassifierModel(c, data.privacy_classes)
        initialize_parameters(adversary_model, derive_seed(cfg.seed, _TAG_ADVERSARY))
        adversary_opt = Adam(adversary_model.parameters(), lr=cfg.lr_classifiers)
        encoder_opt = Adam(encoder.parameters(), lr=cfg.lr_encoder)

    history: dict[str, list[float]] = {"adversary": [], "task": [], "encoder": []}
    batch_seed = derive_seed(cfg.seed, _TAG_BATCHES)
    global_step = 0

    def notify(player: str, loss_value: float, epoch: int, batch: int) -> None:
        if step_callback is not None:
            step_callback({
                "player": player, "loss": loss_value, "epoch": epoch, "batch": batch,
                "models": {"encoder": encoder, "task": task_model,
                           "adversary": adversary_model},
            })

    for epoch in range(cfg.epochs):
        epoch_task_losses = []
        for batch_index, (xb, yt, yp) in enumerate(
                batches(data.train, cfg.batch_size, batch_seed, epoch)):
            if obfuscator.trainable:
                for _ in range(cfg.schedule[0]):
                    global_step += 1
                    frozen_view = obfuscator(xb)  # no tape: encoder is a constant here
                    with Tape():
                        loss = softmax_cross_entropy(adversary_model(frozen_view), yp)
                        _check_finite(loss, "adversary", global_step, epoch, batch_index)
                        backward(loss)
                    adversary_opt.step()
                    history["adversary"].append(loss.item())
                    notify("adversary", loss.item(), epoch, batch_index)

            for _ in range(cfg.schedule[1]):
                global_step += 1
                frozen_view = obfuscator(xb)
                with Tape():
                    loss = softmax_cross_entropy(task_model(frozen_view), yt)
                    _check_finite(loss, "task", global_step, epoch, batch_index)
                    backward(loss)
                task_opt.step()
                history["task"].append(loss.item())
                epoch_task_losses.append(loss.item())
                notify("task", loss.item(), epoch, batch_index)

            if obfuscator.trainable:
                for _ in range(cfg.schedule[2]):
                    global_step += 1
                    with Tape():
                        released = obfuscator(xb)
                        task_loss = softmax_cross_entropy(task_model(released), yt)
                        if cfg.adversary_weight > 0:
                            adv_loss = softmax_cross_entropy(adversary_model(released), yp)
                            loss = task_loss - cfg.adversary_weight * adv_loss
                        else:
                            loss = task_loss
                        _check_finite(loss, "encoder", global_step, epoch, batch_index)
                        backward(loss)
                    encoder_opt.step()
                    # The shared backward pass also deposited gradients on the
                    # classifiers; those updates belong to the other players.
                    clear_gradients(task_model.parameters())
                    if adversary_model is not None:
                        clear_gradients(adversary_model.parameters())
                    history["encoder"].append(loss.item())
                    notify("encoder", loss.item(), epoch, batch_index)
        if epoch_task_losses:
            logger.info("epoch %d/%d mean task loss %.4f", epoch + 1, cfg.epochs,
                        float(np.mean(epoch_task_losses)))

    return TrainedSystem(obfuscator, task_model, adversary_model, history, cfg)


def evaluate_utility(system: TrainedSystem, data: DatasetSplit,
                     batch_size: int = 64) -> float:
    """Task accuracy (percent) on obfuscated test images."""
    correct = 0
    total = 0
    for xb, yt, _ in eval_batches(data.test, batch_size):
        logits = system.task_model(system.obfuscator(xb))
        correct += round(accuracy(logits, yt) * len(yt) / 100.0)
        total += len(yt)
    return 100.0 * correct / total


def _train_fresh_classifier(obfuscator: Obfuscator, data: DatasetSplit,
                            label_kind: str, num_classes: int, seed: int,
                            epochs: int, batch_size: int, lr: float) -> ClassifierModel:
    c = data.image_shape[0]
    model = ClassifierModel(c, num_classes)
    initialize_parameters(model, derive_seed(seed, _TAG_ATTACKER))
    opt = Adam(model.parameters(), lr=lr)
    batch_seed = derive_seed(seed, _TAG_ATTACK_BATCHES)
    step = 0
    for epoch in range(epochs):
        for batch_index, (xb, yt, yp) in enumerate(
                batches(data.train, batch_size, batch_seed, epoch)):
            step += 1
            labels = yp if label_kind == "privacy" else yt
            view = obfuscator(xb)
            with Tape():
                loss = softmax_cross_entropy(model(view), labels)
                _check_finite(loss, f"{label_kind} attacker", step, epoch, batch_index)
                backward(loss)
            opt.step()
    return model


def train_frozen_adversary(system: TrainedSystem, data: DatasetSplit,
                           seed: int | None = None,
                           epochs: int | None = None) -> AttackResult:
    """Information-leakage attack: fresh classifier vs frozen obfuscator.

    The obfuscator is bitwise untouched; its parameter digest is checked
    before and after as a guard.
    """
    cfg = system.config
    seed = cfg.seed if seed is None else seed
    epochs = epochs or cfg.attack_epochs or cfg.epochs
    digest_before = (parameter_digest(system.obfuscator.encoder)
                     if system.obfuscator.encoder is not None else None)
    attacker = _train_fresh_classifier(
        system.obfuscator, data, "privacy", data.privacy_classes,
        seed, epochs, cfg.batch_size, cfg.lr_classifiers,
    )
    correct = 0
    total = 0
    for xb, _, yp in eval_batches(data.test):
        logits = attacker(system.obfuscator(xb))
        correct += round(accuracy(logits, yp) * len(yp) / 100.0)
        total += len(yp)
    privacy = 100.0 * correct / total
    if digest_before is not None:
        digest_after = parameter_digest(system.obfuscator.encoder)
        if digest_after != digest_before:
            raise RuntimeError("obfuscator parameters changed during a frozen attack")
    return AttackResult("information_leakage", attacker, {"privacy_accuracy": privacy})


def train_reconstructor(system: TrainedSystem, data: DatasetSplit,
                        seed: int | None = None,
                        epochs: int | None = None) -> AttackResult:
    """Reconstruction attack: invert the frozen obfuscator pixel-wise.

    Trains the same U-shaped topology as the encoder with a mean squared
    error loss, then scores reconstructions of the test set with the
    full similarity suite.
    """
    cfg = system.config
    seed = cfg.seed if seed is None else seed
    epochs = epochs or cfg.attack_epochs or cfg.epochs
    c = data.image_shape[0]
    digest_before = (parameter_digest(system.obfuscator.encoder)
                     if system.obfuscator.encoder is not None else None)
    model = ReconstructorModel(c, cfg.encoder_width)
    initialize_parameters(model, derive_seed(seed, _TAG_RECONSTRUCTOR))
    # Attack-side learning rate: the reconstructor must reach (near)
    # convergence within the attack budget for its score to mean
    # anything; the slower obfuscator rate leaves it at its init.
    opt = Adam(model.parameters(), lr=cfg.lr_classifiers)
    batch_seed = derive_seed(seed, _TAG_RECON_BATCHES)
    step = 0
    for epoch in range(epochs):
        for batch_index, (xb, _, _) in enumerate(
                batches(data.train, cfg.batch_size, batch_seed, epoch)):
            step += 1
            view = system.obfuscator(xb)
            with Tape():
                loss = mean_all_squared_error(model(view), xb)
                _check_finite(loss, "reconstructor", step, epoch, batch_index)
                backward(loss)
            opt.step()
    pairs = []
    for xb, _, _ in eval_batches(data.test):
        recon = model(system.obfuscator(xb))
        for i in range(xb.shape[0]):
            pairs.append((xb.data[i], recon.data[i]))
    report = similarity_suite(pairs)
    if digest_before is not None:
        digest_after = parameter_digest(system.obfuscator.encoder)
        if digest_after != digest_before:
            raise RuntimeError("obfuscator parameters changed during a frozen attack")
    return AttackResult("reconstruction", model, report)


def compute_bounds(data: DatasetSplit, seed: int, epochs: int = 10,
                   batch_size: int = 32, lr: float = 1e-3) -> tuple[float, float]:
    """(utility upper bound, privacy lower bound) for a dataset.

    The upper bound trains the task classifier on raw images through an
    identity obfuscator, i.e. the exact training procedure with the
    privacy mechanism switched off. The lower bound is chance for
    balanced test labels, otherwise the largest class marginal.
    """
    cfg = ArlConfig(mode="identity", seed=seed, epochs=epochs,
                    batch_size=batch_size, lr_classifiers=lr)
    utility_upper = evaluate_utility(train_arl(cfg, data), data)
    counts = np.bincount([ex.privacy_label for ex in data.test],
                         minlength=data.privacy_classes)
    if counts.min() == counts.max():
        privacy_lower = 100.0 / data.privacy_classes
    else:
        privacy_lower = 100.0 * counts.max() / counts.sum()
    return utility_upper, privacy_lower


def radius_sweep(cfg: ArlConfig, radii, data: DatasetSplit) -> Iterator[SweepPoint]:
    """Train/attack once per radius with identical seeds; yields rows.

    Duplicate radii are dropped with a warning; fewer than two distinct
    radii is a configuration error. Yielding per radius lets callers
    flush partial results.
    """
    if not cfg.uses_filter:
        raise ConfigError(f"radius sweep requires a filtering mode, got {cfg.mode!r}")
    unique: list[float] = []
    for r in radii:
        if r in unique:
            warnings.warn(f"duplicate sweep radius {r} dropped", stacklevel=2)
        else:
            unique.append(float(r))
    if len(unique) < 2:
        raise ConfigError(f"radius sweep needs at least two distinct radii, got {unique}")
    for r in unique:
        run_cfg = dataclasses.replace(cfg, radius=r)
        system = train_arl(run_cfg, data)
        utility = evaluate_utility(system, data)
        attack = train_frozen_adversary(system, data)
        privacy = attack.metrics["privacy_accuracy"]
        logger.info("sweep r=%.4g utility=%.2f privacy=%.2f", r, utility, privacy)
        yield SweepPoint(r, utility, privacy, utility - privacy)
