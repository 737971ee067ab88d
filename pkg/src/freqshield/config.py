"""INI run configuration.

Four sections (dataset, arl, attack, output), every key optional with
a default, unknown sections or keys rejected outright. The FRESH_SEED
environment variable, when set, replaces the training seed after the
file is parsed; it exists so batch jobs can fan out seeds without
editing config files.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass

from .data import SynthConfig
from .engine import ArlConfig
from .errors import ConfigError

FRESH_SEED_VAR = "FRESH_SEED"


@dataclass(frozen=True)
class AttackSettings:
    """Post-hoc attack knobs; None means inherit from the training run."""

    epochs: int | None = None
    seed: int | None = None
    samples: int = 8


@dataclass(frozen=True)
class OutputSettings:
    dir: str = "runs"
    results: str = "results.jsonl"


@dataclass(frozen=True)
class RunSettings:
    dataset: SynthConfig
    arl: ArlConfig
    attack: AttackSettings
    output: OutputSettings


def _parse_int(text: str) -> int:
    return int(text, 10)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_str(text: str) -> str:
    return text.strip()


def _parse_schedule(text: str) -> tuple[int, int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated integers")
    return tuple(int(p, 10) for p in parts)  # type: ignore[return-value]


def _parse_opt_int(text: str):
    text = text.strip()
    return None if not text else int(text, 10)


# section -> key -> (parser, default-as-written-in-ini)
_SCHEMA = {
    "dataset": {
        "n_examples": (_parse_int, "512"),
        "height": (_parse_int, "32"),
        "width": (_parse_int, "32"),
        "noise": (_parse_float, "0.05"),
        "seed": (_parse_int, "42"),
    },
    "arl": {
        "mode": (_parse_str, "learned"),
        "filter_kind": (_parse_str, "low_pass"),
        "radius": (_parse_float, "0.05"),
        "adversary_weight": (_parse_float, "1.0"),
        "epochs": (_parse_int, "10"),
        "batch_size": (_parse_int, "32"),
        "lr_encoder": (_parse_float, "0.0001"),
        "lr_classifiers": (_parse_float, "0.001"),
        "seed": (_parse_int, "42"),
        "schedule": (_parse_schedule, "1, 1, 1"),
        "noise_var": (_parse_float, "0.64"),
        "encoder_width": (_parse_int, "8"),
        "attack_epochs": (_parse_opt_int, ""),
    },
    "attack": {
        "epochs": (_parse_opt_int, ""),
        "seed": (_parse_opt_int, ""),
        "samples": (_parse_int, "8"),
    },
    "output": {
        "dir": (_parse_str, "runs"),
        "results": (_parse_str, "results.jsonl"),
    },
}


def render_defaults() -> str:
    """The full default configuration as INI text."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (_, default) in keys.items():
            lines.append(f"{key} = {default}")
        lines.append("")
    return "\n".join(lines)


def _parse_sections(parser: configparser.ConfigParser, source: str) -> dict:
    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"{source}: unknown section [{section}]; expected one of "
                f"{sorted(_SCHEMA)}"
            )
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"{source}: unknown key {key!r} in [{section}]; expected one of "
                    f"{sorted(_SCHEMA[section])}"
                )
    for section, keys in _SCHEMA.items():
        values[section] = {}
        for key, (convert, default) in keys.items():
            raw = parser.get(section, key, fallback=default) if parser.has_section(section) \
                else default
            try:
                values[section][key] = convert(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"{source}: bad value for {key!r} in [{section}]: {raw!r} ({exc})"
                ) from exc
    return values


def load_settings(path: str | None = None) -> RunSettings:
    """Parse an INI file (or pure defaults when path is None).

    Raises:
        ConfigError: unknown sections/keys, unparsable values, or values
            the downstream dataclasses reject.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    source = path or "<defaults>"
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc
    values = _parse_sections(parser, source)

    ds = values["dataset"]
    dataset = SynthConfig(n_examples=ds["n_examples"], height=ds["height"],
                          width=ds["width"], noise=ds["noise"], seed=ds["seed"])
    arl_values = values["arl"]
    try:
        arl = ArlConfig(**arl_values)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    fresh = os.environ.get(FRESH_SEED_VAR)
    if fresh is not None:
        try:
            arl = dataclasses.replace(arl, seed=int(fresh, 10))
        except ValueError as exc:
            raise ConfigError(f"{FRESH_SEED_VAR} must be an integer, got {fresh!r}") from exc

    at = values["attack"]
    attack = AttackSettings(epochs=at["epochs"], seed=at["seed"], samples=at["samples"])
    if attack.samples < 0:
        raise ConfigError(f"{source}: attack samples must be non-negative")
    out = values["output"]
    output = OutputSettings(dir=out["dir"], results=out["results"])
    return RunSettings(dataset=dataset, arl=arl, attack=attack, output=output)
