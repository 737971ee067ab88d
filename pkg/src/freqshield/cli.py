"""Command-line front end.

Subcommands mirror the experiment lifecycle: gen-data materializes a
dataset directory, train fits one obfuscation mode and saves a run
directory, attack measures the frozen run with fresh adversaries,
sweep repeats train+attack across filter radii, report renders the
accumulated result rows, defaults prints the full INI schema.

Exit codes: 0 success, 2 configuration or input-format problems,
3 filesystem errors, 4 diverged training, 5 corrupt checkpoints.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .checkpoint import apply_state, load_checkpoint, save_checkpoint
from .config import load_settings, render_defaults
from .data import (DatasetSplit, derive_tasks, gen_synthetic, load_idx,
                   load_split, separability_scores, export_split)
from .engine import (ArlConfig, TrainedSystem, build_obfuscator, evaluate_utility,
                     radius_sweep, train_arl, train_frozen_adversary,
                     train_reconstructor)
from .errors import CheckpointError, ConfigError, IdxFormatError, TrainingDivergedError
from .models import ClassifierModel, EncoderModel, initialize_parameters
from .pnm import write_pgm, write_ppm
from .report import (append_reports, build_report, format_table, load_reports,
                     write_csv)

_SYSTEM_FILE = "system.json"
_RESULTS_DEFAULT = "results.jsonl"


def _fail_if_exists(path: Path, force: bool, what: str) -> None:
    if path.exists() and not force:
        raise ConfigError(f"{what} already exists at {path}; pass --force to overwrite")


def _dataset_name(data_dir: Path) -> str:
    return data_dir.name or "dataset"


def _cmd_defaults(args) -> int:
    print(render_defaults(), end="")
    return 0


def _cmd_gen_data(args) -> int:
    settings = load_settings(args.config)
    out = Path(args.out)
    _fail_if_exists(out / "manifest.json", args.force, "a dataset")
    if (args.idx_images is None) != (args.idx_labels is None):
        raise ConfigError("--idx-images and --idx-labels must be given together")
    if args.idx_images is not None:
        raw = load_idx(args.idx_images, args.idx_labels)
        split = derive_tasks(raw, seed=settings.dataset.seed)
        print(f"loaded {len(split.train)} train / {len(split.test)} test examples "
              f"from idx files (padded to {split.image_shape[1]}x{split.image_shape[2]})")
    else:
        split = gen_synthetic(settings.dataset)
        utility_sep, privacy_sep = separability_scores(split)
        print(f"generated {len(split.train)} train / {len(split.test)} test examples")
        print(f"oracle separability: utility {utility_sep:.1f}%, privacy {privacy_sep:.1f}%")
    out.mkdir(parents=True, exist_ok=True)
    export_split(split, out)
    print(f"wrote dataset to {out}")
    return 0


def _apply_overrides(cfg: ArlConfig, args) -> ArlConfig:
    updates = {}
    if getattr(args, "mode", None) is not None:
        updates["mode"] = args.mode
    if getattr(args, "radius", None) is not None:
        updates["radius"] = args.radius
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        updates["epochs"] = args.epochs
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _save_run(run_dir: Path, system: TrainedSystem, data: DatasetSplit,
              dataset_name: str, utility: float) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg = system.config
    if system.obfuscator.encoder is not None:
        save_checkpoint(run_dir / "encoder.fshd", "encoder",
                        system.obfuscator.encoder.named_parameters())
    save_checkpoint(run_dir / "task.fshd", "task", system.task_model.named_parameters())
    if system.adversary_model is not None:
        save_checkpoint(run_dir / "adversary.fshd", "adversary",
                        system.adversary_model.named_parameters())
    meta = {
        "format_version": 1,
        "config": dataclasses.asdict(cfg),
        "dataset": dataset_name,
        "image_shape": list(data.image_shape),
        "utility_classes": data.utility_classes,
        "privacy_classes": data.privacy_classes,
        "utility": utility,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(run_dir / _SYSTEM_FILE, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(run_dir / "history.json", "w", encoding="utf-8") as fh:
        json.dump(system.loss_history, fh)
        fh.write("\n")


def _load_run(run_dir: Path, data: DatasetSplit) -> tuple[TrainedSystem, dict]:
    meta_path = run_dir / _SYSTEM_FILE
    if not meta_path.exists():
        raise ConfigError(f"no trained run at {run_dir} (missing {_SYSTEM_FILE})")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format_version") != 1:
        raise ConfigError(f"unsupported run format {meta.get('format_version')!r}")
    raw_cfg = dict(meta["config"])
    raw_cfg["schedule"] = tuple(raw_cfg["schedule"])
    cfg = ArlConfig(**raw_cfg)
    if list(data.image_shape) != list(meta["image_shape"]):
        raise ConfigError(
            f"dataset shape {list(data.image_shape)} does not match the run's "
            f"{meta['image_shape']}"
        )
    c = data.image_shape[0]

    encoder = None
    if cfg.mode in ("learned", "unet_only"):
        encoder = EncoderModel(c, cfg.encoder_width)
        kind, state = load_checkpoint(run_dir / "encoder.fshd")
        if kind != "encoder":
            raise CheckpointError(f"expected an encoder checkpoint, got kind {kind!r}")
        apply_state(encoder.named_parameters(), state)
    obfuscator = build_obfuscator(cfg, data.image_shape, encoder)

    task_model = ClassifierModel(c, meta["utility_classes"])
    initialize_parameters(task_model, 0)
    kind, state = load_checkpoint(run_dir / "task.fshd")
    if kind != "task":
        raise CheckpointError(f"expected a task checkpoint, got kind {kind!r}")
    apply_state(task_model.named_parameters(), state)

    adversary = None
    adv_path = run_dir / "adversary.fshd"
    if adv_path.exists():
        adversary = ClassifierModel(c, meta["privacy_classes"])
        initialize_parameters(adversary, 0)
        kind, state = load_checkpoint(adv_path)
        if kind != "adversary":
            raise CheckpointError(f"expected an adversary checkpoint, got kind {kind!r}")
        apply_state(adversary.named_parameters(), state)

    return TrainedSystem(obfuscator, task_model, adversary, {}, cfg), meta


def _cmd_train(args) -> int:
    settings = load_settings(args.config)
    cfg = _apply_overrides(settings.arl, args)
    data_dir = Path(args.data)
    data = load_split(data_dir)
    run_dir = Path(args.out)
    _fail_if_exists(run_dir / _SYSTEM_FILE, args.force, "a trained run")

    print(f"training mode={cfg.mode} radius={cfg.radius:g} seed={cfg.seed} "
          f"epochs={cfg.epochs}")
    system = train_arl(cfg, data)
    utility = evaluate_utility(system, data)
    _save_run(run_dir, system, data, _dataset_name(data_dir), utility)

    results = Path(args.results) if args.results else run_dir / _RESULTS_DEFAULT
    row = build_report(cfg.mode, _dataset_name(data_dir),
                       cfg.radius if cfg.uses_filter else None, utility, cfg.seed)
    append_reports(results, [row])
    print(f"task accuracy on obfuscated test images: {utility:.2f}%")
    print(f"run saved to {run_dir}; row appended to {results}")
    return 0


def _write_sample(path_stem: Path, image) -> None:
    if image.shape[0] == 3:
        write_ppm(path_stem.with_suffix(".ppm"), image)
    else:
        write_pgm(path_stem.with_suffix(".pgm"), image)


def _cmd_attack(args) -> int:
    run_dir = Path(args.run)
    data = load_split(Path(args.data))
    system, meta = _load_run(run_dir, data)
    cfg = system.config
    seed = args.seed if args.seed is not None else cfg.seed
    epochs = args.epochs

    print(f"attacking frozen run {run_dir} (mode={cfg.mode}, seed {seed})")
    leak = train_frozen_adversary(system, data, seed=seed, epochs=epochs)
    privacy = leak.metrics["privacy_accuracy"]
    print(f"privacy attack accuracy: {privacy:.2f}%")
    recon = train_reconstructor(system, data, seed=seed, epochs=epochs)
    sim = recon.metrics
    print(f"reconstruction: mse {sim.mse:.2f}, l1 {sim.l1:.2f}, ssim {sim.ssim:.4f}, "
          f"ms_ssim {sim.ms_ssim:.4f}, psnr "
          + ("inf" if sim.psnr == float("inf") else f"{sim.psnr:.2f}"))

    row = build_report(cfg.mode, meta["dataset"],
                       cfg.radius if cfg.uses_filter else None,
                       meta["utility"], seed, privacy=privacy, similarity=sim)
    results = Path(args.results) if args.results else run_dir / _RESULTS_DEFAULT
    append_reports(results, [row])
    print(f"gap (utility - privacy): {row.delta:.2f}pp; row appended to {results}")

    n_samples = args.samples
    if n_samples > 0:
        sample_dir = run_dir / "samples"
        sample_dir.mkdir(parents=True, exist_ok=True)
        from .data import eval_batches

        for xb, _, _ in eval_batches(data.test, batch_size=n_samples):
            released = system.obfuscator(xb)
            rebuilt = recon.model(released)
            for i in range(min(n_samples, xb.shape[0])):
                _write_sample(sample_dir / f"{i:03d}_original", xb.data[i])
                _write_sample(sample_dir / f"{i:03d}_obfuscated", released.data[i])
                _write_sample(sample_dir / f"{i:03d}_reconstructed", rebuilt.data[i])
            break
        print(f"sample triplets written to {sample_dir}")
    return 0


def _cmd_sweep(args) -> int:
    settings = load_settings(args.config)
    cfg = _apply_overrides(settings.arl, args)
    data_dir = Path(args.data)
    data = load_split(data_dir)
    out = Path(args.out)
    _fail_if_exists(out / "sweep.csv", args.force, "a sweep")
    try:
        radii = [float(r) for r in args.radii.split(",") if r.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --radii value: {exc}") from exc

    out.mkdir(parents=True, exist_ok=True)
    dat_names = ("utility", "privacy", "delta")
    csv_fh = open(out / "sweep.csv", "w", encoding="utf-8")
    dat_fhs = {n: open(out / f"{n}.dat", "w", encoding="utf-8") for n in dat_names}
    rows = []
    try:
        csv_fh.write("r,utility,privacy,delta\n")
        csv_fh.flush()
        for point in radius_sweep(cfg, radii, data):
            csv_fh.write(f"{point.radius:g},{point.utility:.6f},"
                         f"{point.privacy:.6f},{point.delta:.6f}\n")
            csv_fh.flush()
            for name in dat_names:
                dat_fhs[name].write(f"{point.radius:g} {getattr(point, name):.6f}\n")
                dat_fhs[name].flush()
            rows.append(build_report(cfg.mode, _dataset_name(data_dir), point.radius,
                                     point.utility, cfg.seed, privacy=point.privacy))
            print(f"r={point.radius:g}: utility {point.utility:.2f}%, "
                  f"privacy {point.privacy:.2f}%, gap {point.delta:.2f}pp")
    finally:
        csv_fh.close()
        for fh in dat_fhs.values():
            fh.close()
    if args.results:
        append_reports(Path(args.results), rows)
    print(f"sweep results in {out}")
    return 0


def _cmd_report(args) -> int:
    rows = load_reports(args.results)
    if not rows:
        print("no result rows found")
        return 0
    print(format_table(rows))
    if args.csv:
        write_csv(args.csv, rows)
        print(f"csv written to {args.csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqshield",
        description="Train and audit frequency-filtering obfuscators.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("defaults", help="print the default configuration")
    p.set_defaults(func=_cmd_defaults)

    p = sub.add_parser("gen-data", help="materialize a dataset directory")
    p.add_argument("--config", default=None, help="INI config file")
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.add_argument("--idx-images", default=None, help="idx image file to ingest")
    p.add_argument("--idx-labels", default=None, help="idx label file to ingest")
    p.add_argument("--force", action="store_true", help="overwrite an existing dataset")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train one obfuscation mode")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="run directory to create")
    p.add_argument("--mode", default=None, help="override the configured mode")
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--results", default=None, help="JSONL results file (default: in run dir)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("attack", help="audit a frozen run with fresh adversaries")
    p.add_argument("--run", required=True, help="run directory from train")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--samples", type=int, default=8, help="sample triplets to dump")
    p.add_argument("--results", default=None)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("sweep", help="train and attack across filter radii")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="sweep output directory")
    p.add_argument("--radii", required=True, help="comma-separated radii")
    p.add_argument("--mode", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--results", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="render accumulated result rows")
    p.add_argument("--results", required=True)
    p.add_argument("--csv", default=None, help="also export CSV here")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (ConfigError, IdxFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())
