"""Result rows: building, (de)serializing, and pretty-printing.

A row is one (method, dataset, radius, seed) measurement. Training
alone yields a row with utility only; once the post-hoc attacks have
run the row carries privacy, the utility/privacy gap, and the five
reconstruction scores. The gap is computed exactly once, at build
time, so tampered files are detectable later.

Rows persist as JSON lines (append-only) and export to CSV with a
fixed column order. Infinite PSNR serializes as the string "inf" in
both formats because JSON has no literal for it.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

from .errors import ConfigError
from .metrics import SimilarityReport

CSV_COLUMNS = ("method", "dataset", "r", "utility", "privacy", "delta",
               "mse", "l1", "ssim", "ms_ssim", "psnr", "seed")

_DELTA_TOLERANCE = 1e-9


@dataclass
class ExperimentReport:
    """One measurement row; optional fields absent until attacks run."""

    method: str
    dataset: str
    radius: float | None
    utility: float
    seed: int
    privacy: float | None = None
    delta: float | None = None
    mse: float | None = None
    l1: float | None = None
    ssim: float | None = None
    ms_ssim: float | None = None
    psnr: float | None = None
    timestamp: str = ""


def _check_percent(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 100.0:
        raise ConfigError(f"{name} must be a percentage in [0, 100], got {value}")
    return value


def build_report(method: str, dataset: str, radius: float | None, utility: float,
                 seed: int, privacy: float | None = None,
                 similarity: SimilarityReport | None = None) -> ExperimentReport:
    """Assemble a validated row; the gap is derived here and nowhere else."""
    utility = _check_percent("utility", utility)
    delta = None
    if privacy is not None:
        privacy = _check_percent("privacy", privacy)
        delta = utility - privacy
    row = ExperimentReport(
        method=method, dataset=dataset,
        radius=None if radius is None else float(radius),
        utility=utility, seed=int(seed), privacy=privacy, delta=delta,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
    if similarity is not None:
        row.mse = similarity.mse
        row.l1 = similarity.l1
        row.ssim = similarity.ssim
        row.ms_ssim = similarity.ms_ssim
        row.psnr = similarity.psnr
    return row


def _encode(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _decode_float(value):
    if value is None:
        return None
    if isinstance(value, str):
        return float(value)  # "inf" parses to math.inf
    return float(value)


def to_json_line(row: ExperimentReport) -> str:
    record = {k: _encode(v) for k, v in asdict(row).items()}
    return json.dumps(record, sort_keys=True)


def from_json_line(line: str) -> ExperimentReport:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed result line: {exc}") from exc
    if not isinstance(record, dict):
        raise ConfigError(f"result line is not an object: {line[:60]!r}")
    known = {f for f in ExperimentReport.__dataclass_fields__}
    extra = set(record) - known
    if extra:
        raise ConfigError(f"unknown result fields {sorted(extra)}")
    missing = {"method", "dataset", "utility", "seed"} - set(record)
    if missing:
        raise ConfigError(f"result line missing fields {sorted(missing)}")
    kwargs = dict(record)
    for name in ("radius", "utility", "privacy", "delta",
                 "mse", "l1", "ssim", "ms_ssim", "psnr"):
        if name in kwargs:
            kwargs[name] = _decode_float(kwargs[name])
    kwargs["seed"] = int(kwargs["seed"])
    return ExperimentReport(**kwargs)


def append_reports(path, rows) -> None:
    """Append rows to a JSONL file, creating it on first use."""
    with open(path, "a", encoding="utf-8") as fh:
        for row in rows:
            fh.write(to_json_line(row) + "\n")


def load_reports(path) -> list[ExperimentReport]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(from_json_line(line))
    return rows


def _format_cell(value, spec: str = ".2f") -> str:
    if value is None:
        return "-"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return format(value, spec)


def write_csv(path, rows) -> None:
    """Fixed-column CSV export; blank cells for absent measurements."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            rec = asdict(row)
            rec["r"] = rec.pop("radius")
            out = []
            for col in CSV_COLUMNS:
                value = rec[col]
                if value is None:
                    out.append("")
                elif isinstance(value, float) and math.isinf(value):
                    out.append("inf" if value > 0 else "-inf")
                else:
                    out.append(repr(value) if isinstance(value, float) else str(value))
            writer.writerow(out)


def gap_mismatches(rows) -> list[int]:
    """Indices of rows whose stored gap disagrees with utility - privacy."""
    bad = []
    for i, row in enumerate(rows):
        if row.privacy is None or row.delta is None:
            continue
        if abs(row.delta - (row.utility - row.privacy)) > _DELTA_TOLERANCE:
            bad.append(i)
    return bad


def format_table(rows) -> str:
    """Aligned text table sorted by gap, best row per dataset starred."""
    rows = list(rows)
    order = sorted(
        range(len(rows)),
        key=lambda i: (-(rows[i].delta if rows[i].delta is not None else -math.inf),
                       rows[i].method, rows[i].seed),
    )
    best_by_dataset: dict[str, int] = {}
    for i in order:
        row = rows[i]
        if row.delta is None:
            continue
        if row.dataset not in best_by_dataset:
            best_by_dataset[row.dataset] = i

    header = ("", "method", "dataset", "r", "utility", "privacy", "delta",
              "mse", "l1", "ssim", "ms_ssim", "psnr", "seed")
    body = []
    for i in order:
        row = rows[i]
        body.append((
            "*" if best_by_dataset.get(row.dataset) == i else "",
            row.method, row.dataset,
            _format_cell(row.radius, "g"),
            _format_cell(row.utility), _format_cell(row.privacy),
            _format_cell(row.delta),
            _format_cell(row.mse), _format_cell(row.l1),
            _format_cell(row.ssim, ".4f"), _format_cell(row.ms_ssim, ".4f"),
            _format_cell(row.psnr), str(row.seed),
        ))
    widths = [max(len(header[c]), *(len(r[c]) for r in body)) if body else len(header[c])
              for c in range(len(header))]
    lines = ["  ".join(h.ljust(widths[c]) for c, h in enumerate(header)).rstrip()]
    for r in body:
        lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(r)).rstrip())
    bad = gap_mismatches(rows)
    for i in bad:
        row = rows[i]
        lines.append(
            f"warning: row {i} ({row.method}/{row.dataset}, seed {row.seed}) stores "
            f"delta {row.delta:.6f} but utility - privacy = {row.utility - row.privacy:.6f}"
        )
    return "\n".join(lines)
