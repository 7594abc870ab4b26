"""Logits/label dataset files and report serialisation.

Dataset formats
---------------
JSONL  one object per line: ``{"logits": [z_0, ..., z_{k-1}], "label": int}``
CSV    header ``label,logit_0,...,logit_{k-1}`` then one row per sample

Reports are written as CSV (one header row, reals with 12 significant digits)
or JSON (``{"kind", "provenance", "rows", ...}``).
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from . import __version__
from .estimators import EstimatorReport
from .harness import ConvergenceTable, CounterexampleReport, EquivalenceReport
from .losses import LogitsRecord
from .stat_props import BiasMseCurve


class DatasetError(ValueError):
    """Invalid dataset content; ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = f"{path}" if path is not None else "<input>"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")


class DataFormat(str, Enum):
    JSONL = "jsonl"
    CSV = "csv"


@dataclass
class DatasetFile:
    format: DataFormat
    logits: np.ndarray
    labels: np.ndarray

    @property
    def k(self) -> int:
        return self.logits.shape[1]

    def __len__(self) -> int:
        return self.labels.size

    def records(self) -> Iterator[LogitsRecord]:
        for z, y in zip(self.logits, self.labels):
            yield LogitsRecord(z, int(y))


def infer_format(path) -> DataFormat:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return DataFormat.JSONL
    if suffix == ".csv":
        return DataFormat.CSV
    raise DatasetError(f"cannot infer format from suffix {suffix!r}; pass it explicitly", path)


def load_dataset(path, format=None) -> DatasetFile:
    fmt = DataFormat(format) if format else infer_format(path)
    try:
        if fmt is DataFormat.JSONL:
            logits, labels = _load_jsonl(path)
        else:
            logits, labels = _load_csv(path)
    except OSError as exc:
        raise DatasetError(f"cannot read file: {exc.strerror or exc}", path) from exc
    if labels.size == 0:
        raise DatasetError("file contains no records", path)
    return DatasetFile(fmt, logits, labels)


def _check_label(value, k: int, path, line: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise DatasetError(f"field 'label' must be an integer, got {value!r}", path, line)
    label = int(value)
    if not 0 <= label < k:
        raise DatasetError(f"field 'label' = {label} outside 0..{k - 1}", path, line)
    return label


def _check_logits(values, k: Optional[int], path, line: int) -> list:
    if not isinstance(values, list) or len(values) < 2:
        raise DatasetError("field 'logits' must be a list of at least two numbers", path, line)
    if k is not None and len(values) != k:
        raise DatasetError(f"field 'logits' has {len(values)} entries, expected k={k}", path, line)
    for j, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise DatasetError(f"field 'logits[{j}]' is not a finite number: {v!r}", path, line)
    return values


def _load_jsonl(path):
    rows: list = []
    labels: list = []
    k = None
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"malformed JSON ({exc.msg})", path, line_no) from None
            if not isinstance(obj, dict):
                raise DatasetError("record must be a JSON object", path, line_no)
            for key in ("logits", "label"):
                if key not in obj:
                    raise DatasetError(f"missing field {key!r}", path, line_no)
            z = _check_logits(obj["logits"], k, path, line_no)
            k = len(z)
            labels.append(_check_label(obj["label"], k, path, line_no))
            rows.append(z)
    if not rows:
        return np.empty((0, 2)), np.empty(0, dtype=np.int64)
    return np.asarray(rows, dtype=float), np.asarray(labels, dtype=np.int64)


def _parse_header(header: str, path) -> int:
    cols = [c.strip() for c in header.strip().split(",")]
    k = len(cols) - 1
    expected = ["label"] + [f"logit_{j}" for j in range(k)]
    if k < 2 or cols != expected:
        raise DatasetError(
            "header must be 'label,logit_0,...,logit_{k-1}' with k >= 2, got " + repr(header.strip()),
            path, 1,
        )
    return k


def _load_csv(path):
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        header = fh.readline()
        if not header:
            return np.empty((0, 2)), np.empty(0, dtype=np.int64)
        k = _parse_header(header, path)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=float)
        except ValueError:
            data = None
    if data is None or (data.size and data.shape[1] != k + 1):
        # slow path, only to name the offending line
        return _load_csv_streaming(path, k)
    if data.size == 0:
        return np.empty((0, k)), np.empty(0, dtype=np.int64)
    labels, logits = data[:, 0], data[:, 1:]
    bad = ~np.isfinite(logits).all(axis=1) | (labels != np.round(labels)) | (labels < 0) | (labels >= k)
    if bad.any():
        return _load_csv_streaming(path, k)
    return np.ascontiguousarray(logits), labels.astype(np.int64)


def _load_csv_streaming(path, k: int):
    rows, labels = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            line_no = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != k + 1:
                raise DatasetError(f"row has {len(row) - 1} logits, expected k={k}", path, line_no)
            try:
                label = float(row[0])
            except ValueError:
                raise DatasetError(f"field 'label' is not a number: {row[0]!r}", path, line_no) from None
            z = []
            for j, cell in enumerate(row[1:]):
                try:
                    z.append(float(cell))
                except ValueError:
                    raise DatasetError(f"field 'logit_{j}' is not a number: {cell!r}", path, line_no) from None
            _check_logits(z, k, path, line_no)
            labels.append(_check_label(label, k, path, line_no))
            rows.append(z)
    return np.asarray(rows, dtype=float).reshape(-1, k), np.asarray(labels, dtype=np.int64)


def write_dataset(path, logits, labels, format=None) -> None:
    """Write logits/labels losslessly (shortest round-trip float repr)."""
    fmt = DataFormat(format) if format else infer_format(path)
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if fmt is DataFormat.JSONL:
            for z, y in zip(logits.tolist(), labels.tolist()):
                fh.write(json.dumps({"logits": z, "label": y}) + "\n")
        else:
            k = logits.shape[1]
            fh.write(",".join(["label"] + [f"logit_{j}" for j in range(k)]) + "\n")
            for z, y in zip(logits.tolist(), labels.tolist()):
                fh.write(",".join([str(y)] + [repr(v) for v in z]) + "\n")


# ---------------------------------------------------------------- reports

def _fmt(x):
    if isinstance(x, Enum):
        return x.value
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.12g}")
    if isinstance(x, np.integer):
        return int(x)
    return x


def _fmt_csv(x) -> str:
    x = _fmt(x)
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def report_payload(report, config: Optional[dict] = None) -> dict:
    """Normalise any report object into ``{"kind", "rows", ...}`` with fixed column order."""
    extra: dict = {}
    seed = None
    if isinstance(report, EstimatorReport):
        report = [report]
    if isinstance(report, BiasMseCurve):
        report = [report]
    if isinstance(report, list) and report and all(isinstance(r, EstimatorReport) for r in report):
        kind = "estimator_report"
        rows = [r.to_dict() for r in report]
        seed = report[0].seed
    elif isinstance(report, list) and report and all(isinstance(r, BiasMseCurve) for r in report):
        kind = "bias_mse_curve"
        has_mc = any(c.has_mc for c in report)
        rows = []
        for c in report:
            for row in c.rows():
                if has_mc:
                    row.setdefault("mc_estimate", None)
                    row.setdefault("mc_stderr", None)
                    row.setdefault("mc_reps", None)
                rows.append(row)
        seed = report[0].meta.get("seed")
    elif isinstance(report, ConvergenceTable):
        kind = "convergence_table"
        rows = [r.to_dict() for r in report.rows]
        seed = report.seed
        extra = {
            "reference": report.reference,
            "reference_kind": report.reference_kind,
            "reps": report.reps,
            "rate_slopes": report.rate_slopes,
        }
    elif isinstance(report, CounterexampleReport):
        kind = "counterexample"
        rows = [{"loss": report.loss, "top_weight": report.top_weight,
                 "plugin_alpha_hat": report.plugin_alpha_hat, "sele_times_two": report.sele_times_two,
                 "ratio": report.ratio, "holds": report.holds}]
    elif isinstance(report, EquivalenceReport):
        kind = "equivalence"
        rows = [{"N": report.N, "empirical": report.empirical, "population": report.population,
                 "abs_gap": report.abs_gap, "rel_gap": report.rel_gap}]
    else:
        raise TypeError(f"unsupported report type {type(report).__name__}")
    config = dict(config or {})
    provenance = {"seed": seed if seed is not None else config.get("seed"),
                  "config_hash": config_hash(config), "version": __version__}
    if config:
        provenance["config"] = config
    return {"kind": kind, "provenance": provenance, **extra, "rows": rows}


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    v = _fmt(obj)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_report(report, path, format="csv", config: Optional[dict] = None) -> None:
    payload = report_payload(report, config)
    fmt = str(format).lower()
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            dump_report(payload, fh, fmt)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def dump_report(payload: dict, fh, fmt: str = "csv") -> None:
    if fmt == "json":
        json.dump(_json_ready(payload), fh, indent=2)
        fh.write("\n")
    elif fmt == "csv":
        rows = payload["rows"]
        fields = list(rows[0].keys()) if rows else []
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt_csv(row.get(f)) for f in fields])
    else:
        raise ValueError(f"unknown report format {fmt!r}")
