"""Predictions CSV ingestion and report emission."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .core import CategoricalLabels, PairedDataset, validate

COLUMNS = ("id", "a", "t", "a_hat", "t_hat")
RESULT_FIELDS = ("metric", "direction", "value", "ci_low", "ci_high", "iterations", "seed")


class PredictionsFileError(ValueError):
    def __init__(self, path, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__(f"{path}: " + "; ".join(diagnostics))


@dataclass
class PredictionsFile:
    ids: list
    dataset: PairedDataset
    label_maps: dict = field(default_factory=dict)


def _is_int(value: str) -> bool:
    try:
        int(value)
    except ValueError:
        return False
    return True


def _encode(columns: dict, pairs) -> tuple[dict, dict]:
    """Map each channel pair (truth, prediction) to shared dense codes."""
    codes, maps = {}, {}
    for base, hat in pairs:
        present = [c for c in (base, hat) if c in columns]
        values = [v for c in present for v in columns[c]]
        if all(_is_int(v) for v in values):
            mapping = {str(int(v)): int(v) for v in sorted(set(values), key=int)}
        else:
            mapping = {v: i for i, v in enumerate(sorted(set(values)))}
        for c in present:
            codes[c] = np.array(
                [mapping[str(int(v))] if _is_int(v) else mapping[v] for v in columns[c]],
                dtype=np.int64,
            )
        maps[base] = mapping
    return codes, maps


def read_predictions(path) -> PredictionsFile:
    """Parse ``id,a,t[,a_hat][,t_hat]``; raise with line-numbered diagnostics."""
    path = Path(path)
    problems = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise PredictionsFileError(path, [str(exc)]) from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header:
        raise PredictionsFileError(path, ["line 1: empty file"])
    header = [h.strip() for h in header]
    unknown = [h for h in header if h not in COLUMNS]
    if unknown:
        problems.append(f"line 1: unknown columns {', '.join(unknown)}")
    for required in ("id", "a", "t"):
        if required not in header:
            problems.append(f"line 1: missing required column '{required}'")
    if problems:
        raise PredictionsFileError(path, problems)

    columns = {h: [] for h in header}
    seen = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            problems.append(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            continue
        for name, raw in zip(header, row):
            value = raw.strip()
            if value == "":
                problems.append(f"line {lineno}: empty value in column '{name}'")
            elif name != "id" and _is_int(value) and int(value) < 0:
                problems.append(f"line {lineno}: negative class code in column '{name}'")
            columns[name].append(value)
        rid = columns["id"][-1]
        if rid in seen:
            problems.append(f"line {lineno}: duplicate id {rid!r} (first on line {seen[rid]})")
        else:
            seen[rid] = lineno
    if not columns["id"] and not problems:
        problems.append("no data rows")
    if problems:
        raise PredictionsFileError(path, problems)

    codes, maps = _encode(columns, (("a", "a_hat"), ("t", "t_hat")))
    cards = {base: max(2, max(m.values()) + 1) for base, m in maps.items()}
    violations = [
        v for v in validate({k: codes.get(k) for k in ("a", "t", "a_hat", "t_hat")}, cards)
        if not v.startswith("missing")
    ]
    if violations:
        raise PredictionsFileError(path, violations)
    dataset = PairedDataset(
        CategoricalLabels(codes["a"], cards["a"]),
        CategoricalLabels(codes["t"], cards["t"]),
        CategoricalLabels(codes["a_hat"], cards["a"]) if "a_hat" in codes else None,
        CategoricalLabels(codes["t_hat"], cards["t"]) if "t_hat" in codes else None,
    )
    return PredictionsFile(columns["id"], dataset, maps)


def write_predictions(path, ids, dataset: PairedDataset) -> None:
    header = ["id", "a", "t"]
    cols = [dataset.a.codes, dataset.t.codes]
    for name in ("a_hat", "t_hat"):
        labels = dataset.channel(name)
        if labels is not None:
            header.append(name)
            cols.append(labels.codes)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, rid in enumerate(ids):
            writer.writerow([rid, *(int(c[i]) for c in cols)])


def result_record(result, seed: Optional[int]) -> dict:
    record = result.as_dict()
    record["seed"] = seed
    return record


def results_to_csv(records: list[dict]) -> str:
    fields = RESULT_FIELDS + (("variant",) if any("variant" in r for r in records) else ())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: ("" if rec.get(k) is None else rec.get(k)) for k in fields})
    return buf.getvalue()


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_schema() -> dict:
    text = resources.files("biasamp").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)
