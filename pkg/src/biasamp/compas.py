"""COMPAS pipeline: race/recidivism labels, balancing, decision-tree predictors."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .attacker import COMPAS_ATTACKER, QualityKind
from .classifiers import DecisionTree, FeatureMatrix
from .core import CategoricalLabels, Direction, MetricResult, PairedDataset, build_joint
from .cooccurrence import ba_directional, ba_mals, multi_directional
from .predictability import DpaConfig, dpa, leakage_amplification

log = logging.getLogger(__name__)

FEATURES = ("age", "juv_fel_count", "juv_misd_count", "juv_other_count", "priors_count")
RACE_COLUMN = "race"
RECID_COLUMN = "two_year_recid"
RACES = ("Caucasian", "African-American")
RECID_NAMES = ("No Recidivism", "Recidivism")


class CompasInputError(ValueError):
    pass


@dataclass
class CompasData:
    ids: np.ndarray
    features: FeatureMatrix
    a: CategoricalLabels
    t: CategoricalLabels

    def __len__(self):
        return len(self.a)

    def subset(self, idx: np.ndarray) -> "CompasData":
        idx = np.sort(np.asarray(idx))
        return CompasData(
            self.ids[idx],
            FeatureMatrix(self.features.rows[idx], self.features.names),
            CategoricalLabels(self.a.codes[idx], 2),
            CategoricalLabels(self.t.codes[idx], 2),
        )


def _keep_propublica(row: dict) -> bool:
    # Standard ProPublica screening filters, applied only when the columns exist.
    try:
        if "days_b_screening_arrest" in row:
            days = row["days_b_screening_arrest"]
            if days == "" or not -30 <= float(days) <= 30:
                return False
        if "is_recid" in row and row["is_recid"].strip() == "-1":
            return False
        if "c_charge_degree" in row and row["c_charge_degree"].strip() == "O":
            return False
        if "score_text" in row and row["score_text"].strip() == "N/A":
            return False
    except ValueError:
        return False
    return True


def load_compas(path) -> CompasData:
    """Read a COMPAS-schema CSV, keeping the two studied races."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (*FEATURES, RACE_COLUMN, RECID_COLUMN) if c not in header]
        if missing:
            raise CompasInputError(f"{path}: missing columns {', '.join(missing)}")
        ids, rows, a, t = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            race = row[RACE_COLUMN].strip()
            if race not in RACES or not _keep_propublica(row):
                continue
            try:
                rows.append([float(row[c]) for c in FEATURES])
                recid = int(float(row[RECID_COLUMN]))
            except ValueError as exc:
                raise CompasInputError(f"{path}:{lineno}: {exc}") from None
            if recid not in (0, 1):
                raise CompasInputError(f"{path}:{lineno}: {RECID_COLUMN} must be 0 or 1")
            ids.append(row.get("id") or str(len(ids)))
            a.append(RACES.index(race))
            t.append(recid)
    if not a:
        raise CompasInputError(f"{path}: no rows with race in {RACES}")
    a_arr = np.asarray(a)
    if np.unique(a_arr).size < 2:
        raise CompasInputError(f"{path}: only one race present after filtering")
    return CompasData(
        np.asarray(ids, dtype=object),
        FeatureMatrix(np.asarray(rows), FEATURES),
        CategoricalLabels(a_arr, 2),
        CategoricalLabels(np.asarray(t), 2),
    )


def balance(data: CompasData, seed: int = 0, per_cell: Optional[int] = None) -> CompasData:
    """Subsample so that all four (race, recidivism) cells hold the same count."""
    counts = build_joint(data.a, data.t).cells.astype(int)
    smallest = int(counts.min())
    per_cell = smallest if per_cell is None else per_cell
    if per_cell < 1 or per_cell > smallest:
        raise CompasInputError(
            f"cannot balance: smallest (race, recidivism) cell has {smallest} rows, "
            f"{per_cell} required"
        )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 20])))
    chosen = []
    for t in range(2):
        for a in range(2):
            pool = np.flatnonzero((data.t.codes == t) & (data.a.codes == a))
            chosen.append(rng.choice(pool, size=per_cell, replace=False))
    return data.subset(np.concatenate(chosen))


@dataclass
class PipelineParams:
    max_depth: Optional[int] = 5
    min_leaf: int = 8
    balance_seed: int = 0
    # The published COMPAS DPA values are reproduced by accuracy quality, not 1/CE.
    dpa: DpaConfig = field(
        default_factory=lambda: DpaConfig(attacker=COMPAS_ATTACKER, quality=QualityKind.accuracy)
    )
    n_jobs: int = 1


def predict_labels(data: CompasData, params: PipelineParams) -> PairedDataset:
    """Fit one tree for recidivism and one for race; predict in-sample."""
    t_tree = DecisionTree(params.max_depth, params.min_leaf).fit(data.features, data.t)
    a_tree = DecisionTree(params.max_depth, params.min_leaf).fit(data.features, data.a)
    return PairedDataset(data.a, data.t, a_tree.predict(data.features), t_tree.predict(data.features))


def evaluate(dataset: PairedDataset, params: PipelineParams) -> list[MetricResult]:
    results = []
    for direction in (Direction.TtoA, Direction.AtoT):
        results.append(ba_directional(dataset, direction))
        results.append(multi_directional(dataset, direction)[0])
        results.append(dpa(dataset, direction, params.dpa, n_jobs=params.n_jobs))
    results.append(leakage_amplification(dataset, params.dpa, n_jobs=params.n_jobs))
    results.append(ba_mals(dataset, dataset))
    return results


@dataclass
class VariantReport:
    name: str
    data: CompasData
    dataset: PairedDataset
    results: list

    def counts(self) -> dict:
        d = self.dataset
        return {
            "a_t": build_joint(d.a, d.t).cells.astype(int).tolist(),
            "a_that": build_joint(d.a, d.t_hat).cells.astype(int).tolist(),
            "ahat_t": build_joint(d.a_hat, d.t).cells.astype(int).tolist(),
            "accuracy_a_hat": d.a.agreement(d.a_hat),
            "accuracy_t_hat": d.t.agreement(d.t_hat),
        }

    def value(self, metric_id: str, direction=None) -> float:
        direction = None if direction is None else Direction.parse(direction)
        for r in self.results:
            if r.metric_id == metric_id and r.direction == direction:
                return r.value
        raise KeyError((metric_id, direction))


def run_pipeline(data: CompasData, params: Optional[PipelineParams] = None) -> list[VariantReport]:
    """Unbalanced and balanced variants, each with predictions and all metrics."""
    params = params or PipelineParams()
    reports = []
    for name, variant in (("unbalanced", data), ("balanced", balance(data, params.balance_seed))):
        log.info("COMPAS %s: %d rows", name, len(variant))
        dataset = predict_labels(variant, params)
        reports.append(VariantReport(name, variant, dataset, evaluate(dataset, params)))
    return reports


def synthetic_compas_rows(n: int = 200, seed: int = 0) -> list[dict]:
    """Rows with the COMPAS column schema drawn from a hand-set generative model.

    Race shifts age, juvenile and prior counts; recidivism depends on age and
    priors. Used as a test fixture in place of the real file.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 30])))
    rows = []
    for i in range(n):
        race = int(rng.random() < 0.6)
        age = int(18 + rng.gamma(2.0, 7.0 if race == 0 else 5.0))
        juv_fel = int(rng.poisson(0.05 + 0.15 * race))
        juv_misd = int(rng.poisson(0.05 + 0.2 * race))
        juv_other = int(rng.poisson(0.1 + 0.1 * race))
        priors = int(rng.poisson(1.5 + 2.5 * race))
        logit = -0.4 + 0.25 * priors - 0.05 * (age - 30) + 0.3 * (juv_fel + juv_misd)
        recid = int(rng.random() < 1.0 / (1.0 + np.exp(-logit)))
        rows.append({
            "id": str(i + 1),
            "age": age,
            "juv_fel_count": juv_fel,
            "juv_misd_count": juv_misd,
            "juv_other_count": juv_other,
            "priors_count": priors,
            "race": RACES[race],
            RECID_COLUMN: recid,
        })
    return rows


def write_rows(rows: list[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
