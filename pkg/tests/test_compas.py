from pathlib import Path

import numpy as np
import pytest

from biasamp.attacker import AttackerConfig
from biasamp.compas import (
    FEATURES,
    CompasInputError,
    PipelineParams,
    balance,
    load_compas,
    predict_labels,
    run_pipeline,
    synthetic_compas_rows,
    write_rows,
)
from biasamp.core import build_joint
from biasamp.predictability import DpaConfig

FIXTURE = Path(__file__).parent / "data" / "compas_fixture.csv"


@pytest.fixture(scope="module")
def data():
    return load_compas(FIXTURE)


class TestLoad:
    def test_fixture_schema(self, data):
        assert len(data) == 1000
        assert data.features.names == FEATURES
        assert set(np.unique(data.a.codes)) == {0, 1}

    def test_fixture_matches_generator(self, tmp_path):
        path = tmp_path / "regen.csv"
        write_rows(synthetic_compas_rows(1000, 0), path)
        assert path.read_text() == FIXTURE.read_text()

    def test_missing_column(self, tmp_path):
        rows = [{k: v for k, v in r.items() if k != "priors_count"} for r in synthetic_compas_rows(5)]
        write_rows(rows, tmp_path / "x.csv")
        with pytest.raises(CompasInputError, match="priors_count"):
            load_compas(tmp_path / "x.csv")

    def test_other_races_dropped(self, tmp_path):
        rows = synthetic_compas_rows(20)
        rows[0]["race"] = "Other"
        write_rows(rows, tmp_path / "x.csv")
        assert len(load_compas(tmp_path / "x.csv")) == 19

    def test_propublica_filters(self, tmp_path):
        rows = synthetic_compas_rows(20)
        for r in rows:
            r["days_b_screening_arrest"] = 0
        rows[3]["days_b_screening_arrest"] = 45
        write_rows(rows, tmp_path / "x.csv")
        assert len(load_compas(tmp_path / "x.csv")) == 19

    def test_single_race_rejected(self, tmp_path):
        rows = synthetic_compas_rows(20)
        for r in rows:
            r["race"] = "Caucasian"
        write_rows(rows, tmp_path / "x.csv")
        with pytest.raises(CompasInputError, match="one race"):
            load_compas(tmp_path / "x.csv")


class TestBalance:
    def test_equal_cells(self, data):
        balanced = balance(data, seed=0)
        cells = build_joint(balanced.a, balanced.t).cells
        assert np.all(cells == cells[0, 0])
        assert cells[0, 0] == build_joint(data.a, data.t).cells.min()

    def test_deterministic(self, data):
        assert np.array_equal(balance(data, 3).ids, balance(data, 3).ids)

    def test_too_many_requested(self, data):
        with pytest.raises(CompasInputError):
            balance(data, per_cell=10_000)


class TestPipeline:
    def test_predictions_and_metric_set(self, data):
        fast = PipelineParams(dpa=DpaConfig(attacker=AttackerConfig(width=4, epochs=2), iterations=2))
        reports = run_pipeline(data.subset(np.arange(400)), fast)
        assert [r.name for r in reports] == ["unbalanced", "balanced"]
        for rep in reports:
            assert len(rep.results) == 8
            ids = {(r.metric_id, None if r.direction is None else r.direction.value) for r in rep.results}
            assert ("dpa", "AtoT") in ids and ("la", None) in ids and ("ba-mals", None) in ids
        balanced = reports[1]
        assert balanced.value("ba-dir", "AtoT") == 0.0
        assert balanced.value("ba-dir", "TtoA") == 0.0
        assert len(set(np.ravel(balanced.counts()["a_t"]))) == 1

    def test_trees_are_deterministic(self, data):
        a = predict_labels(data, PipelineParams())
        b = predict_labels(data, PipelineParams())
        assert np.array_equal(a.t_hat.codes, b.t_hat.codes)
        assert np.array_equal(a.a_hat.codes, b.a_hat.codes)
