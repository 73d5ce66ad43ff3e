import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biasamp.synthetic import (
    CategoricalSynthConfig,
    HeatmapConfig,
    HeatmapGrid,
    PolySynthConfig,
    RobustnessResult,
    RobustnessRow,
    gen_categorical_data,
    gen_polynomial_data,
    heatmap_joint,
    relative_curves,
    run_heatmap,
    run_robustness,
)

SUBGRID = (-0.25, -0.125, 0.0, 0.125, 0.2)


class TestHeatmapJoint:
    @given(st.floats(-0.25, 0.25))
    def test_is_distribution(self, alpha):
        cells = heatmap_joint(alpha).cells
        assert cells.sum() == pytest.approx(1.0, abs=1e-15)
        assert np.all(cells >= 0)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            heatmap_joint(0.3)


class TestGridConfig:
    def test_default_grid_size(self):
        alphas = HeatmapConfig().grid_alphas()
        assert alphas.size == 100
        assert alphas[0] == -0.25 and alphas[-1] == 0.245
        assert 0.0 in alphas

    def test_coarse_grid(self):
        assert HeatmapConfig(step=0.25).grid_alphas().tolist() == [-0.25, 0.0]

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            HeatmapConfig(metric_id="ba-mals")


class TestExactHeatmap:
    @pytest.fixture(scope="class")
    @staticmethod
    def dpa_grid():
        return run_heatmap(HeatmapConfig())

    def test_dpa_antisymmetric(self, dpa_grid):
        assert np.max(np.abs(dpa_grid.values + dpa_grid.values.T)) <= 1e-12

    def test_dpa_sign_follows_bias_magnitude(self, dpa_grid):
        ad, am = np.meshgrid(dpa_grid.alphas_d, dpa_grid.alphas_m, indexing="ij")
        assert np.array_equal(np.sign(dpa_grid.values), np.sign(np.abs(am) - np.abs(ad)))

    def test_ba_zero_column(self):
        grid = run_heatmap(HeatmapConfig(metric_id="ba-dir"))
        i = int(np.flatnonzero(grid.alphas_d == 0.0)[0])
        assert np.all(grid.values[i, :] == 0.0)

    def test_multi_nonnegative(self):
        assert np.all(run_heatmap(HeatmapConfig(metric_id="multi-dir")).values >= 0)

    def test_la_is_difference(self):
        grid = run_heatmap(HeatmapConfig(metric_id="la", alphas=(0.0, 0.25)))
        assert grid.cell(0.0, 0.25) == pytest.approx(0.25, abs=1e-15)
        assert grid.cell(0.25, 0.0) == pytest.approx(-0.25, abs=1e-15)


class TestSampledHeatmap:
    @pytest.mark.parametrize("metric", ["dpa", "multi-dir"])
    def test_close_to_exact(self, metric):
        exact = run_heatmap(HeatmapConfig(alphas=SUBGRID, metric_id=metric))
        sampled = run_heatmap(HeatmapConfig(alphas=SUBGRID, metric_id=metric, mode="sampled"))
        assert np.max(np.abs(exact.values - sampled.values)) < 0.02

    def test_deterministic(self):
        cfg = HeatmapConfig(alphas=(0.0, 0.25), mode="sampled", n=2000, metric_id="multi-dir", seed=4)
        assert np.array_equal(run_heatmap(cfg).values, run_heatmap(cfg).values)


class TestGridFiles:
    def test_csv_round_trip(self, tmp_path):
        grid = run_heatmap(HeatmapConfig(step=0.05))
        grid.to_csv(tmp_path / "g.csv")
        back = HeatmapGrid.from_csv(tmp_path / "g.csv", "dpa")
        assert np.array_equal(back.values, grid.values)
        assert np.array_equal(back.alphas_d, grid.alphas_d)

    def test_pgm(self, tmp_path):
        grid = run_heatmap(HeatmapConfig(step=0.25))
        lo, hi = grid.to_pgm(tmp_path / "g.pgm")
        lines = (tmp_path / "g.pgm").read_text().splitlines()
        assert lines[0] == "P2" and lines[2] == "2 2" and lines[3] == "255"
        pixels = [int(v) for line in lines[4:] for v in line.split()]
        assert len(pixels) == 4 and min(pixels) == 0 and max(pixels) == 255
        assert lo == -hi


class TestGenerators:
    def test_polynomial_shapes_and_seed(self):
        cfg = PolySynthConfig(n=100, seed=2)
        a, t, t_hat = gen_polynomial_data(cfg)
        assert a.shape == t.shape == t_hat.shape == (100,)
        assert np.array_equal(a, gen_polynomial_data(cfg)[0])

    def test_polynomial_noise_free(self):
        a, t, t_hat = gen_polynomial_data(PolySynthConfig(alpha1=0.0, alpha2=0.0, n=50))
        assert np.allclose(t, 1 + a + a * a) and np.array_equal(t, t_hat)

    def test_polynomial_validation(self):
        with pytest.raises(ValueError):
            PolySynthConfig(p=3)

    def test_categorical(self):
        t, a, a_hat = gen_categorical_data(CategoricalSynthConfig(n=4000))
        assert t.max() < 20 and set(np.unique(a)) == {0, 1}
        # The amplified model couples A-hat to T more tightly.
        corr = lambda x: abs(np.corrcoef(t, x)[0, 1])
        assert corr(a_hat) > corr(a)

    def test_categorical_validation(self):
        with pytest.raises(ValueError):
            CategoricalSynthConfig(bias=0.4, amplification=2.0)


class TestRobustness:
    def test_row_variants(self):
        row = RobustnessRow(5, 1, 1.0, 3.0)
        assert row.amplification("relative") == 0.5
        assert row.amplification("absolute") == 2.0
        with pytest.raises(ValueError):
            row.amplification("log")

    def test_single_width_has_zero_sd(self):
        result = run_robustness([5], [1], CategoricalSynthConfig(n=500))
        assert result.sd("relative") == 0.0 and result.sd("absolute") == 0.0

    def test_row_count(self):
        result = RobustnessResult([RobustnessRow(w, 1, 1.0, 1.0) for w in range(5, 41, 5)])
        assert result.values("relative").size == 8

    def test_polynomial_path(self):
        result = run_robustness([4, 8], [1], PolySynthConfig(n=800))
        assert all(r.psi_d > 0 and r.psi_m > 0 for r in result.rows)
        # Less noise on the model side means its output is more predictable from A.
        assert all(r.psi_m > r.psi_d for r in result.rows)

    def test_empty_sweep(self):
        with pytest.raises(ValueError):
            run_robustness([], [1])


class TestCurves:
    def test_default_shapes(self):
        psi_m = np.linspace(0, 3, 31)
        curves = relative_curves([0.1, 1, 2], psi_m)
        assert sorted(curves) == [0.1, 1.0, 2.0]
        for psi_d, c in curves.items():
            assert c["dpa"].shape == psi_m.shape
            assert np.all(np.abs(c["dpa"]) <= 1)

    @pytest.mark.parametrize("psi_d", [0.1, 1.0, 2.0])
    def test_slope_at_equality(self, psi_d):
        h = 1e-6
        c = relative_curves([psi_d], [psi_d - h, psi_d, psi_d + h])[psi_d]
        assert c["dpa"][1] == 0.0
        slope = (c["dpa"][2] - c["dpa"][0]) / (2 * h)
        assert slope == pytest.approx(1 / (2 * psi_d), abs=1e-6)
        la_slope = (c["la"][2] - c["la"][0]) / (2 * h)
        assert la_slope == pytest.approx(1.0, abs=1e-6)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            relative_curves([-1.0], [0.0])
