import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biasamp.attacker import AttackerConfig
from biasamp.core import CategoricalLabels, Direction, MissingChannelError, PairedDataset
from biasamp.predictability import (
    BiasScores,
    DpaConfig,
    bias_scores,
    dpa,
    equalize_accuracy,
    iteration_seed,
    leakage_amplification,
    relative_change,
)
from biasamp.tables import compas_dataset

FAST = AttackerConfig(width=4, epochs=3, batch_size=256)


def _noisy_dataset(n=600, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, size=n)
    t = np.where(rng.random(n) < 0.7, a, 1 - a)
    t_hat = np.where(rng.random(n) < 0.85, a, 1 - a)
    a_hat = np.where(rng.random(n) < 0.6, t, 1 - t)
    return PairedDataset.from_arrays(a, t, a_hat, t_hat)


def _swap_target(ds, target):
    """Exchange one target channel with its prediction, keeping the prior fixed."""
    if target == "t":
        return PairedDataset(ds.a, ds.t_hat, ds.a_hat, ds.t)
    return PairedDataset(ds.a_hat, ds.t, ds.a, ds.t_hat)


class TestRelativeChange:
    @pytest.mark.parametrize("psi_m,psi_d,expected", [
        (0.0, 0.0, 0.0), (1.0, 0.0, 1.0), (0.0, 1.0, -1.0), (3.0, 1.0, 0.5), (2.0, 2.0, 0.0),
    ])
    def test_values(self, psi_m, psi_d, expected):
        assert relative_change(psi_m, psi_d) == expected

    @given(st.floats(0, 1e6), st.floats(0, 1e6))
    @settings(max_examples=200, deadline=None)
    def test_bounded_and_antisymmetric(self, m, d):
        r = relative_change(m, d)
        assert -1.0 <= r <= 1.0
        assert r == -relative_change(d, m)

    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    @settings(max_examples=100, deadline=None)
    def test_scale_invariant(self, m, d, c):
        assert relative_change(c * m, c * d) == pytest.approx(relative_change(m, d), abs=1e-12)

    def test_same_absolute_increase_different_relative(self):
        # Both models add 0.05 predictability; only the unbiased dataset gives 1.
        low, high = BiasScores(0.0, 0.05), BiasScores(0.9, 0.95)
        assert low.absolute == pytest.approx(high.absolute, abs=1e-15)
        assert low.relative == 1.0
        assert high.relative == pytest.approx(0.05 / 1.85, abs=1e-15)

    def test_bias_scores_validation(self):
        with pytest.raises(ValueError):
            BiasScores(-0.1, 1.0)
        assert BiasScores(1.0, 3.0).relative == 0.5
        assert BiasScores(1.0, 3.0).absolute == 2.0


class TestEqualize:
    @given(
        st.lists(st.integers(0, 3), min_size=1, max_size=200),
        st.floats(0, 1),
        st.integers(0, 2**31),
    )
    @settings(max_examples=100, deadline=None)
    def test_exact_agreement(self, codes, acc, seed):
        labels = CategoricalLabels(codes, 4)
        out = equalize_accuracy(labels, acc, seed)
        n = len(codes)
        assert out.agreement(labels) * n == math.floor(acc * n + 0.5)
        assert out.cardinality == 4

    def test_half_rounds_up(self):
        labels = CategoricalLabels.from_codes([0, 1, 0, 1, 0, 1])
        # 0.25 * 6 = 1.5 -> 2 kept.
        assert equalize_accuracy(labels, 0.25, 0).agreement(labels) == 2 / 6

    def test_deterministic(self):
        labels = CategoricalLabels.from_codes(np.arange(50) % 3)
        a = equalize_accuracy(labels, 0.6, 7)
        b = equalize_accuracy(labels, 0.6, 7)
        assert np.array_equal(a.codes, b.codes)

    def test_full_accuracy_is_identity(self):
        labels = CategoricalLabels.from_codes([0, 1, 1])
        assert equalize_accuracy(labels, 1.0, 0) is labels

    def test_invalid_target(self):
        with pytest.raises(ValueError):
            equalize_accuracy(CategoricalLabels.from_codes([0, 1]), 1.5, 0)


class TestSeeds:
    def test_iteration_seed_stable(self):
        assert iteration_seed(0, 0) == iteration_seed(0, 0)
        assert len({iteration_seed(0, i) for i in range(100)}) == 100
        assert iteration_seed(1, 0) != iteration_seed(0, 0)


class TestDpa:
    def test_perfect_predictions_give_zero(self):
        ds = _noisy_dataset()
        perfect = PairedDataset(ds.a, ds.t, ds.a, ds.t)
        cfg = DpaConfig(attacker=FAST, iterations=3, equalize=False)
        for direction in Direction:
            r = dpa(perfect, direction, cfg)
            assert r.value == 0.0 and r.ci_low == 0.0 and r.ci_high == 0.0

    def test_exact_mode_single_evaluation(self):
        ds = compas_dataset(True)
        r = dpa(ds, "AtoT", DpaConfig(mode="exact", quality="accuracy"))
        assert r.iterations == 1
        assert r.ci_low == r.value == r.ci_high
        # Bayes accuracies 1748/3496 (data) and (1145 + 948)/3496 (model).
        assert r.value == pytest.approx(345 / 3841, abs=1e-15)

    def test_exact_swap_antisymmetry(self):
        ds = _noisy_dataset(seed=3)
        cfg = DpaConfig(mode="exact", quality="inverse_cross_entropy")
        assert dpa(ds, "AtoT", cfg).value == -dpa(_swap_target(ds, "t"), "AtoT", cfg).value
        assert dpa(ds, "TtoA", cfg).value == -dpa(_swap_target(ds, "a"), "TtoA", cfg).value

    def test_trained_swap_antisymmetry_without_equalization(self):
        ds = _noisy_dataset(seed=4)
        cfg = DpaConfig(attacker=FAST, iterations=2, equalize=False)
        assert dpa(ds, "AtoT", cfg).value == -dpa(_swap_target(ds, "t"), "AtoT", cfg).value

    def test_ci_and_bounds(self):
        r = dpa(_noisy_dataset(), "AtoT", DpaConfig(attacker=FAST, iterations=5))
        assert r.iterations == 5
        assert -1.0 <= r.ci_low <= r.value <= r.ci_high <= 1.0
        assert set(r.details) == {"psi_d", "psi_m"}

    def test_amplified_model_is_positive(self):
        # The model couples T-hat to A more tightly (0.85) than the data does (0.7).
        r = dpa(_noisy_dataset(n=2000), "AtoT", DpaConfig(mode="exact", quality="accuracy"))
        assert r.value > 0

    def test_missing_channel(self):
        ds = PairedDataset.from_arrays([0, 1, 0], [1, 0, 0])
        with pytest.raises(MissingChannelError):
            dpa(ds, "TtoA", DpaConfig(mode="exact"))

    @pytest.mark.parametrize("n_jobs", [2, 4])
    def test_thread_count_does_not_change_results(self, n_jobs):
        ds = _noisy_dataset()
        cfg = DpaConfig(attacker=FAST, iterations=4, master_seed=11)
        serial = dpa(ds, "TtoA", cfg, n_jobs=1)
        parallel = dpa(ds, "TtoA", cfg, n_jobs=n_jobs)
        assert serial == parallel
        assert serial.details == parallel.details

    def test_bias_scores_share_seed(self):
        ds = _noisy_dataset()
        cfg = DpaConfig(attacker=FAST, iterations=1)
        assert bias_scores(ds, "AtoT", cfg, 0) == bias_scores(ds, "AtoT", cfg, 0)


class TestLeakage:
    def test_perfect_predictions_give_zero(self):
        ds = _noisy_dataset()
        perfect = PairedDataset(ds.a, ds.t, ds.a, ds.t)
        r = leakage_amplification(perfect, DpaConfig(attacker=FAST, iterations=2, equalize=False))
        assert r.value == 0.0
        assert r.direction is None

    def test_exact_mode(self):
        r = leakage_amplification(_noisy_dataset(n=2000), DpaConfig(mode="exact", quality="accuracy"))
        assert r.value == pytest.approx(r.details["lambda_m"] - r.details["lambda_d"], abs=1e-15)
        assert r.value > 0

    def test_parallel_matches_serial(self):
        ds = _noisy_dataset()
        cfg = DpaConfig(attacker=FAST, iterations=3)
        assert leakage_amplification(ds, cfg, n_jobs=1) == leakage_amplification(ds, cfg, n_jobs=3)
