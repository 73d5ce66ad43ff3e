"""Directional predictability amplification (DPA) and leakage amplification (LA)."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .attacker import (
    AttackerConfig,
    QualityKind,
    bayes_optimal_quality,
    holdout_quality,
)
from .core import (
    CategoricalLabels,
    Direction,
    MetricResult,
    PairedDataset,
    build_joint,
)

DPA = "dpa"
LA = "la"

Z_95 = 1.96


@dataclass(frozen=True)
class BiasScores:
    psi_d: float
    psi_m: float

    def __post_init__(self):
        for v in (self.psi_d, self.psi_m):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"bias scores must be finite and >= 0, got {v}")

    @property
    def relative(self) -> float:
        return relative_change(self.psi_m, self.psi_d)

    @property
    def absolute(self) -> float:
        return self.psi_m - self.psi_d


@dataclass(frozen=True)
class DpaConfig:
    attacker: AttackerConfig = field(default_factory=AttackerConfig)
    quality: QualityKind = QualityKind.inverse_cross_entropy
    iterations: int = 30
    master_seed: int = 0
    mode: str = "trained"
    equalize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "quality", QualityKind.parse(self.quality))
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mode not in ("trained", "exact"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "exact":
            object.__setattr__(self, "equalize", False)


def relative_change(psi_m: float, psi_d: float) -> float:
    """(psi_m - psi_d) / (psi_m + psi_d), defined as 0 when both are 0."""
    total = psi_m + psi_d
    if total == 0:
        return 0.0
    return (psi_m - psi_d) / total


def iteration_seed(master_seed: int, i: int) -> int:
    """Stable 32-bit seed for iteration ``i``; independent of scheduling."""
    return int(np.random.SeedSequence([int(master_seed), int(i)]).generate_state(1)[0])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def equalize_accuracy(labels: CategoricalLabels, target_accuracy: float, seed: int) -> CategoricalLabels:
    """Randomly relabel positions so that agreement with ``labels`` is ``target_accuracy``.

    Exactly ``n - round(target_accuracy * n)`` positions, drawn without
    replacement, move to a uniformly chosen *different* class.
    """
    if not 0.0 <= target_accuracy <= 1.0:
        raise ValueError("target_accuracy must lie in [0, 1]")
    k = labels.cardinality
    if k < 2:
        raise ValueError("cannot flip labels with a single class")
    n = len(labels)
    n_flip = n - _round_half_up(target_accuracy * n)
    if n_flip == 0:
        return labels
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 10])))
    positions = rng.choice(n, size=n_flip, replace=False)
    codes = labels.codes.copy()
    codes[positions] = (codes[positions] + rng.integers(1, k, size=n_flip)) % k
    return CategoricalLabels(codes, k)


def _quality(inputs: CategoricalLabels, targets: CategoricalLabels, cfg: DpaConfig, seed: int) -> float:
    return holdout_quality(
        inputs.codes, targets.codes, cfg.attacker.with_seed(seed), cfg.quality,
        input_cardinality=inputs.cardinality, n_classes=targets.cardinality,
    )


def _oracle(prior: CategoricalLabels, target: CategoricalLabels, direction: Direction, cfg: DpaConfig) -> float:
    if direction is Direction.AtoT:
        joint = build_joint(prior, target)
    else:
        joint = build_joint(target, prior)
    return bayes_optimal_quality(joint, direction, cfg.quality)


def dataset_bias(
    dataset: PairedDataset,
    direction,
    cfg: DpaConfig,
    equalized_target: Optional[CategoricalLabels] = None,
    seed: Optional[int] = None,
) -> float:
    """Predictability of the ground-truth target from the ground-truth prior."""
    direction = Direction.parse(direction)
    prior = dataset.channel(direction.prior)
    target = equalized_target if equalized_target is not None else dataset.channel(direction.target)
    if cfg.mode == "exact":
        return _oracle(prior, target, direction, cfg)
    return _quality(prior, target, cfg, cfg.attacker.seed if seed is None else seed)


def model_bias(dataset: PairedDataset, direction, cfg: DpaConfig, seed: Optional[int] = None) -> float:
    """Predictability of the model's predictions from the ground-truth prior."""
    direction = Direction.parse(direction)
    prior = dataset.channel(direction.prior)
    pred = dataset.prediction_for(direction)
    if cfg.mode == "exact":
        return _oracle(prior, pred, direction, cfg)
    return _quality(prior, pred, cfg, cfg.attacker.seed if seed is None else seed)


def bias_scores(dataset: PairedDataset, direction, cfg: DpaConfig, iteration: int = 0) -> BiasScores:
    """Dataset and model bias for one iteration of the equalise-and-attack procedure."""
    direction = Direction.parse(direction)
    seed = iteration_seed(cfg.master_seed, iteration)
    target = dataset.channel(direction.target)
    pred = dataset.prediction_for(direction)
    equalized = None
    if cfg.equalize:
        equalized = equalize_accuracy(target, pred.agreement(target), seed)
    return BiasScores(
        dataset_bias(dataset, direction, cfg, equalized, seed=seed),
        model_bias(dataset, direction, cfg, seed=seed),
    )


def _aggregate(metric_id, direction, values, bounds=None, **details) -> MetricResult:
    values = np.asarray(values, dtype=np.float64)
    k = values.size
    mean = float(np.mean(values))
    half = Z_95 * float(np.std(values, ddof=1)) / math.sqrt(k) if k > 1 else 0.0
    low, high = mean - half, mean + half
    if bounds is not None:
        low, high = max(low, bounds[0]), min(high, bounds[1])
    return MetricResult(metric_id, direction, mean, low, high, k, details)


def _run_iterations(fn, cfg: DpaConfig, n_jobs: int):
    count = 1 if cfg.mode == "exact" else cfg.iterations
    if n_jobs > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(i) for i in range(count)]


def _check(dataset: PairedDataset):
    if len(dataset) == 0:
        raise ValueError("empty dataset")


def dpa(dataset: PairedDataset, direction, cfg: Optional[DpaConfig] = None, n_jobs: int = 1) -> MetricResult:
    """DPA for one direction, averaged over ``cfg.iterations`` with a 95% CI."""
    cfg = cfg or DpaConfig()
    direction = Direction.parse(direction)
    _check(dataset)
    dataset.prediction_for(direction)
    scores = _run_iterations(lambda i: bias_scores(dataset, direction, cfg, i), cfg, n_jobs)
    values = [s.relative for s in scores]
    return _aggregate(
        DPA, direction, values, bounds=(-1.0, 1.0),
        psi_d=float(np.mean([s.psi_d for s in scores])),
        psi_m=float(np.mean([s.psi_m for s in scores])),
    )


def leakage_scores(dataset: PairedDataset, cfg: DpaConfig, iteration: int = 0) -> BiasScores:
    """Leakage of A from the (equalised) true tasks and from predicted tasks."""
    seed = iteration_seed(cfg.master_seed, iteration)
    t_hat = dataset.prediction_for(Direction.AtoT)
    t = dataset.t
    if cfg.equalize:
        t = equalize_accuracy(t, t_hat.agreement(t), seed)
    if cfg.mode == "exact":
        lam_d = bayes_optimal_quality(build_joint(dataset.a, t), Direction.TtoA, cfg.quality)
        lam_m = bayes_optimal_quality(build_joint(dataset.a, t_hat), Direction.TtoA, cfg.quality)
    else:
        lam_d = _quality(t, dataset.a, cfg, seed)
        lam_m = _quality(t_hat, dataset.a, cfg, seed)
    return BiasScores(lam_d, lam_m)


def leakage_amplification(dataset: PairedDataset, cfg: Optional[DpaConfig] = None, n_jobs: int = 1) -> MetricResult:
    """LA = lambda_M - lambda_D; not directional and not bounded."""
    cfg = cfg or DpaConfig()
    _check(dataset)
    dataset.prediction_for(Direction.AtoT)
    scores = _run_iterations(lambda i: leakage_scores(dataset, cfg, i), cfg, n_jobs)
    return _aggregate(
        LA, None, [s.absolute for s in scores],
        lambda_d=float(np.mean([s.psi_d for s in scores])),
        lambda_m=float(np.mean([s.psi_m for s in scores])),
    )
