"""Synthetic studies: the alpha heatmap, polynomial attacker robustness and
relative-versus-absolute curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .attacker import AttackerConfig, QualityKind, bayes_optimal_quality, holdout_quality
from .core import Direction, JointTable
from .cooccurrence import (
    BA_DIRECTIONAL,
    MULTI_DIRECTIONAL,
    ba_directional_from_joints,
    multi_directional_from_joints,
)
from .predictability import DPA, LA, relative_change

HEATMAP_METRICS = (DPA, BA_DIRECTIONAL, MULTI_DIRECTIONAL, LA)
ALPHA_LIMIT = 0.25


def heatmap_joint(alpha: float) -> JointTable:
    """2x2 joint with alpha added to (A=0, T=0) and removed from (A=1, T=1)."""
    if abs(alpha) > ALPHA_LIMIT + 1e-12:
        raise ValueError(f"|alpha| must be <= {ALPHA_LIMIT}, got {alpha}")
    alpha = float(np.clip(alpha, -ALPHA_LIMIT, ALPHA_LIMIT))
    cells = np.array([[0.25 + alpha, 0.25], [0.25, 0.25 - alpha]])
    return JointTable(cells, "probabilities")


@dataclass(frozen=True)
class HeatmapConfig:
    alpha_min: float = -0.25
    alpha_max: float = 0.25
    step: float = 0.005
    metric_id: str = DPA
    direction: Direction = Direction.AtoT
    quality: QualityKind = QualityKind.accuracy
    mode: str = "exact"
    n: int = 100_000
    seed: int = 0
    attacker: AttackerConfig = field(default_factory=AttackerConfig)
    alphas: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction.parse(self.direction))
        object.__setattr__(self, "quality", QualityKind.parse(self.quality))
        if self.metric_id not in HEATMAP_METRICS:
            raise ValueError(f"heatmap metric must be one of {HEATMAP_METRICS}")
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown mode {self.mode!r}")
        for a in (self.alpha_min, self.alpha_max, *(self.alphas or ())):
            if abs(a) > ALPHA_LIMIT + 1e-12:
                raise ValueError(f"|alpha| must be <= {ALPHA_LIMIT}")

    def grid_alphas(self) -> np.ndarray:
        """Inclusive start, exclusive end; 100 values at the defaults."""
        if self.alphas is not None:
            return np.asarray(self.alphas, dtype=np.float64)
        count = int(math.floor((self.alpha_max - self.alpha_min) / self.step + 1e-9))
        count = max(count, 1)
        return np.round(self.alpha_min + self.step * np.arange(count), 12)


@dataclass
class HeatmapGrid:
    alphas_d: np.ndarray
    alphas_m: np.ndarray
    values: np.ndarray  # values[i, j] at (alphas_d[i], alphas_m[j])
    metric_id: str

    def cell(self, alpha_d: float, alpha_m: float) -> float:
        i = int(np.argmin(np.abs(self.alphas_d - alpha_d)))
        j = int(np.argmin(np.abs(self.alphas_m - alpha_m)))
        return float(self.values[i, j])

    def to_csv(self, path) -> None:
        """Header row of alpha_m values; first column alpha_d."""
        lines = ["alpha_d\\alpha_m," + ",".join(repr(float(a)) for a in self.alphas_m)]
        for a, row in zip(self.alphas_d, self.values):
            lines.append(repr(float(a)) + "," + ",".join(repr(float(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path, metric_id: str = "") -> "HeatmapGrid":
        rows = Path(path).read_text().strip().splitlines()
        alphas_m = np.array([float(v) for v in rows[0].split(",")[1:]])
        body = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        return cls(body[:, 0], alphas_m, body[:, 1:], metric_id)

    def to_pgm(self, path) -> tuple[float, float]:
        """ASCII P2 image; columns follow alpha_d, rows alpha_m from high (top) to low.

        Grey level = round(255 * (v - min) / (max - min)); a constant grid is all 0.
        """
        lo, hi = float(np.min(self.values)), float(np.max(self.values))
        span = hi - lo
        scaled = np.zeros_like(self.values) if span == 0 else (self.values - lo) / span
        img = np.rint(255 * scaled).astype(int).T[::-1]
        lines = [
            "P2",
            f"# {self.metric_id} min={lo!r} max={hi!r}",
            f"{img.shape[1]} {img.shape[0]}",
            "255",
        ]
        lines.extend(" ".join(str(v) for v in row) for row in img)
        Path(path).write_text("\n".join(lines) + "\n")
        return lo, hi


def _sample_joint(joint: JointTable, n: int, seed_words: Sequence[int]):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(seed_words))))
    flat = rng.choice(joint.cells.size, size=n, p=joint.cells.ravel())
    t, a = np.divmod(flat, joint.n_attributes)
    return a, t


def _empirical(a, t) -> JointTable:
    counts = np.zeros((2, 2))
    np.add.at(counts, (t, a), 1)
    return JointTable(counts, "counts")


def run_heatmap(cfg: HeatmapConfig) -> HeatmapGrid:
    """Metric value for every (dataset alpha, model alpha) pair.

    Exact mode evaluates predictability metrics with the Bayes oracle and
    co-occurrence metrics on the joints themselves. Sampled mode draws ``n``
    instances from each joint (seeded per axis position) and uses empirical
    joints and trained attackers instead.
    """
    alphas = cfg.grid_alphas()
    k = alphas.size
    if cfg.mode == "exact":
        joints_d = joints_m = [heatmap_joint(a) for a in alphas]
    else:
        joints_d, joints_m = [], []
        for i, alpha in enumerate(alphas):
            joints_d.append(_empirical(*_sample_joint(heatmap_joint(alpha), cfg.n, (cfg.seed, 0, i))))
            joints_m.append(_empirical(*_sample_joint(heatmap_joint(alpha), cfg.n, (cfg.seed, 1, i))))

    values = np.empty((k, k))
    if cfg.metric_id in (DPA, LA):
        direction = cfg.direction if cfg.metric_id == DPA else Direction.TtoA
        psi_d = np.array([_predictability(j, direction, cfg) for j in joints_d])
        psi_m = np.array([_predictability(j, direction, cfg) for j in joints_m])
        for i in range(k):
            for j in range(k):
                if cfg.metric_id == DPA:
                    values[i, j] = relative_change(psi_m[j], psi_d[i])
                else:
                    values[i, j] = psi_m[j] - psi_d[i]
    else:
        fn = ba_directional_from_joints if cfg.metric_id == BA_DIRECTIONAL else (
            lambda d, m, dr: multi_directional_from_joints(d, m, dr)[0]
        )
        for i in range(k):
            for j in range(k):
                values[i, j] = fn(joints_d[i], joints_m[j], cfg.direction)
    return HeatmapGrid(alphas, alphas.copy(), values, cfg.metric_id)


def _predictability(joint: JointTable, direction: Direction, cfg: HeatmapConfig) -> float:
    if cfg.mode == "exact":
        return bayes_optimal_quality(joint, direction, cfg.quality)
    # Re-expand counts into instances for a trained attacker.
    cells = joint.cells.astype(np.int64)
    t_idx, a_idx = np.nonzero(cells)
    reps = cells[t_idx, a_idx]
    t = np.repeat(t_idx, reps)
    a = np.repeat(a_idx, reps)
    prior, target = (a, t) if direction is Direction.AtoT else (t, a)
    return holdout_quality(
        prior, target, cfg.attacker.with_seed(cfg.seed), cfg.quality,
        input_cardinality=2, n_classes=2,
    )


@dataclass(frozen=True)
class PolySynthConfig:
    """Coefficients are lowest degree first: default 1 + x + x**2."""

    p: int = 2
    alpha1: float = 2.0
    alpha2: float = 1.0
    coefficients: tuple = (1.0, 1.0, 1.0)
    n: int = 5000
    seed: int = 0
    a_mean: float = 3.0
    a_variance: float = 2.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if len(self.coefficients) != self.p + 1:
            raise ValueError("need p + 1 polynomial coefficients")
        if self.coefficients[-1] == 0:
            raise ValueError("leading coefficient must be nonzero")


def gen_polynomial_data(cfg: PolySynthConfig):
    """A ~ N(mean, variance); T and T-hat are the polynomial of A plus scaled noise."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 40])))
    a = rng.normal(cfg.a_mean, math.sqrt(cfg.a_variance), size=cfg.n)
    eps_t = rng.standard_normal(cfg.n)
    eps_hat = rng.standard_normal(cfg.n)
    t = npoly.polyval(a + cfg.alpha1 * eps_t, cfg.coefficients)
    t_hat = npoly.polyval(a + cfg.alpha2 * eps_hat, cfg.coefficients)
    return a, t, t_hat


@dataclass(frozen=True)
class CategoricalSynthConfig:
    """Many-valued task T, binary attribute A, predictions with scaled coupling.

    P(A=1 | T=t) = 0.5 + bias * u_t for u_t evenly spaced in [-1, 1]; the
    predicted attribute uses ``bias * amplification`` instead.
    """

    n_tasks: int = 20
    bias: float = 0.2
    amplification: float = 1.5
    n: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.n_tasks < 2 or self.n < 1:
            raise ValueError("need n_tasks >= 2 and n >= 1")
        if not 0 <= self.bias * max(self.amplification, 1.0) <= 0.5:
            raise ValueError("bias * amplification must stay within [0, 0.5]")


def gen_categorical_data(cfg: CategoricalSynthConfig):
    """Return (t, a, a_hat) integer arrays."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 41])))
    u = np.linspace(-1.0, 1.0, cfg.n_tasks)
    t = rng.integers(0, cfg.n_tasks, size=cfg.n)
    a = (rng.random(cfg.n) < 0.5 + cfg.bias * u[t]).astype(np.int64)
    a_hat = (rng.random(cfg.n) < 0.5 + cfg.bias * cfg.amplification * u[t]).astype(np.int64)
    return t, a, a_hat


@dataclass
class RobustnessRow:
    width: int
    depth: int
    psi_d: float
    psi_m: float

    @property
    def relative(self) -> float:
        return relative_change(self.psi_m, self.psi_d)

    @property
    def absolute(self) -> float:
        return self.psi_m - self.psi_d

    def amplification(self, variant: str) -> float:
        if variant == "relative":
            return self.relative
        if variant == "absolute":
            return self.absolute
        raise ValueError(f"unknown variant {variant!r}")


@dataclass
class RobustnessResult:
    rows: list

    def values(self, variant: str) -> np.ndarray:
        return np.array([r.amplification(variant) for r in self.rows])

    def sd(self, variant: str) -> float:
        """Population standard deviation across attackers (0 for a single attacker)."""
        return float(np.std(self.values(variant)))


# ReLU attackers trained with Adam at 5e-3.
ROBUSTNESS_ATTACKER = AttackerConfig(
    activation="relu", optimizer="adam", learning_rate=0.005, epochs=40, batch_size=128,
)


def run_robustness(
    widths: Sequence[int],
    depths: Sequence[int],
    data_cfg=None,
    attacker: Optional[AttackerConfig] = None,
) -> RobustnessResult:
    """Train one attacker per (width, depth) for the dataset and the model side.

    With a :class:`PolySynthConfig` the attackers regress T and T-hat on A and
    are scored by 1/RMSE. With a :class:`CategoricalSynthConfig` they predict
    A and A-hat from T and are scored by 1/cross-entropy. Every attacker shares
    the data, the split and the seed; only the architecture varies.
    """
    if not widths or not depths:
        raise ValueError("width and depth sweeps must be nonempty")
    data_cfg = data_cfg or PolySynthConfig()
    attacker = attacker or ROBUSTNESS_ATTACKER
    if isinstance(data_cfg, CategoricalSynthConfig):
        t, a, a_hat = gen_categorical_data(data_cfg)
        sides = [(t, a), (t, a_hat)]
        kwargs = dict(q=QualityKind.inverse_cross_entropy, input_cardinality=data_cfg.n_tasks, n_classes=2)
    else:
        a, t, t_hat = gen_polynomial_data(data_cfg)
        sides = [(a, t), (a, t_hat)]
        kwargs = dict(q=QualityKind.inverse_rmse)
    rows = []
    for d in depths:
        for w in widths:
            acts = attacker.activation
            if not isinstance(acts, str):
                acts = tuple(acts[i % len(acts)] for i in range(d))
            cfg = replace(attacker, depth=d, width=w, activation=acts)
            psi_d, psi_m = (holdout_quality(x, y, cfg, **kwargs) for x, y in sides)
            rows.append(RobustnessRow(w, d, psi_d, psi_m))
    return RobustnessResult(rows)


def relative_curves(psi_d_values: Sequence[float], psi_m_range: Sequence[float]) -> dict:
    """DPA and LA as functions of model bias, one curve per dataset bias."""
    psi_m = np.asarray(psi_m_range, dtype=np.float64)
    if np.any(psi_m < 0) or any(v < 0 for v in psi_d_values):
        raise ValueError("bias values must be >= 0")
    curves = {}
    for psi_d in psi_d_values:
        dpa_vals = np.array([relative_change(m, psi_d) for m in psi_m])
        curves[float(psi_d)] = {"psi_m": psi_m, "dpa": dpa_vals, "la": psi_m - psi_d}
    return curves
