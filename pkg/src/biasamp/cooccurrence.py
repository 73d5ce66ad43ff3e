"""Co-occurrence bias amplification baselines: BA_MALS, BA-> and Multi->."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DegenerateConditionalError,
    Direction,
    JointTable,
    MetricResult,
    PairedDataset,
    build_joint,
)

BA_DIRECTIONAL = "ba-dir"
MULTI_DIRECTIONAL = "multi-dir"
BA_MALS = "ba-mals"


@dataclass(frozen=True)
class DeltaCell:
    a: int
    t: int
    y: int
    delta: float


def _positive_correlation(joint: JointTable, t: int, a: int) -> int:
    # Integer counts are compared exactly: n * c(t,a) > c(t) * c(a).
    cells = joint.cells
    lhs = cells[t, a] * cells.sum()
    rhs = cells[t, :].sum() * cells[:, a].sum()
    return int(lhs > rhs)


def delta_from_joints(
    data: JointTable, pred: JointTable, direction: Direction
) -> list[DeltaCell]:
    """Per-(a, t) indicator and conditional shift between two joints.

    ``data`` is the ground-truth joint of (A, T). ``pred`` is the joint in which
    the target axis of ``direction`` was replaced by predictions: (A, T-hat)
    for A->T, (A-hat, T) for T->A. The prior axis is conditioned on in both.
    """
    direction = Direction.parse(direction)
    if data.cells.shape != pred.cells.shape:
        raise ValueError("data and prediction joints have different shapes")
    d = data.by_prior(direction)
    p = pred.by_prior(direction)
    d_mass = d.sum(axis=1)
    p_mass = p.sum(axis=1)
    if np.any(d_mass <= 0):
        prior = int(np.flatnonzero(d_mass <= 0)[0])
        raise DegenerateConditionalError(
            f"no ground-truth instances with {direction.prior}={prior}"
        )
    same_mass = data.kind == pred.kind and np.array_equal(d_mass, p_mass)

    cells = []
    for prior in range(d.shape[0]):
        if same_mass:
            deltas = [float((p[prior, k] - d[prior, k]) / d_mass[prior]) for k in range(d.shape[1])]
        elif p_mass[prior] > 0:
            deltas = [float(p[prior, k] / p_mass[prior] - d[prior, k] / d_mass[prior]) for k in range(d.shape[1])]
        else:
            # Collapsed prediction classes carry probability 0.
            deltas = [float(-d[prior, k] / d_mass[prior]) for k in range(d.shape[1])]
        if same_mass or p_mass[prior] > 0:
            # Both conditionals sum to 1, so the shifts within a prior sum to 0.
            deltas[-1] = -math.fsum(deltas[:-1])
        for target, delta in enumerate(deltas):
            if direction is Direction.AtoT:
                a, t = prior, target
            else:
                t, a = prior, target
            cells.append(DeltaCell(a, t, _positive_correlation(data, t, a), delta))
    return cells


def _joints(dataset: PairedDataset, direction: Direction):
    direction = Direction.parse(direction)
    pred = dataset.prediction_for(direction)
    data = build_joint(dataset.a, dataset.t)
    if direction is Direction.AtoT:
        return data, build_joint(dataset.a, pred)
    return data, build_joint(pred, dataset.t)


def delta_matrix(dataset: PairedDataset, direction: Direction) -> list[DeltaCell]:
    data, pred = _joints(dataset, direction)
    return delta_from_joints(data, pred, direction)


def _ba_value(cells: list[DeltaCell]) -> float:
    terms = [c.y * c.delta + (1 - c.y) * (-c.delta) for c in cells]
    return math.fsum(terms) / len(terms)


def ba_directional_from_joints(data: JointTable, pred: JointTable, direction) -> float:
    return _ba_value(delta_from_joints(data, pred, direction))


def ba_directional(dataset: PairedDataset, direction: Direction) -> MetricResult:
    """Directional bias amplification BA-> for one direction."""
    direction = Direction.parse(direction)
    value = _ba_value(delta_matrix(dataset, direction))
    return MetricResult.point(BA_DIRECTIONAL, direction, value)


def multi_two_branch(cells: list[DeltaCell]) -> float:
    """Multi-> headline value written with both indicator branches."""
    terms = [c.y * abs(c.delta) + (1 - c.y) * abs(-c.delta) for c in cells]
    return math.fsum(terms) / len(terms)


def multi_collapsed(cells: list[DeltaCell]) -> float:
    """Multi-> headline value in its collapsed form: the mean absolute shift."""
    return math.fsum(abs(c.delta) for c in cells) / len(cells)


def _multi(cells: list[DeltaCell]) -> tuple[float, float]:
    x = multi_collapsed(cells)
    deltas = np.array([c.delta for c in cells])
    return x, float(np.var(deltas))


def multi_directional_from_joints(data: JointTable, pred: JointTable, direction):
    return _multi(delta_from_joints(data, pred, direction))


def multi_directional(
    dataset: PairedDataset, direction: Direction
) -> tuple[MetricResult, float]:
    """Return the Multi-> mean absolute shift and the variance of the shifts."""
    direction = Direction.parse(direction)
    x, var = _multi(delta_matrix(dataset, direction))
    return MetricResult.point(MULTI_DIRECTIONAL, direction, x, variance=var), var


def bias_scores(joint: JointTable) -> np.ndarray:
    """b(t, a) = c(t, a) / sum_a' c(t, a'); rows with no mass are all zero."""
    cells = joint.cells
    mass = cells.sum(axis=1, keepdims=True)
    out = np.zeros_like(cells)
    np.divide(cells, mass, out=out, where=mass > 0)
    return out


def ba_mals_from_joints(train: JointTable, pred: JointTable) -> tuple[float, int]:
    """Mean shift of b(t, a) over training-positive pairs and the pair count."""
    if train.cells.shape != pred.cells.shape:
        raise ValueError("train and prediction joints have different shapes")
    if np.any(train.cells.sum(axis=1) <= 0):
        missing = int(np.flatnonzero(train.cells.sum(axis=1) <= 0)[0])
        raise DegenerateConditionalError(f"task {missing} absent from training labels")
    b_train = bias_scores(train)
    b_pred = bias_scores(pred)
    n_attr = train.n_attributes
    if train.kind == "counts":
        qualifying = train.cells * n_attr > train.cells.sum(axis=1, keepdims=True)
    else:
        qualifying = b_train > 1.0 / n_attr
    count = int(qualifying.sum())
    if count == 0:
        return 0.0, 0
    diffs = (b_pred - b_train)[qualifying]
    return math.fsum(diffs) / count, count


def ba_mals(train: PairedDataset, predictions: PairedDataset) -> MetricResult:
    """BA_MALS between training labels and a model's predicted outputs.

    Predicted bias scores come from (A-hat, T-hat) when both prediction
    channels exist, otherwise from (A, T-hat).
    """
    if predictions.t_hat is None:
        raise ValueError("missing prediction channel 't_hat'")
    if (train.a.cardinality, train.t.cardinality) != (
        predictions.a.cardinality,
        predictions.t.cardinality,
    ):
        raise ValueError("train and prediction datasets disagree on cardinalities")
    a_pred = predictions.a_hat if predictions.a_hat is not None else predictions.a
    value, count = ba_mals_from_joints(
        build_joint(train.a, train.t), build_joint(a_pred, predictions.t_hat)
    )
    return MetricResult.point(
        BA_MALS, None, value, qualifying_pairs=count, no_positive_pairs=count == 0
    )
