"""Published COMPAS contingency counts and instance-level reconstruction."""

from __future__ import annotations

import numpy as np

from .core import CategoricalLabels, PairedDataset

# cells[t, a]; A = {Caucasian: 0, African-American: 1}, T = {no recidivism: 0, recidivism: 1}
COMPAS_UNBALANCED = {
    "a_t": np.array([[1229, 1402], [874, 1773]]),
    "a_that": np.array([[1165, 1546], [938, 1629]]),
    "ahat_t": np.array([[1056, 1575], [1115, 1532]]),
}
COMPAS_BALANCED = {
    "a_t": np.array([[874, 874], [874, 874]]),
    "a_that": np.array([[1145, 948], [603, 800]]),
    "ahat_t": np.array([[1083, 665], [896, 852]]),
}


def _fill(group_targets: np.ndarray, wanted: np.ndarray) -> np.ndarray:
    # Sorted assignment: predictions line up with truth as far as the counts allow.
    order = np.argsort(group_targets, kind="stable")
    out = np.empty_like(group_targets)
    out[order] = np.repeat(np.arange(wanted.size), wanted)
    return out


def dataset_from_counts(a_t, a_that=None, ahat_t=None) -> PairedDataset:
    """Instances whose joints reproduce the given count tables exactly.

    ``a_t[t, a]`` counts ground truth; ``a_that[t_hat, a]`` counts the pairing
    of true attributes with predicted tasks; ``ahat_t[t, a_hat]`` counts true
    tasks with predicted attributes. The instance-level coupling between a
    prediction and its ground truth is not determined by the tables; within
    each prior group predictions are matched to sorted truth.
    """
    a_t = np.asarray(a_t, dtype=np.int64)
    n_t, n_a = a_t.shape
    t_idx, a_idx = np.nonzero(a_t)
    reps = a_t[t_idx, a_idx]
    t = np.repeat(t_idx, reps)
    a = np.repeat(a_idx, reps)

    t_hat = a_hat = None
    if a_that is not None:
        a_that = np.asarray(a_that, dtype=np.int64)
        if not np.array_equal(a_that.sum(axis=0), a_t.sum(axis=0)):
            raise ValueError("predicted-task table disagrees with attribute marginals")
        t_hat = np.empty_like(t)
        for value in range(n_a):
            mask = a == value
            t_hat[mask] = _fill(t[mask], a_that[:, value])
    if ahat_t is not None:
        ahat_t = np.asarray(ahat_t, dtype=np.int64)
        if not np.array_equal(ahat_t.sum(axis=1), a_t.sum(axis=1)):
            raise ValueError("predicted-attribute table disagrees with task marginals")
        a_hat = np.empty_like(a)
        for value in range(n_t):
            mask = t == value
            a_hat[mask] = _fill(a[mask], ahat_t[value, :])

    return PairedDataset(
        CategoricalLabels(a, n_a),
        CategoricalLabels(t, n_t),
        None if a_hat is None else CategoricalLabels(a_hat, n_a),
        None if t_hat is None else CategoricalLabels(t_hat, n_t),
    )


def compas_dataset(balanced: bool = False) -> PairedDataset:
    tables = COMPAS_BALANCED if balanced else COMPAS_UNBALANCED
    return dataset_from_counts(tables["a_t"], tables["a_that"], tables["ahat_t"])
