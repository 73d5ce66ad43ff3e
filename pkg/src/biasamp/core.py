"""Label containers, contingency tables and validation shared by all metrics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class DegenerateConditionalError(ValueError):
    """Raised when conditioning on a class with zero marginal mass."""


class Direction(str, enum.Enum):
    AtoT = "AtoT"
    TtoA = "TtoA"

    @property
    def prior(self) -> str:
        """Name of the channel held fixed (the attacker input)."""
        return "a" if self is Direction.AtoT else "t"

    @property
    def target(self) -> str:
        return "t" if self is Direction.AtoT else "a"

    @classmethod
    def parse(cls, value: "str | Direction") -> "Direction":
        if isinstance(value, Direction):
            return value
        key = value.replace("->", "to").replace("2", "to").lower()
        for d in cls:
            if d.value.lower() == key:
                return d
        raise ValueError(f"unknown direction {value!r}")


@dataclass(frozen=True)
class CategoricalLabels:
    """Dense integer class codes with a fixed number of classes."""

    codes: np.ndarray
    cardinality: int

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 1:
            raise ValueError("codes must be one-dimensional")
        if codes.size == 0:
            raise ValueError("labels must be nonempty")
        if not np.issubdtype(codes.dtype, np.integer):
            if not np.all(np.equal(np.mod(codes, 1), 0)):
                raise ValueError("codes must be integers")
        codes = codes.astype(np.int64)
        if self.cardinality < 2:
            raise ValueError("cardinality must be at least 2")
        if codes.min() < 0 or codes.max() >= self.cardinality:
            raise ValueError("code out of range")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_codes(cls, codes: Sequence[int], cardinality: Optional[int] = None):
        arr = np.asarray(codes, dtype=np.int64)
        if cardinality is None:
            cardinality = max(int(arr.max()) + 1 if arr.size else 0, 2)
        return cls(arr, int(cardinality))

    def __len__(self):
        return int(self.codes.size)

    def histogram(self) -> np.ndarray:
        return np.bincount(self.codes, minlength=self.cardinality)

    def agreement(self, other: "CategoricalLabels") -> float:
        """Fraction of positions where both label sequences agree."""
        if len(other) != len(self):
            raise ValueError("length mismatch")
        return float(np.mean(self.codes == other.codes))


@dataclass(frozen=True)
class PairedDataset:
    """Per-instance attribute and task labels with optional predictions."""

    a: CategoricalLabels
    t: CategoricalLabels
    a_hat: Optional[CategoricalLabels] = None
    t_hat: Optional[CategoricalLabels] = None

    def __post_init__(self):
        problems = [v for v in validate(self) if not v.startswith("missing")]
        if problems:
            raise ValueError("; ".join(problems))

    @classmethod
    def from_arrays(cls, a, t, a_hat=None, t_hat=None, n_a=None, n_t=None):
        """Build from raw integer arrays; cardinalities inferred over all channels."""
        a = np.asarray(a, dtype=np.int64)
        t = np.asarray(t, dtype=np.int64)
        if n_a is None:
            n_a = max(int(a.max()), int(np.max(a_hat)) if a_hat is not None else 0) + 1
        if n_t is None:
            n_t = max(int(t.max()), int(np.max(t_hat)) if t_hat is not None else 0) + 1
        n_a, n_t = max(n_a, 2), max(n_t, 2)
        return cls(
            CategoricalLabels(a, n_a),
            CategoricalLabels(t, n_t),
            None if a_hat is None else CategoricalLabels(np.asarray(a_hat), n_a),
            None if t_hat is None else CategoricalLabels(np.asarray(t_hat), n_t),
        )

    def __len__(self):
        return len(self.a)

    def channel(self, name: str) -> Optional[CategoricalLabels]:
        return getattr(self, name)

    def prediction_for(self, direction: Direction) -> CategoricalLabels:
        """The prediction channel that replaces the target of ``direction``."""
        name = direction.target + "_hat"
        labels = self.channel(name)
        if labels is None:
            raise MissingChannelError(name)
        return labels

    def swapped(self) -> "PairedDataset":
        """Exchange ground truth and predictions (both channels must exist)."""
        if self.a_hat is None or self.t_hat is None:
            raise MissingChannelError("a_hat" if self.a_hat is None else "t_hat")
        return PairedDataset(self.a_hat, self.t_hat, self.a, self.t)


class MissingChannelError(ValueError):
    def __init__(self, channel: str):
        super().__init__(f"missing prediction channel {channel!r}")
        self.channel = channel


@dataclass(frozen=True)
class JointTable:
    """|T| x |A| table indexed ``cells[t, a]``."""

    cells: np.ndarray
    kind: str = "counts"

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.float64)
        if cells.ndim != 2:
            raise ValueError("joint table must be two-dimensional")
        if np.any(cells < 0) or not np.all(np.isfinite(cells)):
            raise ValueError("cells must be finite and nonnegative")
        if self.kind == "probabilities":
            if abs(cells.sum() - 1.0) > 1e-12:
                raise ValueError("probability table must sum to 1")
        elif self.kind == "counts":
            if not np.all(cells == np.round(cells)):
                raise ValueError("count table must hold integers")
        else:
            raise ValueError(f"unknown table kind {self.kind!r}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def total(self) -> float:
        return float(self.cells.sum())

    @property
    def n_tasks(self) -> int:
        return self.cells.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.cells.shape[1]

    def cell(self, t: int, a: int) -> float:
        return float(self.cells[t, a])

    def marginal(self, axis: str) -> np.ndarray:
        """Unnormalised marginal over ``'a'`` or ``'t'``."""
        return self.cells.sum(axis=0) if axis == "a" else self.cells.sum(axis=1)

    def by_prior(self, direction: Direction) -> np.ndarray:
        """Cells re-indexed as ``[prior value, target value]``."""
        return self.cells.T if direction is Direction.AtoT else self.cells

    def normalized(self) -> "JointTable":
        if self.kind == "probabilities":
            return self
        total = self.total
        if total <= 0:
            raise ValueError("cannot normalise an empty table")
        return JointTable(self.cells / total, "probabilities")


def build_joint(a: CategoricalLabels, t: CategoricalLabels) -> JointTable:
    """Count co-occurrences of task and attribute codes."""
    if len(a) != len(t):
        raise ValueError(f"length mismatch: {len(a)} attribute vs {len(t)} task labels")
    flat = t.codes * a.cardinality + a.codes
    counts = np.bincount(flat, minlength=t.cardinality * a.cardinality)
    return JointTable(counts.reshape(t.cardinality, a.cardinality), "counts")


def conditional(table: JointTable, given: str, value: int) -> np.ndarray:
    """Distribution of the other axis given ``given`` (``'a'`` or ``'t'``) == value."""
    if given == "a":
        row = table.cells[:, value]
    elif given == "t":
        row = table.cells[value, :]
    else:
        raise ValueError("given must be 'a' or 't'")
    mass = row.sum()
    if mass <= 0:
        raise DegenerateConditionalError(f"zero marginal for {given}={value}")
    return row / mass


def validate(dataset, cardinalities: Optional[dict] = None) -> list[str]:
    """List every structural problem; an empty list means the dataset is usable.

    ``dataset`` is either a :class:`PairedDataset` or a mapping of channel name
    (``a``, ``t``, ``a_hat``, ``t_hat``) to raw integer codes, in which case
    ``cardinalities`` may fix the class counts for ``a`` and ``t``.
    """
    if isinstance(dataset, PairedDataset):
        columns = {}
        cards = {}
        for name in _CHANNELS:
            labels = getattr(dataset, name)
            if labels is not None:
                columns[name] = labels.codes
                cards[name] = labels.cardinality
    else:
        columns = {k: np.asarray(v) for k, v in dataset.items() if v is not None}
        cards = {}
        for name, codes in columns.items():
            base = name[:-4] if name.endswith("_hat") else name
            if cardinalities and base in cardinalities:
                cards[name] = int(cardinalities[base])
            elif codes.size:
                cards[name] = max(2, int(np.max(codes)) + 1)

    out = []
    if "a" not in columns or "t" not in columns:
        out.extend(f"missing column {c}" for c in ("a", "t") if c not in columns)
        return out
    n = columns["a"].size
    if n == 0:
        out.append("empty dataset")
    for name in _CHANNELS:
        if name not in columns:
            out.append(f"missing prediction channel {name}")
            continue
        codes = columns[name]
        if codes.size != n:
            out.append(f"length mismatch: {name} has {codes.size} rows, expected {n}")
        if codes.size and (codes.min() < 0 or codes.max() >= cards[name]):
            out.append(f"code out of range in {name} (cardinality {cards[name]})")
    for hat, base in (("a_hat", "a"), ("t_hat", "t")):
        if hat in cards and base in cards and cards[hat] != cards[base]:
            out.append(f"cardinality mismatch: {hat} vs {base}")
    return out


_CHANNELS = ("a", "t", "a_hat", "t_hat")


@dataclass(frozen=True)
class MetricResult:
    metric_id: str
    direction: Optional[Direction]
    value: float
    ci_low: float
    ci_high: float
    iterations: int = 1
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (self.ci_low <= self.value <= self.ci_high):
            raise ValueError("confidence interval must contain the value")

    @classmethod
    def point(cls, metric_id, direction, value, **details):
        value = float(value)
        return cls(metric_id, direction, value, value, value, 1, details)

    def as_dict(self) -> dict:
        return {
            "metric": self.metric_id,
            "direction": None if self.direction is None else self.direction.value,
            "value": self.value,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "iterations": self.iterations,
        }
