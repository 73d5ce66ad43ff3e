"""Attacker functions: small numpy MLPs, quality functions and a Bayes oracle.

An attacker predicts one variable from another; how well it does (its
quality) is the predictability used by DPA and leakage amplification.
"""

from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .core import Direction, JointTable

EPS = 1e-6

ACTIVATIONS = ("relu", "tanh", "sigmoid")
OPTIMIZERS = ("sgd", "adam")


class TrainingDivergedError(RuntimeError):
    pass


class QualityKind(str, enum.Enum):
    accuracy = "accuracy"
    inverse_cross_entropy = "inverse_cross_entropy"
    one_minus_cross_entropy = "one_minus_cross_entropy"
    inverse_rmse = "inverse_rmse"

    @classmethod
    def parse(cls, value) -> "QualityKind":
        if isinstance(value, QualityKind):
            return value
        aliases = {"acc": "accuracy", "inv-ce": "inverse_cross_entropy",
                   "1-ce": "one_minus_cross_entropy", "inv-rmse": "inverse_rmse"}
        return cls(aliases.get(value, value.replace("-", "_")))


@dataclass(frozen=True)
class AttackerConfig:
    depth: int = 1
    width: int = 16
    activation: Union[str, tuple] = "relu"
    optimizer: str = "adam"
    learning_rate: float = 0.01
    epochs: int = 30
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        for act in self.layer_activations():
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")

    def layer_activations(self) -> tuple:
        if isinstance(self.activation, str):
            return (self.activation,) * self.depth
        acts = tuple(self.activation)
        if len(acts) != self.depth:
            raise ValueError("per-layer activations must match depth")
        return acts

    def with_seed(self, seed: int) -> "AttackerConfig":
        return replace(self, seed=int(seed))


# One hidden layer of 4 sigmoid units, Adam 0.005, 50 epochs, batch 512.
COMPAS_ATTACKER = AttackerConfig(
    depth=1, width=4, activation="sigmoid", optimizer="adam",
    learning_rate=0.005, epochs=50, batch_size=512,
)


@dataclass
class InputSpec:
    """``cardinality`` set: one-hot categorical input; otherwise a standardised scalar."""

    cardinality: Optional[int] = None
    mean: float = 0.0
    std: float = 1.0

    @property
    def dim(self) -> int:
        return self.cardinality if self.cardinality else 1

    def encode(self, values) -> np.ndarray:
        values = np.asarray(values)
        if self.cardinality:
            codes = values.astype(np.int64)
            if codes.min() < 0 or codes.max() >= self.cardinality:
                raise ValueError("input code out of range")
            out = np.zeros((codes.size, self.cardinality))
            out[np.arange(codes.size), codes] = 1.0
            return out
        return ((values.astype(np.float64) - self.mean) / self.std).reshape(-1, 1)


@dataclass
class OutputSpec:
    """``n_classes`` set: softmax head; otherwise a scalar regression head."""

    n_classes: Optional[int] = None
    mean: float = 0.0
    std: float = 1.0

    @property
    def dim(self) -> int:
        return self.n_classes if self.n_classes else 1

    @property
    def categorical(self) -> bool:
        return bool(self.n_classes)


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activation_grad(name, z, h):
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - h * h
    return h * (1.0 - h)


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


@dataclass
class Attacker:
    weights: list
    biases: list
    activations: tuple
    input_spec: InputSpec
    output_spec: OutputSpec
    config: AttackerConfig = field(default_factory=AttackerConfig)

    def params(self) -> list:
        return [*self.weights, *self.biases]

    def forward(self, x: np.ndarray, cache: bool = False):
        """Raw network output for already-encoded inputs."""
        h = x
        zs, hs = [], [x]
        for i, act in enumerate(self.activations):
            z = h @ self.weights[i] + self.biases[i]
            h = _activate(act, z)
            zs.append(z)
            hs.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        if cache:
            return out, (zs, hs)
        return out

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        """Mean cross-entropy (softmax head) or mean squared error (scalar head)."""
        out = self.forward(x)
        if self.output_spec.categorical:
            return float(-np.mean(_log_softmax(out)[np.arange(len(y)), y]))
        return float(np.mean((out[:, 0] - y) ** 2))

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray):
        """Loss and its gradients, ordered like :meth:`params`."""
        out, (zs, hs) = self.forward(x, cache=True)
        n = x.shape[0]
        if self.output_spec.categorical:
            logp = _log_softmax(out)
            loss = -np.mean(logp[np.arange(n), y])
            g = np.exp(logp)
            g[np.arange(n), y] -= 1.0
            g /= n
        else:
            resid = out[:, 0] - y
            loss = np.mean(resid * resid)
            g = (2.0 / n) * resid.reshape(-1, 1)

        gw = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        gw[-1] = hs[-1].T @ g
        gb[-1] = g.sum(axis=0)
        for i in range(len(self.activations) - 1, -1, -1):
            g = (g @ self.weights[i + 1].T) * _activation_grad(
                self.activations[i], zs[i], hs[i + 1]
            )
            gw[i] = hs[i].T @ g
            gb[i] = g.sum(axis=0)
        return float(loss), [*gw, *gb]

    def predict_proba(self, inputs) -> np.ndarray:
        if not self.output_spec.categorical:
            raise ValueError("scalar-head attacker has no class probabilities")
        return np.exp(_log_softmax(self.forward(self.input_spec.encode(inputs))))

    def predict(self, inputs) -> np.ndarray:
        out = self.forward(self.input_spec.encode(inputs))
        if self.output_spec.categorical:
            return np.argmax(out, axis=1)
        return out[:, 0] * self.output_spec.std + self.output_spec.mean


def init_attacker(config: AttackerConfig, input_spec: InputSpec, output_spec: OutputSpec) -> Attacker:
    """Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    if output_spec.categorical and output_spec.n_classes < 2:
        raise ValueError("categorical head needs at least two classes")
    if input_spec.cardinality is not None and input_spec.cardinality < 1:
        raise ValueError("invalid input cardinality")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, 0])))
    sizes = [input_spec.dim] + [config.width] * config.depth + [output_spec.dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return Attacker(
        weights, biases, config.layer_activations(),
        copy.copy(input_spec), copy.copy(output_spec), config,
    )


def _prepare_targets(attacker: Attacker, targets) -> np.ndarray:
    targets = np.asarray(targets)
    if attacker.output_spec.categorical:
        y = targets.astype(np.int64)
        if y.min() < 0 or y.max() >= attacker.output_spec.n_classes:
            raise ValueError("target code out of range")
        return y
    return (targets.astype(np.float64) - attacker.output_spec.mean) / attacker.output_spec.std


def _standardizer(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    std = float(values.std())
    return float(values.mean()), std if std > 0 else 1.0


def train_attacker(attacker: Attacker, inputs, targets, config: Optional[AttackerConfig] = None) -> Attacker:
    """Mini-batch training for exactly ``config.epochs`` passes; returns a new attacker.

    Scalar inputs and scalar targets are standardised with statistics of the
    data passed in here. Batch order is shuffled from ``config.seed``.
    """
    config = config or attacker.config
    inputs = np.asarray(inputs)
    targets = np.asarray(targets)
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("inputs and targets have different lengths")
    if inputs.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")

    net = copy.deepcopy(attacker)
    if not net.input_spec.cardinality:
        net.input_spec.mean, net.input_spec.std = _standardizer(inputs)
    if not net.output_spec.categorical:
        net.output_spec.mean, net.output_spec.std = _standardizer(targets)
    x = net.input_spec.encode(inputs)
    y = _prepare_targets(net, targets)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, 1])))
    params = net.params()
    lr = config.learning_rate
    adam = config.optimizer == "adam"
    if adam:
        beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
    step = 0
    n = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = net.loss_and_grads(x[idx], y[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch}, step {step} "
                    f"(lr={lr}, optimizer={config.optimizer})"
                )
            step += 1
            if adam:
                c1 = 1.0 - beta1 ** step
                c2 = 1.0 - beta2 ** step
                for p, g, mi, vi in zip(params, grads, m, v):
                    mi *= beta1
                    mi += (1.0 - beta1) * g
                    vi *= beta2
                    vi += (1.0 - beta2) * g * g
                    p -= lr * (mi / c1) / (np.sqrt(vi / c2) + adam_eps)
            else:
                for p, g in zip(params, grads):
                    p -= lr * g
    net.config = config
    return net


def attacker_quality(attacker: Attacker, inputs, targets, q) -> float:
    """Quality score >= 0 of a trained attacker; 0 is the worst possible attacker."""
    q = QualityKind.parse(q)
    targets = np.asarray(targets)
    if targets.size == 0:
        raise ValueError("empty evaluation set")
    if attacker.output_spec.categorical:
        y = targets.astype(np.int64)
        logp = _log_softmax(attacker.forward(attacker.input_spec.encode(inputs)))
        if q is QualityKind.accuracy:
            return float(np.mean(np.argmax(logp, axis=1) == y))
        ce = float(-np.mean(logp[np.arange(y.size), y]))
        return quality_from_cross_entropy(ce, q)
    if q is not QualityKind.inverse_rmse:
        raise ValueError(f"quality {q.value} needs a categorical head")
    resid = attacker.predict(inputs) - targets.astype(np.float64)
    rmse = float(np.sqrt(np.mean(resid * resid)))
    return 1.0 / max(rmse, EPS)


def quality_from_cross_entropy(ce: float, q) -> float:
    q = QualityKind.parse(q)
    if q is QualityKind.inverse_cross_entropy:
        return 1.0 / max(ce, EPS)
    if q is QualityKind.one_minus_cross_entropy:
        return max(1.0 - ce, 0.0)
    raise ValueError(f"quality {q.value} is not a cross-entropy transform")


def bayes_optimal_quality(joint: JointTable, direction, q) -> float:
    """Best attainable quality of an attacker that only sees the prior variable."""
    direction = Direction.parse(direction)
    q = QualityKind.parse(q)
    p = joint.normalized().by_prior(direction)
    if q is QualityKind.accuracy:
        return float(p.max(axis=1).sum())
    if q is QualityKind.inverse_cross_entropy:
        mass = p.sum(axis=1, keepdims=True)
        cond = np.divide(p, mass, out=np.zeros_like(p), where=mass > 0)
        logs = np.log(cond, out=np.zeros_like(cond), where=p > 0)
        entropy = float(-(p * logs).sum())
        return 1.0 / max(entropy, EPS)
    raise ValueError(f"no Bayes oracle for quality {q.value}")


def split_indices(n: int, seed: int, eval_fraction: float = 0.2):
    """Deterministic train/eval split of ``range(n)``."""
    if n < 2:
        raise ValueError("need at least two instances to split")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 2])))
    order = rng.permutation(n)
    n_eval = min(max(1, int(round(eval_fraction * n))), n - 1)
    return np.sort(order[n_eval:]), np.sort(order[:n_eval])


def holdout_quality(
    inputs: Sequence,
    targets: Sequence,
    config: AttackerConfig,
    q,
    input_cardinality: Optional[int] = None,
    n_classes: Optional[int] = None,
) -> float:
    """Train on 80% of the instances and report quality on the held-out 20%.

    The split, initial weights and batch order all derive from ``config.seed``.
    """
    inputs = np.asarray(inputs)
    targets = np.asarray(targets)
    train_idx, eval_idx = split_indices(inputs.shape[0], config.seed)
    net = init_attacker(config, InputSpec(input_cardinality), OutputSpec(n_classes))
    net = train_attacker(net, inputs[train_idx], targets[train_idx], config)
    return attacker_quality(net, inputs[eval_idx], targets[eval_idx], q)
