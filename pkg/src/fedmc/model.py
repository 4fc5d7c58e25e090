"""Two-layer ReLU networks: forward pass, losses, exact gradients, dropout
subnetworks, and parameter-space arithmetic.

A network is f(x) = s * R @ relu(H @ x) with hidden weights H (N x d), readout
R (C x N) and output scale s: mean-field networks use s = 1/N, plain networks
s = 1. In mean-field mode with a single output the readout is frozen to
all-ones and excluded from training, so each neuron is exactly one hidden row.
All arithmetic is float64.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset
from .errors import NumericError, ShapeError


class Scaling(enum.Enum):
    MEAN_FIELD = "mean_field"
    PLAIN = "plain"


class LossKind(enum.Enum):
    MSE = "mse"
    CROSS_ENTROPY = "cross_entropy"


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden_count: int
    output_dim: int
    scaling: Scaling

    def __post_init__(self):
        for name in ("input_dim", "hidden_count", "output_dim"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.scaling, Scaling):
            raise ValueError(f"scaling must be a Scaling, got {self.scaling!r}")

    @property
    def output_scale(self) -> float:
        return 1.0 / self.hidden_count if self.scaling is Scaling.MEAN_FIELD else 1.0

    @property
    def fixed_readout(self) -> bool:
        """Mean-field single-output networks keep the readout at all-ones."""
        return self.scaling is Scaling.MEAN_FIELD and self.output_dim == 1


def _own(arr, shape, name) -> np.ndarray:
    """Adopt an array: contiguous float64, frozen. Views are copied first;
    anything else is taken over as-is, so callers hand off ownership."""
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.shape != shape:
        raise ShapeError(f"{name} must have shape {shape}, got {out.shape}")
    if out.base is not None:
        out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModelParams:
    """Immutable parameter bundle; every update returns a new value."""

    arch: Architecture
    hidden: np.ndarray
    readout: np.ndarray

    def __post_init__(self):
        a = self.arch
        object.__setattr__(self, "hidden",
                           _own(self.hidden, (a.hidden_count, a.input_dim), "hidden"))
        object.__setattr__(self, "readout",
                           _own(self.readout, (a.output_dim, a.hidden_count), "readout"))

    @property
    def num_params(self) -> int:
        return self.hidden.size + self.readout.size

    def flat(self) -> np.ndarray:
        """All parameters as one vector (hidden row-major, then readout)."""
        return np.concatenate([self.hidden.ravel(), self.readout.ravel()])

    def compatible_with(self, other: "ModelParams") -> bool:
        return self.arch == other.arch


@dataclass(frozen=True)
class Gradient:
    """Same shape as ModelParams; also used as SGD velocity state."""

    hidden: np.ndarray
    readout: np.ndarray

    @classmethod
    def zeros(cls, arch: Architecture) -> "Gradient":
        return cls(np.zeros((arch.hidden_count, arch.input_dim)),
                   np.zeros((arch.output_dim, arch.hidden_count)))

    def norm(self) -> float:
        return math.sqrt(float(np.sum(self.hidden ** 2)) +
                         float(np.sum(self.readout ** 2)))


def params_equal(p: ModelParams, q: ModelParams) -> bool:
    """Bitwise equality (used by determinism checks)."""
    return (p.arch == q.arch
            and np.array_equal(p.hidden, q.hidden)
            and np.array_equal(p.readout, q.readout))


def init_params(arch: Architecture, seed) -> ModelParams:
    """Seed-reproducible Gaussian initialization.

    Hidden entries are N(0, 1/d); with a shared seed the first rows coincide
    across widths, so wider nets extend narrower ones. Plain readouts are
    N(0, 1/N), mean-field multi-output readouts N(0, 1); the frozen mean-field
    single-output readout is all-ones.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    hidden = rng.standard_normal((arch.hidden_count, arch.input_dim))
    hidden /= math.sqrt(arch.input_dim)
    if arch.fixed_readout:
        readout = np.ones((1, arch.hidden_count))
    else:
        readout = rng.standard_normal((arch.output_dim, arch.hidden_count))
        if arch.scaling is Scaling.PLAIN:
            readout /= math.sqrt(arch.hidden_count)
    return ModelParams(arch, hidden, readout)


def forward(params: ModelParams, x) -> np.ndarray:
    """Network output for a single input vector.

    The readout contraction uses exactly-rounded summation, so permuting
    hidden rows together with readout columns leaves the output bit-identical
    (reduction order cannot leak through).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.arch.input_dim,):
        raise ShapeError(
            f"input must have length {params.arch.input_dim}, got shape {x.shape}")
    acts = np.maximum(params.hidden @ x, 0.0)
    scale = params.arch.output_scale
    return np.array([scale * math.fsum(params.readout[c] * acts)
                     for c in range(params.arch.output_dim)])


def forward_batch(params: ModelParams, x_batch) -> np.ndarray:
    x_batch = np.ascontiguousarray(x_batch, dtype=np.float64)
    if x_batch.ndim != 2 or x_batch.shape[1] != params.arch.input_dim:
        raise ShapeError(
            f"batch must be (n, {params.arch.input_dim}), got {x_batch.shape}")
    return _kernels.forward(params.hidden, params.readout, x_batch,
                            params.arch.output_scale)


def _check_batch(params: ModelParams, data: Dataset):
    if data.num_samples == 0:
        raise ValueError("dataset is empty")
    if data.num_features != params.arch.input_dim:
        raise ShapeError(
            f"dataset has {data.num_features} features, network expects "
            f"{params.arch.input_dim}")


def _mse_targets(data: Dataset, output_dim: int) -> np.ndarray:
    """One-hot targets scaled to 1.0, or the raw real targets when C = 1."""
    if output_dim == 1:
        return np.ascontiguousarray(data.labels, dtype=np.float64).reshape(-1, 1)
    labels = _class_labels(data, output_dim)
    targets = np.zeros((labels.shape[0], output_dim))
    targets[np.arange(labels.shape[0]), labels] = 1.0
    return targets


def _class_labels(data: Dataset, output_dim: int) -> np.ndarray:
    labels = np.ascontiguousarray(data.labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= output_dim):
        raise ValueError(
            f"labels must be class ids in [0, {output_dim}), got range "
            f"[{labels.min()}, {labels.max()}]")
    return labels


def _loss_grad(params: ModelParams, data: Dataset, kind: LossKind, want_grad: bool):
    _check_batch(params, data)
    scale = params.arch.output_scale
    if kind is LossKind.MSE:
        targets = _mse_targets(data, params.arch.output_dim)
        return _kernels.mse_loss_grad(params.hidden, params.readout,
                                      data.features, targets, scale, want_grad)
    labels = _class_labels(data, params.arch.output_dim)
    return _kernels.ce_loss_grad(params.hidden, params.readout,
                                 data.features, labels, scale, want_grad)


_EVAL_CHUNK = 4096


def loss(params: ModelParams, data: Dataset, kind: LossKind) -> float:
    """Mean per-sample loss over the dataset (chunked, fixed order).

    Shares its arithmetic with evaluate() so loss values agree exactly.
    """
    _check_batch(params, data)
    n = data.num_samples
    total = 0.0
    for start in range(0, n, _EVAL_CHUNK):
        chunk = data.slice(start, min(start + _EVAL_CHUNK, n))
        out = forward_batch(params, chunk.features)
        total += _loss_from_outputs(out, chunk, kind)
    return total / n


def grad(params: ModelParams, batch: Dataset, kind: LossKind) -> Gradient:
    """Exact gradient of loss(params, batch, kind); ReLU subgradient at 0 is 0."""
    _, g_hidden, g_readout = _loss_grad(params, batch, kind, True)
    return Gradient(g_hidden, g_readout)


def loss_and_grad(params: ModelParams, batch: Dataset, kind: LossKind):
    value, g_hidden, g_readout = _loss_grad(params, batch, kind, True)
    return value, Gradient(g_hidden, g_readout)


def _first_nonfinite(grad_: Gradient):
    for name, arr in (("hidden", grad_.hidden), ("readout", grad_.readout)):
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            return name, tuple(int(v) for v in bad[0])
    return None


def sgd_step(params: ModelParams, batch: Dataset, kind: LossKind, lr: float,
             momentum: float, state: Gradient):
    """One heavy-ball SGD step; returns (new params, new velocity).

    The frozen readout of mean-field single-output networks is not updated.
    """
    if lr <= 0.0:
        raise ValueError(f"lr must be positive, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    g = grad(params, batch, kind)
    if not (math.isfinite(np.sum(g.hidden)) and math.isfinite(np.sum(g.readout))):
        where = _first_nonfinite(g)
        raise NumericError(f"non-finite gradient at {where[0]}{where[1]}")
    new_h, vel_h = _kernels.sgd_update(params.hidden, state.hidden, g.hidden,
                                       lr, momentum)
    if params.arch.fixed_readout:
        new_r, vel_r = params.readout, state.readout
    else:
        new_r, vel_r = _kernels.sgd_update(params.readout, state.readout,
                                           g.readout, lr, momentum)
    return ModelParams(params.arch, new_h, new_r), Gradient(vel_h, vel_r)


def dropout_subnetwork(params: ModelParams, keep) -> ModelParams:
    """Subnetwork on the kept neuron set, with compensating rescale.

    Mean-field nets rescale implicitly through their own 1/|keep| output
    factor; plain nets rescale the surviving readout columns by N/|keep|.
    """
    keep = np.asarray(keep, dtype=np.int64).ravel()
    n = params.arch.hidden_count
    if keep.size == 0:
        raise ValueError("kept neuron set must be nonempty")
    if keep.min() < 0 or keep.max() >= n:
        raise ValueError(f"kept indices must lie in [0, {n})")
    if np.unique(keep).size != keep.size:
        raise ValueError("kept indices must be distinct")
    sub_arch = Architecture(params.arch.input_dim, int(keep.size),
                            params.arch.output_dim, params.arch.scaling)
    hidden = params.hidden[keep]
    readout = params.readout[:, keep]
    if params.arch.scaling is Scaling.PLAIN:
        readout = readout * (n / keep.size)
    return ModelParams(sub_arch, hidden, readout)


def interpolate(p: ModelParams, q: ModelParams, a: float) -> ModelParams:
    """Entrywise (1 - a) p + a q for a in [0, 1]."""
    if not p.compatible_with(q):
        raise ShapeError("models have different architectures")
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"interpolation weight must be in [0, 1], got {a}")
    if a == 0.0 or p is q:
        return p
    if a == 1.0:
        return q
    return ModelParams(p.arch, (1.0 - a) * p.hidden + a * q.hidden,
                       (1.0 - a) * p.readout + a * q.readout)


def neuron_activation_grad(params: ModelParams, x, i: int) -> np.ndarray:
    """Gradient of relu(<x, theta_i>) in theta_i: x if the neuron fires, else 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.arch.input_dim,):
        raise ShapeError(
            f"input must have length {params.arch.input_dim}, got shape {x.shape}")
    if not 0 <= i < params.arch.hidden_count:
        raise ValueError(f"neuron index {i} out of range [0, {params.arch.hidden_count})")
    if float(params.hidden[i] @ x) > 0.0:
        return x.copy()
    return np.zeros_like(x)


def predictions(params: ModelParams, x_batch) -> np.ndarray:
    """Predicted class per sample: argmax over outputs (ties -> lowest class);
    single-output networks predict the nearest integer."""
    x_batch = np.ascontiguousarray(x_batch, dtype=np.float64)
    out_parts = []
    for start in range(0, x_batch.shape[0], _EVAL_CHUNK):
        out = forward_batch(params, x_batch[start:start + _EVAL_CHUNK])
        if params.arch.output_dim == 1:
            out_parts.append(np.rint(out[:, 0]).astype(np.int64))
        else:
            out_parts.append(np.argmax(out, axis=1).astype(np.int64))
    return np.concatenate(out_parts)


def _loss_from_outputs(out: np.ndarray, chunk: Dataset, kind: LossKind) -> float:
    if kind is LossKind.MSE:
        resid = out - _mse_targets(chunk, out.shape[1])
        return float(np.sum(resid * resid))
    labels = _class_labels(chunk, out.shape[1])
    shift = out - out.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shift), axis=1))
    return float(np.sum(lse - shift[np.arange(out.shape[0]), labels]))


def evaluate(params: ModelParams, data: Dataset, kind: LossKind):
    """(loss, accuracy) in one forward pass; accuracy for single-output
    networks is the fraction of outputs within 0.5 of the target."""
    _check_batch(params, data)
    n = data.num_samples
    total = 0.0
    correct = 0
    for start in range(0, n, _EVAL_CHUNK):
        chunk = data.slice(start, min(start + _EVAL_CHUNK, n))
        out = forward_batch(params, chunk.features)
        total += _loss_from_outputs(out, chunk, kind)
        if params.arch.output_dim == 1:
            correct += int(np.sum(np.abs(out[:, 0] - chunk.labels) < 0.5))
        else:
            pred = np.argmax(out, axis=1)
            correct += int(np.sum(pred == chunk.labels.astype(np.int64)))
    return total / n, correct / n
