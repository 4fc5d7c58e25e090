"""Paths between modes: traversal profiles, barrier and connectivity errors,
bend-point curve finding, dropout stability, and the constructive 7-segment
connecting path for two-layer ReLU networks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, subset
from .errors import ShapeError
from .model import (Gradient, LossKind, ModelParams, dropout_subnetwork,
                    evaluate, grad, init_params, interpolate, loss,
                    params_equal, predictions)


@dataclass(frozen=True)
class Path:
    """Linear segment or one-bend polygonal chain between two models.

    Both kinds satisfy point(0) == start and point(1) == end exactly. The
    polygonal chain passes through the bend at nu = 0.5.
    """

    start: ModelParams
    end: ModelParams
    bend: ModelParams | None = None

    def __post_init__(self):
        if not self.start.compatible_with(self.end):
            raise ShapeError("path endpoints have different architectures")
        if self.bend is not None and not self.bend.compatible_with(self.start):
            raise ShapeError("bend has a different architecture than the endpoints")

    @classmethod
    def linear(cls, start: ModelParams, end: ModelParams) -> "Path":
        return cls(start, end)

    @classmethod
    def polychain(cls, start: ModelParams, bend: ModelParams,
                  end: ModelParams) -> "Path":
        return cls(start, end, bend)

    @property
    def kind(self) -> str:
        return "linear" if self.bend is None else "polychain"


def path_point(path: Path, nu: float) -> ModelParams:
    """Model at position nu in [0, 1] along the path.

    Polygonal chain: 2[(0.5-nu) start + nu bend] on the first half and
    2[(nu-0.5) end + (1-nu) bend] on the second, so nu=0.5 is the bend and
    both endpoints are hit exactly.
    """
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"path position must be in [0, 1], got {nu}")
    if path.bend is None:
        return interpolate(path.start, path.end, nu)
    if nu <= 0.5:
        return interpolate(path.start, path.bend, 2.0 * nu)
    return interpolate(path.bend, path.end, 2.0 * nu - 1.0)


@dataclass(frozen=True)
class PathSample:
    nu: float
    loss: float
    accuracy: float


def _grid(grid: int) -> np.ndarray:
    if grid < 2:
        raise ValueError(f"grid must have at least 2 points, got {grid}")
    return np.linspace(0.0, 1.0, grid)


def traverse(path: Path, data: Dataset, kind: LossKind, grid: int):
    """Loss/accuracy profile at nu = j/(grid-1), j = 0..grid-1."""
    samples = []
    for nu in _grid(grid):
        value, acc = evaluate(path_point(path, float(nu)), data, kind)
        samples.append(PathSample(float(nu), value, acc))
    return samples


def _loss_profile(path: Path, data: Dataset, kind: LossKind, grid: int):
    nus = _grid(grid)
    values = np.array([loss(path_point(path, float(nu)), data, kind)
                       for nu in nus])
    return nus, values


@dataclass(frozen=True)
class BarrierResult:
    """Largest relative performance gap along a path (and its absolute form).

    value: max over the grid of |L(pi(a)) - min(L1, L2)| / |L1 - L2|, minus 1,
    with the denominator clamped below at 1e-8. absolute_barrier is
    max_a L(pi(a)) - max(L1, L2), always co-reported.
    """

    value: float
    absolute_barrier: float
    argmax: float
    grid_size: int
    loss_start: float
    loss_end: float


_DENOM_FLOOR = 1e-8


def barrier(theta: ModelParams, theta_prime: ModelParams, path: Path,
            data: Dataset, kind: LossKind, grid: int = 51) -> BarrierResult:
    if not (params_equal(path.start, theta) and params_equal(path.end, theta_prime)):
        raise ValueError("path endpoints must be the two models being compared")
    nus, values = _loss_profile(path, data, kind, grid)
    l1, l2 = values[0], values[-1]
    gap = abs(l1 - l2)
    ratios = np.abs(values - min(l1, l2)) / max(gap, _DENOM_FLOOR)
    peak = int(np.argmax(ratios))
    value = float(ratios[peak] - 1.0)
    if gap < _DENOM_FLOOR:
        # ill-defined relative form; a flat profile reads as "no barrier"
        value = max(value, 0.0)
    return BarrierResult(value, float(values.max() - max(l1, l2)),
                         float(nus[peak]), grid, float(l1), float(l2))


def connectivity_error(theta1: ModelParams, theta2: ModelParams, path: Path,
                       data: Dataset, kind: LossKind, grid: int = 51) -> float:
    """Worst loss excess along the path over the worse endpoint, floored at 0."""
    if not (params_equal(path.start, theta1) and params_equal(path.end, theta2)):
        raise ValueError("path endpoints must be the two models being compared")
    _, values = _loss_profile(path, data, kind, grid)
    return float(max(0.0, values.max() - max(values[0], values[-1])))


@dataclass(frozen=True)
class CurveFindConfig:
    steps: int
    batch_size: int
    lr: float
    momentum: float = 0.0
    bend_init: str = "midpoint"  # midpoint | endpoint | random
    seed: int = 0
    lr_decay: float = 0.0        # step t uses lr / (1 + lr_decay * t)
    tail_average: float = 0.0    # fraction of final iterates averaged into the result

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.bend_init not in ("midpoint", "endpoint", "random"):
            raise ValueError(f"unknown bend_init {self.bend_init!r}")
        if self.lr_decay < 0 or not 0.0 <= self.tail_average <= 1.0:
            raise ValueError("lr_decay must be >= 0 and tail_average in [0, 1]")


def _initial_bend(theta1, theta2, cfg: CurveFindConfig) -> ModelParams:
    if cfg.bend_init == "midpoint":
        return interpolate(theta1, theta2, 0.5)
    if cfg.bend_init == "endpoint":
        return theta1
    return init_params(theta1.arch,
                       np.random.SeedSequence((cfg.seed, 0xB37D)))


def optimize_bend(theta1: ModelParams, theta2: ModelParams, grad_at,
                  cfg: CurveFindConfig) -> ModelParams:
    """SGD on the bend of a one-bend chain, endpoints frozen.

    Each step draws nu ~ U(0,1), queries ``grad_at(point, rng)`` for the loss
    gradient at the corresponding path point, and pushes it through the chain
    rule (the bend enters with factor 2 nu below the bend and 2(1-nu) above
    it). With tail_average > 0 the returned bend is the running mean of the
    final iterates, which tames the SGD noise floor.
    """
    if not theta1.compatible_with(theta2):
        raise ShapeError("endpoints have different architectures")
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xC04F)))
    bend = _initial_bend(theta1, theta2, cfg)
    velocity = Gradient.zeros(bend.arch)
    update_readout = not bend.arch.fixed_readout
    tail_from = cfg.steps - int(math.ceil(cfg.tail_average * cfg.steps))
    sum_hidden = np.zeros_like(bend.hidden)
    sum_readout = np.zeros_like(bend.readout)
    tail_count = 0
    for step in range(cfg.steps):
        nu = float(rng.random())
        point = path_point(Path.polychain(theta1, bend, theta2), nu)
        g = grad_at(point, rng)
        factor = 2.0 * nu if nu <= 0.5 else 2.0 * (1.0 - nu)
        lr = cfg.lr / (1.0 + cfg.lr_decay * step)
        vel_h = cfg.momentum * velocity.hidden + factor * g.hidden
        if update_readout:
            vel_r = cfg.momentum * velocity.readout + factor * g.readout
        else:
            vel_r = velocity.readout
        moving = bool(np.any(vel_h)) or (update_readout and bool(np.any(vel_r)))
        if moving:
            new_readout = (bend.readout - lr * vel_r if update_readout
                           else bend.readout)
            bend = ModelParams(bend.arch, bend.hidden - lr * vel_h, new_readout)
        velocity = Gradient(vel_h, vel_r)
        if step >= tail_from:
            sum_hidden += bend.hidden
            sum_readout += bend.readout
            tail_count += 1
    if cfg.tail_average > 0.0 and tail_count > 0:
        return ModelParams(bend.arch, sum_hidden / tail_count,
                           sum_readout / tail_count)
    return bend


def curve_find(theta1: ModelParams, theta2: ModelParams, data: Dataset,
               kind: LossKind, cfg: CurveFindConfig) -> ModelParams:
    """Bend point minimizing the expected loss over a uniform position on the
    chain, estimated with one minibatch per step."""
    batch = min(cfg.batch_size, data.num_samples)

    def grad_at(point: ModelParams, rng: np.random.Generator) -> Gradient:
        idx = rng.choice(data.num_samples, size=batch, replace=False)
        return grad(point, subset(data, idx), kind)

    return optimize_bend(theta1, theta2, grad_at, cfg)


@dataclass(frozen=True)
class DropoutResult:
    kept: tuple
    error: float
    full_loss: float
    subnet_loss: float


def first_half_keep(hidden_count: int) -> np.ndarray:
    """Deterministic default kept set: the first ceil(N/2) neurons."""
    return np.arange((hidden_count + 1) // 2, dtype=np.int64)


def random_keep(hidden_count: int, size: int, seed: int) -> np.ndarray:
    """Seeded random kept set of the given size (chosen independently of any
    model, as the stability definition requires)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD0D0)))
    return np.sort(rng.choice(hidden_count, size=size, replace=False)).astype(np.int64)


def dropout_error(theta: ModelParams, keep, data: Dataset,
                  kind: LossKind) -> DropoutResult:
    """|loss(full) - loss(kept subnetwork)| with compensating rescale."""
    sub = dropout_subnetwork(theta, keep)
    full_loss = loss(theta, data, kind)
    subnet_loss = loss(sub, data, kind)
    return DropoutResult(tuple(int(i) for i in np.asarray(keep).ravel()),
                         abs(full_loss - subnet_loss), full_loss, subnet_loss)


def seven_segment_path(theta: ModelParams, theta_prime: ModelParams):
    """The 8 waypoints of the constructive piecewise-linear connecting path.

    Treats each neuron as a (readout column, hidden row) pair. Half the
    neurons keep their readout scaled by N/floor(N/2) (2 for even N) while
    the other half's readout is zeroed; the zeroed slots are then used to
    stage the second model's neurons, the active half is swapped over, and
    the construction unwinds symmetrically. For odd N the middle neuron stays
    zeroed throughout the intermediate waypoints. Segments either change only
    readout weights (loss convex in them under MSE) or only hidden rows of
    zeroed neurons (function unchanged), which yields the dropout-error bound
    on the whole path.
    """
    if theta.arch != theta_prime.arch:
        raise ShapeError("models must share one architecture")
    n = theta.arch.hidden_count
    if n < 2:
        raise ValueError("need at least 2 neurons")
    h = n // 2
    odd = n % 2
    scale = n / h
    arch = theta.arch
    first = slice(0, h)
    second = slice(h + odd, n)

    r_a = np.zeros_like(theta.readout)
    r_a[:, first] = scale * theta.readout[:, first]
    w1 = ModelParams(arch, theta.hidden.copy(), r_a)

    h_staged = theta.hidden.copy()
    h_staged[second] = theta_prime.hidden[first]
    w2 = ModelParams(arch, h_staged, r_a)

    r_b = np.zeros_like(theta.readout)
    r_b[:, second] = scale * theta_prime.readout[:, first]
    w3 = ModelParams(arch, h_staged, r_b)

    h_swapped = h_staged.copy()
    h_swapped[first] = theta_prime.hidden[first]
    if odd:
        h_swapped[h] = theta_prime.hidden[h]
    w4 = ModelParams(arch, h_swapped, r_b)

    r_c = np.zeros_like(theta.readout)
    r_c[:, first] = scale * theta_prime.readout[:, first]
    w5 = ModelParams(arch, h_swapped, r_c)

    h_done = h_swapped.copy()
    h_done[second] = theta_prime.hidden[second]
    w6 = ModelParams(arch, h_done, r_c)

    return [theta, w1, w2, w3, w4, w5, w6, theta_prime]


def segment_profile(waypoints, data: Dataset, kind: LossKind,
                    points_per_segment: int = 25):
    """Loss profile along consecutive linear segments of a waypoint list.

    Returns (positions, losses) where positions run from 0 to
    len(waypoints)-1 with `points_per_segment` samples per segment (segment
    ends shared)."""
    positions = []
    values = []
    for seg in range(len(waypoints) - 1):
        a, b = waypoints[seg], waypoints[seg + 1]
        local = np.linspace(0.0, 1.0, points_per_segment)
        if seg > 0:
            local = local[1:]
        for t in local:
            values.append(loss(interpolate(a, b, float(t)), data, kind))
            positions.append(seg + float(t))
    return np.array(positions), np.array(values)


def function_dissimilarity(theta: ModelParams, theta_prime: ModelParams,
                           data: Dataset) -> float:
    """Fraction of samples whose predicted labels disagree between the two
    models (argmax ties broken identically toward the lowest class)."""
    if theta.arch.output_dim != theta_prime.arch.output_dim:
        raise ShapeError("models must have the same output dimension")
    disagree = int(np.sum(predictions(theta, data.features)
                          != predictions(theta_prime, data.features)))
    return disagree / data.num_samples


def weight_distance(theta: ModelParams, theta_prime: ModelParams,
                    theta0: ModelParams) -> float:
    """L2 distance over all flattened parameters, normalized by the norm of
    the initialization."""
    if not (theta.compatible_with(theta_prime) and theta.compatible_with(theta0)):
        raise ShapeError("all three models must share one architecture")
    ref = math.sqrt(float(np.sum(theta0.hidden ** 2)) +
                    float(np.sum(theta0.readout ** 2)))
    if ref == 0.0:
        raise ValueError("initialization has zero norm")
    diff = math.sqrt(float(np.sum((theta.hidden - theta_prime.hidden) ** 2)) +
                     float(np.sum((theta.readout - theta_prime.readout) ** 2)))
    return diff / ref
