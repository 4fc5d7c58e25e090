"""Federated averaging with per-neuron heterogeneity-noise instrumentation
and full trajectory logging.

Each round broadcasts the global model, trains every client locally with
mini-batch SGD, and aggregates the results by sample-count weights. Client
randomness comes from per-(seed, round, client) streams, so results do not
depend on scheduling; aggregation reduces in ascending client order for bit
reproducibility.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset, Partition, subset
from .errors import ShapeError, UnsupportedModeError
from .model import (Gradient, LossKind, ModelParams, Scaling, evaluate,
                    forward_batch, loss, sgd_step)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FedConfig:
    num_clients: int
    rounds: int
    local_iters: int
    batch_size: int
    lr: float | tuple
    momentum: float
    loss_kind: LossKind
    seed: int
    client_weights: tuple | None = None
    checkpoint_rounds: tuple | str = ()
    noise_rounds: tuple | str = ()
    eval_train: int | None = None
    eval_test: int | None = None
    eval_client: int | None = None

    def __post_init__(self):
        for name in ("num_clients", "rounds", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.local_iters < 0:
            raise ValueError("local_iters must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        lr = self.lr
        if isinstance(lr, (int, float)):
            if lr < 0:
                raise ValueError("lr must be nonnegative")
        else:
            lr = tuple(float(v) for v in lr)
            if len(lr) < self.rounds:
                raise ValueError(
                    f"lr table has {len(lr)} entries for {self.rounds} rounds")
            object.__setattr__(self, "lr", lr)
        if self.client_weights is not None:
            w = tuple(float(v) for v in self.client_weights)
            if len(w) != self.num_clients:
                raise ValueError("client_weights length must equal num_clients")
            if abs(sum(w) - 1.0) > 1e-12:
                raise ValueError(f"client weights sum to {sum(w)}, expected 1")
            object.__setattr__(self, "client_weights", w)
        object.__setattr__(self, "checkpoint_rounds",
                           self._expand(self.checkpoint_rounds))
        object.__setattr__(self, "noise_rounds", self._expand(self.noise_rounds))

    def _expand(self, rounds_spec) -> tuple:
        if isinstance(rounds_spec, str):
            if rounds_spec == "all":
                return tuple(range(1, self.rounds + 1))
            if rounds_spec == "final":
                return (self.rounds,)
            if rounds_spec == "none":
                return ()
            raise ValueError(f"unknown round selector {rounds_spec!r}")
        out = tuple(sorted(int(r) for r in rounds_spec))
        if out and (out[0] < 1 or out[-1] > self.rounds):
            raise ValueError(f"round selectors must lie in [1, {self.rounds}]")
        return out

    def lr_at(self, round_index: int) -> float:
        if isinstance(self.lr, tuple):
            return self.lr[round_index - 1]
        return float(self.lr)


@dataclass(frozen=True)
class RoundLog:
    round: int
    train_loss: float
    test_loss: float
    train_acc: float
    test_acc: float
    client_losses: tuple
    client_dists: np.ndarray       # (K, K) pairwise L2, symmetric, zero diag
    dists_to_global: np.ndarray    # (K,) distance of each client final to the new global

    @property
    def mean_client_dist(self) -> float:
        k = self.client_dists.shape[0]
        if k < 2:
            return 0.0
        iu = np.triu_indices(k, 1)
        return float(self.client_dists[iu].mean())

    @property
    def mean_dist_to_global(self) -> float:
        return float(self.dists_to_global.mean())


@dataclass(frozen=True)
class NoiseRecord:
    """Per-neuron norms of the heterogeneity noise and of its two parts."""

    round: int
    iteration: int
    norm_total: np.ndarray
    norm_drift: np.ndarray
    norm_bias: np.ndarray


@dataclass(frozen=True)
class NoiseStats:
    mean: float
    maximum: float
    minimum: float


@dataclass(frozen=True)
class FedRunResult:
    final: ModelParams
    round_logs: tuple
    noise_records: tuple
    checkpoints: tuple  # (round, ModelParams) pairs
    final_clients: tuple | None = None  # last-round client models, if kept

    def checkpoint_at(self, round_index: int) -> ModelParams:
        for r, params in self.checkpoints:
            if r == round_index:
                return params
        raise KeyError(f"no checkpoint for round {round_index}")


def client_rng(seed: int, round_index: int, client: int) -> np.random.Generator:
    """Independent stream per (seed, round, client); scheduling-invariant."""
    return np.random.default_rng(np.random.SeedSequence((seed, round_index, client)))


def _batch_schedule(rng: np.random.Generator, n: int, batch_size: int,
                    iters: int) -> list:
    """Index arrays for `iters` mini-batches: sampling without replacement
    within each reshuffled epoch, dropping ragged epoch tails."""
    b = min(batch_size, n)
    batches = []
    while len(batches) < iters:
        perm = rng.permutation(n)
        for start in range(0, n - b + 1, b):
            batches.append(perm[start:start + b])
            if len(batches) == iters:
                break
    return batches


def local_train(init: ModelParams, shard: Dataset, cfg: FedConfig,
                round_rng: np.random.Generator, lr: float | None = None) -> ModelParams:
    """cfg.local_iters mini-batch SGD steps from `init` on the shard."""
    if lr is None:
        lr = cfg.lr_at(1)
    if cfg.local_iters == 0 or lr == 0.0:
        return init
    if cfg.batch_size > shard.num_samples:
        logger.warning("batch_size %d exceeds shard size %d; clamping",
                       cfg.batch_size, shard.num_samples)
    params = init
    velocity = Gradient.zeros(init.arch)
    for batch_idx in _batch_schedule(round_rng, shard.num_samples,
                                     cfg.batch_size, cfg.local_iters):
        batch = subset(shard, batch_idx)
        params, velocity = sgd_step(params, batch, cfg.loss_kind, lr,
                                    cfg.momentum, velocity)
    return params


def aggregate(clients, weights) -> ModelParams:
    """Entrywise weighted sum, accumulated in ascending client order."""
    clients = list(clients)
    weights = [float(w) for w in weights]
    if not clients:
        raise ValueError("nothing to aggregate")
    if len(weights) != len(clients):
        raise ValueError("one weight per client required")
    if abs(sum(weights) - 1.0) > 1e-12:
        raise ValueError(f"weights sum to {sum(weights)}, expected 1")
    head = clients[0]
    for other in clients[1:]:
        if not head.compatible_with(other):
            raise ShapeError("client models have different architectures")
    hidden = weights[0] * head.hidden
    readout = weights[0] * head.readout
    for w, params in zip(weights[1:], clients[1:]):
        hidden += w * params.hidden
        readout += w * params.readout
    return ModelParams(head.arch, hidden, readout)


def _model_distance(a: ModelParams, b: ModelParams) -> float:
    return math.sqrt(float(np.sum((a.hidden - b.hidden) ** 2)) +
                     float(np.sum((a.readout - b.readout) ** 2)))


def noise_vectors(client_models, client_batches, weights, avg_model: ModelParams):
    """Per-neuron noise split into its gradient-drift and output-bias parts.

    For each neuron i the drift part is sum_k w_k (y_k - yhat_k) times the gap
    between the client's and the averaged model's ReLU activation gradients;
    the bias part is sum_k w_k (ybar_k - yhat_k) times the averaged model's
    activation gradient. yhat_k / ybar_k are the client / averaged model
    outputs on the client's own samples, and everything is a batch mean.
    Returns (drift, bias) as (N, d) arrays; the noise itself is their sum.
    """
    client_models = list(client_models)
    client_batches = list(client_batches)
    weights = [float(w) for w in weights]
    if not (len(client_models) == len(client_batches) == len(weights)):
        raise ValueError("client models, batches and weights must align")
    arch = avg_model.arch
    if arch.scaling is not Scaling.MEAN_FIELD or arch.output_dim != 1:
        raise UnsupportedModeError(
            "noise decomposition is defined for mean-field single-output networks")
    for m in client_models:
        if not m.compatible_with(avg_model):
            raise ShapeError("client model incompatible with averaged model")
    drift = np.zeros((arch.hidden_count, arch.input_dim))
    bias = np.zeros((arch.hidden_count, arch.input_dim))
    for params, batch, w in zip(client_models, client_batches, weights):
        x = batch.features
        y = np.asarray(batch.labels, dtype=np.float64)
        yhat = forward_batch(params, x)[:, 0]
        ybar = forward_batch(avg_model, x)[:, 0]
        _kernels.noise_terms(avg_model.hidden, params.hidden, x,
                             y - yhat, ybar - yhat, w, drift, bias)
    return drift, bias


def noise_decompose(client_models, client_batches, weights, avg_model: ModelParams,
                    round_index: int = 0, iteration: int = 0) -> NoiseRecord:
    """NoiseRecord with per-neuron L2 norms of total/drift/bias parts."""
    drift, bias = noise_vectors(client_models, client_batches, weights, avg_model)
    total = drift + bias
    return NoiseRecord(round_index, iteration,
                       np.sqrt(np.sum(total * total, axis=1)),
                       np.sqrt(np.sum(drift * drift, axis=1)),
                       np.sqrt(np.sum(bias * bias, axis=1)))


def noise_stats(records) -> NoiseStats:
    """Aggregate noise norms over all neurons and iterations."""
    records = list(records)
    if not records:
        raise ValueError("no noise records")
    norms = np.concatenate([r.norm_total for r in records])
    return NoiseStats(float(norms.mean()), float(norms.max()), float(norms.min()))


def _eval_subsample(data: Dataset | None, size: int | None, seed: int,
                    tag: int) -> Dataset | None:
    if data is None or size is None or size >= data.num_samples:
        return data
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xE7A1, tag)))
    idx = rng.choice(data.num_samples, size=size, replace=False)
    return subset(data, np.sort(idx))


def run_fedavg(global_init: ModelParams, data: Dataset, part: Partition,
               cfg: FedConfig, test_data: Dataset | None = None,
               threads: int | None = None,
               keep_client_finals: bool = False) -> FedRunResult:
    """M rounds of broadcast -> local training -> weighted aggregation.

    Fully deterministic given cfg.seed; clients may train in parallel
    (`threads`) without changing any result. Rounds listed in
    cfg.noise_rounds run clients in lockstep to measure the per-neuron
    heterogeneity noise at every local iteration, using the weighted-average
    model reconstructed on the fly and each client's own current batch.
    """
    if part.num_clients != cfg.num_clients:
        raise ValueError(
            f"partition has {part.num_clients} clients, config says {cfg.num_clients}")
    if part.num_samples != data.num_samples:
        raise ValueError("partition does not cover this dataset")
    shards = [subset(data, idx) for idx in part.client_indices]
    weights = (list(cfg.client_weights) if cfg.client_weights is not None
               else list(part.weights()))
    train_eval = _eval_subsample(data, cfg.eval_train, cfg.seed, 0)
    test_eval = _eval_subsample(test_data, cfg.eval_test, cfg.seed, 1)
    shard_evals = [_eval_subsample(shard, cfg.eval_client, cfg.seed, 100 + k)
                   for k, shard in enumerate(shards)]

    global_model = global_init
    round_logs = []
    noise_records = []
    checkpoints = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads and threads > 1 else None
    try:
        for round_index in range(1, cfg.rounds + 1):
            lr = cfg.lr_at(round_index)
            rngs = [client_rng(cfg.seed, round_index, k)
                    for k in range(cfg.num_clients)]
            if round_index in cfg.noise_rounds:
                results = _lockstep_round(global_model, shards, weights, cfg,
                                          rngs, lr, round_index, noise_records)
            elif pool is not None:
                futures = [pool.submit(local_train, global_model, shards[k],
                                       cfg, rngs[k], lr)
                           for k in range(cfg.num_clients)]
                results = [f.result() for f in futures]
            else:
                results = [local_train(global_model, shards[k], cfg, rngs[k], lr)
                           for k in range(cfg.num_clients)]
            global_model = aggregate(results, weights)
            round_logs.append(_round_log(round_index, global_model, results,
                                         shard_evals, cfg, train_eval,
                                         test_eval))
            if round_index in cfg.checkpoint_rounds:
                checkpoints.append((round_index, global_model))
            if keep_client_finals and round_index == cfg.rounds:
                final_clients = tuple(results)
    finally:
        if pool is not None:
            pool.shutdown()
    return FedRunResult(global_model, tuple(round_logs), tuple(noise_records),
                        tuple(checkpoints),
                        final_clients if keep_client_finals else None)


def _round_log(round_index, global_model, results, shards, cfg,
               train_eval, test_eval) -> RoundLog:
    k = len(results)
    dists = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            dists[i, j] = dists[j, i] = _model_distance(results[i], results[j])
    to_global = np.array([_model_distance(m, global_model) for m in results])
    client_losses = tuple(loss(m, shard, cfg.loss_kind)
                          for m, shard in zip(results, shards))
    train_loss, train_acc = evaluate(global_model, train_eval, cfg.loss_kind)
    if test_eval is not None:
        test_loss, test_acc = evaluate(global_model, test_eval, cfg.loss_kind)
    else:
        test_loss, test_acc = math.nan, math.nan
    return RoundLog(round_index, train_loss, test_loss, train_acc, test_acc,
                    client_losses, dists, to_global)


def _lockstep_round(global_model, shards, weights, cfg, rngs, lr, round_index,
                    noise_records) -> list:
    """One round with all clients stepping in lockstep so the weighted-average
    model and per-neuron noise can be measured at every local iteration.
    Produces bit-identical client models to the independent path."""
    k = len(shards)
    schedules = [_batch_schedule(rngs[i], shards[i].num_samples,
                                 cfg.batch_size, cfg.local_iters)
                 for i in range(k)]
    models = [global_model] * k
    vels = [Gradient.zeros(global_model.arch) for _ in range(k)]
    skip_steps = cfg.local_iters == 0 or lr == 0.0
    for tau in range(cfg.local_iters):
        batches = [subset(shards[i], schedules[i][tau]) for i in range(k)]
        avg = aggregate(models, weights) if tau > 0 else global_model
        noise_records.append(noise_decompose(models, batches, weights, avg,
                                             round_index=round_index,
                                             iteration=tau))
        if skip_steps:
            continue
        for i in range(k):
            models[i], vels[i] = sgd_step(models[i], batches[i], cfg.loss_kind,
                                          lr, cfg.momentum, vels[i])
    return models
