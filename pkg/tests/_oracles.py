"""Independent reference implementations used as test oracles.

Everything here is written deliberately naively (scalar loops, fsum, closed
forms) and never calls into the code paths it checks.
"""

from __future__ import annotations

import math

import numpy as np

from fedmc.model import Architecture, ModelParams


def forward_scalar(params: ModelParams, x) -> np.ndarray:
    """Double-loop per-neuron evaluation of the two-layer ReLU network."""
    arch = params.arch
    out = np.zeros(arch.output_dim)
    for c in range(arch.output_dim):
        total = 0.0
        for i in range(arch.hidden_count):
            pre = 0.0
            for j in range(arch.input_dim):
                pre += params.hidden[i, j] * x[j]
            total += params.readout[c, i] * max(pre, 0.0)
        if arch.output_scale != 1.0:
            total *= arch.output_scale
        out[c] = total
    return out


def perturbed(params: ModelParams, which: str, i: int, j: int,
              delta: float) -> ModelParams:
    hidden = params.hidden.copy()
    readout = params.readout.copy()
    if which == "hidden":
        hidden[i, j] += delta
    else:
        readout[i, j] += delta
    return ModelParams(params.arch, hidden, readout)


def fd_gradient(loss_fn, params: ModelParams, h: float = 1e-5):
    """Central finite differences of a scalar loss over every parameter."""
    g_hidden = np.zeros_like(params.hidden)
    g_readout = np.zeros_like(params.readout)
    for which, out in (("hidden", g_hidden), ("readout", g_readout)):
        rows, cols = out.shape
        for i in range(rows):
            for j in range(cols):
                hi = loss_fn(perturbed(params, which, i, j, +h))
                lo = loss_fn(perturbed(params, which, i, j, -h))
                out[i, j] = (hi - lo) / (2.0 * h)
    return g_hidden, g_readout


def rel_close(a, b, rtol: float, atol: float = 1e-9) -> bool:
    return bool(np.all(np.abs(a - b) <= atol + rtol * np.maximum(np.abs(a),
                                                                 np.abs(b))))


def random_params(rng, input_dim, hidden_count, output_dim, scaling,
                  scale: float = 1.0) -> ModelParams:
    arch = Architecture(input_dim, hidden_count, output_dim, scaling)
    return ModelParams(arch,
                       scale * rng.standard_normal((hidden_count, input_dim)),
                       scale * rng.standard_normal((output_dim, hidden_count)))


def away_from_kinks(params: ModelParams, features, margin: float = 1e-3) -> bool:
    """True when no (sample, neuron) pre-activation sits near the ReLU kink."""
    pre = features @ params.hidden.T
    return bool(np.min(np.abs(pre)) > margin)


def quadratic_chain_optimum(theta1_flat, theta2_flat):
    """Closed-form bend minimizing the mean of ||.||^2 over a uniform position
    on the one-bend chain: integrating ||(1-t)a + t b||^2 over t in [0,1]
    gives (||a||^2 + a.b + ||b||^2)/3, and minimizing the two-segment sum over
    the bend yields -(theta1 + theta2)/4."""
    return -(theta1_flat + theta2_flat) / 4.0
