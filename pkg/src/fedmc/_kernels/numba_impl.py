"""Numba-jitted kernels; same contract as ``numpy_impl``.

GEMMs go through np.dot (BLAS); the elementwise parts are fused loops so the
hot training path avoids large temporaries. fastmath stays off so results are
deterministic for a fixed backend.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"

_JIT = dict(cache=True, fastmath=False, nogil=True)


@njit(**_JIT)
def forward(hidden, readout, x_batch, scale):
    pre = np.dot(x_batch, hidden.T)
    b, n = pre.shape
    for i in range(b):
        for j in range(n):
            if pre[i, j] < 0.0:
                pre[i, j] = 0.0
    out = np.dot(pre, readout.T)
    return scale * out


@njit(**_JIT)
def mse_loss_grad(hidden, readout, x_batch, targets, scale, want_grad):
    pre = np.dot(x_batch, hidden.T)
    b, n = pre.shape
    acts = np.empty((b, n))
    for i in range(b):
        for j in range(n):
            acts[i, j] = pre[i, j] if pre[i, j] > 0.0 else 0.0
    out = np.dot(acts, readout.T)
    c = out.shape[1]
    loss = 0.0
    d_out = np.empty((b, c))
    for i in range(b):
        for k in range(c):
            r = scale * out[i, k] - targets[i, k]
            loss += r * r
            d_out[i, k] = (2.0 / b) * r
    loss /= b
    if not want_grad:
        z = np.zeros((0, 0))
        return loss, z, z
    g_readout = scale * np.dot(d_out.T, acts)
    d_act = np.dot(d_out, readout)
    for i in range(b):
        for j in range(n):
            d_act[i, j] = scale * d_act[i, j] if pre[i, j] > 0.0 else 0.0
    g_hidden = np.dot(d_act.T, x_batch)
    return loss, g_hidden, g_readout


@njit(**_JIT)
def ce_loss_grad(hidden, readout, x_batch, labels, scale, want_grad):
    pre = np.dot(x_batch, hidden.T)
    b, n = pre.shape
    acts = np.empty((b, n))
    for i in range(b):
        for j in range(n):
            acts[i, j] = pre[i, j] if pre[i, j] > 0.0 else 0.0
    out = np.dot(acts, readout.T)
    c = out.shape[1]
    loss = 0.0
    d_out = np.empty((b, c))
    for i in range(b):
        hi = scale * out[i, 0]
        for k in range(1, c):
            v = scale * out[i, k]
            if v > hi:
                hi = v
        denom = 0.0
        for k in range(c):
            e = np.exp(scale * out[i, k] - hi)
            d_out[i, k] = e
            denom += e
        loss += np.log(denom) - (scale * out[i, labels[i]] - hi)
        inv = 1.0 / denom
        for k in range(c):
            d_out[i, k] = d_out[i, k] * inv / b
        d_out[i, labels[i]] -= 1.0 / b
    loss /= b
    if not want_grad:
        z = np.zeros((0, 0))
        return loss, z, z
    g_readout = scale * np.dot(d_out.T, acts)
    d_act = np.dot(d_out, readout)
    for i in range(b):
        for j in range(n):
            d_act[i, j] = scale * d_act[i, j] if pre[i, j] > 0.0 else 0.0
    g_hidden = np.dot(d_act.T, x_batch)
    return loss, g_hidden, g_readout


@njit(**_JIT)
def sgd_update(param, velocity, grad, lr, momentum):
    rows, cols = param.shape
    new_p = np.empty((rows, cols))
    new_v = np.empty((rows, cols))
    for i in range(rows):
        for j in range(cols):
            v = momentum * velocity[i, j] + grad[i, j]
            new_v[i, j] = v
            new_p[i, j] = param[i, j] - lr * v
    return new_p, new_v


@njit(**_JIT)
def noise_terms(avg_hidden, client_hidden, x_batch, resid_label, resid_bias, weight,
                drift_out, bias_out):
    b = x_batch.shape[0]
    pre_client = np.dot(x_batch, client_hidden.T)
    pre_avg = np.dot(x_batch, avg_hidden.T)
    n = pre_client.shape[1]
    drift_coef = np.empty((b, n))
    bias_coef = np.empty((b, n))
    for i in range(b):
        for j in range(n):
            gc = 1.0 if pre_client[i, j] > 0.0 else 0.0
            ga = 1.0 if pre_avg[i, j] > 0.0 else 0.0
            drift_coef[i, j] = resid_label[i] * (gc - ga)
            bias_coef[i, j] = resid_bias[i] * ga
    w = weight / b
    drift_out += w * np.dot(drift_coef.T, x_batch)
    bias_out += w * np.dot(bias_coef.T, x_batch)
