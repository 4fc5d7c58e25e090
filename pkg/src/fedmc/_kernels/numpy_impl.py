"""Pure-numpy reference kernels.

Every function here has a numba twin in ``numba_impl``; the active backend is
chosen in ``fedmc._kernels``. All arrays are float64 and C-contiguous unless
noted. ``scale`` is the output scaling of the network (1/N for mean-field
networks, 1.0 for plain ones).
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def forward(hidden, readout, x_batch, scale):
    """Batched two-layer ReLU forward pass, returns (b, C) outputs."""
    acts = np.maximum(x_batch @ hidden.T, 0.0)
    return scale * (acts @ readout.T)


def mse_loss_grad(hidden, readout, x_batch, targets, scale, want_grad):
    """Mean squared error (summed over outputs, averaged over samples).

    Returns (loss, g_hidden, g_readout); gradient arrays are zeros when
    ``want_grad`` is false.
    """
    pre = x_batch @ hidden.T
    acts = np.maximum(pre, 0.0)
    out = scale * (acts @ readout.T)
    resid = out - targets
    b = x_batch.shape[0]
    loss = float(np.sum(resid * resid)) / b
    if not want_grad:
        return loss, np.zeros((0, 0)), np.zeros((0, 0))
    d_out = (2.0 / b) * resid
    g_readout = scale * (d_out.T @ acts)
    d_act = scale * (d_out @ readout)
    d_pre = np.where(pre > 0.0, d_act, 0.0)
    g_hidden = d_pre.T @ x_batch
    return loss, g_hidden, g_readout


def ce_loss_grad(hidden, readout, x_batch, labels, scale, want_grad):
    """Softmax cross-entropy with log-sum-exp stabilisation."""
    pre = x_batch @ hidden.T
    acts = np.maximum(pre, 0.0)
    out = scale * (acts @ readout.T)
    b = x_batch.shape[0]
    shift = out - out.max(axis=1, keepdims=True)
    exp = np.exp(shift)
    denom = exp.sum(axis=1)
    loss = float(np.sum(np.log(denom) - shift[np.arange(b), labels])) / b
    if not want_grad:
        return loss, np.zeros((0, 0)), np.zeros((0, 0))
    probs = exp / denom[:, None]
    probs[np.arange(b), labels] -= 1.0
    d_out = probs / b
    g_readout = scale * (d_out.T @ acts)
    d_act = scale * (d_out @ readout)
    d_pre = np.where(pre > 0.0, d_act, 0.0)
    g_hidden = d_pre.T @ x_batch
    return loss, g_hidden, g_readout


def sgd_update(param, velocity, grad, lr, momentum):
    """Heavy-ball SGD: v <- momentum*v + g; p <- p - lr*v. Returns new arrays."""
    new_v = momentum * velocity + grad
    new_p = param - lr * new_v
    return new_p, new_v


def noise_terms(avg_hidden, client_hidden, x_batch, resid_label, resid_bias, weight,
                drift_out, bias_out):
    """Accumulate one client's per-neuron heterogeneity-noise contribution.

    ``resid_label`` is y - f_client(x) per sample, ``resid_bias`` is
    f_avg(x) - f_client(x); both are 1-d of length b. The drift part uses the
    gap between the client's and the averaged model's ReLU activation
    gradients; the bias part uses the averaged model's activation gradient.
    Results are batch means, scaled by ``weight`` and added into the
    (N, d) accumulators in place.
    """
    b = x_batch.shape[0]
    act_client = (x_batch @ client_hidden.T) > 0.0
    act_avg = (x_batch @ avg_hidden.T) > 0.0
    drift_coef = resid_label[:, None] * (act_client.astype(np.float64)
                                         - act_avg.astype(np.float64))
    bias_coef = resid_bias[:, None] * act_avg.astype(np.float64)
    drift_out += (weight / b) * (drift_coef.T @ x_batch)
    bias_out += (weight / b) * (bias_coef.T @ x_batch)
