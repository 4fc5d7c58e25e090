"""Backend dispatch for the numeric kernels.

The numba backend is the default; set FEDMC_BACKEND=numpy to force the pure
numpy fallback (or FEDMC_BACKEND=numba to fail loudly if numba is broken).
Both backends implement the same functions; ``benchmarks/bench_kernels.py``
compares them.
"""

from __future__ import annotations

import os
import warnings

_requested = os.environ.get("FEDMC_BACKEND", "").strip().lower()

if _requested in ("", "numba"):
    try:
        from . import numba_impl as _impl
    except ImportError:
        if _requested == "numba":
            raise
        warnings.warn("numba unavailable; falling back to numpy kernels")
        from . import numpy_impl as _impl
elif _requested == "numpy":
    from . import numpy_impl as _impl
else:
    raise ValueError(
        f"unknown FEDMC_BACKEND={_requested!r}; expected 'numba' or 'numpy'")

BACKEND = _impl.NAME
forward = _impl.forward
mse_loss_grad = _impl.mse_loss_grad
ce_loss_grad = _impl.ce_loss_grad
sgd_update = _impl.sgd_update
noise_terms = _impl.noise_terms
