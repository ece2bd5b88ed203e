"""Hot loops (ODE stepping, pole sums): compiled extension with a numpy fallback.

The compiled kernel is used when it imports; set ``WQED_PURE_PYTHON=1`` to
force the fallback (both give identical results up to rounding order).
"""
from __future__ import annotations

import os

import numpy as np


def lti_steps_py(P, q, drive, y0, r):
    """Reference implementation of :func:`lti_steps`."""
    P = np.ascontiguousarray(P, dtype=complex)
    q = np.asarray(q, dtype=complex)
    r = np.asarray(r, dtype=complex)
    y = np.array(y0, dtype=complex)
    drive = np.asarray(drive, dtype=complex)
    out = np.empty(drive.size + 1, dtype=complex)
    out[0] = r @ y
    for k, d in enumerate(drive):
        y = P @ y + d * q
        out[k + 1] = r @ y
    return out, y


def pole_sum_py(x, poles, weights, chunk: int = 4096):
    """Reference implementation of :func:`pole_sum`."""
    x = np.asarray(x, dtype=complex)
    out = np.empty(x.shape, dtype=complex)
    for s in range(0, x.size, chunk):
        out[s:s + chunk] = (1.0 / (x[s:s + chunk, None] - poles[None, :])) @ weights
    return out


def exp_pole_sum_py(tau0, dtau, n, poles, coef, chunk: int = 4096):
    """Reference implementation of :func:`exp_pole_sum`."""
    tau = tau0 + dtau * np.arange(n)
    out = np.empty(n, dtype=complex)
    for s in range(0, n, chunk):
        out[s:s + chunk] = np.exp(-1j * np.outer(tau[s:s + chunk], poles)) @ coef
    return out


_compiled = _compiled_pole_sum = _compiled_exp_sum = None
if not os.environ.get("WQED_PURE_PYTHON"):
    try:
        from ._rk4 import exp_pole_sum as _compiled_exp_sum
        from ._rk4 import lti_steps as _compiled
        from ._rk4 import pole_sum as _compiled_pole_sum
    except ImportError:
        _compiled = _compiled_pole_sum = _compiled_exp_sum = None

BACKEND = "compiled" if _compiled is not None else "python"


def lti_steps(P, q, drive, y0, r):
    """Iterate ``y <- P y + drive[k] q``; return ``(r . y_k for k = 0..K, y_K)``."""
    if _compiled is None:
        return lti_steps_py(P, q, drive, y0, r)
    return _compiled(np.ascontiguousarray(P, dtype=complex),
                     np.ascontiguousarray(q, dtype=complex),
                     np.ascontiguousarray(drive, dtype=complex),
                     np.ascontiguousarray(y0, dtype=complex),
                     np.ascontiguousarray(r, dtype=complex))


def pole_sum(x, poles, weights):
    """``sum_p weights[p] / (x - poles[p])`` for a 1-D array ``x``."""
    poles = np.ascontiguousarray(poles, dtype=complex)
    weights = np.ascontiguousarray(weights, dtype=complex)
    if _compiled_pole_sum is None:
        return pole_sum_py(x, poles, weights)
    return _compiled_pole_sum(np.ascontiguousarray(x, dtype=complex), poles, weights)


def exp_pole_sum(tau0: float, dtau: float, n: int, poles, coef):
    """``sum_p coef[p] exp(-1j poles[p] (tau0 + k dtau))`` for ``k = 0..n-1``."""
    poles = np.ascontiguousarray(poles, dtype=complex)
    coef = np.ascontiguousarray(coef, dtype=complex)
    if _compiled_exp_sum is None:
        return exp_pole_sum_py(tau0, dtau, n, poles, coef)
    return _compiled_exp_sum(float(tau0), float(dtau), int(n), poles, coef)
