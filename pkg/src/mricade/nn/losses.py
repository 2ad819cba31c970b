"""Training losses and their gradients.

Both losses average over the batch so their magnitude does not depend on
batch size (the adaptive optimizer makes the constant factor irrelevant).
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

# Probability clamp keeping log() finite.
PROB_EPS = 1e-7


def binary_cross_entropy(f: np.ndarray, y: np.ndarray):
    """Mean binary cross-entropy over positive-class probabilities ``f``.

    Returns ``(loss, grad)`` with ``grad[i] = (f - y) / (f (1 - f)) / n``
    evaluated on the clamped probabilities.
    """
    f = np.asarray(f)
    y = np.asarray(y)
    if f.shape != y.shape:
        raise ShapeError(f"probabilities {f.shape} vs labels {y.shape}")
    n = f.size
    if n == 0:
        raise ValueError("binary cross-entropy of an empty batch")
    fc = np.clip(f, PROB_EPS, 1.0 - PROB_EPS)
    loss = float(np.mean(-y * np.log(fc) - (1.0 - y) * np.log(1.0 - fc)))
    grad = ((fc - y) / (fc * (1.0 - fc)) / n).astype(f.dtype, copy=False)
    return loss, grad


def mse_loss(f: np.ndarray, y: np.ndarray):
    """Box-regression loss: mean squared error over all 4 coordinates,
    ``(1 / 4n) * sum((f - y)^2)``; gradient is ``(f - y) / (2n)``."""
    f = np.asarray(f)
    y = np.asarray(y)
    if f.shape != y.shape:
        raise ShapeError(f"predictions {f.shape} vs targets {y.shape}")
    if f.ndim != 2 or f.shape[1] != 4:
        raise ShapeError(f"expected (n, 4) arrays, got {f.shape}")
    n = f.shape[0]
    if n == 0:
        raise ValueError("mse of an empty batch")
    r = f - y
    loss = float((r * r).sum() / (4 * n))
    grad = (r / (2 * n)).astype(f.dtype, copy=False)
    return loss, grad
