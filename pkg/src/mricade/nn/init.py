"""Glorot (uniform) weight initialization."""

from __future__ import annotations

import numpy as np


def glorot_fans(shape) -> tuple[int, int]:
    """(fan_in, fan_out) for dense (out, in), conv (out, in, F, F), or 1-D shapes.

    A 1-D shape (bias vectors) uses its own length for both fans, matching the
    common convention when biases are Glorot-initialized too.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    elif len(shape) == 2:
        fan_out, fan_in = shape
    elif len(shape) == 4:
        receptive = shape[2] * shape[3]
        fan_in = shape[1] * receptive
        fan_out = shape[0] * receptive
    else:
        raise ValueError(f"cannot derive fans from shape {shape}")
    if fan_in == 0 or fan_out == 0:
        raise ValueError(f"zero fan for shape {shape}")
    return fan_in, fan_out


def glorot_uniform(shape, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """I.i.d. uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out))."""
    fan_in, fan_out = glorot_fans(shape)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)
