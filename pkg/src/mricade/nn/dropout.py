"""Inverted dropout: training-time zeroing with 1/(1-p) rescale so that the
inference path is the identity."""

from __future__ import annotations

import numpy as np

from .specs import DropoutSpec


def dropout(x: np.ndarray, spec: DropoutSpec, rng: np.random.Generator | None, training: bool):
    """Returns (output, keep_mask).  Inference or p == 0 pass ``x`` through
    bit-identically with an all-keep mask."""
    if not training or spec.p == 0.0:
        return x, np.ones(x.shape, dtype=bool)
    keep = rng.random(x.shape) >= spec.p
    scale = np.array(1.0 / (1.0 - spec.p), dtype=x.dtype)
    return x * keep * scale, keep
