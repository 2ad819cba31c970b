"""AdaDelta: per-parameter adaptive steps from decayed squared-gradient and
squared-update accumulators; no hand-tuned global learning rate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError, ShapeError


@dataclass
class AdaDeltaState:
    """Accumulators for one parameter tensor.

    ``sq_grad`` is the decayed mean of g^2, ``sq_delta`` the decayed mean of
    the applied updates squared.  ``lr`` is a plain multiplier on the update
    (1.0 in the reference configuration).
    """

    rho: float = 0.95
    eps: float = 1e-8
    lr: float = 1.0
    sq_grad: np.ndarray | None = None
    sq_delta: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0, 1), got {self.rho}")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")


def adadelta_step(param: np.ndarray, grad: np.ndarray, state: AdaDeltaState) -> np.ndarray:
    """One update; mutates ``state`` accumulators and returns the new parameter.

    sq_grad  <- rho * sq_grad + (1 - rho) * g^2
    delta    <- -sqrt(sq_delta + eps) / sqrt(sq_grad + eps) * g
    sq_delta <- rho * sq_delta + (1 - rho) * delta^2
    param    <- param + lr * delta
    """
    if param.shape != grad.shape:
        raise ShapeError(f"param {param.shape} vs grad {grad.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient passed to adadelta_step")
    if state.sq_grad is None:
        state.sq_grad = np.zeros_like(param, dtype=np.float64)
        state.sq_delta = np.zeros_like(param, dtype=np.float64)
    if state.sq_grad.shape != param.shape:
        raise ShapeError(
            f"accumulator {state.sq_grad.shape} vs param {param.shape}"
        )
    g = grad.astype(np.float64, copy=False)
    state.sq_grad *= state.rho
    state.sq_grad += (1.0 - state.rho) * g * g
    delta = -np.sqrt(state.sq_delta + state.eps) / np.sqrt(state.sq_grad + state.eps) * g
    state.sq_delta *= state.rho
    state.sq_delta += (1.0 - state.rho) * delta * delta
    return (param + state.lr * delta).astype(param.dtype, copy=False)
