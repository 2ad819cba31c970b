"""Stateful layer objects pairing each spec with parameters, a cached forward
pass, and the matching backward pass."""

from __future__ import annotations

import numpy as np

from ..errors import StateError
from . import ops
from .dropout import dropout as dropout_op
from .init import glorot_uniform
from .specs import (
    ActivationKind,
    ConvSpec,
    DenseSpec,
    DropoutSpec,
    FlattenMarker,
    PoolSpec,
)


class Layer:
    """Base: parameter-free, cache-checked."""

    def __init__(self, spec, name: str):
        self.spec = spec
        self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def initialize(self, rng: np.random.Generator, dtype):
        pass

    def forward(self, x: np.ndarray, training: bool, rng) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _need_cache(self):
        if self._cache is None:
            raise StateError(f"layer {self.name!r}: backward called before forward")
        return self._cache


class ConvLayer(Layer):
    def __init__(self, spec: ConvSpec, name: str):
        super().__init__(spec, name)
        self.first = False  # first layer of the net skips the input gradient

    def initialize(self, rng, dtype):
        f = self.spec.kernel_size
        self.params["w"] = glorot_uniform(
            (self.spec.out_channels, self.spec.in_channels, f, f), rng, dtype
        )
        self.params["b"] = glorot_uniform((self.spec.out_channels,), rng, dtype)

    def forward(self, x, training, rng):
        if training:
            y, cols = ops.conv2d_batch(
                x, self.params["w"], self.params["b"], self.spec, return_cols=True
            )
        else:
            y = ops.conv2d_batch(x, self.params["w"], self.params["b"], self.spec)
            cols = None
        self._cache = (x, cols)
        return y

    def backward(self, dy):
        x, cols = self._need_cache()
        dx, dw, db = ops.conv2d_backward_batch(
            x, self.params["w"], self.spec, dy, need_dx=not self.first, cols=cols
        )
        self.grads = {"w": dw, "b": db}
        self._cache = (x, None)  # patch matrix is single-use
        return dx


class PoolLayer(Layer):
    def forward(self, x, training, rng):
        y, idx = ops.maxpool2x2_batch(x)
        self._cache = (idx, x.shape)
        return y

    def backward(self, dy):
        idx, shape = self._need_cache()
        return ops.maxpool2x2_backward_batch(idx, shape, dy)


class FlattenLayer(Layer):
    def forward(self, x, training, rng):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._need_cache())


class DenseLayer(Layer):
    def initialize(self, rng, dtype):
        self.params["w"] = glorot_uniform(
            (self.spec.out_units, self.spec.in_units), rng, dtype
        )
        self.params["b"] = glorot_uniform((self.spec.out_units,), rng, dtype)

    def forward(self, x, training, rng):
        y = ops.dense_batch(x, self.params["w"], self.params["b"])
        self._cache = x
        return y

    def backward(self, dy):
        x = self._need_cache()
        dx, dw, db = ops.dense_backward_batch(x, self.params["w"], dy)
        self.grads = {"w": dw, "b": db}
        return dx


class ActivationLayer(Layer):
    def forward(self, x, training, rng):
        self._cache = x
        return ops.activate(x, self.spec)

    def backward(self, dy):
        return ops.activate_backward(self._need_cache(), self.spec, dy)


class DropoutLayer(Layer):
    def forward(self, x, training, rng):
        y, mask = dropout_op(x, self.spec, rng, training)
        self._cache = (mask, training)
        return y

    def backward(self, dy):
        mask, training = self._need_cache()
        if not training or self.spec.p == 0.0:
            return dy
        scale = np.array(1.0 / (1.0 - self.spec.p), dtype=dy.dtype)
        return dy * mask * scale


class SoftmaxHead(Layer):
    def forward(self, x, training, rng):
        p = ops.softmax(x)
        self._cache = p
        return p

    def backward(self, dy):
        return ops.softmax_backward(self._need_cache(), dy)


def make_layer(spec, name: str) -> Layer:
    if isinstance(spec, ConvSpec):
        return ConvLayer(spec, name)
    if isinstance(spec, PoolSpec):
        return PoolLayer(spec, name)
    if isinstance(spec, DenseSpec):
        return DenseLayer(spec, name)
    if isinstance(spec, FlattenMarker):
        return FlattenLayer(spec, name)
    if isinstance(spec, ActivationKind):
        return ActivationLayer(spec, name)
    if isinstance(spec, DropoutSpec):
        return DropoutLayer(spec, name)
    raise TypeError(f"unknown layer spec {type(spec).__name__}")
