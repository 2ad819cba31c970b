"""Network descriptions, the two reference architectures, and execution.

A ``NetworkSpec`` is an ordered list of layer specs plus declared input dims
and an output head ("softmax" for class probabilities, "linear" for raw box
coordinates).  ``Network`` binds a spec to parameter arrays and runs the
forward/backward passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError, SpecError, StateError
from .nn.layers import ConvLayer, DenseLayer, make_layer
from .nn.losses import binary_cross_entropy, mse_loss
from .nn.specs import (
    ActivationKind,
    ConvSpec,
    DenseSpec,
    DropoutSpec,
    FlattenMarker,
    LayerSpec,
    PoolSpec,
)

HEADS = ("softmax", "linear")


@dataclass(frozen=True)
class NetworkSpec:
    input_dims: tuple[int, ...]
    layers: tuple[LayerSpec, ...]
    head: str = "softmax"

    def __post_init__(self):
        object.__setattr__(self, "input_dims", tuple(int(d) for d in self.input_dims))
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.head not in HEADS:
            raise SpecError(f"unknown head {self.head!r}")
        validate_spec(self)

    @property
    def output_units(self) -> int:
        dims = infer_shapes(self)[-1][1]
        if len(dims) != 1:
            raise SpecError(f"network output is not a vector: {dims}")
        return dims[0]


def infer_shapes(spec: NetworkSpec) -> list[tuple[str, tuple[int, ...]]]:
    """Chained output dims per layer, starting from the declared input."""
    dims = spec.input_dims
    trace = []
    for i, layer in enumerate(spec.layers):
        name = getattr(layer, "name", "") or f"L{i:02d}"
        if isinstance(layer, ConvSpec):
            if len(dims) != 3:
                raise SpecError(f"conv {name!r} needs (C, H, W) input, has {dims}")
            c, h, w = dims
            if c != layer.in_channels:
                raise SpecError(
                    f"conv {name!r}: expects {layer.in_channels} channels, gets {c}"
                )
            dims = (layer.out_channels, layer.out_extent(h), layer.out_extent(w))
        elif isinstance(layer, PoolSpec):
            if len(dims) != 3:
                raise SpecError(f"pool {name!r} needs (C, H, W) input, has {dims}")
            c, h, w = dims
            if h < 2 or w < 2:
                raise SpecError(f"pool {name!r}: input {h}x{w} below 2x2 window")
            dims = (c, layer.out_extent(h), layer.out_extent(w))
        elif isinstance(layer, FlattenMarker):
            dims = (int(np.prod(dims)),)
        elif isinstance(layer, DenseSpec):
            if len(dims) != 1 or dims[0] != layer.in_units:
                raise SpecError(
                    f"dense {name!r}: expects ({layer.in_units},) input, gets {dims}"
                )
            dims = (layer.out_units,)
        elif isinstance(layer, (ActivationKind, DropoutSpec)):
            pass
        else:
            raise SpecError(f"unknown layer spec {type(layer).__name__}")
        trace.append((name, dims))
    return trace


def validate_spec(spec: NetworkSpec) -> None:
    flat_idx = [i for i, l in enumerate(spec.layers) if isinstance(l, FlattenMarker)]
    spatial_idx = [
        i for i, l in enumerate(spec.layers) if isinstance(l, (ConvSpec, PoolSpec))
    ]
    if len(flat_idx) > 1:
        raise SpecError("more than one flatten layer")
    if spatial_idx:
        if not flat_idx:
            raise SpecError("convolutional network without a flatten layer")
        if flat_idx[0] < max(spatial_idx):
            raise SpecError("flatten must come after the last conv/pool layer")
    infer_shapes(spec)  # raises on any inconsistent chaining


def param_count(spec: NetworkSpec) -> int:
    """Trainable parameters: conv C_out*(C_in*F^2 + 1) plus dense n_out*(n_in + 1)."""
    total = 0
    for layer in spec.layers:
        if isinstance(layer, ConvSpec):
            total += layer.out_channels * (
                layer.in_channels * layer.kernel_size**2 + 1
            )
        elif isinstance(layer, DenseSpec):
            total += layer.out_units * (layer.in_units + 1)
    return total


def layer_count(spec: NetworkSpec) -> int:
    """Depth as conventionally counted: conv + pool + fully connected layers."""
    return sum(
        isinstance(l, (ConvSpec, PoolSpec, DenseSpec)) for l in spec.layers
    )


def param_shapes(spec: NetworkSpec) -> dict[str, tuple[int, ...]]:
    """Named parameter tensors a spec requires, in layer order."""
    shapes: dict[str, tuple[int, ...]] = {}
    for i, layer in enumerate(spec.layers):
        name = getattr(layer, "name", "") or f"L{i:02d}"
        if isinstance(layer, ConvSpec):
            f = layer.kernel_size
            shapes[f"{name}.w"] = (layer.out_channels, layer.in_channels, f, f)
            shapes[f"{name}.b"] = (layer.out_channels,)
        elif isinstance(layer, DenseSpec):
            shapes[f"{name}.w"] = (layer.out_units, layer.in_units)
            shapes[f"{name}.b"] = (layer.out_units,)
    return shapes


# ---------------------------------------------------------------------------
# reference architectures


def _act(alpha: float) -> ActivationKind:
    if alpha:
        return ActivationKind("leaky_relu", alpha)
    return ActivationKind("relu")


def build_ccnn(
    kernel_size: int = 3,
    extra_block: bool = False,
    leaky_alpha: float = 0.0,
    dropout_p: float = 0.2,
) -> NetworkSpec:
    """12-layer slice-classification network: three valid-conv blocks
    (32, 64, 128 filters) with 2x2 pooling, then an 8192-550-550-2 MLP with
    dropout and a softmax head.  The keyword knobs cover the ablation
    variants (kernel size, extra conv block, LeakyReLU, dropout rate)."""
    k = kernel_size
    layers: list[LayerSpec] = []
    widths = [(4, 32, "C1"), (32, 64, "C2"), (64, 128, "C3")]
    if extra_block:
        widths.append((128, 128, "C4"))
    for i, (cin, cout, tag) in enumerate(widths):
        layers += [
            ConvSpec(cin, cout, k, 1, "valid", f"{tag}_1"),
            _act(leaky_alpha),
            ConvSpec(cout, cout, k, 1, "valid", f"{tag}_2"),
            _act(leaky_alpha),
            PoolSpec(name=f"P{i + 1}"),
        ]
    layers.append(FlattenMarker())
    flat = infer_shapes(NetworkSpec((4, 96, 96), tuple(layers), "linear"))[-1][1][0]
    layers += [
        DenseSpec(flat, 550, "FC1"),
        _act(leaky_alpha),
        DropoutSpec(dropout_p),
        DenseSpec(550, 550, "FC2"),
        _act(leaky_alpha),
        DropoutSpec(dropout_p),
        DenseSpec(550, 2, "Out"),
    ]
    return NetworkSpec((4, 96, 96), tuple(layers), "softmax")


def build_dcnn(
    kernel_size: int = 3,
    extra_block: bool = False,
    leaky_alpha: float = 0.0,
    dropout_p: float = 0.5,
) -> NetworkSpec:
    """15-layer box-regression network: three same-conv blocks with filter
    counts (32, 32, 64), one valid 5x5 block at 128 filters, then a
    512-1200-1200-4 MLP with dropout and a linear output (no final
    non-linearity).  Keyword knobs as in :func:`build_ccnn`; ``kernel_size``
    applies to the same-padded blocks, the 5x5 block is fixed."""
    k = kernel_size
    layers: list[LayerSpec] = []
    for i, (cin, cout) in enumerate([(4, 32), (32, 32), (32, 64)]):
        tag = f"C{i + 1}"
        layers += [
            ConvSpec(cin, cout, k, 1, "same", f"{tag}_1"),
            _act(leaky_alpha),
            ConvSpec(cout, cout, k, 1, "same", f"{tag}_2"),
            _act(leaky_alpha),
            PoolSpec(name=f"P{i + 1}"),
        ]
    layers += [
        ConvSpec(64, 128, 5, 1, "valid", "C4_1"),
        _act(leaky_alpha),
        ConvSpec(128, 128, 5, 1, "valid", "C4_2"),
        _act(leaky_alpha),
        PoolSpec(name="P4"),
    ]
    if extra_block:
        layers += [
            ConvSpec(128, 128, 3, 1, "same", "C5_1"),
            _act(leaky_alpha),
            ConvSpec(128, 128, 3, 1, "same", "C5_2"),
            _act(leaky_alpha),
            PoolSpec(name="P5"),
        ]
    layers.append(FlattenMarker())
    flat = infer_shapes(NetworkSpec((4, 96, 96), tuple(layers), "linear"))[-1][1][0]
    layers += [
        DenseSpec(flat, 1200, "FC1"),
        _act(leaky_alpha),
        DropoutSpec(dropout_p),
        DenseSpec(1200, 1200, "FC2"),
        _act(leaky_alpha),
        DropoutSpec(dropout_p),
        DenseSpec(1200, 4, "Out"),
    ]
    return NetworkSpec((4, 96, 96), tuple(layers), "linear")


# ---------------------------------------------------------------------------
# execution


class Network:
    """A spec bound to parameter arrays; runs forward and backward passes."""

    def __init__(self, spec: NetworkSpec, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.layers = [
            make_layer(l, getattr(l, "name", "") or f"L{i:02d}")
            for i, l in enumerate(spec.layers)
        ]
        first_conv = next((l for l in self.layers if isinstance(l, ConvLayer)), None)
        if first_conv is not None and self.layers.index(first_conv) == 0:
            first_conv.first = True
        if spec.head == "softmax":
            self.layers.append(make_softmax_head())
        self._forward_done = False

    def initialize(self, rng: np.random.Generator) -> None:
        for layer in self.layers:
            layer.initialize(rng, self.dtype)

    def params(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            for key, val in layer.params.items():
                out[f"{layer.name}.{key}"] = val
        return out

    def set_param(self, name: str, value: np.ndarray) -> None:
        layer_name, key = name.rsplit(".", 1)
        for layer in self.layers:
            if layer.name == layer_name and isinstance(layer, (ConvLayer, DenseLayer)):
                layer.params[key] = value
                return
        raise ConfigError(f"network has no parameter {name!r}")

    def load_params(self, mapping: dict[str, np.ndarray]) -> None:
        """Bind named tensors; mismatch raises ConfigError naming the first
        offending tensor in layer order."""
        expected = param_shapes(self.spec)
        for name, shape in expected.items():
            if name not in mapping:
                raise ConfigError(f"checkpoint is missing tensor {name!r}")
            got = tuple(mapping[name].shape)
            if got != shape:
                raise ConfigError(
                    f"tensor {name!r}: checkpoint shape {got} != network shape {shape}"
                )
        extra = set(mapping) - set(expected)
        if extra:
            raise ConfigError(f"checkpoint carries unknown tensor {sorted(extra)[0]!r}")
        for name in expected:
            self.set_param(name, mapping[name].astype(self.dtype, copy=False))

    def grads(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.layers:
            for key, val in layer.grads.items():
                out[f"{layer.name}.{key}"] = val
        return out

    def forward(
        self,
        x: np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.spec.input_dims:
            raise ShapeError(
                f"batch dims {x.shape[1:]} != network input {self.spec.input_dims}"
            )
        for layer in self.layers:
            x = layer.forward(x, training, rng)
        self._forward_done = True
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if not self._forward_done:
            raise StateError("backward called before any forward pass")
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout


def make_softmax_head():
    from .nn.layers import SoftmaxHead

    return SoftmaxHead(None, "softmax_head")


def backprop(
    net: Network,
    x: np.ndarray,
    y: np.ndarray,
    loss_kind: str,
    training: bool = False,
    rng: np.random.Generator | None = None,
):
    """Loss and parameter gradients for one batch.

    ``loss_kind`` is "bce" (softmax head; ``y`` holds 0/1 labels, the loss
    reads the class-1 probability) or "mse" (linear head, ``y`` is (n, 4)).
    Returns ``(loss, grads)``; in float64 the gradients match central finite
    differences.
    """
    out = net.forward(x, training=training, rng=rng)
    if loss_kind == "bce":
        f = out[:, 1]
        loss, df = binary_cross_entropy(f, np.asarray(y, dtype=out.dtype))
        dout = np.zeros_like(out)
        dout[:, 1] = df
    elif loss_kind == "mse":
        loss, dout = mse_loss(out, np.asarray(y, dtype=out.dtype))
    else:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    net.backward(dout)
    return loss, net.grads()
