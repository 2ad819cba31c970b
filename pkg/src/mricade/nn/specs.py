"""Descriptions of the layer kinds the engine knows how to run."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import SpecError


@dataclass(frozen=True)
class ConvSpec:
    """2-D convolution: ``out_channels`` filters of size ``kernel_size`` square.

    ``pad_mode`` is ``"valid"`` (no padding, output shrinks) or ``"same"``
    (zero-pad by (F-1)/2 per side, spatial size preserved at stride 1).
    """

    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    pad_mode: str = "valid"
    name: str = ""

    def __post_init__(self):
        if self.kernel_size < 1 or self.stride < 1:
            raise SpecError(f"conv {self.name!r}: kernel and stride must be >= 1")
        if self.in_channels < 1 or self.out_channels < 1:
            raise SpecError(f"conv {self.name!r}: channel counts must be >= 1")
        if self.pad_mode not in ("valid", "same"):
            raise SpecError(f"conv {self.name!r}: unknown pad_mode {self.pad_mode!r}")
        if self.pad_mode == "same" and self.kernel_size % 2 == 0:
            raise SpecError(f"conv {self.name!r}: 'same' padding needs an odd kernel")

    @property
    def padding(self) -> int:
        return 0 if self.pad_mode == "valid" else (self.kernel_size - 1) // 2

    def out_extent(self, extent: int) -> int:
        """Output width/height for one spatial axis; rejects fractional results."""
        num = extent - self.kernel_size + 2 * self.padding
        if num < 0:
            raise SpecError(
                f"conv {self.name!r}: input extent {extent} smaller than kernel "
                f"{self.kernel_size}"
            )
        if num % self.stride != 0:
            raise SpecError(
                f"conv {self.name!r}: extent {extent} does not divide evenly "
                f"(kernel {self.kernel_size}, stride {self.stride})"
            )
        return num // self.stride + 1


@dataclass(frozen=True)
class PoolSpec:
    """Non-overlapping max pooling; both reference networks use 2x2/stride 2."""

    window: int = 2
    stride: int = 2
    name: str = ""

    def __post_init__(self):
        if self.window != 2 or self.stride != 2:
            raise SpecError("only 2x2 stride-2 max pooling is supported")

    def out_extent(self, extent: int) -> int:
        # Trailing odd row/column is dropped (17 -> 8).
        return extent // 2


@dataclass(frozen=True)
class DenseSpec:
    in_units: int
    out_units: int
    name: str = ""

    def __post_init__(self):
        if self.in_units < 1 or self.out_units < 1:
            raise SpecError(f"dense {self.name!r}: unit counts must be >= 1")


@dataclass(frozen=True)
class FlattenMarker:
    name: str = ""


@dataclass(frozen=True)
class ActivationKind:
    """``relu``, ``leaky_relu`` (with leakiness ``alpha``) or ``identity``."""

    kind: str = "relu"
    alpha: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("relu", "leaky_relu", "identity"):
            raise SpecError(f"unknown activation {self.kind!r}")
        if not 0.0 <= self.alpha < 1.0:
            raise SpecError(f"activation alpha must be in [0, 1), got {self.alpha}")


@dataclass(frozen=True)
class DropoutSpec:
    p: float
    name: str = ""

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise SpecError(f"dropout probability must be in [0, 1), got {self.p}")


LayerSpec = (
    ConvSpec | PoolSpec | DenseSpec | FlattenMarker | ActivationKind | DropoutSpec
)
