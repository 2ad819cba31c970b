"""From-scratch neural-network engine: layer kernels, losses, AdaDelta,
Glorot initialization, dropout, and flip augmentation."""

from .augment import flip_augment
from .dropout import dropout
from .init import glorot_fans, glorot_uniform
from .losses import binary_cross_entropy, mse_loss
from .ops import (
    activate,
    conv2d,
    dense,
    maxpool2x2,
    softmax,
)
from .optim import AdaDeltaState, adadelta_step
from .specs import (
    ActivationKind,
    ConvSpec,
    DenseSpec,
    DropoutSpec,
    FlattenMarker,
    PoolSpec,
)

__all__ = [
    "ActivationKind",
    "AdaDeltaState",
    "ConvSpec",
    "DenseSpec",
    "DropoutSpec",
    "FlattenMarker",
    "PoolSpec",
    "activate",
    "adadelta_step",
    "binary_cross_entropy",
    "conv2d",
    "dense",
    "dropout",
    "flip_augment",
    "glorot_fans",
    "glorot_uniform",
    "maxpool2x2",
    "mse_loss",
    "softmax",
]
