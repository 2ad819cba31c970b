"""Mini-batch AdaDelta training with optional on-the-fly flip augmentation."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .checkpoint import Checkpoint
from .errors import NumericError
from .net import Network, backprop
from .nn.augment import flip_augment
from .nn.optim import AdaDeltaState, adadelta_step
from .rng import RandomStreams


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 200
    augment: bool = True
    rho: float = 0.95
    eps: float = 1e-8
    lr: float = 1.0
    seed: int = 0
    val_fraction: float = 0.1  # held out for a per-epoch validation loss; 0 disables

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float | None = None


def head_loss(net: Network) -> str:
    return "bce" if net.spec.head == "softmax" else "mse"


def _augment_batch(xb, yb, loss_kind, rng):
    extent = xb.shape[-1]
    bits = rng.random((len(xb), 2)) < 0.5
    for j, (hflip, vflip) in enumerate(bits):
        box = tuple(yb[j]) if loss_kind == "mse" else None
        img = xb[j]
        if hflip:
            img, box = flip_augment(img, box, "horizontal")
        if vflip:
            img, box = flip_augment(img, box, "vertical")
        if hflip or vflip:
            xb[j] = img
            if loss_kind == "mse":
                yb[j] = box
    return xb, yb


def train(
    net: Network,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig,
    extra_stats: dict[str, float] | None = None,
) -> tuple[Checkpoint, list[EpochStats]]:
    """Train ``net`` in place and return a checkpoint plus the loss trace.

    ``inputs`` is (N, ...) matching the network input dims; ``targets`` holds
    0/1 labels for a softmax head or (N, 4) boxes for a linear head.
    Initializes parameters when the network has none.  Deterministic for a
    fixed seed: shuffling, dropout, and augmentation all draw from named
    streams derived from ``config.seed``.
    """
    n = len(inputs)
    if n == 0:
        raise ValueError("empty training set")
    loss_kind = head_loss(net)
    streams = RandomStreams(config.seed)
    if not net.params():
        net.initialize(streams.init)

    n_val = int(round(n * config.val_fraction))
    n_val = min(n_val, n - 1)
    order = streams.data.permutation(n)
    val_idx, fit_idx = order[:n_val], order[n_val:]

    opt_states = {
        name: AdaDeltaState(rho=config.rho, eps=config.eps, lr=config.lr)
        for name in net.params()
    }

    trace: list[EpochStats] = []
    for epoch in range(config.epochs):
        perm = fit_idx[streams.shuffle.permutation(len(fit_idx))]
        total, seen = 0.0, 0
        for start in range(0, len(perm), config.batch_size):
            idx = perm[start : start + config.batch_size]
            xb = inputs[idx].copy()
            yb = np.array(targets[idx], dtype=np.float64)
            if config.augment:
                xb, yb = _augment_batch(xb, yb, loss_kind, streams.augment)
            loss, grads = backprop(
                net, xb, yb, loss_kind, training=True, rng=streams.dropout
            )
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch} batch {start // config.batch_size}"
                )
            params = net.params()
            for name, grad in grads.items():
                params[name] = adadelta_step(params[name], grad, opt_states[name])
                net.set_param(name, params[name])
            total += loss * len(idx)
            seen += len(idx)
        val_loss = None
        if n_val:
            out = net.forward(inputs[val_idx])
            if loss_kind == "bce":
                from .nn.losses import binary_cross_entropy

                val_loss, _ = binary_cross_entropy(
                    out[:, 1], np.asarray(targets[val_idx], dtype=out.dtype)
                )
            else:
                from .nn.losses import mse_loss

                val_loss, _ = mse_loss(out, np.asarray(targets[val_idx], dtype=out.dtype))
        trace.append(EpochStats(epoch, total / seen, val_loss))

    stats: dict[str, float] = {
        "rho": config.rho,
        "eps": config.eps,
        "lr": config.lr,
        "epochs": float(config.epochs),
        "batch_size": float(config.batch_size),
        "seed": float(config.seed),
        "augment": float(config.augment),
        "val_fraction": config.val_fraction,
    }
    if extra_stats:
        stats.update({k: float(v) for k, v in extra_stats.items()})
    ckpt = Checkpoint(params=dict(net.params()), stats=stats)
    return ckpt, trace
