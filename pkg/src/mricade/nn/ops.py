"""Forward/backward kernels: convolution, pooling, dense, activations, softmax.

Convolution is implemented as cross-correlation (no kernel flip, the usual
CNN convention) via im2col + matrix multiply so BLAS does the heavy lifting.
Batched cores work on (N, C, H, W); the module also exposes the single-sample
wrappers used throughout the tests.

All kernels preserve the input dtype: float32 for training/inference,
float64 when checking gradients.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .specs import ActivationKind, ConvSpec

# ---------------------------------------------------------------------------
# convolution


def _check_conv_args(x: np.ndarray, w: np.ndarray, b: np.ndarray, spec: ConvSpec):
    if x.ndim != 4:
        raise ShapeError(f"conv input must be (N, C, H, W), got {x.shape}")
    n, c, h, wd = x.shape
    if c != spec.in_channels:
        raise ShapeError(
            f"conv {spec.name!r}: input has {c} channels, spec wants {spec.in_channels}"
        )
    f = spec.kernel_size
    if w.shape != (spec.out_channels, spec.in_channels, f, f):
        raise ShapeError(
            f"conv {spec.name!r}: weights {w.shape} != "
            f"{(spec.out_channels, spec.in_channels, f, f)}"
        )
    if b.shape != (spec.out_channels,):
        raise ShapeError(f"conv {spec.name!r}: bias {b.shape} != ({spec.out_channels},)")


def _im2col(xp: np.ndarray, f: int, stride: int) -> np.ndarray:
    """(N, C, Hp, Wp) -> (N, C*f*f, L) patch matrix; L = H_out * W_out."""
    win = sliding_window_view(xp, (f, f), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, ho, wo = win.shape[:4]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * f * f, ho * wo)
    return np.ascontiguousarray(cols)


def conv2d_batch(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
    spec: ConvSpec,
    return_cols: bool = False,
):
    """Cross-correlate a batch; output (N, C_out, H', W') per the extent rule.

    With ``return_cols`` the (N, C*F*F, L) patch matrix is handed back so a
    training step can reuse it for the weight gradient.
    """
    _check_conv_args(x, w, b, spec)
    n, _, h, wd = x.shape
    ho, wo = spec.out_extent(h), spec.out_extent(wd)
    p = spec.padding
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    cols = _im2col(xp, spec.kernel_size, spec.stride)
    wmat = w.reshape(spec.out_channels, -1)
    out = np.matmul(wmat, cols)  # (N, C_out, L)
    out += b[:, None]
    out = out.reshape(n, spec.out_channels, ho, wo)
    if return_cols:
        return out, cols
    return out


def conv2d_backward_batch(
    x: np.ndarray,
    w: np.ndarray,
    spec: ConvSpec,
    dy: np.ndarray,
    need_dx: bool = True,
    cols: np.ndarray | None = None,
):
    """Gradients of ``conv2d_batch``: returns (dx, dw, db); dx is None when skipped."""
    n, _, h, wd = x.shape
    f, s, p = spec.kernel_size, spec.stride, spec.padding
    co = spec.out_channels
    dy2 = dy.reshape(n, co, -1)

    if cols is None:
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        cols = _im2col(xp, f, s)
    # Batched GEMM with a transposed operand (no copy), reduced over the batch.
    dw = np.matmul(dy2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    db = dy2.sum(axis=(0, 2))

    if not need_dx:
        return None, dw, db

    # Input gradient as a stride-1 cross-correlation of the (dilated) output
    # gradient with the spatially flipped, channel-swapped kernel.
    ho, wo = dy.shape[2], dy.shape[3]
    if s > 1:
        dil = np.zeros((n, co, (ho - 1) * s + 1, (wo - 1) * s + 1), dtype=dy.dtype)
        dil[:, :, ::s, ::s] = dy
    else:
        dil = dy
    pad = f - 1
    dilp = np.pad(dil, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    wflip = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)  # (C_in, C_out, f, f)
    cols_b = _im2col(dilp, f, 1)
    dxp = np.matmul(wflip.reshape(spec.in_channels, -1), cols_b)
    hp, wp = h + 2 * p, wd + 2 * p
    dxp = dxp.reshape(n, spec.in_channels, hp, wp)
    dx = dxp[:, :, p : p + h, p : p + wd] if p else dxp
    return np.ascontiguousarray(dx), dw, db


def conv2d(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray, spec: ConvSpec
) -> np.ndarray:
    """Single-sample convolution: (C_in, H, W) -> (C_out, H', W')."""
    if x.ndim != 3:
        raise ShapeError(f"expected (C, H, W) input, got {x.shape}")
    return conv2d_batch(x[None], weights, bias, spec)[0]


# ---------------------------------------------------------------------------
# max pooling (2x2, stride 2, trailing odd row/column dropped)


def maxpool2x2_batch(x: np.ndarray):
    """Returns (pooled, argmax) where argmax holds the within-window winner
    index (row-major 0..3), used to route gradients back."""
    if x.ndim != 4:
        raise ShapeError(f"pool input must be (N, C, H, W), got {x.shape}")
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"pool input {h}x{w} smaller than its 2x2 window")
    ho, wo = h // 2, w // 2
    win = (
        x[:, :, : 2 * ho, : 2 * wo]
        .reshape(n, c, ho, 2, wo, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho, wo, 4)
    )
    idx = win.argmax(axis=-1)  # first max wins ties: deterministic
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx.astype(np.int8)


def maxpool2x2_backward_batch(idx: np.ndarray, in_shape, dy: np.ndarray) -> np.ndarray:
    n, c, h, w = in_shape
    ho, wo = h // 2, w // 2
    scattered = np.zeros((n, c, ho, wo, 4), dtype=dy.dtype)
    np.put_along_axis(scattered, idx[..., None].astype(np.intp), dy[..., None], axis=-1)
    block = scattered.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros(in_shape, dtype=dy.dtype)
    dx[:, :, : 2 * ho, : 2 * wo] = block.reshape(n, c, 2 * ho, 2 * wo)
    return dx


def maxpool2x2(x: np.ndarray):
    """Single-sample pooling: (C, H, W) -> ((C, H//2, W//2), argmax map)."""
    if x.ndim != 3:
        raise ShapeError(f"expected (C, H, W) input, got {x.shape}")
    out, idx = maxpool2x2_batch(x[None])
    return out[0], idx[0]


# ---------------------------------------------------------------------------
# dense


def dense_batch(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(
            f"dense shapes disagree: x {x.shape}, w {w.shape}, b {b.shape}"
        )
    return x @ w.T + b


def dense_backward_batch(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    dw = dy.T @ x
    db = dy.sum(axis=0)
    dx = dy @ w
    return dx, dw, db


def dense(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map w @ x + b for a single vector."""
    if x.ndim != 1:
        raise ShapeError(f"expected a vector, got {x.shape}")
    return dense_batch(x[None], weights, bias)[0]


# ---------------------------------------------------------------------------
# activations


def activate(x: np.ndarray, kind: ActivationKind) -> np.ndarray:
    """ReLU max(0, a), LeakyReLU max(0, a) + alpha * min(0, a), or identity."""
    if kind.kind == "identity":
        return x
    if kind.kind == "relu":
        return np.maximum(x, 0)
    return np.maximum(x, 0) + kind.alpha * np.minimum(x, 0)


def activate_backward(x: np.ndarray, kind: ActivationKind, dy: np.ndarray) -> np.ndarray:
    if kind.kind == "identity":
        return dy
    if kind.kind == "relu":
        return dy * (x > 0)
    slope = np.where(x > 0, np.array(1, dtype=dy.dtype), np.array(kind.alpha, dtype=dy.dtype))
    return dy * slope


# ---------------------------------------------------------------------------
# softmax


def softmax(a: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction so large logits cannot overflow."""
    a = np.asarray(a)
    if a.ndim == 1:
        return softmax(a[None])[0]
    shifted = a - a.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(p: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Jacobian-vector product given the forward output ``p``."""
    inner = (dy * p).sum(axis=1, keepdims=True)
    return p * (dy - inner)
