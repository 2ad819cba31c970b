"""Evaluation mathematics: classification scores, ROC AUC, box displacement,
Dice overlap, and the paired t-test.

Degenerate denominators never raise: the affected score comes back with a
``degenerate`` flag and a documented value (0 for ratios of empty counts,
1 for the Dice of two empty masks) so batch evaluation always completes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import ShapeError
from .imaging import BoundingBox


@dataclass(frozen=True)
class Metric:
    value: float
    degenerate: bool = False

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def p(self) -> int:
        return self.tp + self.fn

    @property
    def n(self) -> int:
        return self.tn + self.fp

    @staticmethod
    def from_predictions(pred, truth) -> "ConfusionCounts":
        pred = np.asarray(pred, dtype=bool)
        truth = np.asarray(truth, dtype=bool)
        if pred.shape != truth.shape:
            raise ShapeError(f"predictions {pred.shape} vs labels {truth.shape}")
        return ConfusionCounts(
            tp=int(np.sum(pred & truth)),
            tn=int(np.sum(~pred & ~truth)),
            fp=int(np.sum(pred & ~truth)),
            fn=int(np.sum(~pred & truth)),
        )


def _ratio(num: int, den: int) -> Metric:
    if den == 0:
        return Metric(0.0, degenerate=True)
    return Metric(num / den)


def accuracy(c: ConfusionCounts) -> Metric:
    return _ratio(c.tp + c.tn, c.p + c.n)


def precision(c: ConfusionCounts) -> Metric:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> Metric:
    return _ratio(c.tp, c.tp + c.fn)


def f_beta(c: ConfusionCounts, beta: float = 1.0) -> Metric:
    """(1 + beta^2) * precision * recall / (beta^2 * precision + recall)."""
    pr, rc = precision(c), recall(c)
    den = beta * beta * pr.value + rc.value
    if den == 0 or pr.degenerate or rc.degenerate:
        return Metric(0.0, degenerate=True)
    return Metric((1 + beta * beta) * pr.value * rc.value / den)


def auc(scores, labels) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic: the fraction
    of (positive, negative) pairs ranked correctly, ties counted half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ShapeError(f"scores {scores.shape} vs labels {labels.shape}")
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    ranks[order] = np.arange(1, len(scores) + 1)
    # average ranks over ties so tied pairs contribute exactly 1/2
    sorted_scores = scores[order]
    i = 0
    while i < len(sorted_scores):
        j = i
        while j + 1 < len(sorted_scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = (i + 1 + j + 1) / 2.0
        i = j + 1
    r_pos = ranks[pos].sum()
    u = r_pos - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def box_mae(f: np.ndarray, y: np.ndarray, per_coordinate: bool = False):
    """Box displacement: mean and population SD of per-sample absolute
    residual sums; ``per_coordinate`` divides by the 4 coordinates as well."""
    f = np.asarray(f, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if f.shape != y.shape or f.ndim != 2 or f.shape[1] != 4:
        raise ShapeError(f"expected matching (n, 4) arrays, got {f.shape} vs {y.shape}")
    if f.shape[0] == 0:
        raise ValueError("box displacement of an empty set")
    per_sample = np.abs(f - y).sum(axis=1)
    if per_coordinate:
        per_sample = per_sample / 4.0
    return float(per_sample.mean()), float(per_sample.std())


def dsc(x: np.ndarray, y: np.ndarray) -> Metric:
    """Dice similarity 2|X n Y| / (|X| + |Y|) of two binary masks; two empty
    masks count as a perfect (degenerate) overlap."""
    x = np.asarray(x).astype(bool)
    y = np.asarray(y).astype(bool)
    if x.shape != y.shape:
        raise ShapeError(f"mask dims disagree: {x.shape} vs {y.shape}")
    sx, sy = int(x.sum()), int(y.sum())
    if sx + sy == 0:
        return Metric(1.0, degenerate=True)
    inter = int(np.sum(x & y))
    return Metric(2.0 * inter / (sx + sy))


def rasterize_box(box: BoundingBox, dims: tuple[int, int]) -> np.ndarray:
    """Binary mask of a box on an (H, W) grid, coordinates rounded half-up."""
    h, w = dims
    mask = np.zeros((h, w), dtype=np.uint8)
    x0 = int(np.floor(box.x_ul + 0.5))
    y0 = int(np.floor(box.y_ul + 0.5))
    x1 = x0 + int(np.floor(box.width + 0.5))
    y1 = y0 + int(np.floor(box.height + 0.5))
    mask[max(y0, 0) : max(y1, 0), max(x0, 0) : max(x1, 0)] = 1
    return mask


def box_dsc(a: BoundingBox, b: BoundingBox, dims: tuple[int, int]) -> Metric:
    return dsc(rasterize_box(a, dims), rasterize_box(b, dims))


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    degenerate: bool = False


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test on differences a - b with sample (n-1) SD.

    Zero-variance differences return the degenerate limit: p = 1 when the
    mean difference is zero, p = 0 otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"paired samples disagree: {a.shape} vs {b.shape}")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    df = n - 1
    if sd == 0.0:
        return TTestResult(t=0.0 if mean == 0 else np.inf, df=df,
                           p=1.0 if mean == 0 else 0.0, degenerate=True)
    t = mean / (sd / np.sqrt(n))
    # two-sided p via the regularized incomplete beta function
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TTestResult(t=float(t), df=df, p=p)
