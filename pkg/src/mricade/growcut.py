"""Seed generation from a bounding box and GrowCut segmentation.

Seeds: two concentric circles at the box center, a small foreground circle
of radius 0.2 * min(width, height) and a background circle of radius
max(width, height) / 2, each rasterized along its circumference.

The automaton: each cell carries (label, strength theta, intensity C).
Per synchronous step a cell adopts the label of the neighbor whose attack
g(|C_p - C_q|) * theta_q strictly exceeds its own strength, where
g(x) = 1 - x / maxC and maxC is the grid's intensity range.  Seeds start at
full strength and, since an attack can never exceed 1, are immortal.
Strengths only grow, so the automaton reaches a fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SeedingError
from .imaging import BoundingBox

UNLABELED, FOREGROUND, BACKGROUND = 0, 1, 2

# Square region of interest around the background circle; the margin keeps
# background seeds strictly interior.
ROI_MARGIN = 5

# 8-neighborhood in row-major offset order; with synchronous updates the
# last offset among equal-strength attackers wins, fixed for determinism.
_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass(frozen=True)
class SeedSpec:
    """Foreground/background seed circles (centers and radii, pixels)."""

    x_f: float
    y_f: float
    r_f: float
    x_b: float
    y_b: float
    r_b: float


@dataclass
class CellGrid:
    """Automaton state: per-pixel label, strength in [0, 1], intensity."""

    label: np.ndarray  # int8
    strength: np.ndarray  # float64
    feature: np.ndarray  # float64


@dataclass
class GrowCutResult:
    mask: np.ndarray  # uint8 {0, 1}, full image size
    converged: bool
    iterations: int


def generate_seeds(box: BoundingBox) -> SeedSpec:
    """Concentric seed circles from a box: x_f = x_ul + width/2,
    y_f = y_ul + height/2, r_f = 0.2 * min(w, h), r_b = max(w, h) / 2."""
    w, h = box.width, box.height
    if w <= 0 or h <= 0:
        raise ValueError(f"non-positive box dims {box.astuple()}")
    x_f = box.x_ul + w / 2
    y_f = box.y_ul + h / 2
    r_f = min(w, h) * 0.2
    r_b = max(w, h) / 2
    return SeedSpec(x_f=x_f, y_f=y_f, r_f=r_f, x_b=x_f, y_b=y_f, r_b=r_b)


def _round_radius(v: float) -> int:
    # half-up: fractional radii expand the ring outward
    return int(np.floor(v + 0.5))


def _center_px(v: float) -> int:
    # Box centers land on half-pixels for odd extents; flooring picks the
    # box's central pixel and keeps the rasterized rings concentric with the
    # lesion instead of shifting them diagonally.
    return int(np.floor(v))


def midpoint_circle(cx: int, cy: int, r: int) -> list[tuple[int, int]]:
    """Integer circumference pixels (x, y) of the midpoint-circle algorithm;
    radius 0 degenerates to the center pixel."""
    if r <= 0:
        return [(cx, cy)]
    pts = set()
    x, y, d = r, 0, 1 - r
    while x >= y:
        for px, py in (
            (x, y), (y, x), (-x, y), (-y, x),
            (x, -y), (y, -x), (-x, -y), (-y, -x),
        ):
            pts.add((cx + px, cy + py))
        y += 1
        if d < 0:
            d += 2 * y + 1
        else:
            x -= 1
            d += 2 * (y - x) + 1
    return sorted(pts)


def rasterize_seeds(spec: SeedSpec, dims: tuple[int, int], image: np.ndarray | None = None) -> CellGrid:
    """Initial automaton state over an image of the given (H, W) dims.

    Circumference pixels of the foreground circle become foreground seeds at
    full strength, those of the background circle background seeds; pixels
    outside the image are clamped away.
    """
    h, w = dims
    label = np.zeros((h, w), dtype=np.int8)
    strength = np.zeros((h, w), dtype=np.float64)
    feature = (
        np.zeros((h, w), dtype=np.float64)
        if image is None
        else np.asarray(image, dtype=np.float64)
    )
    if feature.shape != (h, w):
        raise ValueError(f"image {feature.shape} does not match dims {dims}")

    placed_fg = 0
    for kind, cx, cy, r in (
        (BACKGROUND, spec.x_b, spec.y_b, spec.r_b),
        (FOREGROUND, spec.x_f, spec.y_f, spec.r_f),
    ):
        for px, py in midpoint_circle(_center_px(cx), _center_px(cy), _round_radius(r)):
            if 0 <= px < w and 0 <= py < h:
                label[py, px] = kind
                strength[py, px] = 1.0
                if kind == FOREGROUND:
                    placed_fg += 1
    if placed_fg == 0:
        raise SeedingError(
            f"foreground circle at ({spec.x_f}, {spec.y_f}) r={spec.r_f} "
            f"lies entirely outside the {h}x{w} image"
        )
    return CellGrid(label=label, strength=strength, feature=feature)


def growcut_step(grid: CellGrid) -> tuple[CellGrid, int]:
    """One synchronous automaton step; returns (next state, changed count).

    All reads come from the previous state.  Among equal-strength winning
    attacks the last neighbor in row-major offset order is decisive.
    """
    lab, theta, c = grid.label, grid.strength, grid.feature
    h, w = lab.shape
    span = c.max() - c.min() if c.size else 0.0

    lab_p = np.zeros((h + 2, w + 2), dtype=lab.dtype)
    theta_p = np.zeros((h + 2, w + 2), dtype=theta.dtype)
    c_p = np.zeros((h + 2, w + 2), dtype=c.dtype)
    lab_p[1:-1, 1:-1] = lab
    theta_p[1:-1, 1:-1] = theta
    c_p[1:-1, 1:-1] = c

    best = np.zeros_like(theta)
    best_lab = lab.copy()
    for dy, dx in _OFFSETS:
        lab_q = lab_p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        theta_q = theta_p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        c_q = c_p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        if span > 0:
            g = 1.0 - np.abs(c - c_q) / span
        else:
            g = 1.0  # uniform image: full attack strength
        attack = g * theta_q
        take = attack >= best
        np.copyto(best, attack, where=take)
        np.copyto(best_lab, lab_q, where=take)

    fire = best > theta
    new_lab = np.where(fire, best_lab, lab)
    new_theta = np.where(fire, best, theta)
    changed = int(fire.sum())
    return CellGrid(label=new_lab, strength=new_theta, feature=c), changed


def growcut_run(
    image: np.ndarray, seeds: SeedSpec, max_iter: int = 500
) -> GrowCutResult:
    """Run the automaton to a fixed point inside a clamped square region of
    side 2 * (r_b + margin) centered on the background circle; the returned
    mask is foreground within the region and zero outside it."""
    image = np.asarray(image)
    h, w = image.shape
    cy, cx = _center_px(seeds.y_b), _center_px(seeds.x_b)
    half = _round_radius(seeds.r_b) + ROI_MARGIN
    r0, r1 = max(cy - half, 0), min(cy + half, h)
    c0, c1 = max(cx - half, 0), min(cx + half, w)
    if r0 >= r1 or c0 >= c1:
        raise SeedingError("seed region lies outside the image")

    local = SeedSpec(
        x_f=seeds.x_f - c0,
        y_f=seeds.y_f - r0,
        r_f=seeds.r_f,
        x_b=seeds.x_b - c0,
        y_b=seeds.y_b - r0,
        r_b=seeds.r_b,
    )
    grid = rasterize_seeds(local, (r1 - r0, c1 - c0), image[r0:r1, c0:c1])
    if not (grid.label == BACKGROUND).any():
        raise SeedingError("background circle lies entirely outside the image")

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grid, changed = growcut_step(grid)
        if changed == 0:
            converged = True
            break

    mask = np.zeros((h, w), dtype=np.uint8)
    mask[r0:r1, c0:c1] = (grid.label == FOREGROUND).astype(np.uint8)
    return GrowCutResult(mask=mask, converged=converged, iterations=iterations)
