"""Flip augmentation for channel-first images and their bounding boxes."""

from __future__ import annotations

import numpy as np

AXES = ("horizontal", "vertical")


def flip_augment(image: np.ndarray, box=None, axis: str = "horizontal"):
    """Mirror ``image`` (C, H, W) about the given axis; map ``box`` with it.

    A horizontal flip mirrors left/right, so x_ul' = W - x_ul - width with y
    untouched; a vertical flip is the symmetric map on y.  ``box`` is any
    4-sequence (x_ul, y_ul, width, height); returns (image', box').
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    h, w = image.shape[-2], image.shape[-1]
    if axis == "horizontal":
        flipped = image[..., ::-1]
    else:
        flipped = image[..., ::-1, :]

    new_box = None
    if box is not None:
        x, y, bw, bh = (float(v) for v in box)
        if bw <= 0 or bh <= 0 or x < 0 or y < 0 or x + bw > w or y + bh > h:
            raise ValueError(f"box {box} does not lie inside a {h}x{w} image")
        if axis == "horizontal":
            new_box = (w - x - bw, y, bw, bh)
        else:
            new_box = (x, h - y - bh, bw, bh)
    return np.ascontiguousarray(flipped), new_box
