"""Volume and ground-truth I/O plus slice preprocessing.

Volumes travel as MIV1 files (little-endian): magic "MIV1", u32 version=1,
u32 ndim, u32 dims[ndim], raw float32 payload row-major.  Ground truth is a
CSV with header ``patient_id,slice_idx,label,x_ul,y_ul,width,height``; normal
rows leave the box fields empty.  Masks and slice dumps are binary PGM (P5).

Bias-field correction is an external preprocessing step; volumes entering
this pipeline are assumed already corrected (``bias_field_stub`` marks the
slot where such a correction would run).
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError, ParseError, ValidationError

SEQUENCES = ("t1", "t1c", "t2", "t2flair")

MIV_MAGIC = b"MIV1"
MIV_VERSION = 1
_MAX_EXTENT = 1 << 24  # dim sanity bound against corrupt headers


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle, top-left origin: x_ul, y_ul, width, height."""

    x_ul: float
    y_ul: float
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"degenerate box {self.astuple()}")

    def astuple(self):
        return (self.x_ul, self.y_ul, self.width, self.height)

    def asint(self) -> tuple[int, int, int, int]:
        return tuple(int(v) for v in self.astuple())


@dataclass(frozen=True)
class SliceLabel:
    slice_idx: int
    label: str  # "normal" | "abnormal"
    box: BoundingBox | None = None

    def __post_init__(self):
        if self.label not in ("normal", "abnormal"):
            raise ValidationError(f"unknown slice label {self.label!r}")
        if (self.label == "abnormal") != (self.box is not None):
            raise ValidationError(
                f"slice {self.slice_idx}: abnormal labels and boxes must co-occur"
            )


@dataclass
class Study:
    """One patient: four aligned sequence volumes, each (S, H, W)."""

    patient_id: str
    sequences: dict[str, np.ndarray]

    def __post_init__(self):
        if tuple(self.sequences) != SEQUENCES:
            raise ValidationError(
                f"study {self.patient_id}: sequences must be {SEQUENCES} in order"
            )
        dims = {seq: v.shape for seq, v in self.sequences.items()}
        if len(set(dims.values())) != 1:
            raise ValidationError(f"study {self.patient_id}: unequal dims {dims}")
        for seq, v in self.sequences.items():
            if not np.all(np.isfinite(v)):
                raise ValidationError(
                    f"study {self.patient_id}: non-finite intensities in {seq}"
                )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.sequences["t1"].shape

    def stack(self, slice_idx: int) -> np.ndarray:
        """(4, H, W) channel stack for one slice, sequence order fixed."""
        return np.stack([self.sequences[s][slice_idx] for s in SEQUENCES])


@dataclass(frozen=True)
class StandardizationStats:
    """Per-sequence scalar mean/std over all training pixels."""

    mean: dict[str, float]
    std: dict[str, float]

    def __post_init__(self):
        for seq in SEQUENCES:
            if seq not in self.mean or seq not in self.std:
                raise ConfigError(f"standardization stats missing sequence {seq!r}")
            if self.std[seq] <= 0:
                raise ConfigError(f"non-positive std for sequence {seq!r}")


# ---------------------------------------------------------------------------
# MIV1 volumes


def save_volume(tensor: np.ndarray, path) -> None:
    data = np.ascontiguousarray(tensor, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MIV_MAGIC)
        fh.write(struct.pack("<II", MIV_VERSION, data.ndim))
        fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
        fh.write(data.tobytes())


def _read_miv_header(fh, path):
    head = fh.read(12)
    if len(head) < 12:
        raise FormatError(f"{path}: truncated header")
    if head[:4] != MIV_MAGIC:
        raise FormatError(f"{path}: bad magic, not a MIV1 volume")
    version, ndim = struct.unpack("<II", head[4:])
    if version != MIV_VERSION:
        raise FormatError(f"{path}: unsupported volume version {version}")
    raw = fh.read(4 * ndim)
    if len(raw) < 4 * ndim:
        raise FormatError(f"{path}: truncated dims")
    dims = struct.unpack(f"<{ndim}I", raw)
    if any(d < 1 or d > _MAX_EXTENT for d in dims):
        raise FormatError(f"{path}: implausible dims {dims}")
    return dims


def load_volume(path) -> np.ndarray:
    with open(path, "rb") as fh:
        dims = _read_miv_header(fh, path)
        count = math.prod(dims)
        raw = fh.read(4 * count + 1)
    if len(raw) < 4 * count:
        raise FormatError(f"{path}: truncated payload")
    if len(raw) > 4 * count:
        raise FormatError(f"{path}: trailing bytes after payload")
    return np.frombuffer(raw[: 4 * count], dtype="<f4").reshape(dims).copy()


def peek_dims(path) -> tuple[int, ...]:
    """Volume dims without reading the payload."""
    with open(path, "rb") as fh:
        return _read_miv_header(fh, path)


# ---------------------------------------------------------------------------
# PGM masks


def save_pgm(image: np.ndarray, path) -> None:
    """8-bit binary PGM; boolean/binary masks are written as {0, 255}."""
    arr = np.asarray(image)
    if arr.dtype == bool or (arr.size and arr.max() <= 1):
        arr = arr.astype(np.uint8) * 255
    else:
        arr = np.clip(arr, 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    parts = blob.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    try:
        w, h = (int(v) for v in parts[1].split())
        maxval = int(parts[2])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if maxval != 255 or len(parts[3]) < w * h:
        raise FormatError(f"{path}: bad or truncated PGM payload")
    return np.frombuffer(parts[3][: w * h], dtype=np.uint8).reshape(h, w).copy()


# ---------------------------------------------------------------------------
# preprocessing


def bias_field_stub(volume: np.ndarray) -> np.ndarray:
    """Placeholder for external bias-field correction; identity pass-through."""
    return volume


def median_filter(img: np.ndarray) -> np.ndarray:
    """3x3 median with replicated borders; removes impulse noise, keeps edges."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D slice, got {img.shape}")
    p = np.pad(img, 1, mode="edge")
    h, w = img.shape
    stack = np.stack(
        [p[dy : dy + h, dx : dx + w] for dy in range(3) for dx in range(3)]
    )
    return np.median(stack, axis=0).astype(img.dtype, copy=False)


def compute_stats(studies: list[Study]) -> StandardizationStats:
    """Per-sequence mean/std pooled over every pixel of the given studies."""
    if not studies:
        raise ConfigError("no training studies to compute statistics from")
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for seq in SEQUENCES:
        total, sq, count = 0.0, 0.0, 0
        for study in studies:
            v = study.sequences[seq].astype(np.float64, copy=False)
            total += float(v.sum())
            sq += float((v * v).sum())
            count += v.size
        m = total / count
        var = max(sq / count - m * m, 0.0)
        if var == 0.0:
            raise ConfigError(f"zero intensity variance in sequence {seq!r}")
        mean[seq], std[seq] = m, float(np.sqrt(var))
    return StandardizationStats(mean=mean, std=std)


def standardize(study: Study, stats: StandardizationStats) -> Study:
    """Map every sequence through x -> (x - mean) / std."""
    out = {
        seq: ((study.sequences[seq] - stats.mean[seq]) / stats.std[seq]).astype(
            np.float32
        )
        for seq in SEQUENCES
    }
    return Study(patient_id=study.patient_id, sequences=out)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resampling of a 2-D slice."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"degenerate target dims {out_h}x{out_w}")
    img = np.asarray(img)
    h, w = img.shape

    def coords(n_in, n_out):
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out)
        return np.arange(n_out) * ((n_in - 1) / (n_out - 1))

    ys, xs = coords(h, out_h), coords(w, out_w)
    y0 = np.minimum(ys.astype(int), h - 1)
    x0 = np.minimum(xs.astype(int), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = img[np.ix_(y0, x0)]
    b = img[np.ix_(y0, x1)]
    c = img[np.ix_(y1, x0)]
    d = img[np.ix_(y1, x1)]
    top = a + (b - a) * fx  # a + (b-a)f keeps constant images exactly constant
    bot = c + (d - c) * fx
    return (top + (bot - top) * fy).astype(img.dtype, copy=False)


def _round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


def rescale_box(box: BoundingBox, from_dims, to_dims) -> BoundingBox:
    """Scale a box between image sizes: coordinates multiplied by (to / from)
    per axis, rounded half-up, then clamped fully inside the target."""
    fh, fw = from_dims
    th, tw = to_dims
    if min(fh, fw, th, tw) < 1:
        raise ValueError(f"degenerate dims {from_dims} -> {to_dims}")
    sy, sx = th / fh, tw / fw
    x = _round_half_up(box.x_ul * sx)
    y = _round_half_up(box.y_ul * sy)
    w = _round_half_up(box.width * sx)
    h = _round_half_up(box.height * sy)
    w, h = max(w, 1), max(h, 1)
    x = min(max(x, 0), tw - 1)
    y = min(max(y, 0), th - 1)
    w = min(w, tw - x)
    h = min(h, th - y)
    return BoundingBox(x, y, w, h)


# ---------------------------------------------------------------------------
# ground truth CSV

GT_HEADER = ["patient_id", "slice_idx", "label", "x_ul", "y_ul", "width", "height"]


def load_ground_truth(path, dims=None) -> dict[str, list[SliceLabel]]:
    """Parse per-slice labels; ``dims`` (H, W) enables box bounds validation."""
    out: dict[str, list[SliceLabel]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header != GT_HEADER:
            raise ParseError(f"{path}: line 1: bad header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(GT_HEADER):
                raise ParseError(f"{path}: line {lineno}: expected 7 fields, got {len(row)}")
            pid, idx_s, label = row[0], row[1], row[2]
            box_fields = row[3:]
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: bad slice index {idx_s!r}") from None
            if label == "normal":
                if any(f.strip() for f in box_fields):
                    raise ValidationError(
                        f"{path}: line {lineno}: normal slice carries box fields"
                    )
                entry = SliceLabel(idx, "normal")
            elif label == "abnormal":
                try:
                    x, y, w, h = (int(f) for f in box_fields)
                except ValueError:
                    raise ParseError(
                        f"{path}: line {lineno}: abnormal slice needs 4 integer box fields"
                    ) from None
                try:
                    box = BoundingBox(x, y, w, h)
                except ValidationError as exc:
                    raise ValidationError(f"{path}: line {lineno}: {exc}") from None
                if dims is not None:
                    hh, ww = dims
                    if x < 0 or y < 0 or x + w > ww or y + h > hh:
                        raise ValidationError(
                            f"{path}: line {lineno}: box {box.astuple()} outside {hh}x{ww}"
                        )
                entry = SliceLabel(idx, "abnormal", box)
            else:
                raise ParseError(f"{path}: line {lineno}: unknown label {label!r}")
            out.setdefault(pid, []).append(entry)
    return out


def save_ground_truth(labels: dict[str, list[SliceLabel]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GT_HEADER)
        for pid in labels:
            for lab in labels[pid]:
                if lab.box is None:
                    writer.writerow([pid, lab.slice_idx, lab.label, "", "", "", ""])
                else:
                    writer.writerow([pid, lab.slice_idx, lab.label, *lab.box.asint()])
