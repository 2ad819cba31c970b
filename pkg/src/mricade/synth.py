"""Synthetic study generator for desk-scale experiments.

Each study is a smooth per-sequence background plus pixel noise; abnormal
patients carry one bright ellipsoidal lesion with per-sequence contrast
offsets over a contiguous slice range.  The generator records its own
parameters and the exact lesion masks so downstream results can be scored
against an analytic truth.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .imaging import (
    SEQUENCES,
    BoundingBox,
    SliceLabel,
    Study,
    save_ground_truth,
    save_pgm,
    save_volume,
)

# Background intensity per sequence; lesion contrast offsets are several
# noise sigmas so the lesion is detectable on every channel.
_BASE_LEVEL = {"t1": 20.0, "t1c": 22.0, "t2": 25.0, "t2flair": 24.0}
_CONTRAST = {"t1": -4.0, "t1c": 4.0, "t2": 7.0, "t2flair": 6.5}
NOISE_SIGMA = 1.0

# Lesion cross-sections thinner than this fraction of the full radius are
# not drawn, so every abnormal slice has a workably sized target.
_MIN_SECTION = 0.6


@dataclass(frozen=True)
class LesionTruth:
    """Generator parameters of one lesion, kept for oracle checks."""

    center: tuple[float, float, float]  # (z, y, x)
    radii: tuple[float, float, float]  # (rz, ry, rx)
    contrast: dict[str, float]


@dataclass
class SynthPatient:
    study: Study
    labels: list[SliceLabel]
    truth: LesionTruth | None = None
    masks: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def abnormal(self) -> bool:
        return self.truth is not None


def _smooth_field(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Low-frequency intensity field: a tilted plane plus two broad bumps."""
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    yy /= h
    xx /= w
    out = rng.uniform(-1, 1) * yy + rng.uniform(-1, 1) * xx
    for _ in range(2):
        cy, cx = rng.uniform(0.2, 0.8, size=2)
        sig = rng.uniform(0.25, 0.5)
        amp = rng.uniform(-1.0, 1.0)
        out += amp * np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sig**2)))
    return out


def _section_mask(truth: LesionTruth, s: int, h: int, w: int) -> np.ndarray | None:
    cz, cy, cx = truth.center
    rz, ry, rx = truth.radii
    dz = (s - cz) / rz
    if abs(dz) >= 1.0:
        return None
    f = float(np.sqrt(1.0 - dz * dz))
    if f < _MIN_SECTION:
        return None
    yy, xx = np.mgrid[0:h, 0:w]
    mask = ((yy - cy) / (ry * f)) ** 2 + ((xx - cx) / (rx * f)) ** 2 <= 1.0
    return mask if mask.any() else None


def _tight_box(mask: np.ndarray) -> BoundingBox:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return BoundingBox(
        int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1)
    )


def synth_generate(
    n_patients: int,
    dims: tuple[int, int, int],
    rng: np.random.Generator,
    abnormal_frac: float = 0.65,
) -> list[SynthPatient]:
    """Generate ``n_patients`` studies of shape ``dims`` = (slices, H, W)."""
    if n_patients < 1:
        raise ValueError("need at least one patient")
    s_count, h, w = dims
    n_abn = int(round(n_patients * abnormal_frac))
    roles = np.zeros(n_patients, dtype=bool)
    roles[rng.permutation(n_patients)[:n_abn]] = True

    patients: list[SynthPatient] = []
    for i in range(n_patients):
        pid = f"p{i:03d}"
        truth = None
        if roles[i]:
            center = (
                rng.uniform(0.35, 0.65) * s_count,
                rng.uniform(0.32, 0.68) * h,
                rng.uniform(0.32, 0.68) * w,
            )
            radii = (
                rng.uniform(0.28, 0.42) * s_count,
                rng.uniform(0.12, 0.18) * h,
                rng.uniform(0.12, 0.18) * w,
            )
            contrast = {
                seq: _CONTRAST[seq] * rng.uniform(0.9, 1.15) for seq in SEQUENCES
            }
            truth = LesionTruth(center=center, radii=radii, contrast=contrast)

        masks: dict[int, np.ndarray] = {}
        if truth is not None:
            for s in range(s_count):
                m = _section_mask(truth, s, h, w)
                if m is not None:
                    masks[s] = m

        sequences: dict[str, np.ndarray] = {}
        for seq in SEQUENCES:
            field2d = _BASE_LEVEL[seq] + 1.5 * _smooth_field(h, w, rng)
            vol = field2d[None, :, :] + rng.normal(0.0, NOISE_SIGMA, size=(s_count, h, w))
            for s, m in masks.items():
                vol[s][m] += truth.contrast[seq]
            sequences[seq] = vol.astype(np.float32)

        labels = []
        for s in range(s_count):
            if s in masks:
                labels.append(SliceLabel(s, "abnormal", _tight_box(masks[s])))
            else:
                labels.append(SliceLabel(s, "normal"))
        patients.append(
            SynthPatient(
                study=Study(patient_id=pid, sequences=sequences),
                labels=labels,
                truth=truth,
                masks=masks,
            )
        )
    return patients


def split_patients(
    patients: list[SynthPatient], train_frac: float, rng: np.random.Generator
) -> dict[str, str]:
    """Stratified train/test roles so both splits see both classes."""
    roles: dict[str, str] = {}
    for group in (True, False):
        ids = [p.study.patient_id for p in patients if p.abnormal == group]
        order = rng.permutation(len(ids))
        n_train = int(round(len(ids) * train_frac))
        for rank, j in enumerate(order):
            roles[ids[j]] = "train" if rank < n_train else "test"
    return roles


def write_dataset(
    patients: list[SynthPatient], out_dir, roles: dict[str, str] | None = None
) -> None:
    """Materialize studies as MIV1 volumes plus ground-truth CSV, lesion
    masks (PGM), and an optional split.csv."""
    os.makedirs(out_dir, exist_ok=True)
    mask_dir = os.path.join(out_dir, "masks")
    os.makedirs(mask_dir, exist_ok=True)
    labels: dict[str, list[SliceLabel]] = {}
    for pat in patients:
        pid = pat.study.patient_id
        pdir = os.path.join(out_dir, pid)
        os.makedirs(pdir, exist_ok=True)
        for seq in SEQUENCES:
            save_volume(pat.study.sequences[seq], os.path.join(pdir, f"{seq}.miv1"))
        labels[pid] = pat.labels
        for s, m in pat.masks.items():
            save_pgm(m, os.path.join(mask_dir, f"{pid}_{s:03d}.pgm"))
    save_ground_truth(labels, os.path.join(out_dir, "ground_truth.csv"))
    if roles is not None:
        with open(os.path.join(out_dir, "split.csv"), "w") as fh:
            fh.write("patient_id,role\n")
            for pid in sorted(roles):
                fh.write(f"{pid},{roles[pid]}\n")
