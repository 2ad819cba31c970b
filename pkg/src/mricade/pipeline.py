"""End-to-end orchestration: preprocess, classify, gate on the abnormal-slice
fraction, regress boxes, seed, segment, and evaluate.

Stage order is strict: the box regressor and the segmenter only ever run
downstream of an abnormal study verdict.  Per-slice failures (invalid
regression, impossible seeding) are flagged in the report instead of
aborting the patient.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .checkpoint import Checkpoint
from .errors import ConfigError, SeedingError, ValidationError
from .growcut import generate_seeds, growcut_run
from .imaging import (
    SEQUENCES,
    BoundingBox,
    SliceLabel,
    StandardizationStats,
    Study,
    load_ground_truth,
    load_pgm,
    load_volume,
    median_filter,
    peek_dims,
    rescale_box,
    resize_bilinear,
    save_pgm,
    standardize,
)
from .metrics import (
    ConfusionCounts,
    accuracy,
    auc,
    box_mae,
    dsc,
    f_beta,
    paired_t_test,
    precision,
    rasterize_box,
    recall,
)
from .net import Network, build_ccnn, build_dcnn

NET_SIZE = 96


@dataclass
class PipelineConfig:
    abnormal_fraction: float = 0.05  # study is abnormal when strictly exceeded
    decision_threshold: float = 0.5  # slice is abnormal when prob strictly exceeds
    growcut_sequence: str = "t2"
    growcut_max_iter: int = 500
    deterministic: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.abnormal_fraction < 1.0:
            raise ConfigError("abnormal_fraction must be in (0, 1)")
        if self.growcut_sequence not in SEQUENCES:
            raise ConfigError(f"unknown sequence {self.growcut_sequence!r}")


@dataclass
class SliceResult:
    slice_idx: int
    probability: float
    predicted_label: str  # "normal" | "abnormal"
    box96: tuple[float, float, float, float] | None = None
    box: BoundingBox | None = None
    mask_path: str = ""
    flag: str = ""  # "", "detection_failed", "seeding_error", "not_converged"


@dataclass
class PatientReport:
    patient_id: str
    abnormal_fraction: float
    verdict: str  # "normal" | "abnormal"
    slices: list[SliceResult] = field(default_factory=list)


# ---------------------------------------------------------------------------
# checkpoint <-> architecture plumbing


def stats_to_checkpoint(stats: StandardizationStats) -> dict[str, float]:
    out: dict[str, float] = {}
    for seq in SEQUENCES:
        out[f"mean_{seq}"] = stats.mean[seq]
        out[f"std_{seq}"] = stats.std[seq]
    return out


def stats_from_checkpoint(ckpt: Checkpoint) -> StandardizationStats:
    try:
        mean = {seq: ckpt.stats[f"mean_{seq}"] for seq in SEQUENCES}
        std = {seq: ckpt.stats[f"std_{seq}"] for seq in SEQUENCES}
    except KeyError as exc:
        raise ConfigError(f"checkpoint lacks standardization stats: {exc}") from None
    return StandardizationStats(mean=mean, std=std)


ARCH_IDS = {"ccnn": 1.0, "dcnn": 2.0}


def arch_stats(
    arch: str, kernel_size: int, extra_block: bool, leaky_alpha: float, dropout_p: float
) -> dict[str, float]:
    return {
        "arch": ARCH_IDS[arch],
        "kernel_size": float(kernel_size),
        "extra_block": float(extra_block),
        "leaky_alpha": leaky_alpha,
        "dropout_p": dropout_p,
    }


def network_from_checkpoint(ckpt: Checkpoint) -> Network:
    """Rebuild the architecture from the checkpoint's scalar knobs and bind
    its tensors; shape disagreements surface as ConfigError."""
    arch_id = ckpt.stat("arch", 0.0)
    builders = {1.0: build_ccnn, 2.0: build_dcnn}
    if arch_id not in builders:
        raise ConfigError(f"checkpoint has unknown architecture id {arch_id}")
    builder = builders[arch_id]
    spec = builder(
        kernel_size=int(ckpt.stat("kernel_size", 3)),
        extra_block=bool(ckpt.stat("extra_block", 0.0)),
        leaky_alpha=ckpt.stat("leaky_alpha", 0.0),
        dropout_p=ckpt.stat("dropout_p", 0.2 if arch_id == 1.0 else 0.5),
    )
    net = Network(spec)
    net.load_params(ckpt.params)
    return net


# ---------------------------------------------------------------------------
# dataset directories


def dataset_patients(data_dir) -> list[str]:
    pids = [
        name
        for name in sorted(os.listdir(data_dir))
        if os.path.isfile(os.path.join(data_dir, name, "t1.miv1"))
    ]
    if not pids:
        raise ValidationError(f"{data_dir}: no patient directories found")
    return pids


def load_study(data_dir, pid: str) -> Study:
    seqs = {
        seq: load_volume(os.path.join(data_dir, pid, f"{seq}.miv1"))
        for seq in SEQUENCES
    }
    return Study(patient_id=pid, sequences=seqs)


def load_split(data_dir) -> dict[str, str]:
    path = os.path.join(data_dir, "split.csv")
    if not os.path.exists(path):
        return {}
    roles: dict[str, str] = {}
    with open(path) as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row:
                roles[row[0]] = row[1]
    return roles


# ---------------------------------------------------------------------------
# preprocessing


def preprocess_study(study: Study, stats: StandardizationStats):
    """Median-filter, standardize, and resize one study.

    Returns (standardized native study, network input (S, 4, 96, 96)).
    """
    filtered = Study(
        patient_id=study.patient_id,
        sequences={
            seq: np.stack([median_filter(sl) for sl in study.sequences[seq]])
            for seq in SEQUENCES
        },
    )
    std_study = standardize(filtered, stats)
    s_count = std_study.dims[0]
    net_input = np.empty((s_count, 4, NET_SIZE, NET_SIZE), dtype=np.float32)
    for s in range(s_count):
        for ci, seq in enumerate(SEQUENCES):
            net_input[s, ci] = resize_bilinear(
                std_study.sequences[seq][s], NET_SIZE, NET_SIZE
            )
    return std_study, net_input


def median_filter_study(study: Study) -> Study:
    return Study(
        patient_id=study.patient_id,
        sequences={
            seq: np.stack([median_filter(sl) for sl in study.sequences[seq]])
            for seq in SEQUENCES
        },
    )


# ---------------------------------------------------------------------------
# pipeline stages


def classify_study(
    net_input: np.ndarray, ccnn: Network, config: PipelineConfig
) -> tuple[np.ndarray, str]:
    """Per-slice abnormal probabilities and the study verdict; abnormal when
    the flagged fraction strictly exceeds the configured threshold."""
    probs = ccnn.forward(net_input)[:, 1]
    flagged = probs > config.decision_threshold
    fraction = float(flagged.mean())
    verdict = "abnormal" if fraction > config.abnormal_fraction else "normal"
    return probs, verdict


def detect_boxes(
    net_input: np.ndarray,
    abnormal_idx: list[int],
    dcnn: Network,
    native_dims: tuple[int, int],
):
    """Regress boxes for flagged slices; returns per-slice (raw 96-space box,
    native box or None when the regression is invalid)."""
    out: dict[int, tuple[tuple[float, float, float, float], BoundingBox | None]] = {}
    if not abnormal_idx:
        return out
    preds = dcnn.forward(net_input[abnormal_idx])
    for k, s in enumerate(abnormal_idx):
        x, y, w, h = (float(v) for v in preds[k])
        raw = (x, y, w, h)
        if w <= 0 or h <= 0 or x + w <= 0 or y + h <= 0 or x >= NET_SIZE or y >= NET_SIZE:
            out[s] = (raw, None)
            continue
        clipped = BoundingBox(
            max(x, 0.0),
            max(y, 0.0),
            min(x + w, float(NET_SIZE)) - max(x, 0.0),
            min(y + h, float(NET_SIZE)) - max(y, 0.0),
        )
        native = rescale_box(clipped, (NET_SIZE, NET_SIZE), native_dims)
        out[s] = (raw, native)
    return out


def segment_slice(
    image: np.ndarray, box: BoundingBox, config: PipelineConfig
):
    seeds = generate_seeds(box)
    return growcut_run(image, seeds, max_iter=config.growcut_max_iter)


def run_patient(
    study: Study,
    ccnn: Network,
    dcnn: Network | None,
    stats: StandardizationStats,
    config: PipelineConfig,
    mask_dir=None,
) -> PatientReport:
    """Full gate-ordered pipeline for one patient."""
    std_study, net_input = preprocess_study(study, stats)
    probs, verdict = classify_study(net_input, ccnn, config)
    flagged = [int(s) for s in np.flatnonzero(probs > config.decision_threshold)]
    report = PatientReport(
        patient_id=study.patient_id,
        abnormal_fraction=float(len(flagged) / len(probs)),
        verdict=verdict,
    )
    boxes = {}
    if verdict == "abnormal" and dcnn is not None:
        native_dims = (std_study.dims[1], std_study.dims[2])
        boxes = detect_boxes(net_input, flagged, dcnn, native_dims)

    seg_image = std_study.sequences[config.growcut_sequence]
    for s in range(len(probs)):
        res = SliceResult(
            slice_idx=s,
            probability=float(probs[s]),
            predicted_label="abnormal" if s in flagged else "normal",
        )
        if s in boxes:
            raw, native = boxes[s]
            res.box96 = raw
            if native is None:
                res.flag = "detection_failed"
            else:
                res.box = native
                try:
                    seg = segment_slice(seg_image[s], native, config)
                except SeedingError:
                    res.flag = "seeding_error"
                else:
                    if not seg.converged:
                        res.flag = "not_converged"
                    if mask_dir is not None:
                        name = f"{study.patient_id}_{s:03d}.pgm"
                        save_pgm(seg.mask, os.path.join(mask_dir, name))
                        res.mask_path = os.path.join("masks", name)
        report.slices.append(res)
    return report


# ---------------------------------------------------------------------------
# report files


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def write_run(reports: list[PatientReport], out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "slices.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "patient_id", "slice_idx", "probability", "predicted_label",
                "box96_x", "box96_y", "box96_w", "box96_h",
                "box_x", "box_y", "box_w", "box_h", "mask", "flag",
            ]
        )
        for rep in reports:
            for sl in rep.slices:
                b96 = ["", "", "", ""] if sl.box96 is None else [_fmt(v) for v in sl.box96]
                bn = ["", "", "", ""] if sl.box is None else [str(v) for v in sl.box.asint()]
                writer.writerow(
                    [rep.patient_id, sl.slice_idx, _fmt(sl.probability),
                     sl.predicted_label, *b96, *bn, sl.mask_path, sl.flag]
                )
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(f"patients={len(reports)}\n")
        fh.write(f"studies_abnormal={sum(r.verdict == 'abnormal' for r in reports)}\n")
        for rep in reports:
            fh.write(f"patient.{rep.patient_id}.verdict={rep.verdict}\n")
            fh.write(
                f"patient.{rep.patient_id}.abnormal_fraction={_fmt(rep.abnormal_fraction)}\n"
            )


def read_run_slices(run_dir) -> list[dict]:
    rows = []
    with open(os.path.join(run_dir, "slices.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalResult:
    metrics: dict[str, float]
    per_patient: dict[str, dict[str, float]]


def evaluate_run(run_dir, data_dir, config: PipelineConfig) -> EvalResult:
    """Score a pipeline run against dataset ground truth.

    Produces slice-level classification scores, box displacement (both
    normalizations, labeled) and box overlap in the network's 96x96 space,
    and segmentation overlap against reference masks per sequence.
    """
    rows = read_run_slices(run_dir)
    truth = load_ground_truth(os.path.join(data_dir, "ground_truth.csv"))

    offenders = sorted({r["patient_id"] for r in rows} - set(truth))
    if offenders:
        raise ValidationError(f"run patients missing from ground truth: {offenders}")
    by_key: dict[tuple[str, int], SliceLabel] = {}
    for pid, labels in truth.items():
        for lab in labels:
            by_key[(pid, lab.slice_idx)] = lab

    native_dims: dict[str, tuple[int, int]] = {}
    scores, labels, preds = [], [], []
    box_pred96, box_true96 = [], []
    box_dscs, seg_dscs = [], []
    per_patient: dict[str, dict[str, list]] = {}

    for row in rows:
        pid, s = row["patient_id"], int(row["slice_idx"])
        key = (pid, s)
        if key not in by_key:
            raise ValidationError(f"slice {key} missing from ground truth")
        lab = by_key[key]
        bucket = per_patient.setdefault(
            pid, {"correct": [], "box_dsc": [], "seg_dsc": []}
        )
        prob = float(row["probability"])
        pred_abn = row["predicted_label"] == "abnormal"
        true_abn = lab.label == "abnormal"
        scores.append(prob)
        labels.append(int(true_abn))
        preds.append(int(pred_abn))
        bucket["correct"].append(float(pred_abn == true_abn))

        if row["box96_x"] and true_abn:
            if pid not in native_dims:
                dims = peek_dims(os.path.join(data_dir, pid, "t1.miv1"))
                native_dims[pid] = (dims[-2], dims[-1])
            nh, nw = native_dims[pid]
            raw = tuple(float(row[f"box96_{c}"]) for c in "xywh")
            gt96 = (
                lab.box.x_ul * NET_SIZE / nw,
                lab.box.y_ul * NET_SIZE / nh,
                lab.box.width * NET_SIZE / nw,
                lab.box.height * NET_SIZE / nh,
            )
            box_pred96.append(raw)
            box_true96.append(gt96)
            if raw[2] > 0 and raw[3] > 0:
                d = dsc(
                    rasterize_box(BoundingBox(*raw), (NET_SIZE, NET_SIZE)),
                    rasterize_box(BoundingBox(*gt96), (NET_SIZE, NET_SIZE)),
                ).value
                box_dscs.append(d)
                bucket["box_dsc"].append(d)

        if row["mask"] and true_abn:
            mask = load_pgm(os.path.join(run_dir, row["mask"])) > 0
            gt_mask = load_pgm(os.path.join(data_dir, "masks", f"{pid}_{s:03d}.pgm")) > 0
            d = dsc(mask, gt_mask).value
            seg_dscs.append(d)
            bucket["seg_dsc"].append(d)

    counts = ConfusionCounts.from_predictions(preds, labels)
    metrics: dict[str, float] = {
        "n_slices": float(len(rows)),
        "slice_accuracy": accuracy(counts).value,
        "slice_precision": precision(counts).value,
        "slice_recall": recall(counts).value,
        "slice_f1": f_beta(counts).value,
    }
    if 0 < sum(labels) < len(labels):
        metrics["slice_auc"] = auc(scores, labels)
    if box_pred96:
        f = np.array(box_pred96)
        y = np.array(box_true96)
        mae_tot, sd_tot = box_mae(f, y, per_coordinate=False)
        mae_pc, sd_pc = box_mae(f, y, per_coordinate=True)
        metrics.update(
            {
                "n_boxes": float(len(box_pred96)),
                "box_mae_total": mae_tot,
                "box_mae_total_sd": sd_tot,
                "box_mae_per_coord": mae_pc,
                "box_mae_per_coord_sd": sd_pc,
            }
        )
    if box_dscs:
        metrics["box_dsc"] = float(np.mean(box_dscs))
    if seg_dscs:
        metrics[f"seg_dsc_{config.growcut_sequence}"] = float(np.mean(seg_dscs))
        metrics["n_masks"] = float(len(seg_dscs))

    per_patient_out: dict[str, dict[str, float]] = {}
    for pid, bucket in per_patient.items():
        entry = {"slice_accuracy": float(np.mean(bucket["correct"]))}
        if bucket["box_dsc"]:
            entry["box_dsc"] = float(np.mean(bucket["box_dsc"]))
        if bucket["seg_dsc"]:
            entry["seg_dsc"] = float(np.mean(bucket["seg_dsc"]))
        per_patient_out[pid] = entry
    return EvalResult(metrics=metrics, per_patient=per_patient_out)


def write_eval(result: EvalResult, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.txt"), "w") as fh:
        for key, value in result.metrics.items():
            fh.write(f"{key}={_fmt(value)}\n")
    cols = ["slice_accuracy", "box_dsc", "seg_dsc"]
    with open(os.path.join(out_dir, "per_patient.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", *cols])
        for pid in sorted(result.per_patient):
            entry = result.per_patient[pid]
            writer.writerow([pid, *[_fmt(entry[c]) if c in entry else "" for c in cols]])


def compare_runs(per_patient_a, per_patient_b, metric: str = "seg_dsc"):
    """Paired t-test between two evaluation outputs on a per-patient metric."""

    def read(path):
        out = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                if row.get(metric):
                    out[row["patient_id"]] = float(row[metric])
        return out

    a, b = read(per_patient_a), read(per_patient_b)
    common = sorted(set(a) & set(b))
    missing = sorted(set(a) ^ set(b))
    if not common or len(common) < 2:
        raise ValidationError(
            f"need at least two aligned patients with metric {metric!r}; "
            f"unpaired: {missing}"
        )
    return paired_t_test([a[p] for p in common], [b[p] for p in common]), common
