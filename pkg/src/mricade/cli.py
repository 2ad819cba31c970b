"""Command-line interface.

Subcommands: synth, preprocess, train, infer, segment, evaluate, compare.
Every flag can also be supplied through ``--config FILE`` holding flat
``key=value`` lines (keys are the flag names with dashes as underscores);
explicit command-line flags win.  Exit codes: 0 success, 1 validation or
configuration error, 2 I/O or file-format error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import pipeline as pl
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import (
    ConfigError,
    FormatError,
    MricadeError,
    NumericError,
    ParseError,
    SeedingError,
    ShapeError,
    SpecError,
    StateError,
    ValidationError,
)
from .growcut import generate_seeds, growcut_run
from .imaging import (
    SEQUENCES,
    StandardizationStats,
    compute_stats,
    load_ground_truth,
    load_volume,
    peek_dims,
    save_pgm,
    save_volume,
)
from .net import Network, build_ccnn, build_dcnn
from .rng import rng_from_seed
from .synth import split_patients, synth_generate, write_dataset
from .train import TrainConfig, train


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are validation errors: exit 1
        raise _UsageError(message)


def _read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{path}: line {lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _config_tokens(cfg: dict[str, str]) -> list[str]:
    tokens: list[str] = []
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on", "1") and key in _BOOL_KEYS:
            tokens.append(flag)
        elif value.lower() in ("false", "no", "off", "0") and key in _BOOL_KEYS:
            continue
        else:
            tokens += [flag, value]
    return tokens


_BOOL_KEYS = {"no_augment", "extra_block"}


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args) -> int:
    rng = rng_from_seed(args.seed)
    patients = synth_generate(
        args.patients,
        (args.slices, args.height, args.width),
        rng,
        abnormal_frac=args.abnormal_frac,
    )
    roles = split_patients(patients, args.train_frac, rng)
    write_dataset(patients, args.out, roles)
    n_abn = sum(p.abnormal for p in patients)
    print(
        f"wrote {len(patients)} patients ({n_abn} abnormal) of "
        f"{args.slices}x{args.height}x{args.width} to {args.out}"
    )
    return 0


def _train_pids(data_dir, role: str) -> list[str]:
    pids = pl.dataset_patients(data_dir)
    split = pl.load_split(data_dir)
    if role == "all" or not split:
        return pids
    return [p for p in pids if split.get(p) == role]


def _cmd_preprocess(args) -> int:
    pids = pl.dataset_patients(args.data)
    split = pl.load_split(args.data)
    train_pids = [p for p in pids if split.get(p, "train") == "train"]
    if not train_pids:
        raise ValidationError("no training patients to compute statistics from")

    filtered = {pid: pl.median_filter_study(pl.load_study(args.data, pid)) for pid in pids}
    stats = compute_stats([filtered[p] for p in train_pids])

    os.makedirs(args.out, exist_ok=True)
    for pid in pids:
        std_study, net_input = pl.preprocess_study(
            pl.load_study(args.data, pid), stats
        )
        pdir = os.path.join(args.out, pid)
        os.makedirs(pdir, exist_ok=True)
        for seq in SEQUENCES:
            save_volume(std_study.sequences[seq], os.path.join(pdir, f"{seq}.miv1"))
        save_volume(net_input, os.path.join(pdir, "net_input.miv1"))
    with open(os.path.join(args.out, "stats.txt"), "w") as fh:
        for key, value in pl.stats_to_checkpoint(stats).items():
            fh.write(f"{key}={value!r}\n")
    for name in ("ground_truth.csv", "split.csv"):
        src = os.path.join(args.data, name)
        if os.path.exists(src):
            with open(src) as s, open(os.path.join(args.out, name), "w") as d:
                d.write(s.read())
    print(f"preprocessed {len(pids)} patients into {args.out}")
    return 0


def _load_stats_file(path) -> StandardizationStats:
    cfg = _read_config(path)
    try:
        mean = {seq: float(cfg[f"mean_{seq}"]) for seq in SEQUENCES}
        std = {seq: float(cfg[f"std_{seq}"]) for seq in SEQUENCES}
    except KeyError as exc:
        raise ConfigError(f"{path}: missing stat {exc}") from None
    return StandardizationStats(mean=mean, std=std)


def _training_arrays(data_dir, net_kind: str, pids: list[str]):
    truth = load_ground_truth(os.path.join(data_dir, "ground_truth.csv"))
    xs, ys = [], []
    for pid in pids:
        stack = load_volume(os.path.join(data_dir, pid, "net_input.miv1"))
        dims = peek_dims(os.path.join(data_dir, pid, "t1.miv1"))
        nh, nw = dims[-2], dims[-1]
        labels = {lab.slice_idx: lab for lab in truth.get(pid, [])}
        for s in range(stack.shape[0]):
            lab = labels.get(s)
            if lab is None:
                raise ValidationError(f"no ground truth for {pid} slice {s}")
            if net_kind == "ccnn":
                xs.append(stack[s])
                ys.append(1.0 if lab.label == "abnormal" else 0.0)
            elif lab.label == "abnormal":
                xs.append(stack[s])
                ys.append(
                    [
                        lab.box.x_ul * pl.NET_SIZE / nw,
                        lab.box.y_ul * pl.NET_SIZE / nh,
                        lab.box.width * pl.NET_SIZE / nw,
                        lab.box.height * pl.NET_SIZE / nh,
                    ]
                )
    if not xs:
        raise ValidationError(f"no training samples for {net_kind}")
    return np.stack(xs), np.asarray(ys, dtype=np.float32)


def _cmd_train(args) -> int:
    dropout = args.dropout if args.dropout is not None else (
        0.2 if args.net == "ccnn" else 0.5
    )
    epochs = args.epochs if args.epochs is not None else (
        50 if args.net == "ccnn" else 150
    )
    builder = build_ccnn if args.net == "ccnn" else build_dcnn
    spec = builder(
        kernel_size=args.kernel_size,
        extra_block=args.extra_block,
        leaky_alpha=args.leaky_alpha,
        dropout_p=dropout,
    )
    net = Network(spec)

    pids = _train_pids(args.data, "train")
    x, y = _training_arrays(args.data, args.net, pids)
    config = TrainConfig(
        epochs=epochs,
        batch_size=args.batch_size,
        augment=not args.no_augment,
        seed=args.seed,
        val_fraction=args.val_fraction,
    )
    extra = pl.arch_stats(
        args.net, args.kernel_size, args.extra_block, args.leaky_alpha, dropout
    )
    stats_path = os.path.join(args.data, "stats.txt")
    if os.path.exists(stats_path):
        extra.update(pl.stats_to_checkpoint(_load_stats_file(stats_path)))
    ckpt, trace = train(net, x, y, config, extra_stats=extra)
    save_checkpoint(ckpt, args.out)
    first, last = trace[0], trace[-1]
    print(
        f"trained {args.net} on {len(x)} slices for {epochs} epochs: "
        f"loss {first.train_loss:.4f} -> {last.train_loss:.4f}; wrote {args.out}"
    )
    return 0


def _pipeline_config(args) -> pl.PipelineConfig:
    return pl.PipelineConfig(
        abnormal_fraction=args.abnormal_fraction,
        decision_threshold=args.decision_threshold,
        growcut_sequence=args.sequence,
        growcut_max_iter=args.max_iter,
        seed=args.seed,
    )


def _cmd_infer(args) -> int:
    config = _pipeline_config(args)
    ccnn_ckpt = load_checkpoint(args.ccnn)
    ccnn = pl.network_from_checkpoint(ccnn_ckpt)
    stats = pl.stats_from_checkpoint(ccnn_ckpt)
    dcnn = pl.network_from_checkpoint(load_checkpoint(args.dcnn)) if args.dcnn else None

    pids = _train_pids(args.data, args.role)
    if not pids:
        raise ValidationError(f"no patients with role {args.role!r} in {args.data}")
    mask_dir = os.path.join(args.out, "masks")
    os.makedirs(mask_dir, exist_ok=True)
    reports = []
    for pid in pids:
        study = pl.load_study(args.data, pid)
        reports.append(pl.run_patient(study, ccnn, dcnn, stats, config, mask_dir))
    pl.write_run(reports, args.out)
    n_abn = sum(r.verdict == "abnormal" for r in reports)
    print(f"inferred {len(reports)} studies ({n_abn} abnormal) -> {args.out}")
    return 0


def _cmd_segment(args) -> int:
    truth = load_ground_truth(os.path.join(args.boxes))
    os.makedirs(args.out, exist_ok=True)
    written = 0
    for pid, labels in truth.items():
        study = pl.median_filter_study(pl.load_study(args.data, pid))
        image = study.sequences[args.sequence]
        for lab in labels:
            if lab.box is None:
                continue
            try:
                res = growcut_run(
                    image[lab.slice_idx], generate_seeds(lab.box), max_iter=args.max_iter
                )
            except SeedingError as exc:
                print(f"{pid} slice {lab.slice_idx}: seeding failed: {exc}")
                continue
            name = f"{pid}_{lab.slice_idx:03d}.pgm"
            save_pgm(res.mask, os.path.join(args.out, name))
            written += 1
    print(f"wrote {written} masks to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    config = pl.PipelineConfig(growcut_sequence=args.sequence)
    result = pl.evaluate_run(args.run, args.data, config)
    pl.write_eval(result, args.out)
    for key, value in result.metrics.items():
        print(f"{key}={value:.9g}")
    return 0


def _cmd_compare(args) -> int:
    def per_patient(path):
        return os.path.join(path, "per_patient.csv") if os.path.isdir(path) else path

    result, common = pl.compare_runs(
        per_patient(args.a), per_patient(args.b), metric=args.metric
    )
    lines = [
        f"metric={args.metric}",
        f"patients={len(common)}",
        f"t={result.t:.9g}",
        f"df={result.df}",
        f"p={result.p:.9g}",
        f"degenerate={int(result.degenerate)}",
    ]
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_pipeline_flags(p):
    p.add_argument("--abnormal-fraction", type=float, default=0.05,
                   help="study verdict threshold on the flagged-slice fraction")
    p.add_argument("--decision-threshold", type=float, default=0.5,
                   help="per-slice abnormal probability threshold")
    p.add_argument("--sequence", choices=SEQUENCES, default="t2",
                   help="sequence the segmenter reads")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> _Parser:
    parser = _Parser(prog="mricade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--patients", type=int, default=60)
    p.add_argument("--slices", type=int, default=8)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--width", type=int, default=120)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--abnormal-frac", type=float, default=0.65)
    p.add_argument("--train-frac", type=float, default=2 / 3)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("preprocess", help="median filter, standardize, resize")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", help="train a network on a preprocessed dataset")
    p.add_argument("--data", required=True, help="preprocessed dataset directory")
    p.add_argument("--net", choices=("ccnn", "dcnn"), required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=None,
                   help="default: 50 for ccnn, 150 for dcnn")
    p.add_argument("--batch-size", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-augment", action="store_true",
                   help="disable flip augmentation")
    p.add_argument("--dropout", type=float, default=None,
                   help="default: 0.2 for ccnn, 0.5 for dcnn")
    p.add_argument("--leaky-alpha", type=float, default=0.0,
                   help="LeakyReLU leakiness; 0 keeps plain ReLU")
    p.add_argument("--kernel-size", type=int, default=3)
    p.add_argument("--extra-block", action="store_true",
                   help="append one more conv block before the dense head")
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="run the full pipeline on raw volumes")
    p.add_argument("--data", required=True)
    p.add_argument("--ccnn", required=True, help="classifier checkpoint")
    p.add_argument("--dcnn", default=None, help="box-regressor checkpoint")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--role", choices=("all", "train", "test"), default="all")
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("segment", help="segment from given boxes only")
    p.add_argument("--data", required=True)
    p.add_argument("--boxes", required=True, help="CSV in ground-truth format")
    p.add_argument("--out", required=True)
    p.add_argument("--sequence", choices=SEQUENCES, default="t2")
    p.add_argument("--max-iter", type=int, default=500)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("evaluate", help="score a run against ground truth")
    p.add_argument("--run", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sequence", choices=SEQUENCES, default="t2")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compare", help="paired t-test between two evaluations")
    p.add_argument("--a", required=True, help="evaluation directory or per_patient.csv")
    p.add_argument("--b", required=True)
    p.add_argument("--metric", default="seg_dsc",
                   choices=("seg_dsc", "box_dsc", "slice_accuracy"))
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_compare)

    for sp in sub.choices.values():
        sp.add_argument("--config", default=None, help="key=value config file")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # pull --config first so its values become overridable defaults
        if "--config" in argv:
            cfg_path = argv[argv.index("--config") + 1]
            cfg = _read_config(cfg_path)
            head = argv[:1]  # subcommand name
            argv = head + _config_tokens(cfg) + argv[1:]
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValidationError, ParseError, SpecError, ValueError,
            SeedingError, StateError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
