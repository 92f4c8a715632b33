"""Batch-experiment command line front end.

Subcommands: generate, train, evaluate, rollout, kf-baseline,
trace-emulate, trace-ingest.  Common flags: --config, --seed, --out,
--threads, --check.  Exit codes: 0 success, 1 usage/config error,
2 data/format error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import chanmodel, dataset, evalsuite, pipeline
from .config import ExperimentConfig, default_config, load_config
from .errors import (
    ChandynError,
    ConfigurationError,
    DataError,
    DegenerateChannelError,
    DegenerateModelError,
    FormatError,
    LineageError,
    ShapeError,
    TraceParseError,
    TrainingError,
    UnboundedCoherenceError,
)
from .neuralnet import (
    ModelSpec,
    TrainConfig,
    build_model,
    load_checkpoint,
    samples_to_arrays,
    save_checkpoint,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        cfg["model.epochs"] = args.epochs
    return cfg


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})


def _check_csv(path, fieldnames):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != fieldnames:
            raise FormatError(f"{path}: header {reader.fieldnames} != {fieldnames}")
        for row in reader:
            for key in fieldnames:
                if row[key] is None:
                    raise FormatError(f"{path}: missing column {key}")


def cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    manifest = pipeline.generate_dataset(cfg, cfg["seed"], args.out,
                                         threads=args.threads)
    print(f"wrote dataset to {args.out}")
    print(f"  samples: {manifest['sample_count']} "
          f"(train {len(manifest['splits']['train'])} drops, "
          f"val {len(manifest['splits']['val'])} drops)")
    coh = manifest["coherence_time_ms"]
    print(f"  coherence_time_ms: {coh if coh is not None else 'unbounded (static)'}")
    if args.check:
        loaded = pipeline.load_manifest(args.out)
        for split in loaded["files"]:
            pipeline.read_split(args.out, loaded, split)
        print("  check: dataset files and manifest validate")
    return EXIT_OK


def _persistence_l1(samples) -> float:
    vals = [float(np.mean(np.abs(s.states[-2] - s.states[-1]))) for s in samples]
    return float(np.mean(vals))


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    manifest = pipeline.load_manifest(args.data)
    data_cfg = pipeline.manifest_config(manifest)
    train_samples = pipeline.read_split(args.data, manifest, "train")
    val_samples = (pipeline.read_split(args.data, manifest, "val")
                   if "val" in manifest["files"] else [])

    grid = (manifest["grid"]["T"], manifest["grid"]["F"])
    spec = ModelSpec(
        variant=cfg["model.variant"], arch=cfg["model.arch"],
        depth=cfg["model.depth"], base_channels=cfg["model.base_channels"],
        memory=manifest["memory"], grid=grid,
        parameter_budget=cfg["model.parameter_budget"],
        leaky_slope=cfg["model.leaky_slope"],
        dropout_rate=cfg["model.dropout_rate"],
    )
    model = build_model(spec, seed=cfg["seed"])
    print(f"built {spec.variant}/{spec.arch} model: "
          f"{model.num_parameters} parameters")

    x_train, y_train, _ = samples_to_arrays(train_samples, model.spec)
    if val_samples:
        x_val, _, val_block = samples_to_arrays(val_samples, model.spec)
    else:
        x_val = np.zeros((0, *model.in_shape), dtype=np.float32)
        val_block = np.zeros((0, *grid), dtype=np.float32)

    tc = TrainConfig(
        epochs=cfg["model.epochs"], batch_size=cfg["model.batch_size"],
        learning_rate=cfg["model.learning_rate"], beta1=cfg["model.beta1"],
        beta2=cfg["model.beta2"], adam_epsilon=cfg["model.adam_epsilon"],
        seed=cfg["seed"],
    )
    report = train(model, x_train, y_train, x_val, val_block, tc)

    extra = {"lineage": manifest["lineage"], "trained_split": "train",
             "epochs": cfg["model.epochs"], "seed": cfg["seed"],
             "data_config_seed": data_cfg["seed"]}
    save_checkpoint(model, args.out_checkpoint,
                    optimizer=getattr(model, "_optimizer", None), extra=extra)
    csv_path = args.out_csv or (os.path.splitext(args.out_checkpoint)[0]
                                + "_training.csv")
    report.to_csv(csv_path)

    aged = _persistence_l1(val_samples) if val_samples else float("nan")
    print(f"final train l1: {report.final_train_l1!r}")
    print(f"final val l1:   {report.final_val_l1!r}")
    print(f"aged-CSI l1:    {aged!r} (persistence baseline on val split)")
    print(f"checkpoint: {args.out_checkpoint}")
    print(f"training csv: {csv_path}")
    if args.check:
        load_checkpoint(args.out_checkpoint)
        _check_csv(csv_path, ["epoch", "train_l1", "val_l1"])
        print("check: checkpoint and csv validate")
    return EXIT_OK


def _load_models(manifest, checkpoint_paths, split):
    models = {}
    for path in checkpoint_paths:
        model, _, extra = load_checkpoint(path)
        pipeline.check_lineage(manifest, extra, split)
        name = os.path.splitext(os.path.basename(path))[0]
        models[name] = model
    return models


def cmd_evaluate(args) -> int:
    manifest = pipeline.load_manifest(args.data)
    cfg = pipeline.manifest_config(manifest)
    if args.config:
        override = load_config(args.config)
        for key in ("eval.rho_db", "eval.epsilon", "eval.pooling", "kf.order",
                    "kf.window", "kf.measurement_noise"):
            cfg[key] = override[key]
    models = _load_models(manifest, args.checkpoint, args.split)
    drop_ids = manifest["splits"][args.split]
    if not drop_ids:
        raise DataError(f"split {args.split!r} holds no drops")

    windows = pipeline.collect_windows(cfg, manifest["seed"], drop_ids,
                                       max_windows=args.max_windows)
    result = pipeline.evaluate_predictors(cfg, windows, models,
                                          run_kf=not args.no_kf,
                                          threads=args.threads)

    os.makedirs(args.report_dir, exist_ok=True)
    mae_rows = [{"mode": mode, "l1": l1, "n_windows": result["n_windows"]}
                for mode, l1 in result["mae"].items()]
    mae_path = os.path.join(args.report_dir, "mae_comparison.csv")
    _write_csv(mae_path, ["mode", "l1", "n_windows"], mae_rows)

    report = result["report"]
    report.to_csv(os.path.join(args.report_dir, "capacity_report.csv"))
    report.to_json(os.path.join(args.report_dir, "capacity_report.json"))
    for mode, samples in result["capacity_samples"].items():
        safe = mode.replace(":", "_")
        evalsuite.dump_capacity_cdf(
            samples, os.path.join(args.report_dir, f"capacity_cdf_{safe}.csv"))

    print(f"evaluated {result['n_windows']} windows from split {args.split!r}")
    for row in mae_rows:
        print(f"  l1[{row['mode']}] = {row['l1']!r}")
    for mode in report.capacities:
        print(f"  C_eps[{mode}] = {report.capacities[mode]!r}")
    if args.check:
        _check_csv(mae_path, ["mode", "l1", "n_windows"])
        _check_csv(os.path.join(args.report_dir, "capacity_report.csv"),
                   ["mode", "epsilon", "rho_db", "c_eps_bits", "loss_pct",
                    "reduction_pct", "n_samples"])
        with open(os.path.join(args.report_dir, "capacity_report.json")) as fh:
            json.load(fh)
        print("check: report files validate")
    return EXIT_OK


def cmd_rollout(args) -> int:
    manifest = pipeline.load_manifest(args.data)
    cfg = pipeline.manifest_config(manifest)
    model = None
    if not args.oracle:
        models = _load_models(manifest, [args.checkpoint], args.split)
        model = next(iter(models.values()))
    drop_ids = manifest["splits"][args.split]
    windows = pipeline.collect_windows(cfg, manifest["seed"], drop_ids,
                                       max_windows=args.max_windows)
    rows = pipeline.rollout_per_step_mae(cfg, windows, model, args.steps,
                                         oracle=args.oracle)
    _write_csv(args.out, ["step", "mean_l1", "n_windows"], rows)
    for row in rows:
        print(f"step {row['step']}: mean_l1 = {row['mean_l1']!r} "
              f"({row['n_windows']} windows)")
    if args.check:
        _check_csv(args.out, ["step", "mean_l1", "n_windows"])
        print("check: rollout csv validates")
    return EXIT_OK


def cmd_kf_baseline(args) -> int:
    cfg = _load_cfg(args)
    _, val_ids = pipeline.split_drop_ids(cfg)
    drop_ids = val_ids or [0]
    windows = pipeline.collect_windows(cfg, cfg["seed"], drop_ids,
                                       max_windows=args.max_windows)
    result = pipeline.evaluate_predictors(cfg, windows, models={},
                                          run_kf=True, threads=args.threads)
    rows = [{"mode": mode, "l1": l1, "n_windows": result["n_windows"]}
            for mode, l1 in result["mae"].items()]
    _write_csv(args.out, ["mode", "l1", "n_windows"], rows)
    for row in rows:
        print(f"l1[{row['mode']}] = {row['l1']!r}")
    return EXIT_OK


def cmd_trace_emulate(args) -> int:
    cfg = _load_cfg(args)
    drop = chanmodel.sample_drop(cfg.drop_config(), cfg["seed"])
    trace = dataset.emulate_srs_trace(
        drop, num_snapshots=cfg["trace.snapshots"], period=cfg["trace.period_s"],
        stride=cfg["trace.stride"], snr_db=cfg["trace.snr_db"])
    dataset.export_trace_csv(trace, args.out)
    print(f"wrote {trace.snapshots.shape[0]} snapshots x "
          f"{trace.snapshots.shape[1]} ports x {trace.snapshots.shape[2]} "
          f"subcarriers to {args.out}")
    if args.check:
        dataset.ingest_trace_csv(args.out)
        print("check: trace csv validates")
    return EXIT_OK


def cmd_trace_ingest(args) -> int:
    cfg = _load_cfg(args)
    trace = dataset.ingest_trace_csv(args.infile)
    n_snap, n_port, n_sc = trace.snapshots.shape
    print(f"ingested {n_snap} snapshots x {n_port} ports x {n_sc} subcarriers "
          f"(period {trace.period}s, stride {trace.subcarrier_stride})")
    if args.out:
        m = cfg["dataset.memory"]
        samples = dataset.trace_to_samples(trace, m=m)
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "trace.chds")
        dataset.write_dataset(samples, path)
        print(f"wrote {len(samples)} samples to {path}")
        if args.check:
            dataset.read_dataset(path)
            print("check: dataset file validates")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="chandyn",
                     description="wireless channel dynamics workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="key=value experiment config file")
        if seed:
            p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="opt-in parallelism for drop synthesis / KF fan-out")
        p.add_argument("--check", action="store_true",
                       help="re-validate emitted files after writing")

    p = sub.add_parser("generate", help="synthesize a training/eval dataset")
    common(p)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a prediction model")
    common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-csv", help="training curve csv (default: beside checkpoint)")
    p.add_argument("--epochs", type=int, help="override model.epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score predictors and CSI modes")
    common(p, seed=False)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", action="append", default=[],
                   help="model checkpoint (repeatable)")
    p.add_argument("--report-dir", required=True)
    p.add_argument("--split", default="val", choices=("train", "val"))
    p.add_argument("--no-kf", action="store_true", help="skip the KF baseline")
    p.add_argument("--max-windows", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rollout", help="multi-step autoregressive prediction")
    common(p, seed=False)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--steps", type=int, default=4)
    p.add_argument("--out", required=True, help="per-step MAE csv")
    p.add_argument("--split", default="val", choices=("train", "val"))
    p.add_argument("--oracle", action="store_true",
                   help="debug: predict ground truth instead of the model")
    p.add_argument("--max-windows", type=int)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("kf-baseline", help="run the AR/Kalman baseline alone")
    common(p)
    p.add_argument("--out", required=True, help="MAE csv")
    p.add_argument("--max-windows", type=int)
    p.set_defaults(func=cmd_kf_baseline)

    p = sub.add_parser("trace-emulate", help="synthesize an SRS trace csv")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trace_emulate)

    p = sub.add_parser("trace-ingest", help="ingest a measured trace csv")
    common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="optional dataset directory to write")
    p.set_defaults(func=cmd_trace_ingest)
    return parser


_EXIT_CODES = (
    (ConfigurationError, EXIT_USAGE),
    (TraceParseError, EXIT_DATA),
    (FormatError, EXIT_DATA),
    (DataError, EXIT_DATA),
    (LineageError, EXIT_DATA),
    (ShapeError, EXIT_DATA),
    (TrainingError, EXIT_NUMERICAL),
    (DegenerateModelError, EXIT_NUMERICAL),
    (DegenerateChannelError, EXIT_NUMERICAL),
    (UnboundedCoherenceError, EXIT_NUMERICAL),
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ChandynError as exc:
        for klass, code in _EXIT_CODES:
            if isinstance(exc, klass):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
