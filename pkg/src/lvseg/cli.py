"""Command-line entry point.

Verbs: synth, train, eval, measure, report. Exit code 0 on success, 2 on
a contract violation, 3 on an I/O or format error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .checkpoint import checkpoint_read
from .config import RunConfig
from .errors import ContractViolation, FormatError, MeasurementError, TrainingDiverged
from .models import ARCH_TAGS
from .report import (agreement_reports, method_anova, read_measurements_csv,
                     write_agreement_report, write_measurements_csv, write_metrics_csv)
from .training import (evaluate_model, format_summary, measure_samples, resolve_data,
                       synth, train)

EXIT_OK = 0
EXIT_CONTRACT = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lvseg",
        description="Left-ventricle segmentation, measurement, and agreement reporting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic phantom dataset")
    p_synth.add_argument("--count", type=int, default=10, help="number of subjects")
    p_synth.add_argument("--n", type=int, default=64, help="square image extent")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, help="output dataset directory")

    p_train = sub.add_parser("train", help="cross-validated training run")
    p_train.add_argument("--config", help="JSON run configuration")
    p_train.add_argument("--arch", choices=ARCH_TAGS)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--data", help="dataset directory or synthetic:<count>")
    p_train.add_argument("--out", help="output directory")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint against ground truth")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--arch", choices=ARCH_TAGS,
                        help="reject the checkpoint unless it holds this architecture")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", required=True, help="output directory for metrics.csv")

    p_measure = sub.add_parser("measure", help="geometric measurements from masks")
    p_measure.add_argument("--data", required=True)
    p_measure.add_argument("--n", type=int, default=64)
    p_measure.add_argument("--seed", type=int, default=0)
    p_measure.add_argument("--out", required=True, help="output directory")

    p_report = sub.add_parser("report", help="agreement report between measurement CSVs")
    p_report.add_argument("--auto", action="append", required=True,
                          help="automatic measurement CSV (repeat for several methods)")
    p_report.add_argument("--manual", required=True, help="manual reference CSV")
    p_report.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_synth(args) -> None:
    samples = synth(args.count, args.n, args.seed, args.out)
    print(f"wrote {len(samples)} samples ({args.count} subjects) to {args.out}")


def _cmd_train(args) -> None:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    overrides = {}
    if args.arch is not None:
        overrides["arch"] = args.arch
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.data is not None:
        overrides["data_dir"] = args.data
    if args.out is not None:
        overrides["out_dir"] = args.out
    if overrides:
        import dataclasses
        cfg = dataclasses.replace(cfg, **overrides)
    results = train(cfg)
    for r in results:
        print(f"fold {r.fold}: best validation Dice {r.best_val_dice:.4f} "
              f"({len(r.train_subjects)} train / {len(r.val_subjects)} val subjects)")
    print(f"checkpoints and logs under {cfg.out_dir}")


def _cmd_eval(args) -> None:
    model = checkpoint_read(args.checkpoint, expect_arch=args.arch)
    samples = resolve_data(args.data, model.n, args.seed)
    t0 = time.perf_counter()
    rows = evaluate_model(model, samples)
    elapsed = time.perf_counter() - t0
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(rows, out_dir / "metrics.csv")
    print(format_summary(rows))
    print(f"evaluated {len(samples)} images in {elapsed:.2f} s "
          f"({elapsed / max(len(samples), 1):.3f} s/image)")


def _cmd_measure(args) -> None:
    samples = resolve_data(args.data, args.n, args.seed)
    rows = measure_samples(samples)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_measurements_csv(rows, out_dir / "measurements.csv")
    flagged = sum(1 for r in rows if r.flag != "ok")
    print(f"measured {len(samples)} masks -> {out_dir / 'measurements.csv'}"
          + (f" ({flagged} flagged rows)" if flagged else ""))


def _cmd_report(args) -> None:
    manual = read_measurements_csv(args.manual)
    autos = {Path(p).stem if len(args.auto) > 1 else "auto": read_measurements_csv(p)
             for p in args.auto}
    first = next(iter(autos.values()))
    reports = agreement_reports(first, manual)
    tables = method_anova(autos, manual) if len(autos) >= 2 else None
    write_agreement_report(reports, args.out, tables)
    for r in reports:
        print(f"{r.parameter}: slope {r.fit.slope:.3f}, R {r.fit.r:.3f}, "
              f"bias {r.ba.bias:.3f}, RPC {r.ba.rpc:.3f}")
    print(f"report written to {args.out}")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"synth": _cmd_synth, "train": _cmd_train, "eval": _cmd_eval,
                "measure": _cmd_measure, "report": _cmd_report}
    try:
        handlers[args.command](args)
    except (ContractViolation, MeasurementError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
