"""Command line entry point: ``repose run | validate | metrics``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import metrics, pipeline, preprocess, raster
from .backends import BackendError
from .config import PRESETS, ConfigError, PipelineConfig, preset_stages
from .prompts import ALL_PROMPTS


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    changes = {}
    if args.preset:
        changes["stages"] = preset_stages(args.preset)
    if args.out:
        changes["output_dir"] = args.out
    if args.seed is not None:
        changes["seed"] = args.seed
    return cfg.with_overrides(**changes) if changes else cfg


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.print_prompts:
        for name, text in ALL_PROMPTS.items():
            print(f"[{name}]\n{text}\n")
    backends = pipeline.build_backends(cfg, mock=args.mock)
    if args.ablation:
        results, ablation = pipeline.run_ablation(args.input, cfg, backends, report_format=args.report)
        batches = list(results.values())
        for report in ablation.reports:
            agg = report.aggregate
            print(f"{report.stage}: psnr {agg['psnr']['mean']:.4f} ssim {agg['ssim']['mean']:.4f}")
    else:
        batches = [pipeline.run_batch(args.input, cfg, backends, report_format=args.report)]
    failures = 0
    for batch in batches:
        for rec in batch.records:
            line = f"{rec.image_id}: {rec.status}"
            if rec.reason:
                line += f" ({rec.reason})"
            print(line)
            failures += rec.status == "failed"
        failures += len(batch.warnings)
    return 1 if failures else 0


def cmd_validate(args) -> int:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    bad = 0
    for path in pipeline.list_inputs(args.input):
        try:
            report = preprocess.validate_input(raster.read_image(path), cfg.preprocess)
        except (OSError, ValueError) as exc:
            print(f"{path.name}: unreadable ({exc})")
            bad += 1
            continue
        print(f"{path.name}: {'ok' if report.ok else 'rejected'}")
        for line in report.lines():
            print(f"  {line}")
        bad += not report.ok
    return 1 if bad else 0


def cmd_metrics(args) -> int:
    a_dir, b_dir = Path(args.dir_a), Path(args.dir_b)
    rows = []
    for a_path in sorted(a_dir.glob("*.png")):
        b_path = b_dir / a_path.name
        if not b_path.exists():
            logging.warning("no counterpart for %s in %s", a_path.name, b_dir)
            continue
        a, b = raster.read_image(a_path), raster.read_image(b_path)
        if args.resolution:
            a = raster.resize(a, args.resolution, args.resolution)
            b = raster.resize(b, args.resolution, args.resolution)
        rows.append(metrics.score_pair(a_path.stem, a, b))
    if not rows:
        print("no image pairs found", file=sys.stderr)
        return 1
    report = metrics.aggregate(rows, std=args.std)
    sys.stdout.write(report.to_csv() if args.report == "csv" else report.to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repose", description="Pose normalization for still-life garment photos.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the pipeline on a PNG or a directory of PNGs")
    run.add_argument("input")
    run.add_argument("--config")
    run.add_argument("--preset", choices=list(PRESETS))
    run.add_argument("--out")
    run.add_argument("--seed", type=int)
    run.add_argument("--mock", action="store_true", help="use the deterministic offline backends")
    run.add_argument("--print-prompts", action="store_true")
    run.add_argument("--report", choices=["csv", "json"], default="json")
    run.add_argument("--ablation", action="store_true", help="run all four presets and write ablation.<fmt>")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check inputs against the preprocessing rules")
    val.add_argument("input")
    val.add_argument("--config")
    val.set_defaults(func=cmd_validate)

    met = sub.add_parser("metrics", help="PSNR/SSIM between same-named PNGs of two directories")
    met.add_argument("dir_a")
    met.add_argument("dir_b")
    met.add_argument("--resolution", type=int, default=None)
    met.add_argument("--std", choices=["sample", "population"], default="sample")
    met.add_argument("--report", choices=["csv", "json"], default="json")
    met.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, BackendError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
