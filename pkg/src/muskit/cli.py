"""``muskit`` command line: prepare, lint, train-tokenizer, tokenize, evaluate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import pipeline
from .errors import InsufficientDataError, MuskitError
from .perception import default_endpoint


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="muskit", description="Singing-voice data preparation and evaluation.")
    ap.add_argument("--config", help="JSON pipeline config")
    ap.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
    ap.add_argument("--seed", type=int, help="override tokenizer.seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="parse, correct, resample, segment and featurize a corpus")
    p.add_argument("manifest")
    p.add_argument("--out", help="dataset directory (default: config output_dir)")

    p = sub.add_parser("lint", help="report score issues as JSON lines")
    p.add_argument("manifest")
    p.add_argument("--fix", action="store_true", help="write corrected <score>.fixed.json files")

    p = sub.add_parser("train-tokenizer", help="fit a semantic or RVQ codebook")
    p.add_argument("dataset")
    p.add_argument("--mode", choices=("semantic", "rvq"))

    p = sub.add_parser("tokenize", help="write token files for every segment")
    p.add_argument("dataset")
    p.add_argument("codebook")

    p = sub.add_parser("evaluate", help="objective metrics between two WAV directories")
    p.add_argument("ref_dir")
    p.add_argument("hyp_dir")
    p.add_argument("--out", default=".", help="directory for report.json / report.csv")
    p.add_argument("--mos-endpoint", help="MOS service URL (default $MUSKIT_MOS_ENDPOINT)")
    return ap


def load_config(args) -> pipeline.PipelineConfig:
    config = pipeline.PipelineConfig.load(args.config) if args.config else pipeline.PipelineConfig()
    if args.seed is not None:
        config.tokenizer = replace(config.tokenizer, seed=args.seed)
    return config


def run(args) -> int:
    config = load_config(args)
    jobs = max(1, args.jobs)
    if args.command == "prepare":
        out = args.out or config.output_dir
        if not out:
            raise ValueError("no output directory: pass --out or set output_dir in the config")
        return pipeline.cmd_prepare(args.manifest, config, out, jobs)
    if args.command == "lint":
        return pipeline.cmd_lint(args.manifest, config, args.fix, jobs)
    if args.command == "train-tokenizer":
        path = pipeline.cmd_train_tokenizer(args.dataset, config, args.mode)
        print(path)
        return pipeline.EXIT_OK
    if args.command == "tokenize":
        print(pipeline.cmd_tokenize(args.dataset, args.codebook, config))
        return pipeline.EXIT_OK
    if args.command == "evaluate":
        endpoint = args.mos_endpoint or default_endpoint()
        code, report = pipeline.cmd_evaluate(args.ref_dir, args.hyp_dir, config, args.out, endpoint, jobs)
        print(json.dumps(report["mean"], sort_keys=True))
        return code
    raise AssertionError(args.command)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except InsufficientDataError as exc:
        print(f"muskit: {exc}", file=sys.stderr)
        return pipeline.EXIT_PARTIAL
    except (ValueError, TypeError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"muskit: {exc}", file=sys.stderr)
        return pipeline.EXIT_USAGE
    except MuskitError as exc:
        print(f"muskit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return pipeline.EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
