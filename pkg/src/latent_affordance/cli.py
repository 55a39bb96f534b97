"""Command line front end: ``latent-affordance <command> [flags]``.

Exit codes: 0 success, 1 usage or config error, 2 missing dependency,
3 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .pipeline import EXIT_CONFIG, EXIT_OK, PipelineError


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="pipeline INI file")
    p.add_argument("--seed", type=int, help="master seed (overrides [pipeline] master_seed)")
    p.add_argument("--workers", type=int, help="worker processes for data generation")
    p.add_argument("--out", help="output root (overrides config and $%s)" % pipeline.ENV_OUT)
    p.add_argument("--n", type=int, help="sample / trajectory / trial count for this stage")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latent-affordance", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="render training datasets")
    p.add_argument("which", nargs="?", default="all", choices=["all", "vaed", "policy"])
    _common(p)

    p = sub.add_parser("train", help="train one stage")
    p.add_argument("stage", choices=["vaed", "trajvae", "policy"])
    _common(p)

    p = sub.add_parser("evaluate", help="run placement trials with the trained stack")
    _common(p)

    p = sub.add_parser("plot", help="redraw figures from an evaluation report")
    _common(p)

    p = sub.add_parser("inspect", help="summarize a checkpoint file")
    p.add_argument("checkpoint")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args) -> pipeline.PipelineConfig:
    overrides = {"pipeline.master_seed": args.seed, "pipeline.output_root": args.out, "pipeline.workers": args.workers}
    return pipeline.load_config(args.config, overrides)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "inspect":
            print(pipeline.cmd_inspect(args.checkpoint))
            return EXIT_OK
        cfg = _config(args)
        if args.command == "gen-data":
            entry = pipeline.cmd_gen_data(cfg, args.which, args.n, args.workers)
        elif args.command == "train":
            stage = {"vaed": pipeline.cmd_train_vaed, "trajvae": pipeline.cmd_train_trajvae, "policy": pipeline.cmd_train_policy}
            entry = stage[args.stage](cfg, args.n)
        elif args.command == "evaluate":
            entry = pipeline.cmd_evaluate(cfg, args.n)
        else:
            for path in pipeline.write_plots(pipeline.Layout(cfg.output_root).eval_dir):
                print(path)
            return EXIT_OK
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(f"{entry.stage}: {entry.summary} ({entry.wall_time_s:.1f} s)")
    for path in entry.outputs:
        print(f"  {path}")
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
