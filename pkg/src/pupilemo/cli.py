"""Command-line entry point: ``pupilemo <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from pupilemo import MODEL_FORMAT_VERSION, __version__
from pupilemo import evaluation as ev
from pupilemo import pipeline
from pupilemo.config import load_config
from pupilemo.errors import ConfigError, PupilEmoError

EXIT_CODES = """\
exit codes:
  0  success
  1  unexpected internal error
  2  bad configuration or arguments
  3  missing input file
  4  malformed or implausible input data
  5  processing failure (no usable windows, single class, width mismatch, ...)
  6  work directory locked by another run
"""


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value run configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--seed", type=int, help="root seed (overrides the config file)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pupilemo", description="Pupil-diameter emotion recognition pipeline.",
        epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version",
                        version=f"pupilemo {__version__} (model format {MODEL_FORMAT_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write four synthetic session_<label>.csv files")
    _common(p)
    p.add_argument("--out", type=Path, default=Path("raw"))

    p = sub.add_parser("preprocess", help="drop blink and one-eye-closed rows")
    _common(p)
    p.add_argument("--in", dest="inputs", type=Path, default=Path("raw"), help="raw file or directory")
    p.add_argument("--out", type=Path, default=Path("clean"))
    p.add_argument("--report", action="store_true", help="print source,kept,dropped per file")

    p = sub.add_parser("featurize", help="windowed feature matrix")
    _common(p)
    p.add_argument("--in", dest="inputs", type=Path, default=Path("clean"))
    p.add_argument("--out", type=Path, default=Path("features.csv"))

    p = sub.add_parser("select", help="mRMR feature ranking")
    _common(p)
    p.add_argument("--features", type=Path, default=Path("features.csv"))
    p.add_argument("--out", type=Path, default=Path("selection.csv"))

    p = sub.add_parser("train", help="grid search and fit the boosted model")
    _common(p)
    p.add_argument("--features", type=Path, default=Path("features.csv"))
    p.add_argument("--selection", type=Path, default=Path("selection.csv"))
    p.add_argument("--out", type=Path, default=Path("model.json"))
    p.add_argument("--grid-out", type=Path, default=Path("grid.csv"))
    p.add_argument("--paper-faithful", action="store_true",
                   help="tune and pick the stage count on the test rows (leaks the test set)")
    p.add_argument("--stage-rule", choices=("mse", "deviance"))

    p = sub.add_parser("evaluate", help="score a trained model on the held-out rows")
    _common(p)
    p.add_argument("--features", type=Path, default=Path("features.csv"))
    p.add_argument("--model", type=Path, default=Path("model.json"))
    p.add_argument("--out", type=Path, default=Path("report.csv"))
    p.add_argument("--text-out", type=Path, default=Path("report.txt"))

    p = sub.add_parser("report-features", help="top-feature ranking with per-eye counts")
    _common(p)
    p.add_argument("--selection", type=Path, default=Path("selection.csv"))
    p.add_argument("--out", type=Path, default=Path("top_features.txt"))

    p = sub.add_parser("pipeline", help="run every stage in a work directory")
    _common(p)
    p.add_argument("--workdir", type=Path, default=Path("."))
    p.add_argument("--no-baseline", action="store_true", help="skip the mean-diameter baseline")
    p.add_argument("--paper-faithful", action="store_true")
    p.add_argument("--stage-rule", choices=("mse", "deviance"))
    return parser


def _run_config(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed = {args.seed}")
    if getattr(args, "paper_faithful", False):
        overrides.append("paper_faithful_selection = true")
    if getattr(args, "stage_rule", None):
        overrides.append(f"stage_select_rule = {args.stage_rule}")
    if args.config is not None and not args.config.exists():
        raise ConfigError(f"config file not found: {args.config}")
    return load_config(args.config, overrides)


def run(args) -> int:
    cfg = _run_config(args)
    cmd = args.command
    if cmd == "synth":
        for path in pipeline.stage_synth(cfg, args.out):
            print(path)
    elif cmd == "preprocess":
        lines = pipeline.stage_preprocess(cfg, args.inputs, args.out)
        if args.report:
            print("\n".join(lines))
    elif cmd == "featurize":
        fm = pipeline.stage_featurize(cfg, args.inputs, args.out)
        print(f"{len(fm)} windows x {fm.X.shape[1]} features -> {args.out}")
    elif cmd == "select":
        pipeline.stage_select(cfg, args.features, args.out)
        print(Path(args.out).read_text(encoding="utf-8"), end="")
    elif cmd == "train":
        res = pipeline.stage_train(cfg, args.features, args.selection, args.out, args.grid_out)
        print(f"model with {res.model.n_stages} stage(s) -> {args.out}")
    elif cmd == "evaluate":
        rep = pipeline.stage_evaluate(cfg, args.features, args.model, args.out, args.text_out)
        print(ev.format_text(rep), end="")
    elif cmd == "report-features":
        print(pipeline.stage_report_features(args.selection, args.out), end="")
    elif cmd == "pipeline":
        with pipeline.workdir_lock(args.workdir) as w:
            rep = pipeline.run_pipeline(cfg, w, with_baseline=not args.no_baseline)
        print(ev.format_text(rep), end="")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except PupilEmoError as e:
        print(f"pupilemo: error [{type(e).__name__}]: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        print(f"pupilemo: error [{type(e).__name__}]: {e}", file=sys.stderr)
        return 4 if isinstance(e, ValueError) else 1


if __name__ == "__main__":
    sys.exit(main())
