"""Command line entry point.

Exit codes: 0 success, 1 bad input or configuration, 2 a stage failed.
"""
import argparse
import logging
import sys
from pathlib import Path

from . import scene
from .cloud import CloudFormatError, write_cloud
from .config import ConfigError, PipelineConfig, default_config_text, load_config
from .pipeline import STAGES, InputError, StageError, run_pipeline, run_stage

OK, INPUT_ERROR, STAGE_ERROR = 0, 1, 2

# flag -> config field
OVERRIDES = {
    "resolution": "resolution",
    "lam": "lam",
    "threshold": "detect_threshold",
    "h": "h_maxima",
    "min_px": "min_component_px",
    "min_acc": "min_accumulation",
    "folds": "cv_folds",
    "seed": "seed",
}


def _add_tuning(p):
    p.add_argument("--config", type=Path, help="config file (defaults are used for missing keys)")
    p.add_argument("--resolution", type=float, help="pixels per metre")
    p.add_argument("--lambda", dest="lam", type=float, help="flat-zone slope bound (m per pixel)")
    p.add_argument("--threshold", type=float, help="artifact top-hat threshold (m)")
    p.add_argument("--h", type=float, help="h-maxima height (m)")
    p.add_argument("--min-px", type=int, help="smallest component kept (pixels)")
    p.add_argument("--min-acc", type=int, help="smallest peak point count kept")
    p.add_argument("--folds", type=int, help="cross-validation folds")
    p.add_argument("--seed", type=int, help="fold shuffling seed")
    p.add_argument("--no-blocks", action="store_true", help="process the cloud as one block")
    p.add_argument("--labels", type=Path, help="component_id,class CSV for training")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="streetseg", description="Segment and classify street point clouds.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every stage")
    run.add_argument("input", type=Path, help="XYZ, PLY or labelled cloud")
    run.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    run.add_argument("--dump-stage", action="append", default=[], choices=STAGES, help="write debug images for a stage")
    _add_tuning(run)

    stage = sub.add_parser("stage", help="run a single stage inside an output directory")
    stage.add_argument("name", choices=STAGES)
    stage.add_argument("-o", "--output", type=Path, required=True)
    stage.add_argument("--input", type=Path, help="input cloud (blocks and label stages)")
    stage.add_argument("--dump", action="store_true", help="write debug images")
    _add_tuning(stage)

    gen = sub.add_parser("generate", help="sample a synthetic street scene")
    gen.add_argument("spec", type=Path, help="scene description file")
    gen.add_argument("-o", "--output", type=Path, required=True, help="XYZ file to write")
    gen.add_argument("--truth", type=Path, help="per-point ground truth CSV")

    sub.add_parser("config", help="print the default configuration")
    return parser


def config_from_args(args):
    cfg = load_config(args.config)
    values = {field: getattr(args, flag) for flag, field in OVERRIDES.items() if getattr(args, flag) is not None}
    if args.no_blocks:
        values["use_blocks"] = False
    return PipelineConfig.from_mapping(values, cfg) if values else cfg


def _fail(out, stage, message):
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "FAILED").write_text(f"{stage}: {message}\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")
    if args.command == "config":
        sys.stdout.write(default_config_text())
        return OK
    if args.command == "generate":
        try:
            spec = scene.parse_spec(args.spec.read_text())
            cloud, truth = scene.generate(spec)
        except (OSError, ConfigError, scene.SceneError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return INPUT_ERROR
        write_cloud(cloud, args.output)
        if args.truth:
            scene.write_truth(truth, args.truth)
        print(f"{len(cloud)} points written to {args.output}")
        return OK

    out = args.output
    try:
        config = config_from_args(args)
        if args.command == "run":
            results = run_pipeline(config, args.input, out, args.labels, tuple(args.dump_stage))
            n = results.get("features", 0)
            print(f"{n} components; labelled cloud in {out / 'cloud.labeled'}")
            if "classify" in results:
                print(results["classify"].to_text(), end="")
        else:
            if args.input is not None and not args.input.is_file():
                raise InputError(f"input cloud {args.input} does not exist")
            result = run_stage(args.name, config, out, args.input, args.labels, args.dump)
            print(f"{args.name}: {result}")
    except (InputError, ConfigError, CloudFormatError, OSError) as exc:
        _fail(out, "input", exc)
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except StageError as exc:
        _fail(out, exc.stage, exc.cause)
        print(f"error: {exc}", file=sys.stderr)
        return STAGE_ERROR
    return OK


if __name__ == "__main__":
    sys.exit(main())
