"""Command-line entry point: ``stvqa <command> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import motionval, regression, schema
from .config import PipelineConfig
from .errors import (
    ConfigurationError,
    GeometryError,
    InputFormatError,
    NumericError,
    ParameterError,
    PlanError,
    SchemaError,
    StvqaError,
)
from .niqe import fit_model_from_folder
from .pipeline import Extractor
from .video_io import RawFormat

log = logging.getLogger("stvqa")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4


def _exit_code(exc):
    if isinstance(exc, (InputFormatError, SchemaError, GeometryError)):
        return EXIT_INPUT
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return EXIT_USAGE


def _load_config(args) -> PipelineConfig:
    overrides = {
        "seed": getattr(args, "seed", None),
        "thread_count": getattr(args, "threads", None),
        "niqe_model_path": getattr(args, "niqe_model", None),
        "D": getattr(args, "D", None),
        "selection": getattr(args, "selection", None),
    }
    if getattr(args, "config", None):
        return PipelineConfig.from_toml(args.config, **overrides)
    return PipelineConfig().replace(**overrides)


def _format_hint(args):
    if args.width is None and args.height is None:
        return None
    if args.width is None or args.height is None:
        raise ParameterError("raw input needs both --width and --height")
    return RawFormat.from_pix_fmt(args.width, args.height, args.pix_fmt, args.bit_depth)


def _features_and_mos(feature_paths, mos_path):
    vectors = schema.read_features(feature_paths)
    mos = regression.read_mos_csv(mos_path)
    missing = [v.video_id for v in vectors if v.video_id not in mos]
    if missing:
        raise SchemaError(f"no MOS for videos: {missing[:5]}")
    X = np.array([v.values for v in vectors])
    y = np.array([mos[v.video_id][0] for v in vectors])
    contents = [mos[v.video_id][1] for v in vectors]
    contents = None if any(c is None for c in contents) else np.array(contents)
    return vectors, X, y, contents


# ---------------------------------------------------------------- commands


def cmd_extract(args):
    cfg = _load_config(args)
    hint = _format_hint(args)
    extractor = Extractor(cfg)
    vectors = []
    for path in args.videos:
        out = extractor.extract_path(path, hint, video_id=Path(path).stem)
        for w in out.vector.warnings:
            log.warning("%s: %s", path, w)
        vectors.append(out.vector)
    dest = Path(args.output)
    if dest.suffix.lower() == ".csv":
        schema.write_csv(dest, vectors)
    else:
        schema.write_json(dest, vectors)
    return EXIT_OK


def cmd_train(args):
    _, X, y, contents = _features_and_mos(args.features, args.mos)
    if args.gamma is not None and args.C is not None:
        gamma, C = args.gamma, args.C
    else:
        separated = args.content_separated and contents is not None
        plan = regression.make_split(contents if separated else len(y), args.seed, separated, test_fraction=0.0)
        gamma, C = regression.grid_search(X, y, plan, epsilon=args.epsilon)
        log.info("grid search picked gamma=%g C=%g", gamma, C)
    model = regression.train_svr(X, y, gamma, C, args.epsilon)
    model.save(args.output)
    return EXIT_OK


def cmd_predict(args):
    model = regression.SVRModel.load(args.model)
    vectors = schema.read_features(args.features)
    rows = []
    for v in vectors:
        if v.schema_version != model.schema_version:
            raise SchemaError(
                f"{v.video_id}: feature schema {v.schema_version!r} != model schema {model.schema_version!r}"
            )
        rows.append((v.video_id, float(model.predict(v.values[None])[0])))
    if args.output:
        with open(args.output, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["video_id", "score"])
            w.writerows((vid, repr(s)) for vid, s in rows)
    else:
        for vid, s in rows:
            print(f"{vid}\t{s:.6f}")
    return EXIT_OK


def cmd_eval(args):
    _, X, y, contents = _features_and_mos(args.features, args.mos)
    separated = not args.no_content_separation
    if separated and contents is None:
        raise ConfigurationError("content separation needs a content_id column in the MOS CSV")
    report = regression.run_protocol(X, y, contents, args.splits, separated, args.seed, epsilon=args.epsilon)
    report.write_json(args.output)
    if args.csv:
        report.write_csv(args.csv)
    s = report.summary()
    print(f"median SROCC {s['srocc']['median']:.4f}  LCC {s['lcc']['median']:.4f}  RMSE {s['rmse']['median']:.4f}")
    return EXIT_OK


def cmd_validate_motion(args):
    cfg = _load_config(args)
    theta = args.theta if args.angle_index is None else args.angle_index * np.pi / cfg.Q
    spec = motionval.SyntheticSpec(
        theta=float(theta),
        speed=args.speed,
        texture=args.texture,
        sigma_s=args.sigma_s,
        size=(args.size, args.size),
        frames=args.frames,
        seed=cfg.seed,
    )
    report = motionval.validate(spec, cfg)
    report.write_json(args.output)
    if args.csv:
        report.write_csv(args.csv)
    maad = "n/a" if report.maad is None else f"{report.maad:.4f}"
    print(f"MAAD {maad} over {report.n_windows} windows")
    return EXIT_OK


def cmd_niqe_model(args):
    model = fit_model_from_folder(args.folder, args.patch_size, args.sharpness_fraction)
    model.save(args.output)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="stvqa", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = p.add_subparsers(dest="command", required=True)

    def pipeline_opts(sp):
        sp.add_argument("--config", help="TOML file with a [pipeline] table")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="worker threads over frame groups")
        sp.add_argument("--D", type=int, help="window stride factor")
        sp.add_argument("--selection", choices=("closest", "min_excess"))

    sp = sub.add_parser("extract", help="compute the feature vector of one or more videos")
    sp.add_argument("videos", nargs="+")
    sp.add_argument("-o", "--output", required=True, help=".json or .csv")
    sp.add_argument("--width", type=int)
    sp.add_argument("--height", type=int)
    sp.add_argument("--pix-fmt", default="yuv420p")
    sp.add_argument("--bit-depth", type=int, choices=(8, 10))
    sp.add_argument("--niqe-model")
    pipeline_opts(sp)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("train", help="fit an SVR quality model")
    sp.add_argument("--features", nargs="+", required=True)
    sp.add_argument("--mos", required=True, help="CSV: video_id,mos[,content_id]")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--C", type=float)
    sp.add_argument("--epsilon", type=float, default=regression.DEFAULT_EPSILON)
    sp.add_argument("--content-separated", action="store_true", help="content-grouped CV folds")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="score feature vectors with a trained model")
    sp.add_argument("--features", nargs="+", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("eval", help="repeated train/test protocol")
    sp.add_argument("--features", nargs="+", required=True)
    sp.add_argument("--mos", required=True)
    sp.add_argument("-o", "--output", required=True, help="report JSON")
    sp.add_argument("--csv", help="per-split CSV")
    sp.add_argument("--splits", type=int, default=100)
    sp.add_argument("--no-content-separation", action="store_true")
    sp.add_argument("--epsilon", type=float, default=regression.DEFAULT_EPSILON)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("validate-motion", help="orientation accuracy on a synthetic moving texture")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--theta", type=float, default=0.0, help="direction in radians, [0, pi)")
    g.add_argument("--angle-index", type=int, help="direction as a multiple of pi/Q")
    sp.add_argument("--speed", type=float, default=1.0)
    sp.add_argument("--texture", choices=motionval.TEXTURES, default="smoothed-noise")
    sp.add_argument("--sigma-s", type=float, default=2.0)
    sp.add_argument("--size", type=int, default=128)
    sp.add_argument("--frames", type=int, default=20)
    sp.add_argument("-o", "--output", required=True, help="report JSON")
    sp.add_argument("--csv", help="angular_offset,mean_kurtosis CSV")
    pipeline_opts(sp)
    sp.set_defaults(func=cmd_validate_motion)

    sp = sub.add_parser("niqe-model", help="fit a NIQE model from pristine images")
    sp.add_argument("folder")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--patch-size", type=int, default=96)
    sp.add_argument("--sharpness-fraction", type=float, default=0.75)
    sp.set_defaults(func=cmd_niqe_model)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (StvqaError, PlanError) as exc:
        print(f"stvqa {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"stvqa {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
