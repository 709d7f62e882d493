"""Command-line interface: `gsclosure <subcommand> [flags]`.

Data goes to stdout (or `--out`), logs go to stderr. Failures print a single
line `error: <code> <ExceptionName>: <message>` and exit with 1 (usage and
configuration), 2 (input/output) or 3 (data).
"""
import sys
import logging
import argparse

import numpy as np

from .splat_io import (CropBox, read_splat_ply, write_splat_ply_file,
                       filter_scene, subsample_scene)
from .surface import (SurfaceElements, FirstElementRandomFlip,
                      build_surface_elements)
from .boxes import load_detections, dumps_detections
from .closure import FluxField, flux_batch
from .synthetic import gen_benchmark_scene, export_scene
from .evaluation import evaluate_detections, flux_histogram
from .pipeline import PipelineConfig, load_config, run_pipeline
from .pipeline.rescoring import make_orientation
from .exceptions import GSClosureError, ConfigError
from .utils import atomic_write, dumps_json

logger = logging.getLogger("gsclosure")


EXIT_USAGE, EXIT_IO, EXIT_DATA = 1, 2, 3

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


class UsageError(Exception):
    """Bad command-line usage."""


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(parser):
    parser.add_argument("--seed", type=int, default=0,
                        help="seed of every random choice")
    parser.add_argument("--threads", type=int, default=None,
                        help="threads of the parallel flux kernels")
    parser.add_argument("--config", default=None,
                        help="TOML or JSON pipeline configuration")
    parser.add_argument("--out", default=None,
                        help="output path (stdout when omitted)")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--quiet", action="store_true")


def _elements_source(parser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--splat", help="splat PLY file")
    source.add_argument("--elements", help="surface element CSV")
    parser.add_argument("--opacity-min", type=float, default=None)
    parser.add_argument("--orientation", choices=("center", "random_flip"),
                        default=None)


def _scoring(parser):
    parser.add_argument("--boxes", required=True,
                        help="JSON array of candidate boxes")
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--min-support", type=int, default=None)
    parser.add_argument("--nms-iou", type=float, default=None)
    parser.add_argument("--normalized", action="store_true", default=None,
                        help="score the area-normalized flux")
    parser.add_argument("--no-closure", action="store_true",
                        help="closure score fixed to 1 (ablation)")
    parser.add_argument("--iou-mode", choices=("yaw", "axis"), default=None)
    parser.add_argument("--meters-per-unit", type=float, default=None)


def build_parser():
    parser = ArgumentParser(
        prog="gsclosure",
        description="Surface closure scoring of 3D Gaussian Splatting scenes.")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    sub.required = True

    p = sub.add_parser("inspect", help="summarize a splat file")
    _common(p)
    p.add_argument("--splat", required=True)

    p = sub.add_parser("filter", help="opacity/crop/subsample a splat file")
    _common(p)
    p.add_argument("--splat", required=True)
    p.add_argument("--opacity-min", type=float, default=None)
    p.add_argument("--crop", type=float, nargs=6, default=None,
                   metavar=("X0", "Y0", "Z0", "X1", "Y1", "Z1"))
    p.add_argument("--subsample", type=int, default=None,
                   help="keep at most this many primitives")

    p = sub.add_parser("surf", help="surface elements of a splat file")
    _common(p)
    p.add_argument("--splat", required=True)
    p.add_argument("--opacity-min", type=float, default=None)
    p.add_argument("--orientation", choices=("center", "random_flip"),
                   default=None)

    p = sub.add_parser("flux", help="per-box flux reports")
    _common(p)
    _elements_source(p)
    _scoring(p)

    p = sub.add_parser("score", help="closure rescoring and NMS")
    _common(p)
    _elements_source(p)
    _scoring(p)

    p = sub.add_parser("refine", help="rescoring, refinement and NMS")
    _common(p)
    _elements_source(p)
    _scoring(p)
    p.add_argument("--max-sweeps", type=int, default=None)
    p.add_argument("--coverage-weight", type=float, default=None)

    p = sub.add_parser("synth", help="generate a labeled synthetic scene")
    _common(p)
    p.add_argument("--objects", type=int, default=3)
    p.add_argument("--fragments", type=int, default=None)
    p.add_argument("--clutter", type=float, default=0.)
    p.add_argument("--jitter", type=float, default=0.)
    p.add_argument("--elements-per-object", type=int, default=2000)

    p = sub.add_parser("eval", help="AP/AR of detections")
    _common(p)
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou-mode", choices=("yaw", "axis"), default=None)

    p = sub.add_parser("hist", help="histogram of per-box flux")
    _common(p)
    _elements_source(p)
    p.add_argument("--boxes", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--unit", choices=("scene2", "dm2", "normalized"),
                   default="normalized")
    p.add_argument("--range-max", type=float, default=None)
    p.add_argument("--meters-per-unit", type=float, default=None)
    p.add_argument("--plot", default=None, help="also save a figure here")

    return parser


def _config(args):
    """Defaults, then the config file, then explicit flags."""
    config = PipelineConfig()
    if args.config is not None:
        config = load_config(args.config, base=config)

    overrides = {name: getattr(args, flag, None) for name, flag in [
        ("gamma", "gamma"), ("min_support", "min_support"),
        ("nms_iou", "nms_iou"), ("iou_mode", "iou_mode"),
        ("opacity_min", "opacity_min"), ("orientation", "orientation"),
        ("meters_per_unit", "meters_per_unit"),
        ("use_normalized_flux", "normalized"),
        ("max_sweeps", "max_sweeps"),
        ("coverage_weight", "coverage_weight")]}
    if getattr(args, "no_closure", False):
        overrides["use_closure"] = False
    if args.command == "refine":
        overrides["refine"] = True
    if overrides.get("orientation") == "random_flip":
        overrides["orientation_seed"] = args.seed

    return config.replace(**overrides)


def _emit(args, text):
    if args.out is None:
        sys.stdout.write(text)
    else:
        atomic_write(args.out, text)


def _read_text(path):
    with open(path, "r") as f:
        return f.read()


def _load_elements(args, config):
    if args.elements is not None:
        return SurfaceElements.from_csv(_read_text(args.elements))

    scene = filter_scene(read_splat_ply(args.splat), config.opacity_min)
    return build_surface_elements(scene)


def cmd_inspect(args, config):
    scene = read_splat_ply(args.splat)
    bounds = scene.bounds
    opacities = scene.opacities
    summary = {
        "source_path": scene.source_path,
        "count": len(scene),
        "properties": list(scene.property_names),
        "bounds": None if bounds is None else
        {"min": bounds[0].tolist(), "max": bounds[1].tolist()},
        "opacity": None if not len(scene) else {
            "min": float(opacities.min()), "max": float(opacities.max()),
            "below_threshold": int(np.sum(
                opacities < config.opacity_min))},
    }
    _emit(args, dumps_json(summary))


def cmd_filter(args, config):
    if args.out is None:
        raise UsageError("""`filter` writes a PLY file and needs --out.""")

    crop = None if args.crop is None else CropBox(args.crop[:3],
                                                  args.crop[3:])
    scene = filter_scene(read_splat_ply(args.splat), config.opacity_min,
                         crop)
    if args.subsample is not None:
        scene = subsample_scene(scene, args.subsample, args.seed)
    write_splat_ply_file(scene, args.out)


def cmd_surf(args, config):
    scene = filter_scene(read_splat_ply(args.splat), config.opacity_min)
    if config.orientation == "random_flip":
        elements = build_surface_elements(
            scene, FirstElementRandomFlip(config.orientation_seed))
    else:
        elements = build_surface_elements(scene)
    _emit(args, elements.to_csv())


def cmd_flux(args, config):
    elements = _load_elements(args, config)
    detections = load_detections(_read_text(args.boxes))
    reports = flux_batch(elements, [d.box for d in detections], FluxField(),
                         make_orientation(config))

    records = []
    for detection, report in zip(detections, reports):
        record = detection.box.to_dict()
        record.update(report.to_dict(config.gamma, config.meters_per_unit))
        records.append(record)
    _emit(args, dumps_json(records))


def cmd_score(args, config):
    elements = _load_elements(args, config)
    detections = load_detections(_read_text(args.boxes))
    _emit(args, dumps_detections(run_pipeline(elements, detections, config,
                                              verbose=args.verbose)))


def cmd_synth(args, config):
    if args.out is None:
        raise UsageError("""`synth` writes a directory and needs --out.""")

    scene = gen_benchmark_scene(
        n_objects=args.objects, clutter=args.clutter, jitter=args.jitter,
        seed=args.seed, n_fragments=args.fragments,
        elements_per_object=args.elements_per_object, verbose=args.verbose)
    export_scene(scene, args.out)


def cmd_eval(args, config):
    detections = load_detections(_read_text(args.dets))
    gt_boxes = [d.box for d in load_detections(_read_text(args.gt))]
    report = evaluate_detections(detections, gt_boxes, mode=config.iou_mode)
    _emit(args, dumps_json(report))


def cmd_hist(args, config):
    elements = _load_elements(args, config)
    boxes = [d.box for d in load_detections(_read_text(args.boxes))]
    hist = flux_histogram(elements, boxes, bins=args.bins, unit=args.unit,
                          range_max=args.range_max,
                          orientation=make_orientation(config),
                          meters_per_unit=config.meters_per_unit)
    if args.plot is not None:
        from .plotting import use_headless_backend, plot_flux_histogram
        use_headless_backend()
        plot_flux_histogram([hist], [args.boxes], path=args.plot)
    _emit(args, hist.to_csv())


COMMANDS = {
    "inspect": cmd_inspect, "filter": cmd_filter, "surf": cmd_surf,
    "flux": cmd_flux, "score": cmd_score, "refine": cmd_score,
    "synth": cmd_synth, "eval": cmd_eval, "hist": cmd_hist,
}


def _setup_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    if args.quiet:
        level = logging.WARNING

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)
    logging.captureWarnings(True)


def _fail(code, err):
    message = " ".join(str(err).split())
    sys.stderr.write("error: %d %s: %s\n" % (code, type(err).__name__,
                                             message))
    return code


def main(argv=None):
    """Run one subcommand; returns the exit status."""
    try:
        args = build_parser().parse_args(argv)
        _setup_logging(args)

        if args.threads is not None:
            import numba
            if not 1 <= args.threads <= numba.config.NUMBA_NUM_THREADS:
                raise UsageError(
                    """--threads must lie in [1, %d], got %d."""
                    % (numba.config.NUMBA_NUM_THREADS, args.threads))
            numba.set_num_threads(args.threads)

        config = _config(args)
        logger.debug("running `%s` with %r", args.command, config)
        COMMANDS[args.command](args, config)

    except (UsageError, ConfigError) as err:
        return _fail(EXIT_USAGE, err)

    except OSError as err:
        return _fail(EXIT_IO, err)

    except (GSClosureError, ValueError) as err:
        return _fail(EXIT_DATA, err)

    return 0


if __name__ == "__main__":
    sys.exit(main())
