"""Command-line interface: simulate, estimate, evaluate, regrasp, length.

Exit status is 0 on success, 1 on invalid input or configuration, and 2 on an
unexpected internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import typing
from pathlib import Path

from . import __version__
from .data import PipelineConfig, read_config, read_intensity_frames, read_point_cloud, read_sequence
from .errors import TactileError
from .evaluate import (
    FRAMES_SUFFIX,
    SEQUENCE_SUFFIX,
    CorpusItem,
    blob_corpus,
    default_corpus,
    evaluate_corpus,
    run_closed_loop,
    write_closed_loop,
    write_corpus,
)
from .geometry import measure_object
from .pipeline import CSV_HEADER, process_sequence
from .sim import OBJECTS, Flat, SimObject, SimParams, SmallBlob

log = logging.getLogger("tactile_rotation")

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2


class UsageError(TactileError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for internal errors here
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_dataclass_flags(parser, cls, skip=(), prefix=""):
    """One flag per dataclass field, typed and defaulted from the class itself."""
    hints = typing.get_type_hints(cls)
    group = parser.add_argument_group(cls.__name__)
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        dest = prefix + f.name
        kind = hints[f.name]
        if isinstance(default, tuple):
            group.add_argument(
                _flag(f.name), dest=dest, type=float, nargs=len(default), default=None,
                metavar=("X", "Y"), help=f"default {default}",
            )
        elif kind is int or isinstance(default, int):
            group.add_argument(_flag(f.name), dest=dest, type=int, default=None, help=f"default {default}")
        else:
            group.add_argument(_flag(f.name), dest=dest, type=float, default=None, help=f"default {default}")


def _overrides(args, cls, prefix="") -> dict:
    out = {}
    for f in dataclasses.fields(cls):
        value = getattr(args, prefix + f.name, None)
        if value is not None:
            out[f.name] = tuple(value) if isinstance(value, list) else value
    return out


def _add_object_flags(parser):
    parser.add_argument("--object", choices=sorted(OBJECTS), default="rod", help="base object (default rod)")
    _add_dataclass_flags(parser, SimObject, skip=("contact_footprint",), prefix="obj_")
    group = parser.add_argument_group("contact footprint")
    group.add_argument("--footprint", choices=("flat", "blob"), default=None)
    group.add_argument("--flat-width-px", type=float, default=None, help=f"default {Flat().width_px}")
    group.add_argument("--flat-height-px", type=float, default=None, help=f"default {Flat().height_px}")
    group.add_argument("--blob-n-px", type=float, default=None, help=f"default {SmallBlob().n_px}")
    group.add_argument("--blob-eccentricity", type=float, default=None, help=f"default {SmallBlob().eccentricity}")
    group.add_argument("--blob-axis-deg", type=float, default=None, help=f"default {SmallBlob().axis_deg}")
    _add_dataclass_flags(parser, SimParams, skip=("seed",), prefix="sim_")


def _footprint(args, base):
    kind = args.footprint or ("blob" if isinstance(base, SmallBlob) else "flat")
    if kind == "flat":
        start = base if isinstance(base, Flat) else Flat()
        return dataclasses.replace(
            start,
            **{k: v for k, v in (("width_px", args.flat_width_px), ("height_px", args.flat_height_px)) if v is not None},
        )
    start = base if isinstance(base, SmallBlob) else SmallBlob()
    pairs = (("n_px", args.blob_n_px), ("eccentricity", args.blob_eccentricity), ("axis_deg", args.blob_axis_deg))
    return dataclasses.replace(start, **{k: v for k, v in pairs if v is not None})


def _sim_object(args) -> SimObject:
    base = OBJECTS[args.object]
    return dataclasses.replace(
        base, contact_footprint=_footprint(args, base.contact_footprint), **_overrides(args, SimObject, "obj_")
    )


def _sim_params(args) -> SimParams:
    return SimParams(seed=args.seed, **_overrides(args, SimParams, "sim_"))


def _config(args) -> PipelineConfig:
    return read_config(args.config) if args.config else PipelineConfig()


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands --------------------------------------------------------------


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    params = _sim_params(args)
    if args.corpus:
        make = default_corpus if args.corpus == "default" else blob_corpus
        kwargs = {"n": args.count} if args.corpus == "blob" and args.count else {}
        items = make(args.seed, n_frames=args.frames, base=params, **kwargs)
    else:
        items = [CorpusItem(args.name, _sim_object(args), params, args.offset, args.frames)]
    paths = write_corpus(items, out)
    for path in paths:
        print(path)
    return EXIT_OK


def cmd_estimate(args) -> int:
    path = Path(args.sequence)
    frames, _ = read_sequence(path)
    image_dir = path.with_suffix(FRAMES_SUFFIX)
    images = read_intensity_frames(image_dir) if image_dir.is_dir() else None
    result = process_sequence(frames, _config(args), images, timed=args.timing)
    lines = [CSV_HEADER, *(r.csv_row() for r in result.frames)]
    text = "\n".join(lines) + "\n"
    if args.out:
        target = _out_dir(args) / (path.stem + ".csv")
        target.write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)
    print(
        f"verdict={result.verdict.verdict.value} orientation={result.orientation.value} "
        f"peak_deg={result.verdict.measured_angle_deg:.3f} mode={result.mode}",
        file=sys.stderr,
    )
    if args.timing:
        print(f"ms_per_frame={1000.0 * result.seconds_per_frame:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    report = evaluate_corpus(args.directory, _config(args), _out_dir(args), timing=args.timing)
    for key, value in report.summary.items():
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_regrasp(args) -> int:
    obj = _sim_object(args)
    cog_range = None if args.fixed_cog else args.cog_range
    report = run_closed_loop(
        obj,
        _sim_params(args),
        args.episodes,
        args.seed,
        plant=args.plant,
        config=_config(args),
        cog_range=cog_range,
        n_frames=args.frames,
        max_regrasps=args.max_regrasps,
    )
    write_closed_loop(report, _out_dir(args))
    for key, value in report.summary_items():
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_length(args) -> int:
    cloud = read_point_cloud(args.cloud)
    geo = measure_object(cloud, args.iterations, args.threshold, args.seed, args.mode)
    n = geo.plane.normal
    header = "length_m,axis_x,axis_y,center_x,center_y,normal_x,normal_y,normal_z,plane_offset,n_inliers,n_object"
    row = (
        f"{geo.length_L:.6f},{geo.axis_2d[0]:.6f},{geo.axis_2d[1]:.6f},{geo.center_2d[0]:.6f},"
        f"{geo.center_2d[1]:.6f},{n[0]:.6f},{n[1]:.6f},{n[2]:.6f},{geo.plane.offset:.6f},"
        f"{int(geo.inliers.sum())},{len(geo.object_points)}"
    )
    # axis and center are in the table plane's own 2D basis
    text = f"{header}\n{row}\n"
    if args.out:
        (_out_dir(args) / "length.csv").write_text(text, encoding="ascii")
    sys.stdout.write(text)
    return EXIT_OK


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands accept the global flags too; their copies must not reset
    # values already given before the subcommand name
    def default(value):
        return argparse.SUPPRESS if suppress else value

    common = _Parser(add_help=False)
    common.add_argument("--config", default=default(None), help="pipeline config file (key = value)")
    common.add_argument("--seed", type=int, default=default(0), help="random seed (default 0)")
    common.add_argument("--out", default=default(None), help="output directory")
    common.add_argument(
        "--timing", action="store_true", default=default(False), help="measure and report per-frame latency"
    )
    common.add_argument("-v", "--verbose", action="count", default=default(0))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = _Parser(
        prog="tactile-rotation", description=__doc__.splitlines()[0], parents=[_global_flags(suppress=False)]
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="write simulated sequences")
    p.add_argument("--offset", type=float, default=0.05, help="grasp offset in meters (default 0.05)")
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--name", default="sim")
    p.add_argument("--corpus", choices=("default", "blob"), help="write a whole evaluation corpus")
    p.add_argument("--count", type=int, help="number of sequences for --corpus blob")
    _add_object_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="per-frame rotation estimates of one sequence")
    p.add_argument("sequence")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", parents=[common], help=f"score every *{SEQUENCE_SUFFIX} file in a directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("regrasp", parents=[common], help="closed-loop regrasp episodes")
    p.add_argument("--plant", choices=("pipeline", "oracle"), default="pipeline")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--cog-range", type=float, default=0.45, help="CoG drawn from +-range*L (default 0.45)")
    p.add_argument("--fixed-cog", action="store_true", help="keep the object's cog_offset for every episode")
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--max-regrasps", type=int, default=10)
    _add_object_flags(p)
    p.set_defaults(func=cmd_regrasp)

    p = sub.add_parser("length", parents=[common], help="object length from a table-top point cloud")
    p.add_argument("cloud")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--threshold", type=float, default=0.005, help="plane inlier distance in meters")
    p.add_argument("--mode", choices=("axis", "euclidean"), default="axis")
    p.set_defaults(func=cmd_length)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TactileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
