"""
Command-line driver of the gridder.
"""

import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path

from .array_io import read_array, write_array
from .benchmark import AccuracySweep, BenchmarkRunner, save_table
from .chunked import build_plan
from .config import RunConfig, load_run_config
from .errors import GridderError, InvariantError
from .pipeline import (
    METHODS,
    ImagingPipeline,
    chunk_inspect,
    compare_files,
    load_baselines,
    load_pixels,
    write_json,
    write_mesh,
)
from .utils import config_hash, make_dict_json_compatible, version_string

DEFAULT_ACCURACY_EPS = [1e-3, 1e-5, 1e-7, 1e-9]


def _add_config_args(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON run configuration", type=Path, default=None)


def _add_transform_args(parser: argparse.ArgumentParser):
    parser.add_argument("--eps", help="requested relative accuracy", type=float)
    parser.add_argument("--budget-mb", help="memory budget per block grid in MB", type=int)
    parser.add_argument("--alpha", help="anisotropy cap of the chunk boxes", type=float)
    parser.add_argument("--threshold", help="largest block evaluated by direct summation", type=int)
    parser.add_argument("--workers", help="number of worker threads", type=int)
    parser.add_argument(
        "--deterministic",
        help="accumulate blocks in a fixed order",
        action="store_true",
    )
    parser.add_argument(
        "--strict-accuracy",
        help="split the accuracy target over the blocks",
        action="store_true",
    )


def _add_geometry_args(parser: argparse.ArgumentParser):
    parser.add_argument("--baselines", help="N x 3 baseline ArrayFile instead of simulating", type=Path)
    parser.add_argument("--pixels", help="N x 3 or N x 4 pixel ArrayFile instead of the mesh", type=Path)


def make_cli_parser() -> argparse.ArgumentParser:
    """
    Make the CLI parser.
    """
    parser = argparse.ArgumentParser(prog="sphere-gridder")
    parser.add_argument(
        "-log",
        "--loglevel",
        default="info",
        help="Provide logging level. Example --loglevel debug, default=info",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="simulate baselines")
    _add_config_args(simulate)
    simulate.add_argument("--out", help="baseline ArrayFile to write", type=Path, required=True)

    mesh = subparsers.add_parser("mesh", help="write the pixel mesh")
    _add_config_args(mesh)
    mesh.add_argument("--out", help="pixel ArrayFile to write", type=Path, required=True)

    for name, source, help_text in [
        ("vis2dirty", "--vis", "visibilities to dirty image"),
        ("dirty2vis", "--image", "dirty image to visibilities"),
    ]:
        command = subparsers.add_parser(name, help=help_text)
        _add_config_args(command)
        _add_transform_args(command)
        _add_geometry_args(command)
        command.add_argument(source, dest="input", help="input ArrayFile", type=Path, required=True)
        command.add_argument("--out", help="output ArrayFile", type=Path, required=True)
        command.add_argument("--method", choices=METHODS, default="hvox", type=str)

    compare = subparsers.add_parser("compare", help="NMSE of an estimate against a ground truth")
    compare.add_argument("estimate", type=Path)
    compare.add_argument("reference", type=Path)

    bench = subparsers.add_parser("bench", help="time the methods on a preset")
    _add_config_args(bench)
    _add_transform_args(bench)
    bench.add_argument("--preset", help="r0.1, r0.3, r1 or r3", type=str, required=True)
    bench.add_argument("--method", dest="methods", choices=METHODS, action="append")
    bench.add_argument("--sparse", help="keep the n pixels nearest the phase center", type=int)
    bench.add_argument("--repeats", type=int, default=3)
    bench.add_argument("--out", help="CSV file to write", type=Path, required=True)

    inspect = subparsers.add_parser("chunk-inspect", help="dump the chunk boxes as JSON")
    _add_config_args(inspect)
    _add_transform_args(inspect)
    _add_geometry_args(inspect)
    inspect.add_argument("--out", help="JSON file to write instead of printing", type=Path)

    accuracy = subparsers.add_parser("accuracy", help="accuracy sweep on a point-source sky")
    _add_config_args(accuracy)
    _add_transform_args(accuracy)
    accuracy.add_argument("--eps-list", type=float, nargs="+", default=DEFAULT_ACCURACY_EPS)
    accuracy.add_argument("--out", help="CSV file to write", type=Path, required=True)
    return parser


def validate_parsed_args(args: dict) -> bool:
    """
    Return whether the parsed args are valid.
    """
    for key in ("config", "input", "baselines", "pixels", "estimate", "reference"):
        path = args.get(key)
        if path is not None and not path.is_file():
            logging.error(f"invalid --{key}: {path} is not a file")
            return False
    for key in ("budget_mb", "workers", "repeats", "sparse"):
        value = args.get(key)
        if value is not None and value < 1:
            logging.error(f"invalid --{key.replace('_', '-')}: {value}")
            return False
    return True


def resolve_config(args: dict) -> RunConfig:
    """
    The config file (or defaults) with command-line overrides applied.
    """
    config = load_run_config(args.get("config"))
    overrides = {}
    if args.get("eps") is not None:
        overrides["eps"] = args["eps"]
    if args.get("budget_mb") is not None:
        overrides["budget_bytes"] = float(args["budget_mb"]) * 1e6
    if args.get("alpha") is not None:
        overrides["anisotropy"] = args["alpha"]
    if args.get("threshold") is not None:
        overrides["threshold"] = args["threshold"]
    if args.get("workers") is not None:
        overrides["workers"] = args["workers"]
    if args.get("deterministic"):
        overrides["deterministic"] = True
    if args.get("strict_accuracy"):
        overrides["strict_accuracy"] = True
    return replace(config, **overrides)


def _geometry(args: dict, config: RunConfig) -> dict:
    return {
        "baselines": load_baselines(args["baselines"]) if args.get("baselines") else config.make_baselines(),
        "pixels": load_pixels(args["pixels"]) if args.get("pixels") else config.make_pixels(),
    }


def cmd_simulate(args: dict) -> int:
    config = resolve_config(args)
    baselines = config.make_baselines()
    write_array(args["out"], baselines.points)
    print(len(baselines))
    return 0


def cmd_mesh(args: dict) -> int:
    write_mesh(resolve_config(args), args["out"])
    return 0


def _run_transform(args: dict, direction: str) -> int:
    config = resolve_config(args)
    pipeline = ImagingPipeline(config, args["method"], **_geometry(args, config))
    values = read_array(args["input"])
    if direction == "synthesis":
        result = pipeline.vis2dirty(values)
    else:
        result = pipeline.dirty2vis(values)
    write_array(args["out"], result)
    pipeline.save_manifest(args["out"])
    pipeline.display_summary()
    return 0


def cmd_vis2dirty(args: dict) -> int:
    return _run_transform(args, "synthesis")


def cmd_dirty2vis(args: dict) -> int:
    return _run_transform(args, "analysis")


def cmd_compare(args: dict) -> int:
    report = compare_files(args["estimate"], args["reference"])
    print(json.dumps(make_dict_json_compatible(report)))
    return 0


def cmd_bench(args: dict) -> int:
    runner = BenchmarkRunner(
        args["preset"],
        config=resolve_config(args),
        methods=args.get("methods") or list(METHODS),
        sparse=args.get("sparse"),
        repeats=args["repeats"],
    )
    save_table(runner.run(), args["out"])
    return 0


def cmd_chunk_inspect(args: dict) -> int:
    config = resolve_config(args)
    geometry = _geometry(args, config)
    plan = build_plan(
        geometry["baselines"],
        geometry["pixels"],
        config.eps,
        config.partition_budget(),
        direct_threshold=config.threshold,
        strict_accuracy=config.strict_accuracy,
        workers=1,
    )
    report = {
        "version": version_string(),
        "config_hash": config_hash(config.to_dict()),
        **chunk_inspect(plan),
    }
    if args.get("out"):
        write_json(args["out"], report)
    else:
        print(json.dumps(make_dict_json_compatible(report), indent=2))
    return 0


def cmd_accuracy(args: dict) -> int:
    sweep = AccuracySweep(resolve_config(args))
    save_table(sweep.run(args["eps_list"]), args["out"])
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "mesh": cmd_mesh,
    "vis2dirty": cmd_vis2dirty,
    "dirty2vis": cmd_dirty2vis,
    "compare": cmd_compare,
    "bench": cmd_bench,
    "chunk-inspect": cmd_chunk_inspect,
    "accuracy": cmd_accuracy,
}


def main(argv=None) -> int:
    cli_parser = make_cli_parser()
    args = vars(cli_parser.parse_args(argv))
    logging.basicConfig(
        level=args["loglevel"].upper(),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    if not validate_parsed_args(args):
        return 2
    try:
        return COMMANDS[args["command"]](args)
    except GridderError as error:
        logging.error(str(error))
        return error.exit_code
    except Exception:
        logging.exception("Unexpected failure")
        return InvariantError.exit_code
