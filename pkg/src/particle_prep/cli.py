"""Command-line interface.

    particle-prep run --config prep.cfg [--key value ...]
    particle-prep clean-only --config prep.cfg [--key value ...]
    particle-prep builtin --name wedge --tip 0.05 --out wedge.csv

Every configuration key can be overridden on the command line with a flag
of the same name (e.g. --clean.max_passes 5). Exit codes: 0 ok, 2 config,
3 i/o, 4 geometry, 5 non-convergence (artifacts still written).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io as ppio
from .builtin import BUILTIN_NAMES, builtin_geometry
from .errors import ConfigurationError, ParticlePrepError
from .pipeline import (
    EXIT_CONFIG,
    EXIT_GEOMETRY,
    EXIT_IO,
    PipelineConfig,
    _parse_param,
    parse_config_file,
    run_clean_only,
    run_pipeline,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="particle-prep",
        description="Level-set based geometry cleaning and body-fitted "
        "particle generation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline")
    p_run.add_argument("--config", help="key=value configuration file")

    p_clean = sub.add_parser(
        "clean-only", help="stop after geometry cleaning; dump field and report"
    )
    p_clean.add_argument("--config", help="key=value configuration file")

    p_builtin = sub.add_parser(
        "builtin", help="generate a builtin analog geometry file"
    )
    p_builtin.add_argument("--name", required=True, choices=BUILTIN_NAMES)
    p_builtin.add_argument("--out", required=True, help=".csv (2D) or .stl (3D)")

    args, extra = parser.parse_known_args(argv)

    try:
        overrides = _parse_overrides(extra)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "builtin":
        return _cmd_builtin(args, overrides)

    flat = {}
    if args.config:
        try:
            flat.update(parse_config_file(args.config))
        except FileNotFoundError as exc:
            print(f"i/o error: {exc}", file=sys.stderr)
            return EXIT_IO
        except ConfigurationError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    flat.update(overrides)
    try:
        config = PipelineConfig.from_flat(flat)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "clean-only":
        return run_clean_only(config)
    return run_pipeline(config)


def _parse_overrides(tokens):
    overrides = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigurationError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, _, value = key.partition("=")
        else:
            if i + 1 >= len(tokens):
                raise ConfigurationError(f"flag --{key} is missing a value")
            value = tokens[i + 1]
            i += 1
        overrides[key] = value
        i += 1
    return overrides


def _cmd_builtin(args, overrides) -> int:
    params = {k: _parse_param(v) for k, v in overrides.items()}
    try:
        geom = builtin_geometry(args.name, params)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        if geom.dimension == 2:
            if out.suffix.lower() != ".csv":
                print(
                    f"configuration error: 2D geometry exports to .csv, got {out}",
                    file=sys.stderr,
                )
                return EXIT_CONFIG
            ppio.write_polyline_csv(geom, out)
        else:
            if out.suffix.lower() != ".stl":
                print(
                    f"configuration error: 3D geometry exports to .stl, got {out}",
                    file=sys.stderr,
                )
                return EXIT_CONFIG
            ppio.write_stl_ascii(geom, out, name=args.name)
    except (OSError, ValueError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ParticlePrepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
