"""Flat-trace CLT laboratory for hyperbolic toral automorphisms.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from time import perf_counter
from typing import Any

import yaml

from . import __version__
from .errors import ConfigError, FlatTraceError
from .fields import FieldSpec, assemble_roof
from .harness import Experiment, build_report, orbit_covariance_check, require_samples, run_trials
from .output import (
    field_rows, orbit_rows, pressure_rows, render_csv, render_json, render_summary, trace_rows, write_outputs,
)
from .pressure import pressure_curve, pression_decay_check
from .torus import enumerate_periodic_points, make_automorphism, min_periodic_distance
from .trace import flat_trace, max_period, xi_for_regime
from .types import ExperimentConfig, RunManifest
from .util import default_workers

DEFAULT_FILE = "flattrace.yaml"

log = logging.getLogger("flattrace")

Result = tuple[dict[str, Any], dict[str, str]]


def main(argv: list[str] | None = None):
    parser = argparse.ArgumentParser(prog="flattrace", description=__doc__)
    parser.add_argument(
        "-j", "--json", action="store_true", default=None,
        help="Input JSON instead of YAML (default: use file ext).",
    )
    parser.add_argument(
        "-J", "--json-out",
        action="store_true",
        help="Output JSON instead of YAML."
    )
    parser.add_argument(
        "-f", "--file", default=DEFAULT_FILE,
        help=f"Experiment configuration file or - for stdin (default: {DEFAULT_FILE}).",
    )
    parser.add_argument("-o", "--out", default=".", type=Path, help="Output directory (default: .).")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Only log warnings and errors.")
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log debug detail.")
    parser.add_argument("-w", "--workers", type=int, default=None, help="Worker threads (default: $FLATTRACE_WORKERS or 1).")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="Override a config key; dotted keys reach into the field section.",
    )

    subparsers = parser.add_subparsers(title="commands", metavar="COMMAND", help="Command:", required=True)

    orbits_parser = subparsers.add_parser("orbits", help="- Enumerate periodic orbits.")
    orbits_parser.set_defaults(func=_orbits)
    field_parser = subparsers.add_parser("field", help="- Sample one random roof.")
    field_parser.set_defaults(func=_field)
    trace_parser = subparsers.add_parser("trace", help="- Compute one flat trace.")
    trace_parser.set_defaults(func=_trace)
    clt_parser = subparsers.add_parser("clt", help="- Run the CLT experiment.")
    clt_parser.add_argument(
        "-c", "--covariance", action="store_true", help="Also check the orbit covariance of band n.",
    )
    clt_parser.set_defaults(func=_clt)
    pressure_parser = subparsers.add_parser("pressure", help="- Compute the pressure curve.")
    pressure_parser.set_defaults(func=_pressure)
    regime_parser = subparsers.add_parser("regime", help="- Show the frequency regime.")
    regime_parser.set_defaults(func=_regime)

    args = parser.parse_args(argv)

    logging.basicConfig(
        stream=sys.stderr, format="%(message)s", force=True,
        level=logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO,
    )

    try:
        config = load_config(args.file, args.json, args.set)
        workers = args.workers or config.workers or default_workers()
        start = perf_counter()
        summary, bodies = args.func(config, args, workers)
        manifest = RunManifest(
            command=args.func.__name__.lstrip("_"),
            config=config.asdict(),
            seed=config.seed,
            version=__version__,
            outputs=[*bodies, "manifest.json"],
        )
        manifest.duration = perf_counter() - start
        write_outputs(args.out, bodies | {"manifest.json": render_json(manifest.asdict())})
    except (FlatTraceError, ValueError) as error:
        if not isinstance(error, FlatTraceError):
            error = ConfigError(str(error))
        log.error(f"{error.code} !! {error}")
        print(json.dumps(error.as_dict()))
        sys.exit(error.exit_code)

    print(render_summary(summary, args.json_out))
    sys.exit(0)


def _override(doc: dict, assignment: str):
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"Expected KEY=VALUE, got {assignment!r}")
    *path, leaf = key.split(".")
    target = doc
    for part in path:
        target = target.setdefault(part, {})
        if not isinstance(target, dict):
            raise ConfigError(f"Cannot set {key!r}: {part!r} is not a section")
    target[leaf] = yaml.safe_load(raw)


def load_config(file: str, json_in: bool | None = None, overrides: list[str] = ()) -> ExperimentConfig:
    """Read one YAML (or JSON) document and resolve it into an ``ExperimentConfig``.

    Raises:
        ConfigError: on unreadable files, unknown keys or values rejected by validation.
    """
    try:
        if file == "-":
            text = sys.stdin.read()
        elif file == DEFAULT_FILE and not os.path.exists(file):
            text = ""
        else:
            with open(file) as stream:
                text = stream.read()
        use_json = json_in if json_in is not None else file.endswith(".json")
        doc = (json.loads(text) if use_json else yaml.safe_load(text)) or {}
    except (OSError, ValueError, yaml.YAMLError) as error:
        raise ConfigError(f"Cannot read {file}: {error}") from error

    if not isinstance(doc, dict):
        raise ConfigError(f"Expected a mapping in {file}, got {type(doc).__name__}")
    for assignment in overrides:
        _override(doc, assignment)

    try:
        return ExperimentConfig(**doc)
    except FlatTraceError:
        raise
    except (TypeError, ValueError, KeyError) as error:
        raise ConfigError(str(error)) from error


def _orbits(config: ExperimentConfig, args: argparse.Namespace, workers: int) -> Result:
    automorphism = make_automorphism(config.matrix)
    table = enumerate_periodic_points(automorphism, config.n, budget=config.budget)
    summary = dict(
        table.info(),
        min_distance=min_periodic_distance(table) if table.total_points > 1 else None,
    )
    header = ["n", "orbit_id", "m", "weight", *(f"x_{i + 1}" for i in range(table.dimension))]
    return summary, {
        "orbits.csv": render_csv(header, orbit_rows(table)),
        "summary.json": render_json(summary),
    }


def _field(config: ExperimentConfig, args: argparse.Namespace, workers: int) -> Result:
    automorphism = make_automorphism(config.matrix)
    spec = FieldSpec.build(config.field, automorphism, config.n, j_max=config.j_max)
    sample = assemble_roof(spec, config.seed)
    summary = dict(seed=config.seed, **spec.info())
    return summary, {
        "field.csv": render_csv(["index", "k", "kind", "coefficient"], field_rows(sample)),
    }


def _trace(config: ExperimentConfig, args: argparse.Namespace, workers: int) -> Result:
    experiment = Experiment(config)
    sample = flat_trace(experiment.table, assemble_roof(experiment.spec, config.seed, 0), experiment.xi, seed=0)
    summary = dict(n=sample.n, xi=sample.xi, seed=config.seed, raw=sample.raw, scaled=sample.scaled)
    return summary, {
        "trace.csv": render_csv(
            ["n", "xi", "seed", "re_raw", "im_raw", "re_scaled", "im_scaled"], trace_rows([sample]),
        ),
    }


def _clt(config: ExperimentConfig, args: argparse.Namespace, workers: int) -> Result:
    require_samples(config.trials)
    experiment = Experiment(config)
    samples = run_trials(config, workers, experiment=experiment)
    covariance = orbit_covariance_check(config) if args.covariance else None
    report = build_report(config, samples, experiment.table, covariance=covariance)
    doc = dict(n=config.n, xi=experiment.xi, A_n=experiment.amplitude, **report.asdict())
    summary = dict(passed=report.passed, verdicts=doc["verdicts"])
    return summary, {
        "samples.csv": render_csv(
            ["n", "xi", "seed", "re_raw", "im_raw", "re_scaled", "im_scaled"], trace_rows(samples),
        ),
        "report.json": render_json(doc),
    }


def _pressure(config: ExperimentConfig, args: argparse.Namespace, workers: int) -> Result:
    automorphism = make_automorphism(config.matrix)
    curve = pressure_curve(automorphism, config.betas, config.periods, budget=config.budget)
    decay = pression_decay_check(automorphism, config.periods, budget=config.budget)
    summary = dict(
        J_u_min=curve.ju_min,
        h_top=curve.h_top,
        betas=list(curve.betas),
        latest=list(curve.latest),
        extrapolated=list(curve.extrapolated) if curve.extrapolated else None,
        decreasing=curve.is_decreasing(),
        sandwich=curve.sandwich_holds(),
        decay={n: v for n, v in zip(config.periods, decay)},
    )
    return summary, {
        "pressure.csv": render_csv(["beta", "n", "F_n"], pressure_rows(curve)),
        "pressure.json": render_json(summary),
    }


def _regime(config: ExperimentConfig, args: argparse.Namespace, workers: int) -> Result:
    automorphism = make_automorphism(config.matrix)
    alpha = config.field.alpha
    sharp = xi_for_regime(automorphism, config.n, alpha, config.c)
    xi = config.xi if config.xi is not None else sharp
    summary = dict(
        n=config.n,
        alpha=alpha,
        c=config.c,
        xi=sharp,
        xi_earlier=xi_for_regime(automorphism, config.n, alpha, config.c, sharp=False),
        max_period=max_period(automorphism, xi, alpha, config.c),
        max_period_earlier=max_period(automorphism, xi, alpha, config.c, sharp=False),
    )
    return summary, {"regime.json": render_json(summary)}


if __name__ == "__main__":
    main()
