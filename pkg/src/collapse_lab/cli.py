from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import sys
from collections.abc import Iterator
from pathlib import Path
from typing import TextIO

import numpy as np
from pydantic import ValidationError

from collapse_lab.entities.constants import PhysicalConstants
from collapse_lab.entities.results import CatnessValue
from collapse_lab.entities.scenario import ModelChoice
from collapse_lab.exceptions import CollapseLabError, ConfigError
from collapse_lab.impl.catdemo import demo_conservation, masking_report
from collapse_lab.impl.catness import catness_CSL, catness_G, lifetime, rate_from_catness
from collapse_lab.impl.densities import translate
from collapse_lab.impl.ensembles import helium_regime_sweep, write_sweep_csv
from collapse_lab.impl.rates import com_rate_small_displacement
from collapse_lab.impl.scenario import Scenario
from collapse_lab.impl.verify import SUITES, run_suite
from collapse_lab.utils import format_float, json_default_serializer, parse_quantity, resolve_run_settings

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY = 3

SWEEP_PARAMS = ("dx", "spreadWidth", "sigma")

logger = logging.getLogger(__name__)


def _configure_logging(verbosity: int) -> None:
    if verbosity <= 0:
        return
    level = logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


@contextlib.contextmanager
def _output(args: argparse.Namespace) -> Iterator[TextIO]:
    if not args.out:
        yield sys.stdout
        return
    with Path(args.out).expanduser().open("w", encoding="utf-8", newline="") as stream:
        yield stream


def _scenario(args: argparse.Namespace) -> Scenario:
    if not args.config:
        raise ConfigError("this command needs a scenario file (--config PATH)")
    return Scenario.load(Path(args.config))


def _quantity(value: str | None, dimension: str) -> float | None:
    return None if value is None else parse_quantity(value, dimension)


def _echo(stream: TextIO, lines: list[str]) -> None:
    for line in lines:
        print(f"# {line}", file=stream)


def _catness(scenario: Scenario, model: ModelChoice, dx: float) -> CatnessValue:
    body = scenario.body()
    moved = translate(body, (dx, 0.0, 0.0))
    if model == ModelChoice.CSL:
        return catness_CSL(body, moved, scenario.csl, scenario.consts)
    return catness_G(body, moved, scenario.resolution, scenario.consts)


def _models(scenario: Scenario) -> list[ModelChoice]:
    if scenario.config.model == ModelChoice.BOTH:
        return [ModelChoice.DP, ModelChoice.CSL]
    return [scenario.config.model]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collapse-lab",
        description="Spontaneous-collapse catness, lifetimes and rates for DP and CSL models.",
    )
    parser.add_argument("--config", default=None, help="Path to a JSON scenario file.")
    parser.add_argument("--seed", default=None, help="Random seed (env: COLLAPSE_LAB_SEED).")
    parser.add_argument("--threads", default=None, help="Worker threads (env: COLLAPSE_LAB_THREADS).")
    parser.add_argument("--out", default=None, help="Write the report to this file instead of stdout.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Log to stderr (-vv for debug).")

    subparsers = parser.add_subparsers(dest="command", required=True)

    rate_parser = subparsers.add_parser("rate", help="Catness, lifetime and rate per displacement.")
    rate_parser.add_argument("--dx", help='Single displacement overriding the scenario list, e.g. "1e-14 m".')

    sweep_parser = subparsers.add_parser("sweep", help="CSV sweep over one parameter.")
    sweep_parser.add_argument("--param", required=True, choices=SWEEP_PARAMS, help="Parameter to sweep.")
    sweep_parser.add_argument("--range", nargs=2, required=True, metavar=("LO", "HI"), help="Sweep bounds.")
    sweep_parser.add_argument("--points", type=int, default=20, help="Number of points (default: 20).")
    sweep_parser.add_argument("--scale", choices=("linear", "log"), default="log", help="Spacing (default: log).")
    sweep_parser.add_argument("--dx", help="Displacement for sigma and spreadWidth sweeps.")

    compare_parser = subparsers.add_parser("compare", help="DP against CSL per displacement.")
    compare_parser.add_argument("--dx", help="Single displacement overriding the scenario list.")
    compare_parser.add_argument("--env-rate", help='Environmental decoherence rate, e.g. "1e9 /s".')

    verify_parser = subparsers.add_parser("verify", help="Run a verification suite.")
    verify_parser.add_argument("--suite", required=True, help=f"One of: {', '.join(SUITES)}.")

    demo_parser = subparsers.add_parser("demo-conservation", help="Measure a two-branch cat state repeatedly.")
    demo_parser.add_argument("--separation", default="1 m", help="Branch separation (default: 1 m).")
    demo_parser.add_argument("--trials", type=int, default=10, help="Number of measurements (default: 10).")
    demo_parser.add_argument(
        "--weights",
        nargs=2,
        type=float,
        default=(0.5, 0.5),
        metavar=("W0", "W1"),
        help="Born weights of the two branches (default: 0.5 0.5).",
    )

    return parser


def _handle_rate(args: argparse.Namespace) -> int:
    scenario = _scenario(args)
    dxs = scenario.displacements(_quantity(args.dx, "length"))
    oscillator = scenario.oscillator()
    columns = ("model", "dx_m", "l2_j", "tau_s", "rate_hz", "method", "first_order_rate_hz", "regime_valid", "heuristic")
    with _output(args) as stream:
        _echo(stream, scenario.echo())
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(columns)
        for model in _models(scenario):
            for dx in dxs:
                l2 = _catness(scenario, model, dx)
                rate = rate_from_catness(l2, scenario.convention, scenario.consts)
                first_order, regime, heuristic = "", "", rate.heuristic
                if oscillator is not None and model == ModelChoice.DP:
                    mass, omega, scale = oscillator
                    estimate = com_rate_small_displacement(
                        mass, omega, dx, scenario.convention, scenario.consts, scale,
                        heuristic=scenario.config.matter is not None,
                    )
                    first_order, regime = format_float(estimate.value), str(estimate.regime_valid).lower()
                    heuristic = estimate.heuristic
                writer.writerow(
                    [
                        model.value,
                        format_float(dx),
                        format_float(l2.value),
                        format_float(lifetime(l2, scenario.convention, scenario.consts)),
                        format_float(rate.value),
                        l2.method.value,
                        first_order,
                        regime,
                        str(heuristic).lower(),
                    ]
                )
    return EXIT_OK


def _sweep_values(lo: float, hi: float, points: int, scale: str) -> np.ndarray:
    if points < 1:
        raise ConfigError("points must be at least 1")
    if hi < lo:
        raise ConfigError("range upper bound is below the lower bound")
    if scale == "log":
        if lo <= 0:
            raise ConfigError("log sweeps need a positive range")
        return np.array([lo]) if points == 1 else np.logspace(math.log10(lo), math.log10(hi), points)
    return np.array([lo]) if points == 1 else np.linspace(lo, hi, points)


def _handle_sweep(args: argparse.Namespace) -> int:
    scenario = _scenario(args)
    dimension = "length"
    lo, hi = (parse_quantity(v, dimension) for v in args.range)
    values = _sweep_values(lo, hi, args.points, args.scale)
    seed, threads = resolve_run_settings(
        args.seed, args.threads, scenario.config.mc.seed if scenario.config.mc else None
    )
    _echo(sys.stderr, scenario.echo() + [f"seed={seed} threads={threads}"])

    with _output(args) as stream:
        writer = csv.writer(stream, lineterminator="\n")
        match args.param:
            case "dx":
                model = ModelChoice.CSL if scenario.config.model == ModelChoice.CSL else ModelChoice.DP
                writer.writerow(("dx_m", "l2_j", "rate_hz", "method"))
                for dx in values:
                    l2 = _catness(scenario, model, float(dx))
                    rate = rate_from_catness(l2, scenario.convention, scenario.consts)
                    writer.writerow([format_float(dx), format_float(l2.value), format_float(rate.value), l2.method.value])
            case "sigma":
                dx = scenario.displacements(_quantity(args.dx, "length"))[0]
                body = scenario.body()
                moved = translate(body, (dx, 0.0, 0.0))
                writer.writerow(("sigma_m", "l2_j", "rate_hz", "method"))
                for sigma in values:
                    res = scenario.resolution.model_copy(update={"sigma": float(sigma)})
                    l2 = catness_G(body, moved, res, scenario.consts)
                    rate = rate_from_catness(l2, scenario.convention, scenario.consts)
                    writer.writerow([format_float(sigma), format_float(l2.value), format_float(rate.value), l2.method.value])
            case "spreadWidth":
                dx = scenario.displacements(_quantity(args.dx, "length"))[0]
                samples = scenario.config.mc.samples if scenario.config.mc else 10_000
                rows = helium_regime_sweep(
                    scenario.lattice(),
                    [float(w) for w in values],
                    (dx, 0.0, 0.0),
                    scenario.convention,
                    samples,
                    seed,
                    scenario.consts,
                    scenario.resolution,
                    threads,
                )
                write_sweep_csv(rows, stream)
    return EXIT_OK


def _handle_compare(args: argparse.Namespace) -> int:
    scenario = _scenario(args)
    dxs = scenario.displacements(_quantity(args.dx, "length"))
    env_rate = _quantity(args.env_rate, "rate")
    if env_rate is None:
        env_rate = scenario.config.env_decoherence_rate
    columns = ["dx_m", "dp_l2_j", "dp_rate_hz", "dp_method", "csl_l2_j", "csl_rate_hz", "csl_method", "dp_over_csl"]
    if env_rate is not None:
        columns += ["env_rate_hz", "masking_ratio", "verdict", "max_com_shift_m"]
    csl = scenario.csl
    with _output(args) as stream:
        _echo(stream, scenario.echo() + [f"csl lambda={csl.lambda_!r} sigma={csl.sigma!r} m0={csl.m0!r}"])
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(columns)
        for dx in dxs:
            dp = _catness(scenario, ModelChoice.DP, dx)
            collapse = _catness(scenario, ModelChoice.CSL, dx)
            dp_rate = rate_from_catness(dp, scenario.convention, scenario.consts).value
            csl_rate = rate_from_catness(collapse, scenario.convention, scenario.consts).value
            ratio = math.inf if csl_rate == 0 and dp_rate > 0 else (dp_rate / csl_rate if csl_rate else math.nan)
            row = [
                format_float(dx),
                format_float(dp.value),
                format_float(dp_rate),
                dp.method.value,
                format_float(collapse.value),
                format_float(csl_rate),
                collapse.method.value,
                format_float(ratio),
            ]
            if env_rate is not None:
                report = masking_report(env_rate, dp, scenario.convention, scenario.consts, dx)
                row += [
                    format_float(report.env_rate),
                    format_float(report.ratio),
                    report.verdict,
                    format_float(report.max_com_shift),
                ]
            writer.writerow(row)
    return EXIT_OK


def _handle_verify(args: argparse.Namespace) -> int:
    if args.suite not in SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; expected one of {', '.join(SUITES)}")
    scenario = Scenario.load(Path(args.config)) if args.config else None
    consts = scenario.consts if scenario else PhysicalConstants()
    seed, threads = resolve_run_settings(args.seed, args.threads)
    failed = 0
    with _output(args) as stream:
        for result in run_suite(args.suite, consts, seed, threads):
            print(json.dumps(result.model_dump(mode="json", exclude_none=True), default=json_default_serializer), file=stream)
            stream.flush()
            failed += 0 if result.passed else 1
    if failed:
        print(f"{failed} check(s) failed in suite {args.suite}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _handle_demo_conservation(args: argparse.Namespace) -> int:
    separation = parse_quantity(args.separation, "length")
    if args.trials < 1:
        raise ConfigError("trials must be at least 1")
    seed, _ = resolve_run_settings(args.seed, args.threads)
    demo = demo_conservation(separation, args.trials, seed, list(args.weights))
    with _output(args) as stream:
        _echo(
            stream,
            [
                f"separation={separation!r} trials={args.trials} seed={seed}",
                "frequencies=" + " ".join(format_float(f) for f in demo.frequencies),
                "mean_shift=" + " ".join(format_float(x) for x in demo.mean_shift),
            ],
        )
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("trial", "branch", "shift_x_m", "shift_y_m", "shift_z_m", "shift_m"))
        for trial, (branch, shift) in enumerate(zip(demo.branch_indices, demo.shifts)):
            writer.writerow(
                [trial, int(branch), *(format_float(float(x)) for x in shift), format_float(float(np.linalg.norm(shift)))]
            )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    _configure_logging(args.verbose)

    try:
        match args.command:
            case "rate":
                return _handle_rate(args)
            case "sweep":
                return _handle_sweep(args)
            case "compare":
                return _handle_compare(args)
            case "verify":
                return _handle_verify(args)
            case "demo-conservation":
                return _handle_demo_conservation(args)
            case _:
                parser.print_usage(sys.stderr)
                return EXIT_CONFIG
    except (ConfigError, ValidationError, ValueError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CollapseLabError as exc:
        logger.debug("numerical failure", exc_info=True)
        print(f"Error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
