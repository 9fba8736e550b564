"""Command-line entry point: python -m app.main <subcommand> [flags]"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from pydantic import ValidationError

from app.models import CircleRotation, RunConfig
from app.routers import averages_router, equicontinuity_router, measures_router
from app.services import averaging_service, equicontinuity_service, measures_service, systems_service
from app.services.systems_service import NAMED_ALPHAS, parse_alpha
from app.utils.commands import Command, CommandRouter
from app.utils.errors import ConfigError, ErgodicError
from app.utils.reports import check_writable, write_csv, write_json

logger = logging.getLogger("app")

app = CommandRouter()

# Include routers
app.include_router(averages_router)
app.include_router(measures_router)
app.include_router(equicontinuity_router)


def build_parser(router: CommandRouter = app) -> argparse.ArgumentParser:
    """One subparser per registered command, all sharing the RunConfig flags"""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--system", help="rotation:<alpha>, doubling, shift:<source> or SystemSpec JSON")
    common.add_argument("--x", help="start point: circle position, shift offset or point JSON")
    common.add_argument("--y", help="second point for pair distances and extra start point")
    common.add_argument("--n", type=int, help="horizon")
    common.add_argument("--scheme", help="both, arithmetic|cesaro, logarithmic|log, weyl-cesaro, weyl-logarithmic")
    common.add_argument("--seed", type=int)
    common.add_argument("--n0", type=int, help="first point of the geometric schedule")
    common.add_argument("--ratio", type=float, help="ratio of the geometric schedule")
    common.add_argument("--window-fraction", type=float, help="tail share of the schedule")
    common.add_argument("--alpha", help="rotation number for oxtoby (float, phi or sqrt2)")
    common.add_argument("--mc", dest="mc_samples", type=int, help="Monte Carlo samples")
    common.add_argument("--starts", type=int, help="start points for unique-ergodicity")
    common.add_argument("--pairs", type=int, help="pairs for sensitivity (at least 30)")
    common.add_argument("--samples", type=int, help="pairs per delta for the modulus")
    common.add_argument("--quantile", type=float, help="quantile of tail gaps used for sensitivity")
    common.add_argument("--tol", type=float, help="unique-ergodicity tolerance")
    common.add_argument("--threshold", type=float, help="sensitivity threshold")
    common.add_argument("--cluster-tol", type=float, help="rho tolerance for V-set clusters")
    common.add_argument("--radius", type=float, help="ball radius for sensitivity pairs")
    common.add_argument("--mode", choices=["ball", "measure"])
    common.add_argument("--family-size", type=int, help="number of test-family probes")
    common.add_argument("--threads", type=int, help="worker cap for pair sweeps")
    common.add_argument("--out-csv", help="CSV output path")
    common.add_argument("--out-json", help="JSON output path")
    common.add_argument("-v", "--verbose", action="count", help="-v for INFO, -vv for DEBUG")

    parser = argparse.ArgumentParser(
        prog="python -m app.main",
        description="Orbit averages, empirical measures and mean equicontinuity experiments",
    )
    subparsers = parser.add_subparsers(dest="experiment", required=True, metavar="subcommand")
    for command in router.commands.values():
        subparsers.add_parser(command.name, parents=[common], help=command.help.splitlines()[0] if command.help else None)
    return parser


def configure_logging(verbose: int = 0) -> None:
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        name = os.getenv("ERGODIC_LOG_LEVEL", "WARNING").upper()
        level = logging.getLevelName(name)
        if not isinstance(level, int):
            level = logging.WARNING
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def load_config_file(path: str) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read config file '{path}': {e.strerror or e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file '{path}' is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file '{path}' must hold a JSON object")
    return data


def environment_defaults() -> Dict[str, Any]:
    """Lowest layer of the configuration: service defaults and ERGODIC_SEED"""
    defaults: Dict[str, Any] = {
        "n0": averaging_service.schedule_n0,
        "ratio": averaging_service.schedule_ratio,
        "window_fraction": averaging_service.window_fraction,
        "family_size": measures_service.family_size,
        "threads": max(1, equicontinuity_service.threads),
        "tol": equicontinuity_service.ue_tol,
        "threshold": equicontinuity_service.sensitivity_threshold,
    }
    seed = os.getenv("ERGODIC_SEED")
    if seed:
        try:
            defaults["seed"] = int(seed)
        except ValueError:
            raise ConfigError(f"ERGODIC_SEED must be an integer, got '{seed}'")
    return defaults


def _parse_point(system, value):
    if isinstance(value, dict):
        return systems_service.parse_point(system, json.dumps(value))
    return systems_service.parse_point(system, str(value))


def resolve_config(args: argparse.Namespace, command: Command) -> RunConfig:
    """flags > config file > ERGODIC_SEED > defaults"""
    given = vars(args).copy()
    given.pop("verbose", None)
    config_path = given.pop("config", None)

    merged = environment_defaults()
    if config_path:
        merged.update(load_config_file(config_path))
    merged.update(given)
    merged["experiment"] = command.name

    if merged.get("alpha") is not None:
        merged["alpha"] = parse_alpha(merged["alpha"])

    system = merged.get("system")
    if system is None:
        if command.requires_system:
            raise ConfigError(f"'{command.name}' needs --system (or 'system' in the config file)")
        alpha = merged.get("alpha")
        system = CircleRotation(alpha=NAMED_ALPHAS["phi"] if alpha is None else alpha)
    elif isinstance(system, str):
        system = systems_service.parse_system(system)
    elif isinstance(system, dict):
        system = systems_service.parse_system(json.dumps(system))
    else:
        raise ConfigError("'system' must be a shorthand string or a SystemSpec object")
    merged["system"] = system

    if merged.get("x") is None:
        merged["x"] = systems_service.reference_point(system)
    else:
        merged["x"] = _parse_point(system, merged["x"])
    if merged.get("y") is not None:
        merged["y"] = _parse_point(system, merged["y"])

    return RunConfig.model_validate(merged)


def run(argv: Optional[List[str]] = None) -> int:
    """Execute one subcommand; returns 0 on success, 2 on invalid config, 1 on internal error"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(getattr(args, "verbose", 0) or 0)
    try:
        command = app.get(args.experiment)
        config = resolve_config(args, command)
        check_writable(config.out_csv)
        check_writable(config.out_json)
        equicontinuity_service.threads = config.threads

        logger.info("running %s on %s", command.name, config.system.kind)
        result = command.handler(config)

        if config.out_csv:
            if result.csv_fields:
                write_csv(config.out_csv, result.csv_fields, result.csv_rows)
            else:
                logger.warning("'%s' has no tabular output; --out-csv ignored", command.name)
        write_json(config.out_json, {"experiment": command.name, "config": config, "result": result.document})

    except ErgodicError as e:
        logger.debug("run failed", exc_info=True)
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception("internal error")
        print(f"error: internal error: {e}", file=sys.stderr)
        return 1

    print(result.summary)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
