"""
Shared options, config loading and exit handling for the CLI commands.
"""
from pathlib import Path
from typing import Callable, Dict, Optional
import json
import logging
import sys

import click

from levy_lie.core.exceptions import ConfigError, LevyLieError
from levy_lie.models.space import SpaceTriple
from levy_lie.models.triple import ExtendedLevyTriple
from levy_lie.schemas.experiment import CommandName, ExperimentConfig
from levy_lie.schemas.reports import RunReport
from levy_lie.services.io_service import io_service

logger = logging.getLogger(__name__)

EXIT_SUITE_FAILED = 1
EXIT_ERROR = 2


def experiment_options(fn: Callable) -> Callable:
    """--config, --seed, --paths, --out and --format"""
    fn = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None, help="Path file format")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory")(fn)
    fn = click.option("--paths", type=click.IntRange(min=1), default=None, help="Number of sample paths")(fn)
    fn = click.option("--seed", type=int, default=None, help="Experiment seed")(fn)
    fn = click.option(
        "--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True,
        help="Experiment configuration (JSON)",
    )(fn)
    return fn


def load_config(
    command: CommandName,
    config_path: str,
    seed: Optional[int],
    paths: Optional[int],
    out: Optional[str],
    fmt: Optional[str],
) -> ExperimentConfig:
    cfg = io_service.load_experiment(config_path, {
        "command": command.value,
        "simulation.seed": seed,
        "simulation.paths": paths,
        "output_dir": out,
        "format": fmt,
    })
    logger.info(f"Config: {config_path} (seed={cfg.simulation.seed}, paths={cfg.simulation.paths})")
    return cfg


def group_triple(path: str) -> ExtendedLevyTriple:
    triple = io_service.load_triple(path)
    if not isinstance(triple, ExtendedLevyTriple):
        raise ConfigError(f"{path} declares a triple on a homogeneous space; a group triple is required")
    return triple


def space_triple(path: str) -> SpaceTriple:
    triple = io_service.load_triple(path)
    if not isinstance(triple, SpaceTriple):
        raise ConfigError(f"{path} declares a group triple; a triple with a 'space' section is required")
    return triple


def finish(cfg: ExperimentConfig, passed: bool, sections: Dict[str, dict]) -> RunReport:
    """Write report.json into the output directory and return the report."""
    report = io_service.run_report(cfg.command.value, cfg, cfg.simulation.seed, passed, sections)
    target = io_service.write_report(report, Path(cfg.output_dir) / "report.json")
    click.echo(str(target))
    return report


def run_command(name: str, body: Callable[[], RunReport]) -> None:
    """
    Run ``body`` between banner lines. Library errors become a JSON error
    document on stderr and exit status 2; a failed suite exits with 1.
    """
    logger.info("=" * 60)
    logger.info(f"Running {name}")
    logger.info("=" * 60)
    try:
        report = body()
    except LevyLieError as e:
        logger.error(f"✗ {name} failed: {e.message}")
        click.echo(json.dumps({"error": e.to_dict()}, sort_keys=True, default=str), err=True)
        sys.exit(EXIT_ERROR)
    logger.info("=" * 60)
    if report.passed:
        logger.info(f"✓ {name} finished")
    else:
        logger.warning(f"✗ {name} finished with failed checks")
    logger.info("=" * 60)
    if not report.passed:
        sys.exit(EXIT_SUITE_FAILED)
