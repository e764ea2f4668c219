"""
levy-lie command line
Main application file
"""

import logging

import click

from levy_lie.core.config import settings
from levy_lie.commands import estimate, roundtrip, simulate, space, verify

# ============================================================================
# Logging Configuration
# ============================================================================

logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
    format=settings.log_format,
)
logger = logging.getLogger(__name__)

# ============================================================================
# Command Group
# ============================================================================


@click.group()
@click.version_option(settings.app_version, prog_name=settings.app_name)
def cli():
    """Simulate, estimate and verify inhomogeneous Levy processes on Lie groups."""
    logger.debug(f"Environment: {settings.ENVIRONMENT}, workers: {settings.sim_workers}")


# ============================================================================
# Command Registration
# ============================================================================

cli.add_command(simulate.command)  # Path generation
cli.add_command(estimate.command)  # Triple estimation from simulated paths
cli.add_command(verify.command)  # Martingale suite
cli.add_command(roundtrip.command)  # Simulate, estimate, compare
cli.add_command(space.project)  # Lift to SO(3), simulate, project to S2
cli.add_command(space.lift_check)  # Lifted vs direct simulation on S2


if __name__ == "__main__":
    cli()
