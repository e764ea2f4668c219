import logging

import click

from levy_lie.commands.common import experiment_options, finish, group_triple, load_config, run_command
from levy_lie.schemas.experiment import CommandName
from levy_lie.services.estimation_service import estimation_service
from levy_lie.services.simulation_service import simulation_service
from levy_lie.services.verification_service import verification_service

logger = logging.getLogger(__name__)


@click.command("roundtrip")
@experiment_options
def command(config_path, seed, paths, out, fmt):
    """Simulate, estimate and compare the estimated triple with the true one."""
    def body():
        cfg = load_config(CommandName.ROUNDTRIP, config_path, seed, paths, out, fmt)
        triple = group_triple(cfg.triple)
        ensemble = simulation_service.simulate_paths(triple, cfg.simulation)
        estimated = estimation_service.estimate_triple(ensemble, cfg.estimation)
        step = float(max(ensemble.grid[1:] - ensemble.grid[:-1]))
        report = verification_service.round_trip_check(
            estimated.as_triple(), triple, ensemble.horizon, time_tolerance=step + 1e-9
        )
        return finish(cfg, report.passed, {
            "round_trip": report.model_dump(mode="json"),
            "estimation": estimated.diagnostics.model_dump(mode="json"),
        })

    run_command("roundtrip", body)
