from pathlib import Path
import logging

import click

from levy_lie.commands.common import experiment_options, finish, group_triple, load_config, run_command
from levy_lie.schemas.experiment import CommandName
from levy_lie.services.estimation_service import estimation_service
from levy_lie.services.io_service import io_service
from levy_lie.services.simulation_service import simulation_service

logger = logging.getLogger(__name__)


@click.command("estimate")
@experiment_options
def command(config_path, seed, paths, out, fmt):
    """Simulate a triple, estimate it back from the paths and write the estimated triple."""
    def body():
        cfg = load_config(CommandName.ESTIMATE, config_path, seed, paths, out, fmt)
        triple = group_triple(cfg.triple)
        ensemble = simulation_service.simulate_paths(triple, cfg.simulation)
        estimated = estimation_service.estimate_triple(ensemble, cfg.estimation)
        target = io_service.save_triple(estimated.as_triple(f"{triple.name}-estimated"), Path(cfg.output_dir) / "estimated_triple.json")
        logger.info(f"✓ Estimated triple written to {target}")
        return finish(cfg, True, {
            "estimation": estimated.diagnostics.model_dump(mode="json"),
            "output": {"estimated_triple": target.name},
        })

    run_command("estimate", body)
