from pathlib import Path
import logging

import click

from levy_lie.commands.common import experiment_options, finish, load_config, run_command
from levy_lie.models.space import SpaceTriple
from levy_lie.schemas.experiment import CommandName
from levy_lie.services.homogeneous_service import homogeneous_service
from levy_lie.services.io_service import io_service
from levy_lie.services.simulation_service import simulation_service

logger = logging.getLogger(__name__)


@click.command("simulate")
@experiment_options
def command(config_path, seed, paths, out, fmt):
    """Simulate sample paths of a triple and write them as a path file."""
    def body():
        cfg = load_config(CommandName.SIMULATE, config_path, seed, paths, out, fmt)
        triple = io_service.load_triple(cfg.triple)
        out_dir = Path(cfg.output_dir)
        if isinstance(triple, SpaceTriple):
            ensemble = homogeneous_service.simulate_on_space(triple, cfg.simulation)
            target = io_service.write_paths(ensemble, out_dir / "xpaths.csv")
            grid = ensemble.grid
        else:
            target = out_dir / f"paths.{cfg.format}"
            grid = None
            for ensemble in simulation_service.iter_ensembles(triple, cfg.simulation):
                io_service.write_paths(ensemble, target, cfg.format, append=grid is not None)
                grid = ensemble.grid
        return finish(cfg, True, {
            "simulation": {
                "triple": triple.name,
                "paths": cfg.simulation.paths,
                "steps": len(grid) - 1,
                "horizon": float(grid[-1]),
                "scheme": cfg.simulation.scheme.value,
                "output": target.name,
            }
        })

    run_command("simulate", body)
