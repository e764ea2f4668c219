"""
Commands for triples on the sphere: project a lifted simulation, and check
that lifting then projecting matches direct simulation in law.
"""
from pathlib import Path
import logging

import click
import numpy as np

from levy_lie.commands.common import experiment_options, finish, group_triple, load_config, run_command, space_triple
from levy_lie.core.exceptions import NotIrreducible
from levy_lie.schemas.experiment import CommandName
from levy_lie.services.homogeneous_service import homogeneous_service
from levy_lie.services.io_service import io_service
from levy_lie.services.simulation_service import simulation_service

logger = logging.getLogger(__name__)

KS_TOLERANCE = 0.02


def _lifted(cfg, triple):
    if cfg.lifted_triple:
        return group_triple(cfg.lifted_triple)
    return homogeneous_service.lift_triple(triple)


@click.command("project")
@experiment_options
def project(config_path, seed, paths, out, fmt):
    """
    Lift a sphere triple to SO(3), simulate it and project the paths to S2.
    Pure isotropic diffusions are also checked against the heat kernel.
    """
    def body():
        cfg = load_config(CommandName.PROJECT, config_path, seed, paths, out, fmt)
        triple = space_triple(cfg.triple)
        lifted = _lifted(cfg, triple)
        ensemble = homogeneous_service.project_ensemble(
            simulation_service.simulate_paths(lifted, cfg.simulation), triple.space
        )
        target = io_service.write_paths(ensemble, Path(cfg.output_dir) / "xpaths.csv")
        sections = {"projection": {"paths": ensemble.n_paths, "steps": len(ensemble.grid) - 1, "output": target.name}}
        passed = True
        if not triple.pieces and not triple.atoms:
            try:
                a_values = homogeneous_service.isotropic_rate(triple)
            except NotIrreducible:
                a_values = None
            if a_values is not None:
                a = float(np.interp(ensemble.horizon, triple.cov.grid, a_values))
                statistic, pvalue = homogeneous_service.colatitude_ks(ensemble, ensemble.horizon, a)
                # 1% critical value for small ensembles
                tolerance = max(KS_TOLERANCE, 1.63 / np.sqrt(ensemble.n_paths))
                passed = statistic <= tolerance
                sections["heat_kernel"] = {"a": a, "ks": statistic, "p_value": pvalue, "tolerance": tolerance}
        return finish(cfg, passed, sections)

    run_command("project", body)


@click.command("lift-check")
@experiment_options
def lift_check(config_path, seed, paths, out, fmt):
    """Compare projected lifted paths with direct simulation on S2."""
    def body():
        cfg = load_config(CommandName.LIFT_CHECK, config_path, seed, paths, out, fmt)
        triple = space_triple(cfg.triple)
        lifted = _lifted(cfg, triple)
        projected = homogeneous_service.project_ensemble(
            simulation_service.simulate_paths(lifted, cfg.simulation), triple.space
        )
        direct = homogeneous_service.simulate_on_space(triple, cfg.simulation)
        horizon = cfg.simulation.horizon
        report = homogeneous_service.two_sample_compare(
            projected, direct, times=(horizon / 2.0, horizon), z_threshold=cfg.verification.z_threshold
        )
        return finish(cfg, report.passed, {"two_sample": report.model_dump(mode="json")})

    run_command("lift-check", body)
