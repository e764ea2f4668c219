import logging

import click

from levy_lie.commands.common import experiment_options, finish, group_triple, load_config, run_command
from levy_lie.schemas.experiment import CommandName
from levy_lie.services.simulation_service import simulation_service
from levy_lie.services.verification_service import verification_service

logger = logging.getLogger(__name__)


@click.command("verify")
@experiment_options
def command(config_path, seed, paths, out, fmt):
    """
    Simulate a triple and run the martingale suite against it (or against
    ``reference_triple``), plus the fixed-jump law check.
    """
    def body():
        cfg = load_config(CommandName.VERIFY, config_path, seed, paths, out, fmt)
        triple = group_triple(cfg.triple)
        reference = group_triple(cfg.reference_triple) if cfg.reference_triple else triple
        first = []

        def chunks():
            for chunk in simulation_service.iter_ensembles(triple, cfg.simulation):
                if not first:
                    first.append(chunk)
                yield chunk

        martingale = verification_service.martingale_test(chunks(), reference, cfg=cfg.verification)
        fixed = verification_service.fixed_jump_law_check(first[0], reference)
        return finish(cfg, martingale.passed and fixed.passed, {
            "martingale": {**martingale.summary(), "report": martingale.model_dump(mode="json")},
            "fixed_jump_laws": fixed.model_dump(mode="json"),
        })

    run_command("verify", body)
