from levy_lie.schemas.experiment import (
    CommandName,
    EstimationSection,
    ExperimentConfig,
    MartingaleForm,
    SimulationSection,
    VerificationSection,
)
from levy_lie.schemas.reports import (
    InvarianceReport,
    MartingaleReport,
    RoundTripReport,
    RunReport,
    TwoSampleReport,
    ValidationReport,
)
from levy_lie.schemas.triple_file import TripleFile

__all__ = [
    "CommandName", "EstimationSection", "ExperimentConfig", "MartingaleForm",
    "SimulationSection", "VerificationSection",
    "InvarianceReport", "MartingaleReport", "RoundTripReport", "RunReport",
    "TwoSampleReport", "ValidationReport",
    "TripleFile",
]
