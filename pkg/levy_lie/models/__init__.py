from levy_lie.models.group import CircleGroup, EuclideanGroup, GroupDescriptor, SE2Group, SO3Group, get_group
from levy_lie.models.measure import DiscreteMeasure, GaussianLaw, LaplaceLaw
from levy_lie.models.path import EventKind, PathEnsemble, PathEvent, SamplePath, Scheme
from levy_lie.models.space import HomogeneousSpace, KInvariantLaw, SpaceEnsemble, SpaceTriple
from levy_lie.models.test_function import TestFunction, make_bank
from levy_lie.models.triple import (
    CovMatrixFunction,
    DriftAtom,
    DriftPath,
    ExtendedLevyTriple,
    FixedJump,
    FixedJumpAtoms,
    LevyMeasureFunctionC,
    LevyPiece,
    Quadruple,
)

__all__ = [
    "CircleGroup", "EuclideanGroup", "GroupDescriptor", "SE2Group", "SO3Group", "get_group",
    "DiscreteMeasure", "GaussianLaw", "LaplaceLaw",
    "EventKind", "PathEnsemble", "PathEvent", "SamplePath", "Scheme",
    "HomogeneousSpace", "KInvariantLaw", "SpaceEnsemble", "SpaceTriple",
    "TestFunction", "make_bank",
    "CovMatrixFunction", "DriftAtom", "DriftPath", "ExtendedLevyTriple", "FixedJump",
    "FixedJumpAtoms", "LevyMeasureFunctionC", "LevyPiece", "Quadruple",
]
