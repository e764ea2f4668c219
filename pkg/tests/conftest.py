"""
Shared fixtures: groups, reference triples and small simulated ensembles.
"""
import json

import numpy as np
import pytest

from levy_lie.models.group import CircleGroup, EuclideanGroup, SE2Group, SO3Group
from levy_lie.models.measure import DiscreteMeasure, GaussianLaw, mean_of_measure
from levy_lie.models.space import HomogeneousSpace, KInvariantLaw, SpaceFixedJump, SpaceLevyPiece, SpaceTriple
from levy_lie.models.triple import (
    CovMatrixFunction,
    DriftAtom,
    DriftPath,
    ExtendedLevyTriple,
    FixedJump,
    FixedJumpAtoms,
    LevyMeasureFunctionC,
    LevyPiece,
)
from levy_lie.schemas.experiment import SimulationSection

SEED = 20240601


# ============================================================================
# Groups
# ============================================================================

@pytest.fixture
def so3():
    return SO3Group()


@pytest.fixture
def se2():
    return SE2Group()


@pytest.fixture
def rd1():
    return EuclideanGroup(1)


@pytest.fixture
def rd2():
    return EuclideanGroup(2)


@pytest.fixture
def circle():
    return CircleGroup()


@pytest.fixture(params=["SO3", "SE2", "RD", "circle-K"])
def any_group(request):
    return {
        "SO3": SO3Group(),
        "SE2": SE2Group(),
        "RD": EuclideanGroup(2),
        "circle-K": CircleGroup(),
    }[request.param]


# ============================================================================
# Triples on groups
# ============================================================================

def two_point_law(group, first, second, p_first):
    support = np.stack([group.exp(np.asarray(first, dtype=float)), group.exp(np.asarray(second, dtype=float))])
    return DiscreteMeasure(support, np.array([p_first, 1.0 - p_first]))


def with_drift_atoms(group, grid, components, cov, pieces=(), atoms=(), name="triple"):
    """Triple whose drift jumps are the means of the fixed-jump laws"""
    drift_atoms = tuple(DriftAtom(a.time, mean_of_measure(a.law.as_discrete(), group)) for a in atoms)
    return ExtendedLevyTriple(
        group=group,
        drift=DriftPath(np.asarray(grid, dtype=float), np.asarray(components, dtype=float), drift_atoms),
        cov=cov,
        levy_c=LevyMeasureFunctionC(tuple(pieces)),
        atoms=FixedJumpAtoms(tuple(atoms)),
        name=name,
    )


def so3_reference(so3, rate=1.5, nu_first=0.4):
    """
    Piecewise-linear drift, A(t) = 0.2 t diag(1, 1, 0.5), compound Poisson
    at ``rate`` with a three-point law and a two-point fixed jump at t = 1
    whose first point has probability ``nu_first``.
    """
    jumps = DiscreteMeasure(
        so3.exp(np.array([[0.9, 0.0, 0.0], [0.0, -1.1, 0.3], [0.0, 0.0, 1.4]])),
        np.full(3, 1.0 / 3.0),
    )
    nu = two_point_law(so3, [0.0, 0.0, 1.2], [1.0, 0.0, 0.0], nu_first)
    return with_drift_atoms(
        so3,
        grid=[0.0, 0.5, 1.0],
        components=[[0.0, 0.0, 0.0], [0.2, -0.1, 0.05], [0.3, 0.1, 0.1]],
        cov=CovMatrixFunction.linear(0.2 * np.diag([1.0, 1.0, 0.5]), 1.0),
        pieces=[LevyPiece(0.0, 1.0, rate, jumps)],
        atoms=[FixedJump(1.0, nu)],
        name="so3-reference",
    )


@pytest.fixture
def so3_reference_triple(so3):
    return so3_reference(so3)


@pytest.fixture
def rd1_diffusion_triple(rd1):
    """b(t) = 1.0 t, A(t) = 0.5 t on R"""
    return with_drift_atoms(
        rd1, [0.0, 1.0], [[0.0], [1.0]], CovMatrixFunction.linear(np.array([[0.5]]), 1.0), name="rd1-diffusion"
    )


@pytest.fixture
def rd1_jump_triple(rd1):
    """
    b(t) = 0.3 t, A(t) = 0.2 t, compound Poisson rate 1 with a Gaussian law
    and a fixed jump of size 1.5 with probability 1/2 at t = 0.5.
    """
    nu = two_point_law(rd1, [1.5], [0.0], 0.5)
    return with_drift_atoms(
        rd1,
        [0.0, 1.0],
        [[0.0], [0.3]],
        CovMatrixFunction.linear(np.array([[0.2]]), 1.0),
        pieces=[LevyPiece(0.0, 1.0, 1.0, GaussianLaw(rd1, np.array([0.5])))],
        atoms=[FixedJump(0.5, nu)],
        name="rd1-jumps",
    )


@pytest.fixture
def rd2_classical_triple(rd2):
    """A = t I, compound Poisson rate 1 with a two-point law, one fixed jump at t = 0.5"""
    return with_drift_atoms(
        rd2,
        [0.0, 1.0],
        [[0.0, 0.0], [0.2, -0.1]],
        CovMatrixFunction.linear(np.eye(2), 1.0),
        pieces=[LevyPiece(0.0, 1.0, 1.0, two_point_law(rd2, [0.5, 0.0], [-0.3, 0.4], 0.5))],
        atoms=[FixedJump(0.5, two_point_law(rd2, [0.8, 0.0], [0.0, 0.0], 0.3))],
        name="rd2-classical",
    )


def sim_config(paths, steps_per_unit=100, horizon=1.0, seed=SEED, **kwargs):
    return SimulationSection(paths=paths, steps_per_unit=steps_per_unit, horizon=horizon, seed=seed, **kwargs)


# ============================================================================
# Sphere
# ============================================================================

@pytest.fixture
def sphere():
    return HomogeneousSpace()


@pytest.fixture
def isotropic_sphere_triple(sphere):
    """Brownian motion on S2 with generator (1/2) 0.5 Laplacian"""
    return SpaceTriple.isotropic(sphere, 0.5, 1.0)


@pytest.fixture
def jumping_sphere_triple(sphere):
    """Isotropic diffusion, jumps to colatitude 0.6 at rate 1 and a fixed jump at t = 0.5"""
    return SpaceTriple.isotropic(
        sphere,
        0.3,
        1.0,
        pieces=[SpaceLevyPiece(0.0, 1.0, 1.0, KInvariantLaw(np.array([0.6]), np.array([1.0])))],
        atoms=[SpaceFixedJump(0.5, KInvariantLaw(np.array([0.0, 0.9]), np.array([0.5, 0.5])))],
    )


# ============================================================================
# Declaration files
# ============================================================================

def write_json(path, document):
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


@pytest.fixture
def rd1_triple_document():
    return {
        "name": "rd1-file",
        "group": {"name": "RD", "dim": 1},
        "drift": {"grid": [0.0, 1.0], "components": [[0.0], [0.4]]},
        "cov": {"grid": [0.0, 1.0], "matrices": [[[0.0]], [[0.3]]]},
        "levy": {"pieces": [{"start": 0.0, "end": 1.0, "rate": 0.5, "law": {"kind": "gaussian", "sigma": 0.4}}]},
        "atoms": [{
            "time": 0.5,
            "law": {"kind": "discrete", "support": [{"log": [1.2]}, {"log": [0.0]}], "weights": [0.25, 0.75]},
        }],
    }


@pytest.fixture
def sphere_triple_document():
    return {
        "name": "s2-file",
        "group": {"name": "SO3"},
        "cov": {"grid": [0.0, 1.0], "matrices": [[[0.0, 0.0], [0.0, 0.0]], [[0.4, 0.0], [0.0, 0.4]]]},
        "levy": {"pieces": [{
            "start": 0.0, "end": 1.0, "rate": 0.5,
            "law": {"kind": "k-invariant", "colatitudes": [0.7], "weights": [1.0]},
        }]},
        "space": {"twist": 0.0},
    }
