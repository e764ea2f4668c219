"""
Partition estimators on simulated ensembles with a known triple.
"""
import numpy as np
import pytest
from scipy.stats import norm

from levy_lie.core.exceptions import FRejected
from levy_lie.models.group import EuclideanGroup
from levy_lie.models.measure import GaussianLaw, total_variation
from levy_lie.models.triple import CovMatrixFunction, FixedJump, LevyPiece
from levy_lie.schemas.experiment import EstimationSection
from levy_lie.services.estimation_service import estimation_service
from levy_lie.services.simulation_service import simulation_service
from levy_lie.services.triple_service import triple_service

from conftest import sim_config, two_point_law, with_drift_atoms

# ============================================================================
# Test Configuration
# ============================================================================

N_PATHS = 4000
STEPS_PER_UNIT = 400
MESHES = [0.02, 0.01, 0.005]

TRUE_TRACE_A = 0.2
TRUE_DRIFT_END = 0.3
COV_REL_TOL = 0.15
DRIFT_TOL = 0.06
LAW_TV_TOL = 0.05


# ============================================================================
# Fixtures
# ============================================================================

@pytest.fixture(scope="module")
def jump_estimate():
    """RD(1): b = 0.3 t, A = 0.2 t, Gaussian jumps at rate 1, fixed jump at 0.5"""
    group = EuclideanGroup(1)
    triple = with_drift_atoms(
        group,
        [0.0, 1.0],
        [[0.0], [TRUE_DRIFT_END]],
        CovMatrixFunction.linear(np.array([[TRUE_TRACE_A]]), 1.0),
        pieces=[LevyPiece(0.0, 1.0, 1.0, GaussianLaw(group, np.array([0.5])))],
        atoms=[FixedJump(0.5, two_point_law(group, [1.5], [0.0], 0.5))],
    )
    ensemble = simulation_service.simulate_paths(triple, sim_config(paths=N_PATHS, steps_per_unit=STEPS_PER_UNIT))
    estimate = estimation_service.estimate_triple(ensemble, EstimationSection(meshes=MESHES))
    return triple, ensemble, estimate


# ============================================================================
# Full estimation
# ============================================================================

def test_single_fixed_jump_detected(jump_estimate):
    triple, _, estimate = jump_estimate
    assert [a.time for a in estimate.atoms_est] == [pytest.approx(0.5)]
    assert estimate.atoms_est[0].probability == pytest.approx(0.5, abs=0.05)
    detected = estimate.atoms_est[0].law
    assert total_variation(detected, triple.atoms.atoms[0].law, triple.group, tol=0.25) <= LAW_TV_TOL
    assert len(estimate.diagnostics.detected_atoms) == 1


def test_covariance_recovered(jump_estimate):
    _, _, estimate = jump_estimate
    trace = float(np.trace(estimate.cov_est.at(1.0)))
    assert abs(trace - TRUE_TRACE_A) <= COV_REL_TOL * TRUE_TRACE_A
    half = float(np.trace(estimate.cov_est.at(0.5)))
    assert abs(half - 0.5 * TRUE_TRACE_A) <= COV_REL_TOL * TRUE_TRACE_A


def test_drift_recovered(jump_estimate):
    triple, _, estimate = jump_estimate
    end = estimate.drift_est.components_at(np.array([1.0]))[0, 0]
    assert abs(end - TRUE_DRIFT_END) <= DRIFT_TOL
    (atom,) = estimate.drift_est.atoms
    expected = triple.drift.atoms[0].jump
    assert float(triple.group.distance(atom.jump, expected)) <= 0.05


def test_levy_rate_recovered(jump_estimate):
    _, _, estimate = jump_estimate
    floor = estimate.jump_floor
    # jumps of N(0, 0.25) above the floor arrive at rate P(|J| > floor)
    expected = 2.0 * norm.sf(floor / 0.5)
    mass = estimate.levy_c_est.mass(1.0)
    assert abs(mass - expected) <= 0.1


def test_estimated_triple_is_valid(jump_estimate):
    _, _, estimate = jump_estimate
    triple = estimate.as_triple()
    report = triple_service.validate_extended_triple(triple)
    assert report.valid, report.messages()
    assert len(estimate.levels) == len(MESHES)
    assert [lv.mesh for lv in estimate.levels] == pytest.approx(MESHES)


def test_eta_n_counts_large_increments(jump_estimate):
    _, _, estimate = jump_estimate
    finest = estimate.finest
    big = lambda g: (finest.group.log_radius(g) > 1.2).astype(float)
    expected = 0.5 + 2.0 * norm.sf(1.2 / 0.5)
    assert estimation_service.eta_n(finest, 1.0, big) == pytest.approx(expected, abs=0.04)
    assert estimation_service.eta_n(finest, 0.25, big) < 0.05


def test_q_n_levels_are_close(jump_estimate):
    _, _, estimate = jump_estimate
    ball = 0.25
    q = [estimation_service.q_n(lv, 1.0, ball) for lv in estimate.levels]
    assert max(q) - min(q) <= 0.05


# ============================================================================
# Pieces
# ============================================================================

def test_constant_test_function_rejected(rd1):
    with pytest.raises(FRejected):
        estimation_service.check_vanishes_near_identity(rd1, lambda g: np.ones(g.shape[0]))
    estimation_service.check_vanishes_near_identity(rd1, lambda g: (rd1.log_radius(g) > 1.5).astype(float))


def test_level_indices_include_candidates():
    grid = np.linspace(0.0, 1.0, 401)
    indices = estimation_service.level_indices(grid, 0.1, [0.3333])
    assert indices[0] == 0 and indices[-1] == 400
    assert 133 in indices
    assert np.all(np.diff(indices) > 0)


def test_fixed_jump_cell_follows_the_local_covariance_rate(rd1):
    # A'(t) = 0.1 before t = 0.5 and 1.0 after; the fixed jump sits at t = 0.8
    cov = CovMatrixFunction(np.array([0.0, 0.5, 1.0]), np.array([[[0.0]], [[0.05]], [[0.55]]]))
    triple = with_drift_atoms(
        rd1, [0.0, 1.0], [[0.0], [0.0]], cov, atoms=[FixedJump(0.8, two_point_law(rd1, [1.5], [0.0], 0.5))]
    )
    ensemble = simulation_service.simulate_paths(triple, sim_config(paths=2000, steps_per_unit=STEPS_PER_UNIT))
    estimate = estimation_service.estimate_triple(ensemble, EstimationSection(meshes=MESHES))
    assert [a.time for a in estimate.atoms_est] == [pytest.approx(0.8)]
    step = MESHES[-1]
    rate = float(estimate.cov_est.at(0.8)[0, 0] - estimate.cov_est.at(0.8 - step)[0, 0]) / step
    assert rate == pytest.approx(1.0, rel=0.2)
    assert float(estimate.cov_est.at(1.0)[0, 0]) == pytest.approx(0.55, rel=COV_REL_TOL)


def test_jump_floor():
    assert estimation_service.jump_floor(0.01) == pytest.approx(0.4)


def test_moduli_shrink_with_the_window(rd1_diffusion_triple):
    ensemble = simulation_service.simulate_paths(rd1_diffusion_triple, sim_config(paths=500, steps_per_unit=100))
    estimate = estimation_service.estimate_triple(ensemble, EstimationSection(meshes=[0.04, 0.02]))
    table = estimate.diagnostics.moduli
    assert table.monotone
    assert table.windows == sorted(table.windows, reverse=True)
    assert estimate.atoms_est == []
    # q over a window of width w is about 0.5 w
    assert table.q_modulus[0] == pytest.approx(0.5 * table.windows[0], rel=0.3)


def test_increment_laws_match_raw_increments(rd2_classical_triple):
    ensemble = simulation_service.simulate_paths(rd2_classical_triple, sim_config(paths=50, steps_per_unit=20))
    indices = estimation_service.level_indices(ensemble.grid, 0.1)
    laws = estimation_service.empirical_increment_laws(ensemble, indices)
    group = ensemble.group
    i = 3
    raw = group.log(laws.increments(i))
    assert np.allclose(laws.means[i], group.coordinates(group.exp(raw)).mean(axis=0))
    assert len(laws[i]) == 50
    assert laws[i].total_mass == pytest.approx(1.0)
