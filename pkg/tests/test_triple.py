"""
Triple validation, measure-function bookkeeping and the drift transforms.
"""
import dataclasses

import numpy as np
import pytest

from levy_lie.core.exceptions import GridMismatch, NoConvergence
from levy_lie.models.measure import DiscreteMeasure, GaussianLaw, total_variation
from levy_lie.models.triple import (
    CovMatrixFunction,
    DriftAtom,
    DriftPath,
    FixedJump,
    FixedJumpAtoms,
    LevyMeasureFunctionC,
    LevyPiece,
    refine_grid,
)
from levy_lie.services.simulation_service import simulation_service
from levy_lie.services.triple_service import triple_service

from conftest import SEED, two_point_law, with_drift_atoms

EXACT_TOL = 1e-9


def violation_codes(triple):
    return {v.code for v in triple_service.validate_extended_triple(triple).violations}


# ============================================================================
# Validation
# ============================================================================

@pytest.mark.parametrize(
    "fixture_name", ["so3_reference_triple", "rd1_diffusion_triple", "rd1_jump_triple", "rd2_classical_triple"]
)
def test_reference_triples_are_valid(request, fixture_name):
    triple = request.getfixturevalue(fixture_name)
    report = triple_service.validate_extended_triple(triple)
    assert report.valid, report.messages()


def test_decreasing_covariance_is_rejected(rd1_diffusion_triple):
    cov = CovMatrixFunction(np.array([0.0, 0.5, 1.0]), np.array([[[0.0]], [[0.4]], [[0.3]]]))
    triple = dataclasses.replace(rd1_diffusion_triple, cov=cov)
    report = triple_service.validate_extended_triple(triple)
    assert [v.code for v in report.violations] == ["cov-psd"]
    assert report.violations[0].location == "t=1"


def test_drift_must_start_at_zero(rd1_diffusion_triple):
    drift = DriftPath(np.array([0.0, 1.0]), np.array([[0.1], [1.0]]))
    assert "drift-origin" in violation_codes(dataclasses.replace(rd1_diffusion_triple, drift=drift))


def test_fixed_jump_law_must_be_a_probability(rd1, rd1_diffusion_triple):
    law = DiscreteMeasure(rd1.exp(np.array([[1.0]])), np.array([0.8]))
    triple = dataclasses.replace(
        rd1_diffusion_triple,
        drift=DriftPath(np.array([0.0, 1.0]), np.array([[0.0], [1.0]]), (DriftAtom(0.5, rd1.exp(np.array([0.8]))),)),
        atoms=FixedJumpAtoms((FixedJump(0.5, law),)),
    )
    assert violation_codes(triple) == {"atom-mass"}


def test_fixed_jumps_need_matching_drift_jumps(rd1_jump_triple):
    triple = dataclasses.replace(rd1_jump_triple, drift=rd1_jump_triple.drift.continuous_part())
    assert violation_codes(triple) == {"atom-time-mismatch"}


def test_drift_jump_must_be_the_law_mean(rd1, rd1_jump_triple):
    wrong = DriftPath(
        rd1_jump_triple.drift.grid,
        rd1_jump_triple.drift.components,
        (DriftAtom(0.5, rd1.exp(np.array([0.9]))),),
    )
    assert violation_codes(dataclasses.replace(rd1_jump_triple, drift=wrong)) == {"drift-jump-mean"}


def test_discrete_piece_law_may_not_charge_identity(rd1, rd1_diffusion_triple):
    law = two_point_law(rd1, [0.0], [0.7], 0.5)
    triple = dataclasses.replace(rd1_diffusion_triple, levy_c=LevyMeasureFunctionC((LevyPiece(0.0, 1.0, 1.0, law),)))
    assert violation_codes(triple) == {"levy-law-identity"}


def test_gaussian_piece_law_is_accepted(so3):
    triple = with_drift_atoms(
        so3,
        [0.0, 1.0],
        [[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]],
        CovMatrixFunction.zero(3),
        pieces=[LevyPiece(0.0, 1.0, 2.0, GaussianLaw(so3, np.full(3, 0.3)))],
    )
    assert triple_service.validate_extended_triple(triple).valid


def test_bad_piece_interval_and_rate(rd1, rd1_diffusion_triple):
    law = two_point_law(rd1, [0.4], [0.7], 0.5)
    levy_c = LevyMeasureFunctionC((LevyPiece(0.5, 0.5, 1.0, law), LevyPiece(0.0, 1.0, -1.0, law)))
    codes = violation_codes(dataclasses.replace(rd1_diffusion_triple, levy_c=levy_c))
    assert codes == {"levy-interval", "levy-rate"}


def test_quadruple_validation(rd2_classical_triple):
    grid = triple_service.canonical_grid(rd2_classical_triple, 1.0, 20)
    q = triple_service.as_quadruple(rd2_classical_triple, grid)
    assert triple_service.validate_quadruple(q).valid
    q.cov_increments[3] = -np.eye(2)
    assert [v.code for v in triple_service.validate_quadruple(q).violations] == ["cov-psd"]


# ============================================================================
# Measure functions
# ============================================================================

def test_recompose_then_decompose(so3_reference_triple):
    group = so3_reference_triple.group
    eta = triple_service.recompose_measure_function(
        so3_reference_triple.levy_c, so3_reference_triple.atoms, group
    )
    levy_c, atoms = triple_service.decompose_measure_function(eta, group)
    assert [p.rate for p in levy_c.pieces] == pytest.approx([1.5])
    assert atoms.times == [1.0]
    original = so3_reference_triple.atoms.atoms[0].law
    assert total_variation(atoms.atoms[0].law, original, group) == pytest.approx(0.0, abs=1e-12)


def test_measure_function_evaluates_cells(rd1_jump_triple):
    group = rd1_jump_triple.group
    eta = triple_service.recompose_measure_function(rd1_jump_triple.levy_c, rd1_jump_triple.atoms, group)
    ones = lambda g: np.ones(g.shape[0])
    assert eta.evaluate(0.25, ones) == pytest.approx(0.25)
    # the fixed jump charges G - {e} with mass 1/2 from t = 0.5 on
    assert eta.evaluate(0.5, ones) == pytest.approx(1.0)
    assert eta.evaluate(1.0, ones) == pytest.approx(1.5)


def test_decompose_fills_identity_mass(rd1, rd1_jump_triple):
    eta = triple_service.recompose_measure_function(rd1_jump_triple.levy_c, rd1_jump_triple.atoms, rd1)
    _, atoms = triple_service.decompose_measure_function(eta, rd1)
    law = atoms.atoms[0].law
    assert law.total_mass == pytest.approx(1.0)
    assert law.mass_at_identity(rd1) == pytest.approx(0.5)


# ============================================================================
# Drift components
# ============================================================================

def test_flow_increments_match_exp(so3, se2):
    deltas = np.array([[0.3, -0.2, 0.5], [0.0, 0.0, 0.0], [1.0, 0.4, -0.7]])
    for group in (so3, se2):
        assert np.allclose(triple_service.flow_increments(group, deltas), group.exp(deltas), atol=1e-10)


def test_flow_increments_diverge_on_huge_steps(so3):
    with pytest.raises(NoConvergence) as excinfo:
        triple_service.flow_increments(so3, np.array([[100.0, 0.0, 0.0]]))
    assert excinfo.value.details["max_step_norm"] == pytest.approx(100.0)


def test_components_round_trip(so3):
    grid = np.linspace(0.0, 1.0, 11)
    components = np.cumsum(np.vstack([np.zeros(3), 0.05 * np.ones((10, 3))]), axis=0)
    values = triple_service.components_to_drift_path(so3, grid, components)
    recovered = triple_service.drift_path_to_components(so3, grid, values)
    assert np.allclose(recovered, components, atol=1e-10)


def test_inverse_path_components(se2):
    grid = np.linspace(0.0, 1.0, 5)
    components = np.array([[0.0, 0.0, 0.0], [0.2, 0.1, 0.3], [0.5, 0.0, 0.6], [0.6, -0.2, 0.4], [0.9, 0.1, 0.2]])
    values = triple_service.components_to_drift_path(se2, grid, components)
    beta = triple_service.inverse_path_components(se2, grid, components)
    inverse_values = triple_service.components_to_drift_path(se2, grid, beta)
    assert np.allclose(inverse_values @ values, np.eye(3), atol=EXACT_TOL)


def test_drift_trajectory_includes_atoms(so3_reference_triple):
    group = so3_reference_triple.group
    grid = triple_service.canonical_grid(so3_reference_triple, 1.0, 10)
    traj = triple_service.drift_trajectory(so3_reference_triple.drift, group, grid)
    h = so3_reference_triple.drift.atoms[0].jump
    assert np.allclose(traj.values[-1], traj.left_values[-1] @ h, atol=1e-12)
    assert np.allclose(traj.values[:-1], traj.left_values[:-1])


def test_drift_trajectory_requires_atoms_on_grid(so3_reference_triple):
    group = so3_reference_triple.group
    grid = np.array([0.0, 0.3, 0.7, 0.95, 1.3])
    with pytest.raises(GridMismatch):
        triple_service.drift_trajectory(so3_reference_triple.drift, group, grid)


def test_refine_grid_keeps_breakpoints():
    grid = refine_grid([0.333, 0.5], 1.0, 10)
    assert grid[0] == 0.0 and grid[-1] == 1.0
    assert 0.333 in grid.tolist() and 0.5 in grid.tolist()
    assert np.all(np.diff(grid) > 0)


# ============================================================================
# Quadruple transforms
# ============================================================================

def test_bar_transform_reproduces_the_shifted_process(so3_reference_triple):
    group = so3_reference_triple.group
    grid = triple_service.canonical_grid(so3_reference_triple, 1.0, 20)
    traj = triple_service.drift_trajectory(so3_reference_triple.drift, group, grid)
    q = triple_service.bar_transform(so3_reference_triple, grid, traj)
    assert triple_service.validate_quadruple(q).valid
    z = simulation_service.run_quadruple(q, 20, SEED)
    x = simulation_service.right_multiply(z, traj.values, traj.left_values)
    back = simulation_service.split_shifted(x, traj)
    assert np.allclose(back.values, z.values, atol=EXACT_TOL)
    for k in z.left_values:
        assert np.allclose(back.left_values[k], z.left_values[k], atol=EXACT_TOL)


def test_bar_transform_of_abelian_triple_removes_drift(rd2_classical_triple):
    grid = triple_service.canonical_grid(rd2_classical_triple, 1.0, 10)
    q = triple_service.bar_transform(rd2_classical_triple, grid)
    assert np.allclose(q.drift_increments, 0.0, atol=1e-12)
    plain = triple_service.as_quadruple(rd2_classical_triple, grid)
    assert np.allclose(q.cov_increments, plain.cov_increments)


def test_transform_by_zero_drift_is_identity(so3_reference_triple):
    grid = triple_service.canonical_grid(so3_reference_triple, 1.0, 10)
    q = triple_service.as_quadruple(so3_reference_triple, grid)
    moved = triple_service.transform_quadruple_by_drift(q, np.zeros((len(grid), 3)))
    assert np.allclose(moved.drift_increments, q.drift_increments, atol=1e-12)
    assert np.allclose(moved.cov_increments, q.cov_increments, atol=1e-12)
    assert sorted(moved.jump_laws) == sorted(q.jump_laws)


def test_atom_means(rd1_jump_triple):
    (t, h), = triple_service.atom_means(rd1_jump_triple)
    assert t == 0.5
    # 1.5 lies past r_in = 1, so the cutoff coordinate is damped
    damped = 1.5 * np.exp(1.0 - 1.0 / (1.0 - 0.5 ** 2))
    assert np.allclose(rd1_jump_triple.group.log(h), [0.5 * damped])
