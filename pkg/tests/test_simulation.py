"""
Path generation: reproducibility, marginal moments and fixed-jump surgery.
"""
import dataclasses

import numpy as np
import pytest

from levy_lie.core.exceptions import InvalidTriple
from levy_lie.models.path import EventKind, PathEnsemble, Scheme
from levy_lie.models.triple import CovMatrixFunction
from levy_lie.services.simulation_service import psd_sqrt, simulation_service

from conftest import sim_config

# Monte Carlo checks use 4 standard errors
N_SIGMA = 4.0
REPRO_TOL = 1e-12


# ============================================================================
# Reproducibility
# ============================================================================

def test_batches_reproduce_the_full_run(so3_reference_triple):
    cfg = sim_config(paths=6, steps_per_unit=20)
    full = simulation_service.simulate_paths(so3_reference_triple, cfg)
    head = simulation_service.simulate_paths(so3_reference_triple, cfg, start=0, count=3)
    tail = simulation_service.simulate_paths(so3_reference_triple, cfg, start=3, count=3)
    assert np.allclose(np.concatenate([head.values, tail.values]), full.values, atol=REPRO_TOL)
    assert tail.path_offset == 3


def test_worker_count_does_not_change_paths(so3_reference_triple):
    one = simulation_service.simulate_paths(so3_reference_triple, sim_config(paths=8, steps_per_unit=20, workers=1))
    many = simulation_service.simulate_paths(so3_reference_triple, sim_config(paths=8, steps_per_unit=20, workers=4))
    assert np.allclose(one.values, many.values, atol=REPRO_TOL)


def test_iter_ensembles_chunks(rd2_classical_triple):
    cfg = sim_config(paths=7, steps_per_unit=10, chunk_size=3)
    batches = list(simulation_service.iter_ensembles(rd2_classical_triple, cfg))
    assert [b.n_paths for b in batches] == [3, 3, 1]
    assert [b.path_offset for b in batches] == [0, 3, 6]
    full = simulation_service.simulate_paths(rd2_classical_triple, cfg)
    assert np.allclose(np.concatenate([b.values for b in batches]), full.values, atol=REPRO_TOL)


def test_invalid_triple_is_refused(rd1_diffusion_triple):
    cov = CovMatrixFunction(np.array([0.0, 0.5, 1.0]), np.array([[[0.0]], [[0.4]], [[0.3]]]))
    with pytest.raises(InvalidTriple) as excinfo:
        simulation_service.simulate_paths(dataclasses.replace(rd1_diffusion_triple, cov=cov), sim_config(paths=2))
    assert excinfo.value.code == "invalid_triple"


# ============================================================================
# Marginals
# ============================================================================

@pytest.mark.parametrize("scheme", [Scheme.FINITE_VARIATION, Scheme.SHIFTED_Z])
def test_brownian_motion_with_drift_moments(rd1_diffusion_triple, scheme):
    n = 4000
    ensemble = simulation_service.simulate_paths(
        rd1_diffusion_triple, sim_config(paths=n, steps_per_unit=50, scheme=scheme)
    )
    assert ensemble.scheme == scheme
    x = rd1_diffusion_triple.group.log(ensemble.values[:, -1])[:, 0]
    assert abs(x.mean() - 1.0) <= N_SIGMA * np.sqrt(0.5 / n)
    assert abs(x.var() - 0.5) <= N_SIGMA * 0.5 * np.sqrt(2.0 / n)


def test_poisson_jump_count(rd1_jump_triple):
    n = 4000
    ensemble = simulation_service.simulate_paths(rd1_jump_triple, sim_config(paths=n, steps_per_unit=50))
    counts = np.bincount(ensemble.jump_paths, minlength=n)
    assert abs(counts.mean() - 1.0) <= N_SIGMA / np.sqrt(n)


def test_fixed_jump_draws_follow_the_law(rd1_jump_triple):
    n = 4000
    ensemble = simulation_service.simulate_paths(rd1_jump_triple, sim_config(paths=n, steps_per_unit=50))
    k = ensemble.index_of(0.5)
    assert ensemble.grid[k] == pytest.approx(0.5)
    sizes = rd1_jump_triple.group.log(ensemble.fixed_increments(k))[:, 0]
    on_support = np.isclose(sizes, 1.5, atol=1e-9) | np.isclose(sizes, 0.0, atol=1e-9)
    assert on_support.all()
    assert abs(np.mean(sizes > 0.75) - 0.5) <= N_SIGMA * np.sqrt(0.25 / n)


def test_paths_stay_in_the_group(so3_reference_triple):
    ensemble = simulation_service.simulate_paths(so3_reference_triple, sim_config(paths=50, steps_per_unit=200))
    residual = so3_reference_triple.group.membership_residual(ensemble.values)
    assert residual.max() < 1e-10


def test_psd_sqrt():
    a = np.array([[2.0, 0.5], [0.5, 1.0]])
    root = psd_sqrt(a)
    assert np.allclose(root @ root, a, atol=1e-12)
    assert np.allclose(psd_sqrt(np.diag([4.0, -1e-14])), np.diag([2.0, 0.0]))


# ============================================================================
# Event lists
# ============================================================================

def test_event_lists_rebuild_grid_values(so3_reference_triple):
    ensemble = simulation_service.simulate_paths(so3_reference_triple, sim_config(paths=5, steps_per_unit=20))
    for i in range(ensemble.n_paths):
        path = ensemble.path(i)
        assert np.allclose(path.values_on_grid(), ensemble.values[i], atol=1e-10)
        assert path.fixed_jump_times() == [1.0]


def test_from_paths_and_subset(so3_reference_triple):
    group = so3_reference_triple.group
    ensemble = simulation_service.simulate_paths(so3_reference_triple, sim_config(paths=4, steps_per_unit=20))
    rebuilt = PathEnsemble.from_paths([ensemble.path(0), ensemble.path(1)], group)
    assert np.allclose(rebuilt.values, ensemble.values[:2], atol=1e-10)
    k = ensemble.index_of(1.0)
    assert np.allclose(rebuilt.fixed_increments(k), ensemble.fixed_increments(k)[:2], atol=1e-10)
    picked = ensemble.subset(np.array([2, 0]))
    assert np.allclose(picked.path(0).value_at(1.0), ensemble.values[2, -1], atol=1e-10)


def test_split_shifted_single_path(so3_reference_triple):
    group = so3_reference_triple.group
    ensemble = simulation_service.simulate_paths(so3_reference_triple, sim_config(paths=3, steps_per_unit=20))
    z_all = simulation_service.split_shifted(ensemble, so3_reference_triple.drift)
    z_one = simulation_service.split_shifted(ensemble.path(1), so3_reference_triple.drift, group)
    assert np.allclose(z_one.value_at(1.0), z_all.values[1, -1], atol=1e-10)


# ============================================================================
# Fixed-jump surgery
# ============================================================================

def test_remove_then_insert_fixed_jump_is_exact(so3_reference_triple):
    ensemble = simulation_service.simulate_paths(so3_reference_triple, sim_config(paths=2, steps_per_unit=20))
    path = ensemble.path(0)
    (fixed,) = [e for e in path.events if e.kind == EventKind.FIXED_JUMP]
    removed = simulation_service.remove_fixed_jump(path, 1.0)
    assert removed.fixed_jump_times() == []
    k = ensemble.index_of(1.0)
    assert np.allclose(removed.value_at(1.0), ensemble.left_value(k)[0], atol=1e-10)
    restored = simulation_service.insert_fixed_jump(removed, 1.0, fixed.increment)
    assert np.array_equal(restored.value_at(1.0), path.value_at(1.0))


def test_insert_fixed_jump_off_grid_extends_grid(so3_reference_triple):
    group = so3_reference_triple.group
    ensemble = simulation_service.simulate_paths(so3_reference_triple, sim_config(paths=1, steps_per_unit=20))
    path = ensemble.path(0)
    law = so3_reference_triple.atoms.atoms[0].law
    moved = simulation_service.insert_fixed_jump(path, 0.525, law, np.random.default_rng(0))
    assert 0.525 in moved.grid.tolist()
    assert moved.fixed_jump_times() == [0.525, 1.0]
    jump = group.inverse(moved.left_value_at(0.525) @ _events_at(moved, 0.525)) @ moved.value_at(0.525)
    assert min(float(group.distance(jump, s)) for s in law.support) < 1e-10


def _events_at(path, t):
    """Product of the non-fixed increments recorded at exactly t"""
    out = np.eye(path.origin.shape[0])
    for e in path.events:
        if e.time == t and e.kind != EventKind.FIXED_JUMP:
            out = out @ e.increment
    return out
