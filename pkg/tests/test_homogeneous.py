"""
The sphere S2 = SO(3)/SO(2): sections, K-invariance, the martingale
functionals on X, direct simulation and the lift to SO(3).
"""
import dataclasses

import numpy as np
import pytest

from levy_lie.core.exceptions import DriftPieceTooLarge, NotIrreducible, NotKInvariant
from levy_lie.models.space import (
    HomogeneousSpace,
    KInvariantLaw,
    SpaceEnsemble,
    SpaceTriple,
    canonicalize,
    colatitude,
    sphere_point,
)
from levy_lie.models.test_function import make_bank
from levy_lie.models.triple import CovMatrixFunction
from levy_lie.services.homogeneous_service import heat_kernel_colatitude_cdf, homogeneous_service
from levy_lie.services.simulation_service import simulation_service
from levy_lie.services.triple_service import triple_service

from conftest import SEED, sim_config

# ============================================================================
# Test Configuration
# ============================================================================

N_PATHS = 2000
STEPS_PER_UNIT = 100
N_SIGMA = 4.0
EXACT_TOL = 1e-8
TWIST = 0.7


def random_points(n, seed=SEED):
    rng = np.random.default_rng(seed)
    return canonicalize(rng.standard_normal((n, 3)))


# ============================================================================
# Fixtures
# ============================================================================

@pytest.fixture
def isotropic_paths(isotropic_sphere_triple):
    return homogeneous_service.simulate_on_space(
        isotropic_sphere_triple, sim_config(paths=N_PATHS, steps_per_unit=STEPS_PER_UNIT)
    )


@pytest.fixture
def jumping_paths(jumping_sphere_triple):
    return homogeneous_service.simulate_on_space(
        jumping_sphere_triple, sim_config(paths=1500, steps_per_unit=STEPS_PER_UNIT)
    )


@pytest.fixture
def antipodal_drift_triple(sphere):
    """K-fixed drift o, -o, -o: every point is fixed by K but the path leaves o"""
    return SpaceTriple(
        sphere,
        CovMatrixFunction.linear(0.5 * np.eye(2), 1.0),
        drift_grid=np.array([0.0, 0.5, 1.0]),
        drift_points=np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [0.0, 0.0, -1.0]]),
    )


# ============================================================================
# Sections and coordinates
# ============================================================================

@pytest.mark.parametrize("twist", [0.0, TWIST])
def test_section_maps_origin_to_the_point(sphere, twist):
    space = sphere.with_twist(twist)
    points = np.vstack([random_points(50), [[0.0, 0.0, -1.0]], [[0.0, 0.0, 1.0]]])
    sections = homogeneous_service.section(space, points)
    assert np.allclose(space.project(sections), points, atol=1e-12)
    assert np.all(space.group.membership_residual(sections) < 1e-10)


def test_twist_only_acts_outside_the_chart(sphere):
    twisted = sphere.with_twist(TWIST)
    near = sphere_point(np.array([0.2, 0.7]), np.array([0.3, -1.0]))
    assert np.allclose(twisted.section(near), sphere.section(near), atol=1e-12)
    far = sphere_point(2.5, 0.4)
    assert not np.allclose(twisted.section(far), sphere.section(far))


def test_coordinates_inside_the_chart(sphere):
    x = sphere_point(0.3, 0.0)
    assert np.allclose(sphere.log_coords(x), [0.0, 0.3], atol=1e-12)
    assert np.allclose(sphere.coordinates(x), sphere.log_coords(x))
    assert np.allclose(sphere.coordinates(np.array([0.0, 0.0, -1.0])), 0.0)


def test_haar_average_and_mean(sphere):
    x = random_points(5)
    average = homogeneous_service.haar_average(sphere, lambda p: p[..., 0])
    assert np.allclose(average(x), 0.0, atol=1e-12)
    height = homogeneous_service.haar_average(sphere, lambda p: p[..., 2])
    assert np.allclose(height(x), x[:, 2], atol=1e-12)
    circle = KInvariantLaw(np.array([0.6]), np.array([1.0]))
    assert np.allclose(homogeneous_service.mean_on_space(sphere, circle), sphere.origin, atol=1e-12)
    point = sphere_point(0.3, 0.0)
    assert np.allclose(homogeneous_service.mean_on_space(sphere, (point[None], np.array([1.0]))), point, atol=1e-12)


# ============================================================================
# K-invariance
# ============================================================================

def test_k_invariance_of_exact_objects(sphere):
    law = KInvariantLaw(np.array([0.4, 1.3]), np.array([0.25, 0.75]))
    report = homogeneous_service.k_invariance_check(sphere, law)
    assert report.passed and report.object_kind == "measure"
    one_point = (sphere_point(0.6, 0.0)[None], np.array([1.0]))
    assert not homogeneous_service.k_invariance_check(sphere, one_point).passed

    assert homogeneous_service.k_invariance_check(sphere, sphere.origin).passed
    moved = homogeneous_service.k_invariance_check(sphere, sphere_point(0.3, 0.0))
    assert moved.object_kind == "point" and not moved.passed

    assert homogeneous_service.k_invariance_check(sphere, 0.4 * np.eye(2)).passed
    assert not homogeneous_service.k_invariance_check(sphere, np.diag([0.5, 0.2])).passed


def test_k_invariance_of_samples_at_one_longitude(sphere):
    rng = np.random.default_rng(SEED)
    samples = sphere_point(0.6 + 0.05 * rng.standard_normal(500), np.zeros(500))
    report = homogeneous_service.k_invariance_check(sphere, samples)
    assert report.object_kind == "measure"
    assert not report.passed


def test_anisotropic_triple_is_refused(sphere):
    triple = SpaceTriple(sphere, CovMatrixFunction.linear(np.diag([0.5, 0.2]), 1.0))
    codes = [v.code for v in homogeneous_service.validate_space_triple(triple).violations]
    assert codes == ["cov-ad-k"]
    with pytest.raises(NotKInvariant):
        homogeneous_service.lift_triple(triple)


def test_drift_must_be_fixed_by_k(sphere):
    triple = SpaceTriple(
        sphere,
        CovMatrixFunction.zero(2),
        drift_grid=np.array([0.0, 1.0]),
        drift_points=np.stack([sphere.origin, sphere_point(0.3, 0.0)]),
    )
    codes = [v.code for v in homogeneous_service.validate_space_triple(triple).violations]
    assert codes == ["drift-k-invariant"]


def test_drift_must_stay_at_the_origin(sphere, antipodal_drift_triple, isotropic_sphere_triple):
    report = homogeneous_service.validate_space_triple(antipodal_drift_triple)
    assert [v.code for v in report.violations] == ["drift-nontrivial"]
    assert report.violations[0].location == "t=0.5"
    with pytest.raises(NotKInvariant):
        homogeneous_service.lift_triple(antipodal_drift_triple)
    with pytest.raises(NotKInvariant):
        homogeneous_service.simulate_on_space(antipodal_drift_triple, sim_config(paths=2, steps_per_unit=10))
    paths = homogeneous_service.simulate_on_space(isotropic_sphere_triple, sim_config(paths=2, steps_per_unit=10))
    f = make_bank(sphere.group, origin=sphere.origin, size=1)[0]
    with pytest.raises(NotKInvariant):
        homogeneous_service.compute_MtfX(paths, antipodal_drift_triple, f)


def test_drift_at_the_origin_is_accepted(sphere):
    triple = SpaceTriple(
        sphere,
        CovMatrixFunction.linear(0.5 * np.eye(2), 1.0),
        drift_grid=np.array([0.0, 0.5, 1.0]),
        drift_points=np.tile(sphere.origin, (3, 1)),
    )
    assert homogeneous_service.validate_space_triple(triple).valid
    lifted = homogeneous_service.lift_triple(triple)
    assert np.allclose(lifted.drift.components, 0.0)


def test_drift_piece_leaving_the_chart(antipodal_drift_triple):
    with pytest.raises(DriftPieceTooLarge):
        homogeneous_service.lift_triple(antipodal_drift_triple, validate=False)


# ============================================================================
# Heat kernel
# ============================================================================

def test_heat_kernel_cdf_limits():
    theta = np.linspace(0.0, np.pi, 7)
    cdf = heat_kernel_colatitude_cdf(0.5, theta)
    assert cdf[0] == pytest.approx(0.0, abs=1e-12)
    assert cdf[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(cdf) >= 0)
    assert np.allclose(heat_kernel_colatitude_cdf(20.0, theta), 0.5 * (1.0 - np.cos(theta)), atol=1e-6)
    assert np.all(heat_kernel_colatitude_cdf(0.0, theta) == 1.0)


def test_heat_kernel_is_rayleigh_for_small_variance():
    a = 0.001
    x = np.array([0.02, 0.05, 0.08])
    assert np.allclose(heat_kernel_colatitude_cdf(a, x), 1.0 - np.exp(-x ** 2 / (2.0 * a)), atol=0.01)


# ============================================================================
# Direct simulation
# ============================================================================

def test_brownian_motion_on_the_sphere(isotropic_paths):
    assert isotropic_paths.grid[-1] == pytest.approx(1.0)
    assert np.allclose(np.linalg.norm(isotropic_paths.points, axis=-1), 1.0, atol=1e-10)
    cos_theta = np.cos(colatitude(isotropic_paths.at(1.0)))
    stderr = cos_theta.std(ddof=1) / np.sqrt(N_PATHS)
    # E cos(colatitude) = exp(-a) for the generator (1/2) a Laplacian
    assert abs(cos_theta.mean() - np.exp(-0.5)) <= N_SIGMA * stderr + 0.01


def test_colatitudes_follow_the_heat_kernel(isotropic_paths):
    statistic, _ = homogeneous_service.colatitude_ks(isotropic_paths, 1.0, 0.5)
    assert statistic <= 1.95 / np.sqrt(N_PATHS) + 0.01


def test_fixed_jump_moves_by_the_law_colatitude(jumping_paths):
    k = jumping_paths.index_of(0.5)
    assert jumping_paths.grid[k] == pytest.approx(0.5)
    before = jumping_paths.left_point(k)
    after = jumping_paths.points[:, k]
    angles = np.arccos(np.clip(np.sum(before * after, axis=-1), -1.0, 1.0))
    on_support = np.isclose(angles, 0.0, atol=1e-6) | np.isclose(angles, 0.9, atol=1e-6)
    assert on_support.all()
    n = jumping_paths.n_paths
    assert abs(np.mean(angles > 0.45) - 0.5) <= N_SIGMA * np.sqrt(0.25 / n)


def test_estimated_covariance_is_isotropic(isotropic_paths):
    estimate = homogeneous_service.estimate_space_covariance(isotropic_paths)
    assert estimate.anisotropy <= 0.1
    # A(1) = 0.5 I on p
    assert float(np.trace(estimate.cov)) == pytest.approx(1.0, rel=0.05)
    assert estimate.n_paths == N_PATHS


# ============================================================================
# M_t f on X
# ============================================================================

def test_mtfx_starts_at_f_of_origin(sphere, jumping_sphere_triple, jumping_paths):
    f = make_bank(sphere.group, origin=sphere.origin, size=1)[0]
    m = homogeneous_service.compute_MtfX(jumping_paths, jumping_sphere_triple, f)
    assert m.shape == (jumping_paths.n_paths, len(jumping_paths.grid))
    assert np.allclose(m[:, 0], f.at_point(sphere.origin))


def test_mtfx_is_a_martingale(sphere, jumping_sphere_triple, jumping_paths):
    for f in make_bank(sphere.group, origin=sphere.origin, size=4):
        m = homogeneous_service.compute_MtfX(jumping_paths, jumping_sphere_triple, f)
        drift = m[:, -1] - m[:, 0]
        stderr = drift.std(ddof=1) / np.sqrt(len(drift))
        assert abs(drift.mean()) <= N_SIGMA * stderr + 0.01, f.name


def test_mtfx_does_not_depend_on_the_section(sphere, jumping_sphere_triple, jumping_paths):
    twisted = dataclasses.replace(jumping_sphere_triple, space=sphere.with_twist(TWIST))
    for f in make_bank(sphere.group, origin=sphere.origin, size=3):
        plain = homogeneous_service.compute_MtfX(jumping_paths, jumping_sphere_triple, f)
        other = homogeneous_service.compute_MtfX(jumping_paths, twisted, f)
        assert np.allclose(plain, other, atol=EXACT_TOL), f.name


def test_jump_terms_do_not_depend_on_the_section_off_chart(sphere, jumping_sphere_triple):
    rng = np.random.default_rng(SEED)
    far = sphere_point(rng.uniform(2.3, 3.0, (30, 3)), rng.uniform(0.0, 2.0 * np.pi, (30, 3)))
    twisted_space = sphere.with_twist(TWIST)
    assert not np.allclose(twisted_space.section(far), sphere.section(far))
    paths = SpaceEnsemble(sphere, np.array([0.0, 0.5, 1.0]), far, left_points={1: far[:, 0]})
    twisted = dataclasses.replace(jumping_sphere_triple, space=twisted_space)
    for f in make_bank(sphere.group, origin=sphere.origin, size=4):
        plain = homogeneous_service.compute_MtfX(paths, jumping_sphere_triple, f)
        other = homogeneous_service.compute_MtfX(paths, twisted, f)
        assert np.allclose(plain, other, atol=1e-9), f.name
        assert np.allclose(
            homogeneous_service.compute_Mtf_irreducible(paths, twisted, f), other, atol=1e-9
        ), f.name


def test_irreducible_form_matches(sphere, jumping_sphere_triple, jumping_paths):
    f = make_bank(sphere.group, origin=sphere.origin, size=3)[2]
    full = homogeneous_service.compute_MtfX(jumping_paths, jumping_sphere_triple, f)
    short = homogeneous_service.compute_Mtf_irreducible(jumping_paths, jumping_sphere_triple, f)
    assert np.allclose(full, short, atol=EXACT_TOL)
    # every epsilon below the smallest charged colatitude gives the same value
    cut = homogeneous_service.compute_Mtf_irreducible(jumping_paths, jumping_sphere_triple, f, epsilon=0.5)
    assert np.allclose(cut, short, atol=1e-12)


def test_irreducible_form_needs_isotropy(sphere, isotropic_paths):
    f = make_bank(sphere.group, origin=sphere.origin, size=1)[0]
    anisotropic = SpaceTriple(sphere, CovMatrixFunction.linear(np.diag([0.5, 0.2]), 1.0))
    with pytest.raises(NotIrreducible):
        homogeneous_service.compute_Mtf_irreducible(isotropic_paths, anisotropic, f)
    reducible = SpaceTriple.isotropic(HomogeneousSpace(irreducible=False), 0.5, 1.0)
    with pytest.raises(NotIrreducible):
        homogeneous_service.compute_Mtf_irreducible(isotropic_paths, reducible, f)


# ============================================================================
# Projection and lift
# ============================================================================

def test_projection_of_group_paths(sphere, so3_reference_triple):
    ensemble = simulation_service.simulate_paths(so3_reference_triple, sim_config(paths=3, steps_per_unit=20))
    projected = homogeneous_service.project_ensemble(ensemble, sphere)
    assert projected.points.shape == (3, len(ensemble.grid), 3)
    assert np.allclose(projected.points[:, 0], sphere.origin)
    path = homogeneous_service.project_path(ensemble.path(1), sphere)
    assert np.allclose(path.points[-1], projected.points[1, -1], atol=1e-10)
    k = ensemble.index_of(1.0)
    assert np.allclose(projected.left_point(k), sphere.project(ensemble.left_value(k)))


def test_lifted_triple_is_valid(jumping_sphere_triple):
    lifted = homogeneous_service.lift_triple(jumping_sphere_triple)
    report = triple_service.validate_extended_triple(lifted)
    assert report.valid, report.messages()
    assert lifted.group.name == "SO3"
    assert lifted.atoms.times == [0.5]
    assert np.allclose(lifted.cov.values[-1], np.diag([0.3, 0.3, 0.0]))


def test_lifted_process_projects_to_the_direct_one(sphere, jumping_sphere_triple, jumping_paths):
    lifted = homogeneous_service.lift_triple(jumping_sphere_triple)
    cfg = sim_config(paths=1500, steps_per_unit=STEPS_PER_UNIT, seed=SEED + 1)
    projected = homogeneous_service.project_ensemble(simulation_service.simulate_paths(lifted, cfg), sphere)
    report = homogeneous_service.two_sample_compare(projected, jumping_paths)
    assert report.passed, [(e.f_id, e.t, e.z) for e in report.entries if not e.passed]


def test_conjugate_average_lift_is_k_conjugation_invariant(sphere):
    law = KInvariantLaw(np.array([0.6]), np.array([1.0]), nodes=16)
    lifted = homogeneous_service.conjugate_average_lift(sphere, law)
    assert lifted.total_mass == pytest.approx(1.0)
    assert lifted.mass_at_identity(sphere.group) == pytest.approx(0.0)
    angles = sphere.group.log_radius(lifted.support)
    assert np.allclose(angles, 0.6, atol=1e-10)
