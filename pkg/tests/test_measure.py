"""
Discrete measures, parametric jump laws and their quadratures.
"""
import numpy as np
import pytest

from levy_lie.models.measure import (
    DiscreteMeasure,
    GaussianLaw,
    LaplaceLaw,
    conjugated,
    coordinate_means,
    is_small,
    mean_of_measure,
    total_variation,
)

from conftest import SEED, two_point_law


def test_negative_weights_are_rejected(so3):
    with pytest.raises(ValueError):
        DiscreteMeasure(so3.identity((2,)), np.array([0.5, -0.1]))
    with pytest.raises(ValueError):
        DiscreteMeasure(so3.identity((2,)), np.array([1.0]))


def test_gaussian_quadrature_is_a_probability(any_group):
    law = GaussianLaw(any_group, np.full(any_group.dim, 0.3))
    discrete = law.as_discrete()
    assert discrete.total_mass == pytest.approx(1.0, abs=1e-12)
    assert len(discrete) == 3 ** any_group.dim


def test_gaussian_quadrature_matches_second_moment(rd1):
    discrete = GaussianLaw(rd1, np.array([0.5])).as_discrete()
    second = discrete.integrate(lambda g: rd1.log(g)[:, 0] ** 2)
    assert float(second) == pytest.approx(0.25, abs=1e-12)


def test_laplace_quadrature_is_symmetric(rd1):
    discrete = LaplaceLaw(rd1, np.array([0.4])).as_discrete()
    assert discrete.total_mass == pytest.approx(1.0, abs=1e-12)
    assert float(discrete.integrate(lambda g: rd1.log(g)[:, 0])) == pytest.approx(0.0, abs=1e-12)


def test_dirac_mean_is_the_atom(so3):
    g = so3.exp(np.array([0.1, -0.2, 0.3]))
    assert np.allclose(mean_of_measure(DiscreteMeasure.dirac(g), so3), g, atol=1e-12)
    assert is_small(DiscreteMeasure.dirac(g), so3)


def test_mean_is_the_exponential_of_the_mean_coordinates(so3):
    g = so3.exp(np.array([0.3, -0.1, 0.2]))
    symmetric = DiscreteMeasure(np.stack([g, so3.inverse(g)]), np.array([0.5, 0.5]))
    assert np.allclose(mean_of_measure(symmetric, so3), so3.identity(), atol=1e-10)
    # non-commuting atoms: one closed-form step, no fixed-point refinement
    u, v = np.array([0.6, 0.0, 0.0]), np.array([0.0, 0.5, 0.0])
    law = DiscreteMeasure(so3.exp(np.stack([u, v])), np.array([0.5, 0.5]))
    assert np.allclose(mean_of_measure(law, so3), so3.exp(0.5 * (u + v)), atol=1e-12)


def test_coordinate_means_are_weighted(rd2):
    law = two_point_law(rd2, [0.5, 0.0], [0.0, -0.4], 0.25)
    assert np.allclose(coordinate_means(law, rd2), [0.125, -0.3])
    assert np.allclose(coordinate_means(DiscreteMeasure.empty(3), rd2), 0.0)


def test_identity_mass_completion(so3):
    law = DiscreteMeasure.dirac(so3.exp(np.array([0.5, 0.0, 0.0])), mass=0.3)
    full = law.with_identity_mass(so3)
    assert full.total_mass == pytest.approx(1.0)
    assert full.mass_at_identity(so3) == pytest.approx(0.7)
    assert full.without_identity(so3).total_mass == pytest.approx(0.3)
    assert law.with_identity_mass(so3, total=0.2) is law


def test_sampling_follows_weights(rd1):
    law = two_point_law(rd1, [1.0], [0.0], 0.3)
    samples = law.sample(np.random.default_rng(SEED), 20000)
    fraction = np.mean(rd1.log(samples)[:, 0] > 0.5)
    assert fraction == pytest.approx(0.3, abs=4 * np.sqrt(0.21 / 20000))


def test_total_variation(so3):
    law = two_point_law(so3, [0.0, 0.0, 1.2], [1.0, 0.0, 0.0], 0.4)
    assert total_variation(law, law, so3) == pytest.approx(0.0, abs=1e-12)
    empirical = DiscreteMeasure.empirical(law.sample(np.random.default_rng(SEED), 500))
    assert total_variation(empirical, law, so3) <= 4 * np.sqrt(0.24 / 500)
    stray = DiscreteMeasure.dirac(so3.exp(np.array([0.0, 0.3, 0.0])))
    assert total_variation(stray, law, so3) == pytest.approx(1.0)


def test_conjugated_discrete_law_stays_discrete(so3):
    law = two_point_law(so3, [0.0, 0.0, 1.2], [1.0, 0.0, 0.0], 0.4)
    g = so3.exp(np.array([0.0, np.pi / 2, 0.0]))
    moved = conjugated(law, so3, g)
    assert isinstance(moved, DiscreteMeasure)
    assert np.allclose(moved.support[0], g @ law.support[0] @ g.T)


def test_conjugated_gaussian_samples_in_group(so3):
    g = so3.exp(np.array([0.3, 0.0, 0.0]))
    law = conjugated(GaussianLaw(so3, np.array([0.2, 0.2, 0.2])), so3, g)
    samples = law.sample(np.random.default_rng(SEED), 10)
    assert np.all(so3.membership_residual(samples) < 1e-12)
    assert law.as_discrete().total_mass == pytest.approx(1.0)
