"""
Finite measures on a matrix group and the spatial laws used for jumps.

A ``DiscreteMeasure`` is a weighted stack of group elements. Parametric laws
(Gaussian and Laplace in log coordinates) sample exactly and expose a
tensor-product quadrature through ``as_discrete`` so every integral in the
library reduces to a finite weighted sum.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol
import logging

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.laguerre import laggauss

from levy_lie.core.config import settings
from levy_lie.models.group import GroupDescriptor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite measure sum_i w_i delta_{g_i}; weights need not sum to one"""
    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if support.ndim != 3 or support.shape[0] != weights.shape[0]:
            raise ValueError("support must be (m, n, n) with one weight per atom")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac(cls, g: np.ndarray, mass: float = 1.0) -> "DiscreteMeasure":
        return cls(np.asarray(g, dtype=float)[None], np.array([mass]))

    @classmethod
    def empirical(cls, samples: np.ndarray) -> "DiscreteMeasure":
        samples = np.asarray(samples, dtype=float)
        return cls(samples, np.full(samples.shape[0], 1.0 / max(samples.shape[0], 1)))

    @classmethod
    def empty(cls, n: int) -> "DiscreteMeasure":
        return cls(np.zeros((0, n, n)), np.zeros(0))

    def __len__(self):
        return self.weights.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        if len(self) == 0:
            return np.asarray(0.0)
        values = np.asarray(fn(self.support), dtype=float)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def pushforward(self, fn: Callable[[np.ndarray], np.ndarray]) -> "DiscreteMeasure":
        return DiscreteMeasure(fn(self.support) if len(self) else self.support, self.weights)

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.support, self.weights * factor)

    def restrict(self, mask: np.ndarray) -> "DiscreteMeasure":
        mask = np.asarray(mask, dtype=bool)
        return DiscreteMeasure(self.support[mask], self.weights[mask])

    def concat(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return DiscreteMeasure(
            np.concatenate([self.support, other.support]), np.concatenate([self.weights, other.weights])
        )

    def identity_mask(self, group: GroupDescriptor, tol: float = 1e-12) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(0, dtype=bool)
        return group.distance(group.identity((len(self),)), self.support) <= tol

    def mass_at_identity(self, group: GroupDescriptor, tol: float = 1e-12) -> float:
        return float(self.weights[self.identity_mask(group, tol)].sum())

    def without_identity(self, group: GroupDescriptor, tol: float = 1e-12) -> "DiscreteMeasure":
        return self.restrict(~self.identity_mask(group, tol))

    def with_identity_mass(self, group: GroupDescriptor, total: float = 1.0) -> "DiscreteMeasure":
        deficit = total - self.total_mass
        if deficit <= 0:
            return self
        return self.concat(DiscreteMeasure.dirac(group.identity(), deficit))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if size == 0:
            return np.zeros((0,) + self.support.shape[1:])
        idx = rng.choice(len(self), size=size, p=self.weights / self.weights.sum())
        return self.support[idx]

    def as_discrete(self) -> "DiscreteMeasure":
        return self

    def normalized(self) -> "DiscreteMeasure":
        total = self.total_mass
        return self if total == 0 else self.scaled(1.0 / total)


class SpatialLaw(Protocol):
    """Probability law on G that can be sampled and integrated"""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray: ...

    def as_discrete(self) -> DiscreteMeasure: ...


@dataclass(frozen=True)
class GaussianLaw:
    """
    exp of a Gaussian vector in log coordinates. On SO(3) this is the
    isotropic wrapped Gaussian; on RD an ordinary Gaussian.
    """
    group: GroupDescriptor
    sigma: np.ndarray
    mean: Optional[np.ndarray] = None
    nodes: int = field(default_factory=lambda: settings.law_quadrature_nodes)

    def _sigma(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.sigma, dtype=float), (self.group.dim,))

    def _mean(self) -> np.ndarray:
        return np.zeros(self.group.dim) if self.mean is None else np.asarray(self.mean, dtype=float)

    def sample(self, rng, size):
        z = rng.standard_normal((size, self.group.dim))
        return self.group.exp(self._mean() + z * self._sigma())

    def as_discrete(self) -> DiscreteMeasure:
        x, w = hermegauss(self.nodes)
        w = w / w.sum()
        return _tensor_quadrature(self.group, x, w, self._sigma(), self._mean())


@dataclass(frozen=True)
class LaplaceLaw:
    """Product of independent Laplace coordinates, exp-mapped"""
    group: GroupDescriptor
    scale: np.ndarray
    mean: Optional[np.ndarray] = None
    nodes: int = field(default_factory=lambda: settings.law_quadrature_nodes)

    def _scale(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.scale, dtype=float), (self.group.dim,))

    def _mean(self) -> np.ndarray:
        return np.zeros(self.group.dim) if self.mean is None else np.asarray(self.mean, dtype=float)

    def sample(self, rng, size):
        z = rng.laplace(0.0, 1.0, size=(size, self.group.dim))
        return self.group.exp(self._mean() + z * self._scale())

    def as_discrete(self) -> DiscreteMeasure:
        x, w = laggauss(self.nodes)
        x = np.concatenate([-x[::-1], x])
        w = np.concatenate([w[::-1], w]) / 2.0
        return _tensor_quadrature(self.group, x, w / w.sum(), self._scale(), self._mean())


@dataclass(frozen=True)
class TransformedLaw:
    """Law of left @ x @ right for x drawn from ``base``"""
    base: SpatialLaw
    left: np.ndarray
    right: np.ndarray

    def _apply(self, x: np.ndarray) -> np.ndarray:
        return self.left @ x @ self.right

    def sample(self, rng, size):
        return self._apply(self.base.sample(rng, size))

    def as_discrete(self) -> DiscreteMeasure:
        return self.base.as_discrete().pushforward(self._apply)


def conjugated(law: SpatialLaw, group: GroupDescriptor, g: np.ndarray) -> SpatialLaw:
    """The law of g x g^-1; discrete laws stay discrete."""
    g = np.asarray(g, dtype=float)
    g_inv = group.inverse(g)
    if isinstance(law, DiscreteMeasure):
        return law.pushforward(lambda x: g @ x @ g_inv)
    return TransformedLaw(law, g, g_inv)


def transformed(law: SpatialLaw, left: np.ndarray, right: np.ndarray) -> SpatialLaw:
    if isinstance(law, DiscreteMeasure):
        return law.pushforward(lambda x: left @ x @ right)
    return TransformedLaw(law, np.asarray(left, dtype=float), np.asarray(right, dtype=float))


def _tensor_quadrature(group, nodes, weights, scale, mean) -> DiscreteMeasure:
    d = group.dim
    grids = np.meshgrid(*([nodes] * d), indexing="ij")
    wgrids = np.meshgrid(*([weights] * d), indexing="ij")
    points = np.stack([g.reshape(-1) for g in grids], axis=-1) * scale + mean
    w = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=-1), axis=-1)
    return DiscreteMeasure(group.exp(points), w)


# ----------------------------------------------------------------------
# Means
# ----------------------------------------------------------------------

def coordinate_means(measure: DiscreteMeasure, group: GroupDescriptor) -> np.ndarray:
    """mu(phi_j) for j = 1..d"""
    if len(measure) == 0:
        return np.zeros(group.dim)
    return measure.weights @ group.coordinates(measure.support)


def mean_of_measure(measure: DiscreteMeasure, group: GroupDescriptor) -> np.ndarray:
    """The phi-truncated mean exp(sum_j mu(phi_j) xi_j)"""
    return group.exp(coordinate_means(measure.as_discrete(), group))


def is_small(measure: DiscreteMeasure, group: GroupDescriptor, tol: float = 1e-8) -> bool:
    measure = measure.as_discrete()
    means = coordinate_means(measure, group)
    return bool(np.all(np.abs(group.coordinates(group.exp(means)) - means) <= tol))


def total_variation(
    empirical: DiscreteMeasure,
    reference: DiscreteMeasure,
    group: GroupDescriptor,
    tol: float = 1e-6,
) -> float:
    """
    Total variation distance after binning ``empirical`` onto the support of
    ``reference`` (atoms farther than ``tol`` from every reference atom fall in
    a residual bin).
    """
    ref = reference.as_discrete()
    emp = empirical.as_discrete()
    bins = np.zeros(len(ref) + 1)
    if len(emp):
        dist = group.distance(emp.support[:, None], ref.support[None, :])
        nearest = np.argmin(dist, axis=1)
        matched = dist[np.arange(len(emp)), nearest] <= tol
        np.add.at(bins, np.where(matched, nearest, len(ref)), emp.weights)
    target = np.concatenate([ref.weights, [0.0]])
    return 0.5 * float(np.abs(bins - target).sum())
