"""
The homogeneous space X = G/K for G = SO(3), K = rotations about the z axis,
realized as the unit sphere with origin o = e_z.

The complement p is spanned by L_x, L_y (the first two SO(3) basis elements),
so the SO(3) basis is already p-first.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import logging

import numpy as np

from levy_lie.core.config import settings
from levy_lie.models.group import SO3Group, CircleGroup
from levy_lie.models.measure import DiscreteMeasure
from levy_lie.models.triple import CovMatrixFunction, TIME_TOL

logger = logging.getLogger(__name__)

ORIGIN = np.array([0.0, 0.0, 1.0])


def canonicalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def colatitude(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.arctan2(np.linalg.norm(x[..., :2], axis=-1), x[..., 2])


def longitude(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.arctan2(x[..., 1], x[..., 0])


def sphere_point(theta: np.ndarray, lon: np.ndarray) -> np.ndarray:
    theta, lon = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(lon, dtype=float))
    st = np.sin(theta)
    return np.stack([st * np.cos(lon), st * np.sin(lon), np.cos(theta)], axis=-1)


class HomogeneousSpace:
    """
    S^2 = SO(3)/SO(2) with origin e_z.

    Args:
        twist: Strength of the off-chart twist of the alternative section map;
            0 gives the minimal-rotation section.
        k_nodes: Size of the uniform quadrature grid on K
    """

    name = "S2"

    def __init__(
        self,
        group: Optional[SO3Group] = None,
        twist: float = 0.0,
        k_nodes: Optional[int] = None,
        irreducible: bool = True,
    ):
        self.group = group or SO3Group()
        self.subgroup = CircleGroup()
        self.origin = ORIGIN.copy()
        self.p_indices = (0, 1)
        self.k_index = 2
        self.irreducible = irreducible
        self.twist = float(twist)
        self.k_nodes = int(k_nodes or settings.k_quadrature_nodes)

    def __repr__(self):
        return f"<HomogeneousSpace(S2, twist={self.twist}, k_nodes={self.k_nodes})>"

    @property
    def dim(self) -> int:
        return len(self.p_indices)

    def with_twist(self, twist: float) -> "HomogeneousSpace":
        return HomogeneousSpace(self.group, twist, self.k_nodes, self.irreducible)

    # ------------------------------------------------------------------
    # K
    # ------------------------------------------------------------------

    def k_angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.k_nodes) / self.k_nodes

    def k_element(self, angle) -> np.ndarray:
        angle = np.asarray(angle, dtype=float)
        v = np.zeros(angle.shape + (3,))
        v[..., self.k_index] = angle
        return self.group.exp(v)

    def k_grid(self) -> np.ndarray:
        return self.k_element(self.k_angles())

    # ------------------------------------------------------------------
    # Sections and coordinates
    # ------------------------------------------------------------------

    def project(self, g: np.ndarray) -> np.ndarray:
        return np.asarray(g, dtype=float) @ self.origin

    def _axis(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Rotation angle and unit axis in the xy plane taking o to x."""
        x = canonicalize(x)
        theta = colatitude(x)
        planar = np.stack([-x[..., 1], x[..., 0]], axis=-1)
        norm = np.linalg.norm(planar, axis=-1, keepdims=True)
        fallback = np.broadcast_to(np.array([1.0, 0.0]), planar.shape)
        axis = np.where(norm > 1e-300, planar / np.where(norm > 1e-300, norm, 1.0), fallback)
        return theta, axis

    def log_coords(self, x: np.ndarray) -> np.ndarray:
        """v in p with exp(v1 L_x + v2 L_y) o = x"""
        theta, axis = self._axis(x)
        return theta[..., None] * axis

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        """phi_1, phi_2 on X (cut off with the group's bump)"""
        v = self.log_coords(x)
        return self.group.bump(np.linalg.norm(v, axis=-1))[..., None] * v

    def radius(self, x: np.ndarray) -> np.ndarray:
        return colatitude(x)

    def embed_p(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape[:-1] + (3,))
        out[..., list(self.p_indices)] = v
        return out

    def minimal_section(self, x: np.ndarray) -> np.ndarray:
        """Rotation about o x x taking o to x; the antipode uses the x axis."""
        return self.group.exp(self.embed_p(self.log_coords(x)))

    def section_angle(self, x: np.ndarray) -> np.ndarray:
        """Angle of the K factor in S(x) = S_min(x) k(angle); zero inside the chart."""
        x = canonicalize(x)
        if self.twist == 0.0:
            return np.zeros(x.shape[:-1])
        outside = 1.0 - self.group.bump(colatitude(x))
        return self.twist * outside * (1.0 + x[..., 0])

    def section(self, x: np.ndarray) -> np.ndarray:
        """
        S(x) with pi(S(x)) = x. With ``twist`` set, the off-chart part is
        post-composed with a rotation about o, which leaves pi(S(x)) unchanged.
        """
        s = self.minimal_section(x)
        if self.twist == 0.0:
            return s
        return s @ self.k_element(self.section_angle(x))

    def act(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """The product x y = S(x) y on X"""
        return np.einsum("...ab,...b->...a", self.section(x), y)

    def haar_average(self, fn, x: np.ndarray) -> np.ndarray:
        """f^(x) = average of f(k x) over the K grid"""
        ks = self.k_grid()
        x = np.asarray(x, dtype=float)
        moved = np.einsum("kab,...b->...ka", ks, x)
        return np.mean(fn(moved), axis=-1)

    def ad_k(self) -> np.ndarray:
        """[Ad(k)] restricted to p for every k on the grid"""
        ad = self.group.adjoint(self.k_grid())
        idx = list(self.p_indices)
        return ad[:, idx][:, :, idx]


# ============================================================================
# Laws and triples on X
# ============================================================================

@dataclass(frozen=True)
class KInvariantLaw:
    """
    Probability law on S^2 putting ``weights[i]`` uniformly on the colatitude
    circle ``colatitudes[i]`` (colatitude 0 is the point o).
    """
    colatitudes: np.ndarray
    weights: np.ndarray
    nodes: int = field(default_factory=lambda: settings.k_quadrature_nodes)

    def __post_init__(self):
        object.__setattr__(self, "colatitudes", np.asarray(self.colatitudes, dtype=float).reshape(-1))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).reshape(-1))
        if self.colatitudes.shape != self.weights.shape:
            raise ValueError("one weight per colatitude is required")

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if size == 0:
            return np.zeros((0, 3))
        idx = rng.choice(len(self.weights), size=size, p=self.weights / self.weights.sum())
        lon = rng.uniform(0.0, 2.0 * np.pi, size=size)
        return sphere_point(self.colatitudes[idx], lon)

    def points(self) -> Tuple[np.ndarray, np.ndarray]:
        """Quadrature points (m, 3) and weights (m,); polar circles collapse to one point."""
        lon = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
        pts, wts = [], []
        for theta, w in zip(self.colatitudes, self.weights):
            if theta <= 1e-15 or theta >= np.pi - 1e-15:
                pts.append(sphere_point(theta, 0.0)[None])
                wts.append(np.array([w]))
            else:
                pts.append(sphere_point(theta, lon))
                wts.append(np.full(self.nodes, w / self.nodes))
        if not pts:
            return np.zeros((0, 3)), np.zeros(0)
        return np.concatenate(pts), np.concatenate(wts)

    def integrate(self, fn) -> float:
        pts, wts = self.points()
        if len(wts) == 0:
            return 0.0
        return float(wts @ np.asarray(fn(pts), dtype=float))

    def mass_at_origin(self) -> float:
        return float(self.weights[self.colatitudes <= 1e-15].sum())


@dataclass(frozen=True)
class SpaceLevyPiece:
    start: float
    end: float
    rate: float
    law: KInvariantLaw

    def overlap(self, t0: float, t1: float) -> float:
        return max(0.0, min(self.end, t1) - max(self.start, t0))


@dataclass(frozen=True)
class SpaceFixedJump:
    time: float
    law: KInvariantLaw


@dataclass(frozen=True)
class SpaceTriple:
    """
    Extended Levy triple on X: covariance on p, K-invariant eta^c pieces and
    fixed jumps, and optionally a drift given by its points b_{t_k} in X.
    """
    space: HomogeneousSpace
    cov: CovMatrixFunction
    pieces: Tuple[SpaceLevyPiece, ...] = ()
    atoms: Tuple[SpaceFixedJump, ...] = ()
    drift_grid: Optional[np.ndarray] = None
    drift_points: Optional[np.ndarray] = None
    name: str = "space-triple"

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "atoms", tuple(sorted(self.atoms, key=lambda a: a.time)))

    @classmethod
    def isotropic(
        cls,
        space: HomogeneousSpace,
        rate: float,
        horizon: float,
        pieces=(),
        atoms=(),
    ) -> "SpaceTriple":
        """A(t) = rate * t * I on p"""
        return cls(space, CovMatrixFunction.linear(rate * np.eye(space.dim), horizon), tuple(pieces), tuple(atoms))

    def intensity_on(self, t0: float, t1: float):
        out = []
        for piece in self.pieces:
            mass = piece.rate * piece.overlap(t0, t1)
            if mass > 0:
                out.append((mass, piece.law))
        return out

    def breakpoints(self):
        points = set(self.cov.grid.tolist())
        points |= {p.start for p in self.pieces} | {p.end for p in self.pieces}
        points |= {a.time for a in self.atoms}
        if self.drift_grid is not None:
            points |= set(np.asarray(self.drift_grid).tolist())
        return sorted(points)


def orbit_law(space: HomogeneousSpace, law: KInvariantLaw) -> DiscreteMeasure:
    """The lifted law of k S(y) k^-1 on G, by quadrature over y."""
    pts, wts = law.points()
    return DiscreteMeasure(space.minimal_section(pts), wts)


# ============================================================================
# Paths on X
# ============================================================================

@dataclass
class SpacePath:
    """Event list of one path on X; ``points[i]`` is the point after event ``i``."""
    origin: np.ndarray
    times: np.ndarray
    kinds: List[str]
    points: np.ndarray


@dataclass
class SpaceEnsemble:
    """
    M paths on X sampled on a shared grid: ``points[i, k]`` is x_{t_k} of
    path i and ``left_points[k]`` holds x_{t_k-} at fixed-jump indices.
    """
    space: HomogeneousSpace
    grid: np.ndarray
    points: np.ndarray
    left_points: Dict[int, np.ndarray] = field(default_factory=dict)
    seed: int = 0

    @property
    def n_paths(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.n_paths

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def index_of(self, t: float) -> int:
        return int(np.searchsorted(self.grid, t + TIME_TOL, side="right") - 1)

    def at(self, t: float) -> np.ndarray:
        return self.points[:, self.index_of(t)]

    def left_point(self, k: int) -> np.ndarray:
        return self.left_points.get(k, self.points[:, k])
