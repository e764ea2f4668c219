"""
Matrix Lie groups used by the library.

Elements are plain ``numpy`` arrays in the defining representation; every
operation is batched over leading axes so a whole path ensemble can be pushed
through one call. Lie algebra vectors are coefficient arrays in the basis
``{xi_1, ..., xi_d}`` of the descriptor.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Tuple
import logging

import numpy as np
from scipy import linalg

from levy_lie.core.config import settings
from levy_lie.core.exceptions import OutOfChart

logger = logging.getLogger(__name__)

# Group elements are n x n arrays; stacks of them are (..., n, n).
GroupElement = np.ndarray


@dataclass(frozen=True)
class LieAlgebraVector:
    """Coefficients of a Lie algebra element in a descriptor's basis"""
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim != 1:
            raise ValueError("Lie algebra vector must be one-dimensional")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("Lie algebra vector has non-finite entries")
        object.__setattr__(self, "coeffs", coeffs)

    def check_dim(self, group: "GroupDescriptor") -> "LieAlgebraVector":
        if self.coeffs.shape[0] != group.dim:
            raise ValueError(f"vector length {self.coeffs.shape[0]} != group dimension {group.dim}")
        return self


def _skew(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


class GroupDescriptor(ABC):
    """
    A matrix Lie group with a basis of its Lie algebra, exp/log, Ad, a left
    invariant metric and the cutoff coordinate functions phi_j.

    Subclasses override the closed-form exp/log/Ad; the base class falls back
    to scipy's scaling-and-squaring ``expm`` and ``logm``.
    """

    name: str = "generic"
    abelian: bool = False

    def __init__(self, basis: np.ndarray, cutoff_radius: float, bump_inner: float, bump_outer: float):
        basis = np.asarray(basis, dtype=float)
        if not (0 < bump_inner < bump_outer <= cutoff_radius):
            raise ValueError(
                f"bump radii must satisfy 0 < r_in < r_out <= r_cut, got "
                f"{bump_inner}, {bump_outer}, {cutoff_radius}"
            )
        flat = basis.reshape(basis.shape[0], -1)
        if np.linalg.matrix_rank(flat) != basis.shape[0]:
            raise ValueError("basis matrices are linearly dependent")
        self.basis = basis
        self.cutoff_radius = float(cutoff_radius)
        self.bump_inner = float(bump_inner)
        self.bump_outer = float(bump_outer)
        self._pinv = np.linalg.pinv(flat.T)

    def __repr__(self):
        return f"<{type(self).__name__}(dim={self.dim}, r_in={self.bump_inner}, r_out={self.bump_outer})>"

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def matrix_size(self) -> int:
        return self.basis.shape[1]

    # ------------------------------------------------------------------
    # Arithmetic
    # ------------------------------------------------------------------

    def identity(self, shape: Tuple[int, ...] = ()) -> np.ndarray:
        return np.broadcast_to(np.eye(self.matrix_size), tuple(shape) + (self.matrix_size,) * 2).copy()

    def hat(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("...j,jab->...ab", np.asarray(v, dtype=float), self.basis)

    def vee(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        flat = X.reshape(X.shape[:-2] + (-1,))
        return flat @ self._pinv.T

    def compose(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        return np.matmul(g, h)

    def inverse(self, g: np.ndarray) -> np.ndarray:
        return np.linalg.inv(g)

    def exp(self, v: np.ndarray) -> np.ndarray:
        X = self.hat(v)
        flat = X.reshape((-1,) + X.shape[-2:])
        out = np.stack([linalg.expm(m) for m in flat]) if len(flat) else flat.copy()
        return out.reshape(X.shape)

    def _log(self, g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return log coordinates and an in-chart mask (no raising)."""
        g = np.asarray(g, dtype=float)
        flat = g.reshape((-1,) + g.shape[-2:])
        logs = np.stack([np.real(linalg.logm(m)) for m in flat]) if len(flat) else flat.copy()
        coords = self.vee(logs).reshape(g.shape[:-2] + (self.dim,))
        return coords, np.linalg.norm(coords, axis=-1) < self.cutoff_radius

    def log(self, g: np.ndarray, strict: bool = True) -> np.ndarray:
        coords, in_chart = self._log(g)
        if strict and not np.all(in_chart):
            raise OutOfChart(
                f"{self.name}: element outside the logarithm chart (r_cut={self.cutoff_radius})",
                details={"count": int(np.size(in_chart) - np.count_nonzero(in_chart))},
            )
        return coords

    @abstractmethod
    def adjoint(self, g: np.ndarray) -> np.ndarray:
        """Matrix [Ad(g)] with g xi_k g^-1 = sum_j [Ad(g)]_jk xi_j"""

    def renormalize(self, g: np.ndarray) -> np.ndarray:
        return np.asarray(g, dtype=float)

    def membership_residual(self, g: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(g)[:-2])

    def _surrogate_norm(self, coords: np.ndarray, g: np.ndarray) -> np.ndarray:
        return np.linalg.norm(coords, axis=-1)

    def distance(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        rel = self.compose(self.inverse(g), h)
        coords, in_chart = self._log(rel)
        norm = np.linalg.norm(coords, axis=-1)
        return np.where(in_chart, norm, self._surrogate_norm(coords, rel))

    # ------------------------------------------------------------------
    # Coordinate functions
    # ------------------------------------------------------------------

    def bump(self, r: np.ndarray) -> np.ndarray:
        """Smooth cutoff: 1 on [0, r_in], exp(1 - 1/(1 - s^2)) ramp, 0 from r_out on."""
        r = np.asarray(r, dtype=float)
        s = (r - self.bump_inner) / (self.bump_outer - self.bump_inner)
        out = np.where(r <= self.bump_inner, 1.0, 0.0)
        mid = (s > 0.0) & (s < 1.0)
        if np.any(mid):
            out = np.array(out, dtype=float)
            out[mid] = np.exp(1.0 - 1.0 / (1.0 - s[mid] ** 2))
        return out

    def coordinates(self, g: np.ndarray) -> np.ndarray:
        """phi_.(g) for a stack of elements, shape (..., d)"""
        coords, _ = self._log(g)
        radius = np.linalg.norm(coords, axis=-1)
        return self.bump(radius)[..., None] * coords

    def log_radius(self, g: np.ndarray) -> np.ndarray:
        coords, _ = self._log(g)
        return np.linalg.norm(coords, axis=-1)

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def validate_chart(self, n_points: Optional[int] = None, tol: float = 1e-8) -> List[str]:
        """Check log(exp v) = v on a deterministic sample inside the chart."""
        n_points = n_points or settings.chart_check_points
        rng = np.random.default_rng(0)
        directions = rng.standard_normal((n_points, self.dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        reach = min(self.cutoff_radius, 10.0)
        radii = np.linspace(0.0, 0.999 * reach, n_points)
        vectors = directions * radii[:, None]
        recovered = self.log(self.exp(vectors), strict=False)
        errors = np.linalg.norm(recovered - vectors, axis=1)
        issues = [
            f"chart not injective near |v|={radii[i]:.3f} (error {errors[i]:.2e})"
            for i in np.flatnonzero(errors > tol)
        ]
        if issues:
            logger.warning(f"{self.name}: {len(issues)} chart check failures")
        return issues


class SO3Group(GroupDescriptor):
    """Rotation group with basis L_x, L_y, L_z; Ad(R) = R."""

    name = "SO3"

    def __init__(self, cutoff_radius: float = 3.1, bump_inner: float = 0.8, bump_outer: float = 2.8):
        super().__init__(_skew(np.eye(3)), cutoff_radius, bump_inner, bump_outer)

    def inverse(self, g):
        return np.swapaxes(g, -1, -2)

    def exp(self, v):
        v = np.asarray(v, dtype=float)
        theta = np.linalg.norm(v, axis=-1)
        small = theta < 1e-6
        safe = np.where(small, 1.0, theta)
        a = np.where(small, 1.0 - theta ** 2 / 6.0 + theta ** 4 / 120.0, np.sin(safe) / safe)
        b = np.where(small, 0.5 - theta ** 2 / 24.0 + theta ** 4 / 720.0, (1.0 - np.cos(safe)) / safe ** 2)
        K = _skew(v)
        return np.eye(3) + a[..., None, None] * K + b[..., None, None] * (K @ K)

    def _log(self, g):
        g = np.asarray(g, dtype=float)
        cos_theta = np.clip((np.trace(g, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
        theta = np.arccos(cos_theta)
        skew = np.stack([g[..., 2, 1] - g[..., 1, 2], g[..., 0, 2] - g[..., 2, 0], g[..., 1, 0] - g[..., 0, 1]], axis=-1) / 2.0
        sin_theta = np.sin(theta)
        small = theta < 1e-6
        near_pi = theta > np.pi - 1e-3
        factor = np.where(small, 1.0 + theta ** 2 / 6.0, theta / np.where(small | near_pi, 1.0, sin_theta))
        coords = factor[..., None] * skew
        if np.any(near_pi):
            sym = (g + np.swapaxes(g, -1, -2)) / 2.0 - cos_theta[..., None, None] * np.eye(3)
            diag = np.diagonal(sym, axis1=-2, axis2=-1)
            col = np.argmax(diag, axis=-1)
            axis = np.take_along_axis(sym, col[..., None, None].repeat(3, axis=-1), axis=-2)[..., 0, :]
            axis = axis / np.maximum(np.linalg.norm(axis, axis=-1, keepdims=True), 1e-300)
            sign = np.where(np.sum(axis * skew, axis=-1) < 0.0, -1.0, 1.0)
            coords = np.where(near_pi[..., None], (sign * theta)[..., None] * axis, coords)
        return coords, theta < self.cutoff_radius

    def adjoint(self, g):
        return np.array(g, dtype=float)

    def renormalize(self, g):
        u, _, vt = np.linalg.svd(g)
        r = u @ vt
        det = np.linalg.det(r)
        if np.any(det < 0):
            u = u.copy()
            u[..., :, -1] *= np.sign(det)[..., None]
            r = u @ vt
        return r

    def membership_residual(self, g):
        gram = np.swapaxes(g, -1, -2) @ g - np.eye(3)
        return np.abs(gram).max(axis=(-2, -1)) + np.abs(np.linalg.det(g) - 1.0)

    def distance(self, g, h):
        rel = np.swapaxes(g, -1, -2) @ h
        cos_theta = np.clip((np.trace(rel, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
        # arccos loses precision near 0; use the skew part there
        skew = np.stack([rel[..., 2, 1] - rel[..., 1, 2], rel[..., 0, 2] - rel[..., 2, 0], rel[..., 1, 0] - rel[..., 0, 1]], axis=-1) / 2.0
        return np.arctan2(np.linalg.norm(skew, axis=-1), cos_theta)


class SE2Group(GroupDescriptor):
    """Planar rigid motions, coordinates (x, y, theta), homogeneous 3x3 form."""

    name = "SE2"

    def __init__(self, cutoff_radius: float = 3.1, bump_inner: float = 0.8, bump_outer: float = 2.8):
        basis = np.zeros((3, 3, 3))
        basis[0, 0, 2] = 1.0
        basis[1, 1, 2] = 1.0
        basis[2, 0, 1] = -1.0
        basis[2, 1, 0] = 1.0
        super().__init__(basis, cutoff_radius, bump_inner, bump_outer)

    @staticmethod
    def _v_coeffs(theta):
        small = np.abs(theta) < 1e-6
        safe = np.where(small, 1.0, theta)
        a = np.where(small, 1.0 - theta ** 2 / 6.0, np.sin(safe) / safe)
        b = np.where(small, theta / 2.0 - theta ** 3 / 24.0, (1.0 - np.cos(safe)) / safe)
        return a, b

    def exp(self, v):
        v = np.asarray(v, dtype=float)
        x, y, theta = v[..., 0], v[..., 1], v[..., 2]
        a, b = self._v_coeffs(theta)
        out = np.zeros(v.shape[:-1] + (3, 3))
        c, s = np.cos(theta), np.sin(theta)
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
        out[..., 0, 2] = a * x - b * y
        out[..., 1, 2] = b * x + a * y
        out[..., 2, 2] = 1.0
        return out

    def _log(self, g):
        g = np.asarray(g, dtype=float)
        theta = np.arctan2(g[..., 1, 0], g[..., 0, 0])
        a, b = self._v_coeffs(theta)
        det = a ** 2 + b ** 2
        tx, ty = g[..., 0, 2], g[..., 1, 2]
        x = (a * tx + b * ty) / det
        y = (-b * tx + a * ty) / det
        return np.stack([x, y, theta], axis=-1), np.abs(theta) < self.cutoff_radius

    def inverse(self, g):
        g = np.asarray(g, dtype=float)
        out = np.zeros_like(g)
        rt = np.swapaxes(g[..., :2, :2], -1, -2)
        out[..., :2, :2] = rt
        out[..., :2, 2] = -np.einsum("...ij,...j->...i", rt, g[..., :2, 2])
        out[..., 2, 2] = 1.0
        return out

    def adjoint(self, g):
        g = np.asarray(g, dtype=float)
        out = np.zeros(g.shape[:-2] + (3, 3))
        out[..., :2, :2] = g[..., :2, :2]
        out[..., 0, 2] = g[..., 1, 2]
        out[..., 1, 2] = -g[..., 0, 2]
        out[..., 2, 2] = 1.0
        return out

    def renormalize(self, g):
        g = np.array(g, dtype=float)
        theta = np.arctan2(g[..., 1, 0], g[..., 0, 0])
        c, s = np.cos(theta), np.sin(theta)
        g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1] = c, -s, s, c
        g[..., 2, :2] = 0.0
        g[..., 2, 2] = 1.0
        return g

    def membership_residual(self, g):
        rot = g[..., :2, :2]
        gram = np.swapaxes(rot, -1, -2) @ rot - np.eye(2)
        last = np.abs(g[..., 2, :] - np.array([0.0, 0.0, 1.0])).max(axis=-1)
        return np.abs(gram).max(axis=(-2, -1)) + last

    def _surrogate_norm(self, coords, g):
        theta = np.arctan2(g[..., 1, 0], g[..., 0, 0])
        return np.sqrt(g[..., 0, 2] ** 2 + g[..., 1, 2] ** 2 + theta ** 2)


class EuclideanGroup(GroupDescriptor):
    """R^d as translations in homogeneous (d+1) x (d+1) form."""

    name = "RD"
    abelian = True

    def __init__(self, d: int, cutoff_radius: float = np.inf, bump_inner: float = 1.0, bump_outer: float = 2.0):
        basis = np.zeros((d, d + 1, d + 1))
        for j in range(d):
            basis[j, j, d] = 1.0
        super().__init__(basis, cutoff_radius, bump_inner, bump_outer)

    def exp(self, v):
        v = np.asarray(v, dtype=float)
        out = self.identity(v.shape[:-1])
        out[..., : self.dim, self.dim] = v
        return out

    def _log(self, g):
        coords = np.array(np.asarray(g, dtype=float)[..., : self.dim, self.dim])
        return coords, np.ones(coords.shape[:-1], dtype=bool)

    def inverse(self, g):
        out = np.array(g, dtype=float)
        out[..., : self.dim, self.dim] *= -1.0
        return out

    def adjoint(self, g):
        return np.broadcast_to(np.eye(self.dim), np.shape(g)[:-2] + (self.dim, self.dim)).copy()

    def renormalize(self, g):
        return self.exp(self._log(g)[0])

    def membership_residual(self, g):
        return np.abs(g - self.renormalize(g)).max(axis=(-2, -1))


class CircleGroup(GroupDescriptor):
    """SO(2) as 2x2 rotations; the compact subgroup K of the sphere."""

    name = "circle-K"
    abelian = True

    def __init__(self, cutoff_radius: float = 3.1, bump_inner: float = 0.8, bump_outer: float = 2.8):
        super().__init__(np.array([[[0.0, -1.0], [1.0, 0.0]]]), cutoff_radius, bump_inner, bump_outer)

    def exp(self, v):
        theta = np.asarray(v, dtype=float)[..., 0]
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)

    def _log(self, g):
        theta = np.arctan2(g[..., 1, 0], g[..., 0, 0])
        return theta[..., None], np.abs(theta) < self.cutoff_radius

    def inverse(self, g):
        return np.swapaxes(g, -1, -2)

    def adjoint(self, g):
        return np.ones(np.shape(g)[:-2] + (1, 1))

    def renormalize(self, g):
        return self.exp(self._log(g)[0])

    def membership_residual(self, g):
        gram = np.swapaxes(g, -1, -2) @ g - np.eye(2)
        return np.abs(gram).max(axis=(-2, -1))


def get_group(
    name: str,
    dim: Optional[int] = None,
    bump_inner: Optional[float] = None,
    bump_outer: Optional[float] = None,
    cutoff_radius: Optional[float] = None,
) -> GroupDescriptor:
    """
    Build a group descriptor by name.

    Args:
        name: One of SO3, SE2, RD, circle-K
        dim: Dimension for RD
        bump_inner, bump_outer, cutoff_radius: Optional overrides of the chart radii

    Returns:
        GroupDescriptor instance
    """
    overrides = {
        key: value
        for key, value in (("bump_inner", bump_inner), ("bump_outer", bump_outer), ("cutoff_radius", cutoff_radius))
        if value is not None
    }
    key = name.upper()
    if key == "SO3":
        return SO3Group(**overrides)
    if key == "SE2":
        return SE2Group(**overrides)
    if key == "RD":
        if not dim:
            raise ValueError("RD requires a dimension")
        return EuclideanGroup(dim, **overrides)
    if key in ("CIRCLE-K", "CIRCLE", "SO2"):
        return CircleGroup(**overrides)
    raise ValueError(f"unknown group {name!r}")


# ----------------------------------------------------------------------
# Operation-level entry points
# ----------------------------------------------------------------------

def exp_map(group: GroupDescriptor, v) -> np.ndarray:
    if isinstance(v, LieAlgebraVector):
        v = v.check_dim(group).coeffs
    return group.exp(v)


def log_coords(group: GroupDescriptor, g: np.ndarray) -> LieAlgebraVector:
    """Log coordinates of a single element; raises OutOfChart outside the chart."""
    return LieAlgebraVector(group.log(g, strict=True))


def coordinate_fn(group: GroupDescriptor, g: np.ndarray, j: int) -> float:
    return float(group.coordinates(g)[..., j])


def adjoint(group: GroupDescriptor, g: np.ndarray) -> np.ndarray:
    return group.adjoint(g)


def group_distance(group: GroupDescriptor, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    return group.distance(g, h)
