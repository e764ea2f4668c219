"""
Levy processes on the sphere S^2 = SO(3)/SO(2).

Projection of group paths onto X, the lift of a K-invariant triple on X to a
K-conjugate invariant triple on SO(3), the martingale functionals on X, and
direct simulation on X through the section map.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from scipy import stats
from scipy.special import eval_legendre

from levy_lie.core.config import settings
from levy_lie.core.exceptions import DriftPieceTooLarge, GridMismatch, NotIrreducible, NotKInvariant
from levy_lie.core.random import path_stream
from levy_lie.models.measure import DiscreteMeasure, mean_of_measure
from levy_lie.models.path import PathEnsemble, SamplePath
from levy_lie.models.space import (
    HomogeneousSpace,
    KInvariantLaw,
    SpaceEnsemble,
    SpacePath,
    SpaceTriple,
    canonicalize,
    colatitude,
    orbit_law,
)
from levy_lie.models.test_function import TestFunction, make_bank
from levy_lie.models.triple import (
    TIME_TOL,
    CovMatrixFunction,
    DriftAtom,
    DriftPath,
    ExtendedLevyTriple,
    FixedJump,
    FixedJumpAtoms,
    LevyMeasureFunctionC,
    LevyPiece,
    grid_index,
    refine_grid,
)
from levy_lie.schemas.experiment import SimulationSection
from levy_lie.schemas.reports import InvarianceReport, TwoSampleEntry, TwoSampleReport, ValidationReport
from levy_lie.services.simulation_service import psd_sqrt

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-8
EMPIRICAL_SIGMAS = 3.0
_CELL_BLOCK = 64
# every 16th node of the K grid; rotations that map the law quadrature onto itself
_K_STRIDE = 16

SpaceLaw = Union[KInvariantLaw, Tuple[np.ndarray, np.ndarray]]


def _law_points(law: SpaceLaw) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(law, KInvariantLaw):
        return law.points()
    points, weights = law
    return canonicalize(np.atleast_2d(np.asarray(points, dtype=float))), np.asarray(weights, dtype=float).reshape(-1)


def heat_kernel_colatitude_cdf(a: float, theta) -> np.ndarray:
    """
    P(colatitude <= theta) for Brownian motion on S^2 started at o, after
    accumulated variance ``a`` (generator (1/2) a'(t) Laplacian).

    Legendre series truncated once exp(-l(l+1)a/2) drops below e^-40.
    """
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta)
    if a <= 0.0:
        return np.ones_like(c)
    l_max = int(min(np.ceil(np.sqrt(80.0 / a)) + 2, 4000))
    total = 0.5 * (1.0 - c)
    for l in range(1, l_max + 1):
        total = total + 0.5 * np.exp(-l * (l + 1) * a / 2.0) * (eval_legendre(l - 1, c) - eval_legendre(l + 1, c))
    return np.clip(total, 0.0, 1.0)


@dataclass
class SpaceCovarianceEstimate:
    """
    Covariance on p accumulated over the ensemble horizon, and the summed
    phi coordinates of the increments (the drift estimate) with standard errors.
    """
    cov: np.ndarray
    mean_coords: np.ndarray
    stderr: np.ndarray
    n_paths: int

    @property
    def anisotropy(self) -> float:
        """||A - (tr A / n) I|| / tr A"""
        tr = float(np.trace(self.cov))
        if tr <= 0.0:
            return 0.0
        n = self.cov.shape[0]
        return float(np.linalg.norm(self.cov - tr / n * np.eye(n)) / tr)

    def drift_is_trivial(self, n_sigma: float = EMPIRICAL_SIGMAS) -> bool:
        return bool(np.all(np.abs(self.mean_coords) <= n_sigma * self.stderr + 1e-15))


@dataclass
class _SpaceDraws:
    normals: np.ndarray
    jump_cells: np.ndarray
    jump_points: np.ndarray
    fixed: Dict[int, np.ndarray]


class HomogeneousService:
    """
    The homogeneous-space layer for X = S^2.
    """

    # ========================================================================
    # Section and Haar averages
    # ========================================================================

    def section(self, space: HomogeneousSpace, x: np.ndarray) -> np.ndarray:
        return space.section(x)

    def haar_average(self, space: HomogeneousSpace, f: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
        """f^ = average of f o k over the K quadrature grid"""
        return lambda x: space.haar_average(f, x)

    def mean_on_space(self, space: HomogeneousSpace, law: SpaceLaw) -> np.ndarray:
        """exp(sum_j mu(phi_j) xi_j) o"""
        points, weights = _law_points(law)
        coords = weights @ space.coordinates(points) if len(weights) else np.zeros(space.dim)
        return space.group.exp(space.embed_p(coords)) @ space.origin

    # ========================================================================
    # K-invariance
    # ========================================================================

    def _k_subgrid(self, space: HomogeneousSpace) -> np.ndarray:
        return space.k_grid()[::_K_STRIDE]

    def _point_residual(self, space: HomogeneousSpace, points: np.ndarray) -> float:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        moved = np.einsum("kab,nb->kna", space.k_grid(), points)
        return float(np.abs(moved - points[None]).max(initial=0.0))

    def _matrix_residual(self, space: HomogeneousSpace, matrices: np.ndarray) -> float:
        matrices = np.asarray(matrices, dtype=float).reshape((-1, space.dim, space.dim))
        ad = space.ad_k()
        rotated = np.einsum("kip,tpq,kjq->ktij", ad, matrices, ad)
        return float(np.abs(rotated - matrices[None]).max(initial=0.0))

    def k_invariance_check(
        self,
        space: HomogeneousSpace,
        obj: Union[SpaceLaw, np.ndarray],
        bank: Optional[List[TestFunction]] = None,
    ) -> InvarianceReport:
        """
        Check k mu = mu, k b = b or [Ad k] A [Ad k]' = A.

        ``obj`` is a law (``KInvariantLaw`` or ``(points, weights)``), a point
        of shape (3,), a matrix on p, or an (n, 3) array of samples. Exact
        objects pass at 1e-8; samples are compared with their K-average on
        the test-function bank and pass at 3 sigma.
        """
        if isinstance(obj, (KInvariantLaw, tuple)):
            return self._measure_invariance(space, obj, bank)
        obj = np.asarray(obj, dtype=float)
        if obj.ndim == 1:
            residual = self._point_residual(space, obj)
            return InvarianceReport(object_kind="point", residual=residual, tolerance=EXACT_TOL, passed=residual <= EXACT_TOL)
        if obj.shape[-1] == 3:
            return self._sample_invariance(space, obj, bank)
        residual = self._matrix_residual(space, obj)
        return InvarianceReport(object_kind="matrix", residual=residual, tolerance=EXACT_TOL, passed=residual <= EXACT_TOL)

    def _measure_invariance(self, space: HomogeneousSpace, law: SpaceLaw, bank) -> InvarianceReport:
        bank = bank or make_bank(space.group, origin=space.origin)
        points, weights = _law_points(law)
        ks = self._k_subgrid(space)
        moved = np.einsum("kab,nb->kna", ks, points)
        details: Dict[str, float] = {}
        for f in bank:
            base = weights @ f.at_point(points)
            details[f.name] = float(np.abs(f.at_point(moved) @ weights - base).max(initial=0.0))
        residual = max(details.values(), default=0.0)
        return InvarianceReport(
            object_kind="measure", residual=residual, tolerance=EXACT_TOL, passed=residual <= EXACT_TOL, details=details
        )

    def _sample_invariance(self, space: HomogeneousSpace, samples: np.ndarray, bank) -> InvarianceReport:
        bank = bank or make_bank(space.group, origin=space.origin)
        samples = canonicalize(samples)
        n = samples.shape[0]
        details: Dict[str, float] = {}
        for f in bank:
            diff = f.at_point(samples) - space.haar_average(f.at_point, samples)
            stderr = diff.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
            details[f.name] = float(abs(diff.mean()) / max(stderr, 1e-12))
        residual = max(details.values(), default=0.0)
        return InvarianceReport(
            object_kind="measure",
            residual=residual,
            tolerance=EMPIRICAL_SIGMAS,
            passed=residual <= EMPIRICAL_SIGMAS,
            details=details,
        )

    def validate_space_triple(self, triple: SpaceTriple) -> ValidationReport:
        report = ValidationReport()
        space = triple.space
        residual = self._matrix_residual(space, triple.cov.values)
        if residual > EXACT_TOL:
            report.add("cov-ad-k", f"covariance is not Ad(K)-invariant (residual {residual:.2e})")
        for i, piece in enumerate(triple.pieces):
            where = f"piece {i}"
            if piece.end <= piece.start or piece.rate < 0 or not np.isfinite(piece.rate):
                report.add("levy-piece", f"piece [{piece.start}, {piece.end}) with rate {piece.rate} is invalid", where)
            if abs(piece.law.total_mass - 1.0) > 1e-9:
                report.add("levy-law-mass", f"piece law has mass {piece.law.total_mass:.12g}, expected 1", where)
            if piece.law.mass_at_origin() > 0.0:
                report.add("levy-law-origin", "piece law charges the origin", where)
        for atom in triple.atoms:
            if abs(atom.law.total_mass - 1.0) > 1e-12:
                report.add("atom-mass", f"nu has mass {atom.law.total_mass:.15g}", f"t={atom.time:g}")
        if triple.drift_points is not None:
            points = canonicalize(triple.drift_points)
            if colatitude(points[0]) > 1e-12:
                report.add("drift-start", "drift must start at the origin")
            residual = self._point_residual(space, points)
            if residual > EXACT_TOL:
                report.add("drift-k-invariant", f"drift points are not K-invariant (residual {residual:.2e})")
            else:
                # the K-fixed points are +-o and a continuous drift from o cannot reach -o
                moved = np.nonzero(colatitude(points[1:]) > 1e-12)[0]
                if len(moved):
                    where = f"drift point {moved[0] + 1}"
                    if triple.drift_grid is not None:
                        where = f"t={float(triple.drift_grid[moved[0] + 1]):g}"
                    report.add("drift-nontrivial", "K-fixed drift must stay at the origin", where)
        return report

    def _require_k_invariant(self, triple: SpaceTriple) -> None:
        report = self.validate_space_triple(triple)
        if not report.valid:
            raise NotKInvariant(f"triple '{triple.name}' is not K-invariant", details=report.messages())

    # ========================================================================
    # Projection and lift
    # ========================================================================

    def project_path(self, path: SamplePath, space: HomogeneousSpace) -> SpacePath:
        """x_t = g_t o at every event of the group path"""
        g = np.array(path.origin, dtype=float)
        points = []
        for event in path.events:
            g = g @ event.increment
            points.append(space.project(g))
        return SpacePath(
            origin=space.project(path.origin),
            times=path.times,
            kinds=[e.kind.value for e in path.events],
            points=np.array(points).reshape(-1, 3),
        )

    def project_ensemble(self, ensemble: PathEnsemble, space: HomogeneousSpace) -> SpaceEnsemble:
        return SpaceEnsemble(
            space=space,
            grid=ensemble.grid.copy(),
            points=space.project(ensemble.values),
            left_points={k: space.project(v) for k, v in ensemble.left_values.items()},
            seed=ensemble.seed,
        )

    def conjugate_average_lift(self, space: HomogeneousSpace, law: SpaceLaw) -> DiscreteMeasure:
        """
        The law on G of k S(y) k^-1 with y ~ law and k Haar on K.

        For a K-invariant law and the minimal section this is the orbit law
        itself. Otherwise each quadrature point is averaged over the K grid;
        K-invariant laws then use a coarser longitude grid.
        """
        group = space.group
        if isinstance(law, KInvariantLaw):
            if space.twist == 0.0:
                return orbit_law(space, law)
            law = replace(law, nodes=32)
        points, weights = _law_points(law)
        if not len(weights):
            return DiscreteMeasure.empty(group.matrix_size)
        sections = space.section(points)
        ks = space.k_grid()
        conj = ks[:, None] @ sections[None] @ group.inverse(ks)[:, None]
        return DiscreteMeasure(conj.reshape(-1, 3, 3), np.tile(weights, len(ks)) / len(ks))

    def _lift_drift(self, triple: SpaceTriple, horizon: float) -> Tuple[np.ndarray, np.ndarray]:
        space, group = triple.space, triple.space.group
        if triple.drift_points is None:
            return np.array([0.0, horizon]), np.zeros((2, group.dim))
        grid = np.asarray(triple.drift_grid, dtype=float)
        points = canonicalize(triple.drift_points)
        g = group.identity()
        components = [np.zeros(group.dim)]
        for i in range(1, len(grid)):
            rel = g.T @ points[i]
            theta = float(colatitude(rel))
            if theta > group.bump_inner:
                raise DriftPieceTooLarge(
                    f"drift piece [{grid[i - 1]:g}, {grid[i]:g}] leaves the chart; refine the drift grid",
                    details={"colatitude": theta, "limit": group.bump_inner},
                )
            v = space.embed_p(space.log_coords(rel))
            g = g @ group.exp(v)
            components.append(components[-1] + v)
        return grid, np.array(components)

    def lift_triple(self, triple: SpaceTriple, validate: bool = True) -> ExtendedLevyTriple:
        """
        The K-conjugate invariant triple on G whose projected process has
        the law of the process of ``triple``.

        Raises:
            NotKInvariant: If ``validate`` is set and the triple fails validation
            DriftPieceTooLarge: If a drift piece leaves the chart around its start
        """
        if validate:
            self._require_k_invariant(triple)
        space, group = triple.space, triple.space.group
        n = space.dim
        cov_values = np.zeros((len(triple.cov.grid), group.dim, group.dim))
        cov_values[:, :n, :n] = triple.cov.values
        pieces = tuple(
            LevyPiece(p.start, p.end, p.rate, self.conjugate_average_lift(space, p.law)) for p in triple.pieces
        )
        atoms, drift_atoms = [], []
        for atom in triple.atoms:
            lifted = self.conjugate_average_lift(space, atom.law)
            atoms.append(FixedJump(atom.time, lifted))
            drift_atoms.append(DriftAtom(atom.time, mean_of_measure(lifted, group)))
        horizon = max(max(triple.breakpoints(), default=1.0), 1.0)
        grid, components = self._lift_drift(triple, horizon)
        lifted = ExtendedLevyTriple(
            group=group,
            drift=DriftPath(grid, components, tuple(drift_atoms)),
            cov=CovMatrixFunction(triple.cov.grid, cov_values),
            levy_c=LevyMeasureFunctionC(pieces),
            atoms=FixedJumpAtoms(tuple(atoms)),
            name=f"{triple.name}-lifted",
        )
        logger.info(f"Lifted '{triple.name}' to SO(3): {len(pieces)} piece(s), {len(atoms)} fixed jump(s)")
        return lifted

    # ========================================================================
    # M_t f on X
    # ========================================================================

    def _grid_inputs(self, ensemble: SpaceEnsemble, triple: SpaceTriple):
        grid = ensemble.grid
        intensities = [triple.intensity_on(grid[k], grid[k + 1]) for k in range(len(grid) - 1)]
        atoms: Dict[int, KInvariantLaw] = {}
        for atom in triple.atoms:
            if atom.time > grid[-1] + TIME_TOL:
                continue
            k = grid_index(grid, atom.time)
            if k is None:
                raise GridMismatch(f"fixed jump at t={atom.time:g} is not a path grid point")
            atoms[k] = atom.law
        return intensities, atoms

    def _jump_integral(
        self,
        space: HomogeneousSpace,
        f: TestFunction,
        x: np.ndarray,
        law: KInvariantLaw,
        exclude: float = 0.0,
    ) -> np.ndarray:
        """int [f(x y) - f(x)] law(dy) for every row of x, skipping y within ``exclude`` of o"""
        points, weights = law.points()
        if exclude > 0.0:
            keep = colatitude(points) > exclude
            points, weights = points[keep], weights[keep]
        if not len(weights):
            return np.zeros(x.shape[0])
        # the longitude grid is carried back through the K factor of S(x),
        # so the discrete integral is the same for every section
        frame = space.section(x) @ space.k_element(-space.section_angle(x))
        moved = np.einsum("nab,lb->nla", frame, points)
        return f.at_point(moved) @ weights - weights.sum() * f.at_point(x)

    def _assemble(self, f: TestFunction, ensemble: SpaceEnsemble, increments: np.ndarray, atom_terms: np.ndarray) -> np.ndarray:
        integral = np.concatenate([np.zeros((ensemble.n_paths, 1)), np.cumsum(increments, axis=1)], axis=1)
        return f.at_point(ensemble.points) - integral - np.cumsum(atom_terms, axis=1)

    def compute_MtfX(self, ensemble: SpaceEnsemble, triple: SpaceTriple, f: TestFunction) -> np.ndarray:
        """
        f(x_t) - 1/2 int xi_j xi_k f dA_jk
        - int int [f(x_s y) - f(x_s) - phi_j(y) xi_j f(x_s)] eta(ds, dy)
        - sum_u int [f(x_{u-} y) - f(x_{u-})] nu_u(dy)
        with the drift at o, xi_j f(x) = d/dt f(S(x) exp(t xi_j) o) and
        x y = S(x) y. Returns an (M, K+1) array on the ensemble grid.

        Raises:
            NotKInvariant: If the triple fails K-invariance validation
            GridMismatch: If a fixed jump time is not a grid point
        """
        self._require_k_invariant(triple)
        space, n = triple.space, triple.space.dim
        intensities, atoms = self._grid_inputs(ensemble, triple)
        cov_steps = triple.cov.increments_on(ensemble.grid)
        n_cells = len(ensemble.grid) - 1
        increments = np.zeros((ensemble.n_paths, n_cells))
        for lo in range(0, n_cells, _CELL_BLOCK):
            hi = min(lo + _CELL_BLOCK, n_cells)
            x = ensemble.points[:, lo:hi]
            _, grad, hess = f.derivatives(space.section(x))
            increments[:, lo:hi] = 0.5 * np.einsum("mkij,kij->mk", hess[..., :n, :n], cov_steps[lo:hi])
            for k in range(lo, hi):
                for mass, law in intensities[k]:
                    points, weights = law.points()
                    compensator = weights @ space.coordinates(points)
                    jumps = self._jump_integral(space, f, x[:, k - lo], law)
                    increments[:, k] += mass * (jumps - grad[:, k - lo, :n] @ compensator)
        atom_terms = np.zeros_like(ensemble.points[..., 0])
        for k, law in atoms.items():
            atom_terms[:, k] = self._jump_integral(space, f, ensemble.left_point(k), law)
        return self._assemble(f, ensemble, increments, atom_terms)

    def isotropic_rate(self, triple: SpaceTriple) -> np.ndarray:
        """a(t_k) on the covariance grid, for A(t) = a(t) I"""
        values = triple.cov.values
        n = triple.space.dim
        a = np.trace(values, axis1=1, axis2=2) / n
        residual = float(np.abs(values - a[:, None, None] * np.eye(n)).max(initial=0.0))
        if residual > EXACT_TOL:
            raise NotIrreducible(f"covariance is not a multiple of the identity (residual {residual:.2e})")
        return a

    def compute_Mtf_irreducible(
        self,
        ensemble: SpaceEnsemble,
        triple: SpaceTriple,
        f: TestFunction,
        epsilon: float = 0.0,
    ) -> np.ndarray:
        """
        f(x_t) - int 1/2 sum_j xi_j xi_j f da - int int [f(x_s y) - f(x_s)] eta(ds, dy)
        on an irreducible space, where eta includes the fixed jumps.

        The jump integral is taken over colatitudes above ``epsilon``; with
        finite activity it equals the principal value for every epsilon
        below the smallest charged colatitude.

        Raises:
            NotIrreducible: If the space is not irreducible or A is not a(t) I
            NotKInvariant: If the triple fails K-invariance validation
        """
        space = triple.space
        if not space.irreducible:
            raise NotIrreducible(f"{space!r} is not declared irreducible")
        a = self.isotropic_rate(triple)
        self._require_k_invariant(triple)
        n = space.dim
        intensities, atoms = self._grid_inputs(ensemble, triple)
        a_steps = np.diff(np.interp(ensemble.grid, triple.cov.grid, a))
        n_cells = len(ensemble.grid) - 1
        increments = np.zeros((ensemble.n_paths, n_cells))
        for lo in range(0, n_cells, _CELL_BLOCK):
            hi = min(lo + _CELL_BLOCK, n_cells)
            x = ensemble.points[:, lo:hi]
            _, _, hess = f.derivatives(space.section(x))
            laplacian = np.trace(hess[..., :n, :n], axis1=-2, axis2=-1)
            increments[:, lo:hi] = 0.5 * laplacian * a_steps[lo:hi]
            for k in range(lo, hi):
                for mass, law in intensities[k]:
                    increments[:, k] += mass * self._jump_integral(space, f, x[:, k - lo], law, epsilon)
        atom_terms = np.zeros_like(ensemble.points[..., 0])
        for k, law in atoms.items():
            atom_terms[:, k] = self._jump_integral(space, f, ensemble.left_point(k), law, epsilon)
        return self._assemble(f, ensemble, increments, atom_terms)

    # ========================================================================
    # Direct simulation on X
    # ========================================================================

    def _draw_space_path(self, seed: int, index: int, n_cells: int, dim: int, masses: np.ndarray, laws, atoms) -> _SpaceDraws:
        rng = path_stream(seed, index, purpose=2)
        normals = rng.standard_normal((n_cells, dim))
        counts = rng.poisson(masses) if masses.size else np.zeros((n_cells, 0), dtype=int)
        cells, points = [], []
        for k, p in zip(*np.nonzero(counts)):
            marks = laws[k][p].sample(rng, int(counts[k, p]))
            cells.extend([k + 1] * len(marks))
            points.append(marks)
        fixed = {k: atoms[k].sample(rng, 1)[0] for k in sorted(atoms)}
        return _SpaceDraws(
            normals=normals,
            jump_cells=np.array(cells, dtype=int),
            jump_points=np.concatenate(points) if points else np.zeros((0, 3)),
            fixed=fixed,
        )

    def simulate_on_space(
        self,
        triple: SpaceTriple,
        cfg: SimulationSection,
        start: int = 0,
        count: Optional[int] = None,
    ) -> SpaceEnsemble:
        """
        Euler scheme on X: each step moves x to S(x) exp(w) o with
        w ~ N(0, dA) on p, then applies the Poisson jumps x -> S(x) y of the
        cell and the fixed jump at the cell end.

        Raises:
            NotKInvariant: If the triple fails K-invariance validation
        """
        self._require_k_invariant(triple)
        space, group = triple.space, triple.space.group
        count = cfg.paths - start if count is None else count
        grid = refine_grid(triple.breakpoints(), cfg.horizon, cfg.steps_per_unit)
        n_cells = len(grid) - 1
        intensities = [triple.intensity_on(grid[k], grid[k + 1]) for k in range(n_cells)]
        width = max((len(cell) for cell in intensities), default=0)
        masses = np.zeros((n_cells, width))
        laws: List[List[KInvariantLaw]] = []
        for k, cell in enumerate(intensities):
            laws.append([law for _, law in cell])
            for p, (mass, _) in enumerate(cell):
                masses[k, p] = mass
        atoms = {}
        for atom in triple.atoms:
            k = grid_index(grid, atom.time)
            if k is not None:
                atoms[k] = atom.law
        roots = psd_sqrt(triple.cov.increments_on(grid))

        indices = range(start, start + count)
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            draws = list(pool.map(
                lambda i: self._draw_space_path(cfg.seed, i, n_cells, space.dim, masses, laws, atoms), indices
            ))

        jump_paths = np.concatenate([np.full(len(d.jump_cells), i, dtype=int) for i, d in enumerate(draws)] or [np.zeros(0, dtype=int)])
        jump_cells = np.concatenate([d.jump_cells for d in draws] or [np.zeros(0, dtype=int)])
        jump_points = np.concatenate([d.jump_points for d in draws] or [np.zeros((0, 3))])
        order = np.argsort(jump_cells, kind="stable")
        jump_paths, jump_cells, jump_points = jump_paths[order], jump_cells[order], jump_points[order]
        bounds = np.searchsorted(jump_cells, np.arange(n_cells + 2))
        normals = np.stack([d.normals for d in draws]) if draws else np.zeros((0, n_cells, space.dim))

        points = np.empty((count, n_cells + 1, 3))
        left_points: Dict[int, np.ndarray] = {}
        x = np.tile(space.origin, (count, 1))
        points[:, 0] = x
        for k in range(1, n_cells + 1):
            w = normals[:, k - 1] @ roots[k - 1].T
            x = space.act(x, group.exp(space.embed_p(w)) @ space.origin)
            for j in range(bounds[k], bounds[k + 1]):
                p = jump_paths[j]
                x[p] = space.act(x[p], jump_points[j])
            if k % settings.renormalize_every == 0:
                x = canonicalize(x)
            if k in atoms:
                left_points[k] = x.copy()
                x = space.act(x, np.stack([d.fixed[k] for d in draws]))
            points[:, k] = x
        logger.info(f"Simulated {count} path(s) of '{triple.name}' on S2 over {n_cells} steps")
        return SpaceEnsemble(space=space, grid=grid, points=points, left_points=left_points, seed=cfg.seed)

    # ========================================================================
    # Law comparisons and estimation on X
    # ========================================================================

    def two_sample_compare(
        self,
        first: SpaceEnsemble,
        second: SpaceEnsemble,
        bank: Optional[List[TestFunction]] = None,
        times: Sequence[float] = (0.5, 1.0),
        z_threshold: Optional[float] = None,
    ) -> TwoSampleReport:
        """z-scores of E f(x_t) differences between two ensembles"""
        space = first.space
        bank = bank or make_bank(space.group, origin=space.origin, size=6)
        threshold = z_threshold or settings.z_threshold
        report = TwoSampleReport(z_threshold=threshold)
        for f in bank:
            for t in times:
                fa = f.at_point(first.at(t))
                fb = f.at_point(second.at(t))
                difference = float(fa.mean() - fb.mean())
                stderr = float(np.sqrt(fa.var(ddof=1) / len(fa) + fb.var(ddof=1) / len(fb)))
                z = difference / max(stderr, 1e-12)
                report.entries.append(TwoSampleEntry(
                    f_id=f.name, t=float(t), difference=difference, stderr=stderr, z=z, passed=abs(z) <= threshold
                ))
        status = "✓" if report.passed else "✗"
        logger.info(f"{status} Two-sample comparison: {len(report.entries)} entries, threshold {threshold}")
        return report

    def colatitude_ks(self, ensemble: SpaceEnsemble, t: float, a: float) -> Tuple[float, float]:
        """KS statistic and p-value of the colatitudes at t against the heat kernel"""
        result = stats.kstest(colatitude(ensemble.at(t)), lambda th: heat_kernel_colatitude_cdf(a, th))
        return float(result.statistic), float(result.pvalue)

    def estimate_space_covariance(self, ensemble: SpaceEnsemble, ball: Optional[float] = None) -> SpaceCovarianceEstimate:
        """
        Sum over grid cells of the covariance of phi(S(x_{t_{k-1}})^-1 x_{t_k})
        on p. Increments with colatitude at least ``ball`` are dropped. Fixed
        jumps are not separated out.
        """
        space = ensemble.space
        n_cells = len(ensemble.grid) - 1
        cov = np.zeros((space.dim, space.dim))
        sums = np.zeros((ensemble.n_paths, space.dim))
        for lo in range(0, n_cells, _CELL_BLOCK):
            hi = min(lo + _CELL_BLOCK, n_cells)
            frames = space.section(ensemble.points[:, lo:hi])
            rel = np.einsum("mkba,mkb->mka", frames, ensemble.points[:, lo + 1:hi + 1])
            coords = space.coordinates(rel)
            if ball is not None:
                coords = np.where((colatitude(rel) < ball)[..., None], coords, 0.0)
            centered = coords - coords.mean(axis=0, keepdims=True)
            cov += np.einsum("mki,mkj->ij", centered, centered) / ensemble.n_paths
            sums += coords.sum(axis=1)
        m = ensemble.n_paths
        stderr = sums.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.zeros(space.dim)
        estimate = SpaceCovarianceEstimate(cov=cov, mean_coords=sums.mean(axis=0), stderr=stderr, n_paths=m)
        logger.info(f"Estimated covariance on p from {m} path(s): anisotropy {estimate.anisotropy:.3f}")
        return estimate


# Global service instance
homogeneous_service = HomogeneousService()
