"""
Recovery of an extended Levy triple from a path ensemble.

Every level n is a coarsening of the simulation grid with mesh close to
``meshes[n]`` that always contains 0, T and the declared candidate times J.
The empirical increment laws of a level are kept as their phi-coordinates and
log radii; raw increments are rebuilt from the ensemble only for the cells
and paths that need them.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Union
import logging

import numpy as np

from levy_lie.core.config import settings
from levy_lie.core.exceptions import FRejected
from levy_lie.models.group import GroupDescriptor
from levy_lie.models.measure import DiscreteMeasure, mean_of_measure
from levy_lie.models.path import PathEnsemble
from levy_lie.models.triple import (
    CovMatrixFunction,
    DriftAtom,
    DriftPath,
    DriftTrajectory,
    ExtendedLevyTriple,
    FixedJump,
    FixedJumpAtoms,
    LevyMeasureFunctionC,
    LevyPiece,
    TIME_TOL,
)
from levy_lie.schemas.experiment import EstimationSection
from levy_lie.schemas.reports import DetectedAtom, EstimationDiagnostics, ModulusTable

logger = logging.getLogger(__name__)

# cells processed per vectorized batch
_CELL_BATCH = 64

# A ball argument is a radius (open log-radius ball) or a weight function on G
BallSpec = Union[None, float, Callable[[np.ndarray], np.ndarray]]


@dataclass
class IncrementLaws:
    """
    The empirical laws mu_ni of x_{t_{n,i-1}}^-1 x_{t_ni} over one level grid.

    ``coords[m, i]`` is phi(x_ni) of path m and ``radius[m, i]`` its log
    radius. Indexing returns the law of one cell as a DiscreteMeasure.
    """
    ensemble: PathEnsemble
    indices: np.ndarray
    coords: np.ndarray
    radius: np.ndarray

    @property
    def group(self) -> GroupDescriptor:
        return self.ensemble.group

    @property
    def times(self) -> np.ndarray:
        return self.ensemble.grid[self.indices]

    @property
    def n_cells(self) -> int:
        return len(self.indices) - 1

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.times))) if self.n_cells else 0.0

    @property
    def n_paths(self) -> int:
        return self.coords.shape[0]

    def __len__(self):
        return self.n_cells

    def __getitem__(self, i: int) -> DiscreteMeasure:
        return DiscreteMeasure.empirical(self.increments(i))

    def increments(self, i: int, paths: Optional[np.ndarray] = None) -> np.ndarray:
        """Raw increments of cell i, for all paths or the given ones"""
        a, b = self.indices[i], self.indices[i + 1]
        values = self.ensemble.values
        rows = slice(None) if paths is None else paths
        return self.group.inverse(values[rows, a]) @ values[rows, b]

    @property
    def means(self) -> np.ndarray:
        """mu_ni(phi_j), shape (K, d)"""
        return self.coords.mean(axis=0)

    def mean_elements(self) -> np.ndarray:
        """b_ni = exp(sum_j mu_ni(phi_j) xi_j)"""
        return self.group.exp(self.means)

    def cell_of(self, sim_index: int) -> int:
        """Level cell (t_{i-1}, t_i] containing simulation step ``sim_index``"""
        return int(np.searchsorted(self.indices, sim_index, side="left") - 1)


@dataclass
class DetectedFixedJump:
    time: float
    sim_index: int
    probability: float
    law: DiscreteMeasure


@dataclass
class EmpiricalTriple:
    """Per-level empirical measure functions and the extracted triple"""
    group: GroupDescriptor
    levels: List[IncrementLaws]
    cov_levels: List[np.ndarray]
    drift_levels: List[DriftTrajectory]
    atoms_est: List[DetectedFixedJump]
    cov_est: CovMatrixFunction
    drift_est: DriftPath
    levy_c_est: LevyMeasureFunctionC
    diagnostics: EstimationDiagnostics
    jump_floor: float = 0.0

    @property
    def finest(self) -> IncrementLaws:
        return self.levels[-1]

    def as_triple(self, name: str = "estimated") -> ExtendedLevyTriple:
        atoms = FixedJumpAtoms(tuple(FixedJump(a.time, a.law) for a in self.atoms_est))
        return ExtendedLevyTriple(self.group, self.drift_est, self.cov_est, self.levy_c_est, atoms, name)


class EstimationService:
    """
    Partition estimators of (eta, A, b) and fixed-jump detection.
    """

    # ========================================================================
    # Level grids and empirical increment laws
    # ========================================================================

    def level_indices(self, grid: np.ndarray, mesh: float, candidates: Sequence[float] = ()) -> np.ndarray:
        """Simulation-grid indices of the level with the given mesh, J and {0, T} included."""
        horizon = float(grid[-1])
        targets = np.append(np.arange(0.0, horizon, mesh), horizon)
        picked = np.abs(grid[None, :] - targets[:, None]).argmin(axis=1)
        extra = [int(np.abs(grid - u).argmin()) for u in candidates if 0.0 < u <= horizon + TIME_TOL]
        return np.unique(np.concatenate([picked, extra, [0, len(grid) - 1]]).astype(int))

    def empirical_increment_laws(self, ensemble: PathEnsemble, indices: np.ndarray) -> IncrementLaws:
        """
        Empirical laws of the increments over the level grid ``grid[indices]``.

        Args:
            ensemble: Path ensemble (at least one path)
            indices: Increasing simulation-grid indices starting at 0

        Returns:
            IncrementLaws with M atoms per cell
        """
        group = ensemble.group
        indices = np.asarray(indices, dtype=int)
        M, K = ensemble.n_paths, len(indices) - 1
        coords = np.empty((M, K, group.dim))
        radius = np.empty((M, K))
        for lo in range(0, K, _CELL_BATCH):
            hi = min(lo + _CELL_BATCH, K)
            left = ensemble.values[:, indices[lo:hi]]
            right = ensemble.values[:, indices[lo + 1:hi + 1]]
            inc = group.inverse(left) @ right
            coords[:, lo:hi] = group.coordinates(inc)
            radius[:, lo:hi] = group.log_radius(inc)
        return IncrementLaws(ensemble, indices, coords, radius)

    # ========================================================================
    # eta_n, A_n, q_n
    # ========================================================================

    def check_vanishes_near_identity(self, group: GroupDescriptor, f: Callable[[np.ndarray], np.ndarray]) -> None:
        """
        Raises:
            FRejected: If f is nonzero somewhere on the r_in ball
        """
        directions = np.concatenate([np.eye(group.dim), -np.eye(group.dim), np.ones((1, group.dim))])
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = np.linspace(0.0, 0.999 * group.bump_inner, 6)
        samples = group.exp((radii[:, None, None] * directions[None]).reshape(-1, group.dim))
        worst = float(np.abs(np.asarray(f(samples), dtype=float)).max())
        if worst > 1e-12:
            raise FRejected(
                f"test function is {worst:.3g} inside the r_in={group.bump_inner} ball around e",
                details={"max_abs_value": worst},
            )

    def eta_n(self, laws: IncrementLaws, t: float, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """
        eta_n(t, f) = sum over cells with t_ni <= t of mu_ni(f).

        Raises:
            FRejected: If f does not vanish near e
        """
        group = laws.group
        self.check_vanishes_near_identity(group, f)
        last = int(np.searchsorted(laws.times, t + TIME_TOL, side="right")) - 1
        total = 0.0
        for i in range(max(last, 0)):
            # f vanishes on the r_in ball, so only larger increments contribute
            paths = np.flatnonzero(laws.radius[:, i] >= group.bump_inner * (1.0 - 1e-9))
            if paths.size:
                total += float(np.sum(f(laws.increments(i, paths))))
        return total / laws.n_paths

    def _centered_coords(self, laws: IncrementLaws) -> np.ndarray:
        """phi(increment) - phi(b_ni) for every path and cell"""
        centers = laws.group.coordinates(laws.mean_elements())
        return laws.coords - centers[None]

    def cell_covariances(self, laws: IncrementLaws, ball: BallSpec = None) -> np.ndarray:
        """
        Per-cell terms of A_n:
        integral over B of [phi_j - phi_j(b_ni)][phi_k - phi_k(b_ni)] d mu_ni.
        """
        centered = self._centered_coords(laws)
        if ball is None:
            weights = np.ones(laws.radius.shape)
        elif callable(ball):
            weights = np.stack([np.asarray(ball(laws.increments(i)), dtype=float) for i in range(laws.n_cells)], axis=1)
        else:
            weights = (laws.radius < float(ball)).astype(float)
        return np.einsum("mk,mki,mkj->kij", weights, centered, centered) / laws.n_paths

    def A_n_function(self, laws: IncrementLaws, ball: BallSpec = None) -> np.ndarray:
        """A_n(t_ni, B) at every level time, shape (K+1, d, d)"""
        cells = self.cell_covariances(laws, ball)
        d = laws.group.dim
        return np.concatenate([np.zeros((1, d, d)), np.cumsum(cells, axis=0)])

    def A_n(self, laws: IncrementLaws, t: float, ball: BallSpec = None) -> np.ndarray:
        values = self.A_n_function(laws, ball)
        k = int(np.searchsorted(laws.times, t + TIME_TOL, side="right")) - 1
        return values[max(k, 0)]

    def q_n(self, laws: IncrementLaws, t: float, ball: BallSpec = None) -> float:
        return float(np.trace(self.A_n(laws, t, ball)))

    # ========================================================================
    # Drift
    # ========================================================================

    def b_n_path(self, laws: IncrementLaws, diagnostics: Optional[EstimationDiagnostics] = None) -> DriftTrajectory:
        """
        Step path b^n_t = b_n1 ... b_ni on the level grid. Cells whose mean
        leaves the chart are logged and recorded in ``diagnostics``.
        """
        group = laws.group
        means = laws.means
        steps = group.exp(means)
        off = np.flatnonzero(np.abs(group.coordinates(steps) - means).max(axis=-1) > 1e-8)
        if off.size:
            logger.warning(f"{off.size} cell mean(s) outside the chart at mesh {laws.mesh:g}")
            if diagnostics is not None:
                diagnostics.out_of_chart_cells.extend(float(laws.times[i + 1]) for i in off)
        values = np.empty((laws.n_cells + 1,) + steps.shape[1:])
        b = group.identity()
        values[0] = b
        for i in range(laws.n_cells):
            b = b @ steps[i]
            if (i + 1) % settings.renormalize_every == 0:
                b = group.renormalize(b)
            values[i + 1] = b
        return DriftTrajectory(laws.times.copy(), values, values.copy())

    def drift_limit(self, laws: IncrementLaws, atoms: Sequence[DetectedFixedJump]) -> DriftPath:
        """
        Continuous drift components from the finest level's cell means, plus
        jump atoms h_u = mean of nu-hat_u at the detected times.
        """
        group = laws.group
        steps = laws.means.copy()
        drift_atoms = []
        for atom in atoms:
            cell = laws.cell_of(atom.sim_index)
            h = mean_of_measure(atom.law, group)
            steps[cell] = steps[cell] - group.coordinates(h)
            drift_atoms.append(DriftAtom(atom.time, h))
        components = np.concatenate([np.zeros((1, group.dim)), np.cumsum(steps, axis=0)])
        return DriftPath(laws.times.copy(), components, tuple(drift_atoms))

    # ========================================================================
    # Fixed jumps
    # ========================================================================

    def jump_floor(self, mesh: float) -> float:
        return settings.jump_floor_factor * float(np.sqrt(mesh))

    def detect_fixed_jumps(
        self,
        levels: Sequence[IncrementLaws],
        threshold: Optional[float] = None,
    ) -> List[DetectedFixedJump]:
        """
        Times whose cell keeps a jump probability >= threshold on every level.

        The jump floor of the finest level separates jumps from diffusion. A
        cell flagged on the finest level is kept only if its enclosing cell is
        flagged on every coarser level; it is then refined to the simulation
        step with the largest jump fraction.
        """
        threshold = settings.detection_threshold if threshold is None else threshold
        finest = levels[-1]
        floor = self.jump_floor(finest.mesh)
        flagged = [np.mean(lv.radius > self.jump_floor(lv.mesh), axis=0) >= threshold for lv in levels]
        ensemble = finest.ensemble
        group = finest.group
        found: Dict[int, DetectedFixedJump] = {}
        for i in np.flatnonzero(flagged[-1]):
            a, b = int(finest.indices[i]), int(finest.indices[i + 1])
            if not all(flagged[n][lv.cell_of(b)] for n, lv in enumerate(levels[:-1])):
                logger.info(f"Cell ending at t={finest.times[i + 1]:g} flagged on the finest level only")
                continue
            fractions, increments = [], []
            for s in range(a + 1, b + 1):
                inc = group.inverse(ensemble.values[:, s - 1]) @ ensemble.values[:, s]
                increments.append(inc)
                fractions.append(float(np.mean(group.log_radius(inc) > floor)))
            best = int(np.argmax(fractions))
            sim_index = a + 1 + best
            inc = increments[best]
            jumps = inc[group.log_radius(inc) > floor]
            law = DiscreteMeasure(jumps, np.full(len(jumps), 1.0 / ensemble.n_paths))
            found[sim_index] = DetectedFixedJump(
                time=float(ensemble.grid[sim_index]),
                sim_index=sim_index,
                probability=fractions[best],
                law=law.with_identity_mass(group, 1.0),
            )
        atoms = [found[k] for k in sorted(found)]
        logger.info(f"Detected {len(atoms)} fixed jump(s) at threshold {threshold:g}")
        return atoms

    # ========================================================================
    # Continuous part of the Levy measure function
    # ========================================================================

    def _atom_cells(self, laws: IncrementLaws, atoms: Sequence[DetectedFixedJump]) -> np.ndarray:
        mask = np.zeros(laws.n_cells, dtype=bool)
        for atom in atoms:
            mask[laws.cell_of(atom.sim_index)] = True
        return mask

    def estimate_levy_c(
        self,
        laws: IncrementLaws,
        atoms: Sequence[DetectedFixedJump],
        windows: Optional[int] = None,
    ) -> LevyMeasureFunctionC:
        """
        eta-hat^c as piecewise-constant rates over ``windows`` equal time
        pieces, built from the increments above the jump floor in cells
        without a detected fixed jump.
        """
        windows = windows or settings.levy_windows
        group = laws.group
        floor = self.jump_floor(laws.mesh)
        skip = self._atom_cells(laws, atoms)
        edges = np.linspace(0.0, float(laws.times[-1]), windows + 1)
        rng = np.random.default_rng(laws.ensemble.seed)
        pieces = []
        for start, end in zip(edges[:-1], edges[1:]):
            collected = []
            for i in range(laws.n_cells):
                t = laws.times[i + 1]
                if skip[i] or not (start < t <= end + TIME_TOL):
                    continue
                paths = np.flatnonzero(laws.radius[:, i] > floor)
                if paths.size:
                    collected.append(laws.increments(i, paths))
            if not collected:
                continue
            jumps = np.concatenate(collected)
            rate = len(jumps) / (laws.n_paths * (end - start))
            if len(jumps) > settings.max_law_support:
                jumps = jumps[rng.choice(len(jumps), settings.max_law_support, replace=False)]
            pieces.append(LevyPiece(float(start), float(end), rate, DiscreteMeasure.empirical(jumps)))
        return LevyMeasureFunctionC(tuple(pieces))

    # ========================================================================
    # Covariance
    # ========================================================================

    def _fill_atom_cells(self, cells: np.ndarray, lengths: np.ndarray, skip: np.ndarray, span: int = 2) -> np.ndarray:
        """
        Replace the cells carrying a fixed jump by the rate of the nearest
        ``span`` jump-free cells on each side, averaged over the two sides.
        """
        keep = np.flatnonzero(~skip)
        if not len(keep):
            return cells
        cells = cells.copy()
        for k in np.flatnonzero(skip):
            rates = []
            for side in (keep[keep < k][-span:], keep[keep > k][:span]):
                if len(side):
                    rates.append(cells[side].sum(axis=0) / lengths[side].sum())
            cells[k] = lengths[k] * np.mean(rates, axis=0)
        return cells

    def extract_covariance(
        self,
        laws: IncrementLaws,
        atoms: Sequence[DetectedFixedJump],
        fractions: Optional[Sequence[float]] = None,
        diagnostics: Optional[EstimationDiagnostics] = None,
    ) -> CovMatrixFunction:
        """
        A(t) from A_n(t, U_p) on shrinking balls U_p of radius
        fraction * r_in, with the fixed-jump cells and the jumps between the
        floor and the ball radius removed, extrapolated linearly to radius 0.
        """
        fractions = list(fractions or settings.ball_fractions)
        group = laws.group
        d = group.dim
        floor = self.jump_floor(laws.mesh)
        skip = self._atom_cells(laws, atoms)
        radii = np.array(fractions) * group.bump_inner
        centered = self._centered_coords(laws)
        per_radius = []
        for rho in radii:
            cells = self.cell_covariances(laws, float(rho))
            ring = (laws.radius > floor) & (laws.radius < rho)
            if np.any(ring):
                cells = cells - np.einsum("mk,mki,mkj->kij", ring.astype(float), centered, centered) / laws.n_paths
            per_radius.append(cells)
        per_radius = np.stack(per_radius)
        if len(radii) > 1:
            flat = per_radius.reshape(len(radii), -1)
            slope, intercept = np.polyfit(radii, flat, 1)
            cells = intercept.reshape(per_radius.shape[1:])
        else:
            cells = per_radius[0]

        cells = self._fill_atom_cells(cells, np.diff(laws.times), skip)

        cells = (cells + np.swapaxes(cells, -1, -2)) / 2.0
        w, v = np.linalg.eigh(cells)
        clipped = int(np.count_nonzero(w.min(axis=-1) < 0))
        cells = np.einsum("kij,kj,klj->kil", v, np.clip(w, 0.0, None), v)

        if diagnostics is not None:
            diagnostics.clipped_increments = clipped
            traces = np.trace(per_radius.sum(axis=1), axis1=-2, axis2=-1)
            if len(radii) >= 3:
                curvature = float(np.polyfit(radii, traces, 2)[0])
                fitted = np.polyval(np.polyfit(radii, traces, 1), radii)
                scale = max(float(np.abs(traces).max()), 1e-12)
                diagnostics.extrapolation_curvature = curvature
                diagnostics.extrapolation_nonlinear = bool(np.abs(traces - fitted).max() > 0.05 * scale)
                if diagnostics.extrapolation_nonlinear:
                    logger.warning(f"Covariance extrapolation trend is non-linear (curvature {curvature:.3g})")
        values = np.concatenate([np.zeros((1, d, d)), np.cumsum(cells, axis=0)])
        return CovMatrixFunction(laws.times.copy(), values)

    # ========================================================================
    # Conditions (A) and (B)
    # ========================================================================

    def conditions_AB_diagnostics(
        self,
        laws: IncrementLaws,
        b_path: DriftTrajectory,
        atoms: Sequence[DetectedFixedJump] = (),
        windows: Optional[Sequence[float]] = None,
    ) -> ModulusTable:
        """
        Moduli of continuity of q_n(., G) and b^n over windows of width delta,
        ignoring windows that contain a detected fixed jump.
        """
        windows = sorted(windows or settings.modulus_windows, reverse=True)
        group = laws.group
        q = np.concatenate([[0.0], np.cumsum(np.trace(self.cell_covariances(laws), axis1=-2, axis2=-1))])
        skip = self._atom_cells(laws, atoms)
        blocked = np.concatenate([[0], np.cumsum(skip)])
        q_mod, b_mod = [], []
        for delta in windows:
            span = max(int(np.ceil(delta / max(laws.mesh, TIME_TOL))), 1)
            q_best, b_best = 0.0, 0.0
            for s in range(0, laws.n_cells):
                t = min(s + span, laws.n_cells)
                if blocked[t] - blocked[s] > 0:
                    continue
                q_best = max(q_best, float(q[t] - q[s]))
                dist = group.distance(b_path.values[s], b_path.values[s + 1:t + 1])
                b_best = max(b_best, float(np.max(dist)))
            q_mod.append(q_best)
            b_mod.append(b_best)
        return ModulusTable(windows=list(windows), q_modulus=q_mod, b_modulus=b_mod)

    # ========================================================================
    # Orchestration
    # ========================================================================

    def estimate_triple(self, ensemble: PathEnsemble, cfg: Optional[EstimationSection] = None) -> EmpiricalTriple:
        """
        Run every estimator on ``ensemble``.

        Args:
            ensemble: Simulated (or loaded) path ensemble
            cfg: Meshes, detection threshold, ball fractions and candidate times

        Returns:
            EmpiricalTriple with per-level statistics and the extracted triple
        """
        cfg = cfg or EstimationSection()
        diagnostics = EstimationDiagnostics(meshes=list(cfg.meshes))
        levels = []
        for mesh in cfg.meshes:
            indices = self.level_indices(ensemble.grid, mesh, cfg.candidate_times)
            levels.append(self.empirical_increment_laws(ensemble, indices))
            logger.info(f"Level mesh={mesh:g}: {len(indices) - 1} cells over {ensemble.n_paths} paths")
        finest = levels[-1]
        atoms = self.detect_fixed_jumps(levels, cfg.threshold)
        diagnostics.detected_atoms = [
            DetectedAtom(time=a.time, probability=a.probability, support_size=len(a.law)) for a in atoms
        ]
        drift_levels = [self.b_n_path(lv, diagnostics if lv is finest else None) for lv in levels]
        cov_levels = [self.A_n_function(lv) for lv in levels]
        cov_est = self.extract_covariance(finest, atoms, cfg.ball_fractions, diagnostics)
        levy_c = self.estimate_levy_c(finest, atoms)
        drift_est = self.drift_limit(finest, atoms)
        diagnostics.moduli = self.conditions_AB_diagnostics(finest, drift_levels[-1], atoms)
        logger.info(
            f"Estimated triple: trace A(T)={np.trace(cov_est.values[-1]):.4g}, "
            f"{len(levy_c.pieces)} eta^c piece(s), {len(atoms)} atom(s)"
        )
        return EmpiricalTriple(
            group=ensemble.group,
            levels=levels,
            cov_levels=cov_levels,
            drift_levels=drift_levels,
            atoms_est=atoms,
            cov_est=cov_est,
            drift_est=drift_est,
            levy_c_est=levy_c,
            diagnostics=diagnostics,
            jump_floor=self.jump_floor(finest.mesh),
        )


# Global service instance
estimation_service = EstimationService()
