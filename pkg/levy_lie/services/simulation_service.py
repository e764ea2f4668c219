"""
Simulation of inhomogeneous Levy processes by left-increment multiplication.

Every step on (t_{k-1}, t_k] multiplies the state by
exp(sum_j [db_j - int phi_j d eta] xi_j + sum_j w_j xi_j) with w ~ N(0, dA),
then by the Poisson jumps of the cell in draw order, then by the fixed jump
at t_k if t_k is an atom time.
"""
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Union
import logging

import numpy as np

from levy_lie.core.config import settings
from levy_lie.core.exceptions import GridMismatch, InvalidTriple
from levy_lie.core.random import path_stream
from levy_lie.models.group import GroupDescriptor
from levy_lie.models.measure import SpatialLaw, coordinate_means
from levy_lie.models.path import EventKind, PathEnsemble, PathEvent, SamplePath, Scheme
from levy_lie.models.triple import TIME_TOL, DriftPath, DriftTrajectory, ExtendedLevyTriple, Quadruple
from levy_lie.schemas.experiment import SimulationSection
from levy_lie.services.triple_service import triple_service

logger = logging.getLogger(__name__)


@dataclass
class _PathDraws:
    """All random draws of one path"""
    normals: np.ndarray
    jump_cells: np.ndarray
    jump_increments: np.ndarray
    fixed: Dict[int, np.ndarray]


def psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric square roots of a stack of PSD matrices (negative eigenvalues clipped)."""
    sym = (cov + np.swapaxes(cov, -1, -2)) / 2.0
    w, v = np.linalg.eigh(sym)
    return np.einsum("...ij,...j,...kj->...ik", v, np.sqrt(np.clip(w, 0.0, None)), v)


class SimulationService:
    """
    Path generation, the z_t = x_t b_t^-1 split, and fixed-jump surgery.
    """

    # ========================================================================
    # Quadruple engine
    # ========================================================================

    def _draw_path(self, q: Quadruple, seed: int, index: int, masses: np.ndarray) -> _PathDraws:
        rng = path_stream(seed, index)
        n = q.group.matrix_size
        normals = rng.standard_normal((q.n_cells, q.group.dim))
        counts = rng.poisson(masses) if masses.size else np.zeros((q.n_cells, 0), dtype=int)
        cells, increments = [], []
        for k, p in zip(*np.nonzero(counts)):
            law = q.intensities[k][p][1]
            draws = law.sample(rng, int(counts[k, p]))
            cells.extend([k + 1] * len(draws))
            increments.append(draws)
        fixed = {k: q.jump_laws[k].sample(rng, 1)[0] for k in sorted(q.jump_laws)}
        return _PathDraws(
            normals=normals,
            jump_cells=np.array(cells, dtype=int),
            jump_increments=np.concatenate(increments) if increments else np.zeros((0, n, n)),
            fixed=fixed,
        )

    def run_quadruple(
        self,
        q: Quadruple,
        n_paths: int,
        seed: int,
        start: int = 0,
        workers: Optional[int] = None,
    ) -> PathEnsemble:
        """
        Simulate paths ``start .. start + n_paths - 1`` of the process with
        the (b, A, eta, nu) martingale property.

        Args:
            q: Discretized quadruple
            n_paths: Number of paths in this batch
            seed: Experiment seed
            start: Index of the first path (selects the random streams)
            workers: Threads used for the per-path draws

        Returns:
            PathEnsemble on ``q.grid``
        """
        group = q.group
        n = group.matrix_size
        width = max((len(cell) for cell in q.intensities), default=0)
        masses = np.zeros((q.n_cells, width))
        compensator = np.zeros((q.n_cells, group.dim))
        for k, cell in enumerate(q.intensities):
            for p, (mass, law) in enumerate(cell):
                masses[k, p] = mass
                compensator[k] += mass * coordinate_means(law.as_discrete(), group)
        roots = psd_sqrt(q.cov_increments)
        mean_steps = q.drift_increments - compensator

        indices = range(start, start + n_paths)
        with ThreadPoolExecutor(max_workers=workers or settings.sim_workers) as pool:
            draws: List[_PathDraws] = list(pool.map(lambda i: self._draw_path(q, seed, i, masses), indices))

        normals = np.stack([d.normals for d in draws]) if draws else np.zeros((0, q.n_cells, group.dim))
        jump_paths = np.concatenate([np.full(len(d.jump_cells), i, dtype=int) for i, d in enumerate(draws)] or [np.zeros(0, dtype=int)])
        jump_cells = np.concatenate([d.jump_cells for d in draws] or [np.zeros(0, dtype=int)])
        jump_increments = np.concatenate([d.jump_increments for d in draws] or [np.zeros((0, n, n))])
        # stable sort keeps the per-path draw order inside a cell
        order = np.argsort(jump_cells, kind="stable")
        jump_paths, jump_cells, jump_increments = jump_paths[order], jump_cells[order], jump_increments[order]
        bounds = np.searchsorted(jump_cells, np.arange(q.n_cells + 2))

        values = np.empty((n_paths, q.n_cells + 1, n, n))
        left_values: Dict[int, np.ndarray] = {}
        x = group.identity((n_paths,))
        values[:, 0] = x
        for k in range(1, q.n_cells + 1):
            w = mean_steps[k - 1] + normals[:, k - 1] @ roots[k - 1].T
            x = x @ group.exp(w)
            for j in range(bounds[k], bounds[k + 1]):
                p = jump_paths[j]
                x[p] = x[p] @ jump_increments[j]
            if k % settings.renormalize_every == 0:
                x = group.renormalize(x)
            if k in q.jump_laws:
                left_values[k] = x.copy()
                x = x @ np.stack([d.fixed[k] for d in draws])
            values[:, k] = x
        return PathEnsemble(
            group=group,
            grid=q.grid.copy(),
            values=values,
            left_values=left_values,
            jump_paths=jump_paths,
            jump_cells=jump_cells,
            jump_increments=jump_increments,
            seed=seed,
            path_offset=start,
        )

    # ========================================================================
    # Triple-level entry points
    # ========================================================================

    def simulate_paths(
        self,
        triple: ExtendedLevyTriple,
        cfg: SimulationSection,
        start: int = 0,
        count: Optional[int] = None,
        validate: bool = True,
    ) -> PathEnsemble:
        """
        Simulate sample paths of the process represented by ``triple``.

        Args:
            triple: Extended Levy triple
            cfg: Steps per unit time, horizon, path count, seed and scheme
            start: First path index
            count: Number of paths (defaults to cfg.paths - start)
            validate: Validate the triple first

        Returns:
            PathEnsemble whose ``path(i)`` gives the event list of path i

        Raises:
            InvalidTriple: If the triple fails validation
        """
        if validate:
            report = triple_service.validate_extended_triple(triple)
            if not report.valid:
                raise InvalidTriple(f"triple '{triple.name}' is invalid", details=report.messages())
        count = cfg.paths - start if count is None else count
        grid = triple_service.canonical_grid(triple, cfg.horizon, cfg.steps_per_unit)
        if cfg.scheme == Scheme.FINITE_VARIATION:
            q = triple_service.as_quadruple(triple, grid)
            ensemble = self.run_quadruple(q, count, cfg.seed, start, cfg.workers)
        else:
            traj = triple_service.drift_trajectory(triple.drift, triple.group, grid)
            q = triple_service.bar_transform(triple, grid, traj)
            z = self.run_quadruple(q, count, cfg.seed, start, cfg.workers)
            ensemble = self.right_multiply(z, traj.values, traj.left_values)
        ensemble.scheme = Scheme(cfg.scheme)
        logger.info(
            f"Simulated {count} path(s) of '{triple.name}' on {len(grid) - 1} steps "
            f"(scheme={Scheme(cfg.scheme).value}, first index {start})"
        )
        return ensemble

    def iter_ensembles(self, triple: ExtendedLevyTriple, cfg: SimulationSection) -> Iterator[PathEnsemble]:
        """Batches of ``cfg.chunk_size`` paths; path i always uses stream i."""
        for start in range(0, cfg.paths, cfg.chunk_size):
            count = min(cfg.chunk_size, cfg.paths - start)
            yield self.simulate_paths(triple, cfg, start, count, validate=start == 0)

    # ========================================================================
    # Right multiplication and the shifted process
    # ========================================================================

    def right_multiply(self, ensemble: PathEnsemble, factors: np.ndarray, left_factors: np.ndarray) -> PathEnsemble:
        """
        y_t = x_t c_t for a deterministic path c given on the ensemble grid
        (``left_factors`` holds c_{t-}). Poisson increments are conjugated by
        c at the start of their cell.
        """
        group = ensemble.group
        values = ensemble.values @ factors[None]
        left_values = {k: v @ left_factors[k] for k, v in ensemble.left_values.items()}
        if ensemble.jump_cells.size:
            c = factors[ensemble.jump_cells - 1]
            jumps = group.inverse(c) @ ensemble.jump_increments @ c
        else:
            jumps = ensemble.jump_increments
        return PathEnsemble(
            group=group,
            grid=ensemble.grid,
            values=values,
            left_values=left_values,
            jump_paths=ensemble.jump_paths,
            jump_cells=ensemble.jump_cells,
            jump_increments=jumps,
            seed=ensemble.seed,
            scheme=ensemble.scheme,
            path_offset=ensemble.path_offset,
        )

    def split_shifted(
        self,
        paths: Union[PathEnsemble, SamplePath],
        drift: Union[DriftPath, DriftTrajectory],
        group: Optional[GroupDescriptor] = None,
    ) -> Union[PathEnsemble, SamplePath]:
        """
        z_t = x_t b_t^-1, using b_{t-} before the fixed jump at an atom and b_t after.
        """
        single = isinstance(paths, SamplePath)
        ensemble = PathEnsemble.from_paths([paths], group) if single else paths
        group = ensemble.group
        if isinstance(drift, DriftPath):
            traj = triple_service.drift_trajectory(drift, group, ensemble.grid)
        elif drift.grid.shape == ensemble.grid.shape and np.allclose(drift.grid, ensemble.grid, atol=TIME_TOL):
            traj = drift
        else:
            raise GridMismatch("drift trajectory grid differs from the path grid")
        shifted = self.right_multiply(ensemble, group.inverse(traj.values), group.inverse(traj.left_values))
        return shifted.path(0) if single else shifted

    # ========================================================================
    # Fixed-jump surgery
    # ========================================================================

    def remove_fixed_jump(self, path: SamplePath, u: float) -> SamplePath:
        """Delete the fixed jump at u; later values become z_{u-} z_u^-1 z_t."""
        events = [
            e for e in path.events
            if not (e.kind == EventKind.FIXED_JUMP and abs(e.time - u) <= TIME_TOL)
        ]
        return SamplePath(events, path.origin, path.grid)

    def insert_fixed_jump(
        self,
        path: SamplePath,
        u: float,
        law: Union[SpatialLaw, np.ndarray],
        rng: Optional[np.random.Generator] = None,
    ) -> SamplePath:
        """
        Insert a fixed jump at u drawn from ``law`` (or the given increment),
        after every event at times <= u.
        """
        if isinstance(law, np.ndarray) and law.ndim == 2:
            increment = law
        else:
            increment = law.sample(rng or np.random.default_rng(), 1)[0]
        events = list(path.events)
        position = bisect_right([e.time for e in events], u)
        events.insert(position, PathEvent(float(u), EventKind.FIXED_JUMP, increment))
        grid = path.grid
        if u <= grid[-1] and np.min(np.abs(grid - u)) > TIME_TOL:
            grid = np.sort(np.append(grid, u))
        return SamplePath(events, path.origin, grid)


# Global service instance
simulation_service = SimulationService()
