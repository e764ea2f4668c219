"""
Validation and transformation of extended Levy triples.
"""
from typing import List, Optional, Tuple
import logging

import numpy as np

from levy_lie.core.config import settings
from levy_lie.core.exceptions import GridMismatch, NoConvergence
from levy_lie.models.group import GroupDescriptor
from levy_lie.models.measure import (
    DiscreteMeasure,
    SpatialLaw,
    coordinate_means,
    conjugated,
    mean_of_measure,
    transformed,
)
from levy_lie.models.triple import (
    CovMatrixFunction,
    DriftPath,
    DriftTrajectory,
    ExtendedLevyTriple,
    FixedJump,
    FixedJumpAtoms,
    LevyMeasureFunctionC,
    LevyPiece,
    MeasureCell,
    MeasureFunction,
    Quadruple,
    grid_index,
    refine_grid,
)
from levy_lie.schemas.reports import ValidationReport

logger = logging.getLogger(__name__)


class TripleService:
    """
    Operations on extended Levy triples and (b, A, eta, nu) quadruples.
    """

    # ========================================================================
    # Validation
    # ========================================================================

    def validate_extended_triple(self, triple: ExtendedLevyTriple) -> ValidationReport:
        """
        Check every triple invariant.

        Args:
            triple: The triple to check

        Returns:
            ValidationReport, empty iff the triple is a valid extended Levy triple
        """
        report = ValidationReport()
        group = triple.group
        d = group.dim
        self._validate_drift(triple.drift, d, report)
        self._validate_cov(triple.cov, d, report)
        self._validate_levy(triple.levy_c, group, report)
        self._validate_atoms(triple, report)
        if report.violations:
            logger.info(f"Triple '{triple.name}' has {len(report.violations)} violation(s)")
        return report

    def _validate_drift(self, drift: DriftPath, d: int, report: ValidationReport) -> None:
        grid = drift.grid
        if grid.ndim != 1 or grid.size < 1 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            report.add("drift-grid", "drift grid must start at 0 and be strictly increasing")
            return
        if drift.components.shape != (grid.size, d):
            report.add("drift-shape", f"drift components must have shape ({grid.size}, {d})")
            return
        if not np.all(np.isfinite(drift.components)):
            report.add("drift-finite", "drift components contain non-finite values")
        if np.any(np.abs(drift.components[0]) > 1e-12):
            report.add("drift-origin", "drift components must vanish at t=0", "t=0")
        times = drift.atom_times
        if any(t <= 0 for t in times):
            report.add("drift-atom-time", "drift jump times must be positive")
        if any(b <= a for a, b in zip(times, times[1:])):
            report.add("drift-atom-order", "drift jump times must be strictly increasing")

    def _validate_cov(self, cov: CovMatrixFunction, d: int, report: ValidationReport) -> None:
        grid = cov.grid
        if grid.ndim != 1 or grid.size < 1 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            report.add("cov-grid", "covariance grid must start at 0 and be strictly increasing")
            return
        if cov.values.shape != (grid.size, d, d):
            report.add("cov-shape", f"covariance values must have shape ({grid.size}, {d}, {d})")
            return
        if np.any(np.abs(cov.values[0]) > 1e-12):
            report.add("cov-origin", "A(0) must be 0", "t=0")
        asym = np.abs(cov.values - np.swapaxes(cov.values, -1, -2)).max(initial=0.0)
        if asym > 1e-12:
            report.add("cov-symmetric", f"covariance matrices are not symmetric (max asymmetry {asym:.2e})")
        increments = np.diff(cov.values, axis=0)
        for k, inc in enumerate(increments):
            lowest = float(np.linalg.eigvalsh((inc + inc.T) / 2.0).min())
            if lowest < -1e-12:
                report.add(
                    "cov-psd",
                    f"non-PSD increment on [{grid[k]:g}, {grid[k + 1]:g}] (min eigenvalue {lowest:.3g})",
                    f"t={grid[k + 1]:g}",
                )

    def _validate_levy(self, levy_c: LevyMeasureFunctionC, group: GroupDescriptor, report: ValidationReport) -> None:
        for i, piece in enumerate(levy_c.pieces):
            where = f"piece {i}"
            if piece.start < 0 or piece.end <= piece.start:
                report.add("levy-interval", f"piece interval [{piece.start}, {piece.end}) is invalid", where)
            if not np.isfinite(piece.rate) or piece.rate < 0:
                report.add("levy-rate", f"piece rate {piece.rate} must be finite and nonnegative", where)
            law = piece.law.as_discrete()
            if abs(law.total_mass - 1.0) > 1e-9:
                report.add("levy-law-mass", f"piece law has mass {law.total_mass:.12g}, expected 1", where)
            # parametric laws are continuous; only their quadrature nodes can sit at e
            if isinstance(piece.law, DiscreteMeasure) and law.mass_at_identity(group) > 1e-12:
                report.add("levy-law-identity", "piece law charges the identity", where)
            second = law.integrate(lambda x: np.sum(group.coordinates(x) ** 2, axis=-1))
            if not np.isfinite(second):
                report.add("levy-law-moment", "piece law has infinite phi second moment", where)
            residual = group.membership_residual(law.support).max(initial=0.0) if len(law) else 0.0
            if residual > settings.membership_tolerance:
                report.add("levy-law-membership", f"piece law support leaves the group ({residual:.2e})", where)

    def _validate_atoms(self, triple: ExtendedLevyTriple, report: ValidationReport) -> None:
        group = triple.group
        atom_times = triple.atoms.times
        if any(t <= 0 for t in atom_times):
            report.add("atom-time", "fixed jump times must be positive")
        if any(b <= a for a, b in zip(atom_times, atom_times[1:])):
            report.add("atom-order", "fixed jump times must be strictly increasing")
        drift_times = triple.drift.atom_times
        unmatched = sorted(
            {round(t, 12) for t in drift_times} ^ {round(t, 12) for t in atom_times}
        )
        for t in unmatched:
            report.add("atom-time-mismatch", f"drift jumps and fixed jumps disagree at t={t:g}", f"t={t:g}")
        drift_jumps = {round(a.time, 12): a.jump for a in triple.drift.atoms}
        for atom in triple.atoms.atoms:
            where = f"t={atom.time:g}"
            law = atom.law.as_discrete()
            if abs(law.total_mass - 1.0) > 1e-12:
                report.add("atom-mass", f"nu has mass {law.total_mass:.15g} at t={atom.time:g}, expected 1", where)
                continue
            if len(law):
                residual = group.membership_residual(law.support).max()
                if residual > settings.membership_tolerance:
                    report.add("atom-membership", f"nu support leaves the group at t={atom.time:g}", where)
            h = mean_of_measure(law, group)
            jump = drift_jumps.get(round(atom.time, 12))
            if jump is not None and float(group.distance(jump, h)) > 1e-9:
                report.add("drift-jump-mean", f"drift-jump/mean mismatch at t={atom.time:g}", where)

    def validate_quadruple(self, q: Quadruple) -> ValidationReport:
        report = ValidationReport()
        group = q.group
        for k, inc in enumerate(q.cov_increments):
            lowest = float(np.linalg.eigvalsh((inc + inc.T) / 2.0).min())
            if lowest < -1e-12:
                report.add("cov-psd", f"non-PSD increment on cell {k} (min eigenvalue {lowest:.3g})", f"cell {k}")
        for k, cell in enumerate(q.intensities):
            for mass, law in cell:
                discrete = law.as_discrete()
                if mass < 0 or not np.isfinite(mass):
                    report.add("levy-rate", f"negative or non-finite intensity on cell {k}", f"cell {k}")
                if isinstance(law, DiscreteMeasure) and discrete.mass_at_identity(group, tol=1e-10) > 1e-12:
                    report.add("levy-law-identity", f"intensity law charges the identity on cell {k}", f"cell {k}")
        for k, law in q.jump_laws.items():
            total = law.as_discrete().total_mass
            if abs(total - 1.0) > 1e-12:
                report.add("atom-mass", f"nu has mass {total:.15g} at t={q.grid[k]:g}", f"t={q.grid[k]:g}")
        return report

    # ========================================================================
    # Measure functions
    # ========================================================================

    def recompose_measure_function(
        self, levy_c: LevyMeasureFunctionC, atoms: FixedJumpAtoms, group: GroupDescriptor
    ) -> MeasureFunction:
        """eta = eta^c + sum over atoms of nu_u restricted to G - {e}"""
        cells = [MeasureCell(p.start, p.end, p.rate * (p.end - p.start), p.law) for p in levy_c.pieces]
        for atom in atoms.atoms:
            jumps = atom.law.as_discrete().without_identity(group)
            if len(jumps) and jumps.total_mass > 0:
                cells.append(MeasureCell(atom.time, atom.time, jumps.total_mass, jumps.normalized()))
        return MeasureFunction(tuple(cells))

    def decompose_measure_function(
        self, eta: MeasureFunction, group: GroupDescriptor
    ) -> Tuple[LevyMeasureFunctionC, FixedJumpAtoms]:
        """
        Split eta into its continuous part and fixed-jump laws
        nu_u = eta({u} x .) + (1 - eta({u} x G)) delta_e.
        """
        pieces: List[LevyPiece] = []
        instant = {}
        for cell in eta.cells:
            if cell.instantaneous:
                key = round(cell.start, 12)
                measure = cell.law.as_discrete().scaled(cell.mass)
                instant[key] = instant[key].concat(measure) if key in instant else measure
            elif cell.mass > 0:
                pieces.append(LevyPiece(cell.start, cell.end, cell.mass / (cell.end - cell.start), cell.law))
        atoms = [
            FixedJump(t, measure.with_identity_mass(group, 1.0)) for t, measure in sorted(instant.items())
        ]
        return LevyMeasureFunctionC(tuple(pieces)), FixedJumpAtoms(tuple(atoms))

    # ========================================================================
    # Drift components
    # ========================================================================

    def flow_increments(self, group: GroupDescriptor, deltas: np.ndarray) -> np.ndarray:
        """
        exp(sum_j delta_j xi_j) for every row of ``deltas`` by successive
        approximation of g' = g V on [0, 1].
        """
        V = group.hat(np.asarray(deltas, dtype=float))
        n = group.matrix_size
        result = np.broadcast_to(np.eye(n), V.shape).copy()
        term = result.copy()
        for m in range(1, settings.picard_max_iterations + 1):
            term = term @ V / m
            result = result + term
            if np.abs(term).max(initial=0.0) < settings.picard_tolerance:
                return result
        raise NoConvergence(
            f"drift flow did not converge in {settings.picard_max_iterations} iterations",
            details={"max_step_norm": float(np.linalg.norm(deltas, axis=-1).max())},
        )

    def components_to_drift_path(
        self, group: GroupDescriptor, grid: np.ndarray, components: np.ndarray
    ) -> np.ndarray:
        """
        The continuous path with the given components, values on ``grid``.

        Raises:
            NoConvergence: If a step does not converge
        """
        steps = self.flow_increments(group, np.diff(np.asarray(components, dtype=float), axis=0))
        return self._accumulate(group, steps)

    def _accumulate(self, group: GroupDescriptor, steps: np.ndarray, jumps: Optional[dict] = None):
        n = group.matrix_size
        values = np.empty((steps.shape[0] + 1, n, n))
        left = np.empty_like(values)
        b = np.eye(n)
        values[0] = left[0] = b
        for k in range(1, steps.shape[0] + 1):
            b = b @ steps[k - 1]
            if k % settings.renormalize_every == 0:
                b = group.renormalize(b)
            left[k] = b
            if jumps and k in jumps:
                b = b @ jumps[k]
            values[k] = b
        return (values, left) if jumps is not None else values

    def drift_path_to_components(
        self, group: GroupDescriptor, grid: np.ndarray, values: np.ndarray
    ) -> np.ndarray:
        """
        Components b_j(t_k) of a continuous path from its grid values.

        Raises:
            OutOfChart: If a step increment leaves the chart
        """
        values = np.asarray(values, dtype=float)
        rel = group.inverse(values[:-1]) @ values[1:]
        steps = group.log(rel, strict=True)
        return np.concatenate([np.zeros((1, group.dim)), np.cumsum(steps, axis=0)])

    def inverse_path_components(
        self, group: GroupDescriptor, grid: np.ndarray, components: np.ndarray
    ) -> np.ndarray:
        """Components of b_t^-1: d beta = -Ad(b) db, exact for piecewise-linear b_j."""
        components = np.asarray(components, dtype=float)
        values = self.components_to_drift_path(group, grid, components)
        deltas = np.diff(components, axis=0)
        beta_steps = -np.einsum("kij,kj->ki", group.adjoint(values[:-1]), deltas)
        return np.concatenate([np.zeros((1, group.dim)), np.cumsum(beta_steps, axis=0)])

    def drift_trajectory(self, drift: DriftPath, group: GroupDescriptor, grid: np.ndarray) -> DriftTrajectory:
        """
        Evaluate the extended drift on ``grid``; every atom up to the grid end
        must be a grid point.

        Raises:
            GridMismatch: If an atom time is not on the grid
        """
        grid = np.asarray(grid, dtype=float)
        jumps = {}
        for atom in drift.atoms:
            if atom.time > grid[-1] + 1e-12:
                continue
            k = grid_index(grid, atom.time)
            if k is None:
                raise GridMismatch(f"drift jump at t={atom.time:g} is not a grid point")
            jumps[k] = np.asarray(atom.jump, dtype=float)
        steps = self.flow_increments(group, np.diff(drift.components_at(grid), axis=0))
        values, left = self._accumulate(group, steps, jumps)
        return DriftTrajectory(grid, values, left)

    # ========================================================================
    # Quadruples
    # ========================================================================

    def canonical_grid(self, triple: ExtendedLevyTriple, horizon: float, steps_per_unit: int) -> np.ndarray:
        return refine_grid(triple.breakpoints(), horizon, steps_per_unit)

    def _atom_laws(self, atoms: FixedJumpAtoms, grid: np.ndarray) -> dict:
        laws = {}
        for atom in atoms.atoms:
            if atom.time > grid[-1] + 1e-12:
                continue
            k = grid_index(grid, atom.time)
            if k is None:
                raise GridMismatch(f"fixed jump at t={atom.time:g} is not a grid point")
            laws[k] = atom.law
        return laws

    def as_quadruple(self, triple: ExtendedLevyTriple, grid: np.ndarray) -> Quadruple:
        """(b^c, A, eta^c, nu) of the triple itself, the finite-variation form."""
        grid = np.asarray(grid, dtype=float)
        return Quadruple(
            group=triple.group,
            grid=grid,
            drift_increments=np.diff(triple.drift.components_at(grid), axis=0),
            cov_increments=triple.cov.increments_on(grid),
            intensities=[triple.levy_c.intensity_on(a, b) for a, b in zip(grid[:-1], grid[1:])],
            jump_laws=self._atom_laws(triple.atoms, grid),
        )

    def _phi_integral(self, group: GroupDescriptor, law: SpatialLaw) -> np.ndarray:
        return coordinate_means(law.as_discrete(), group)

    def bar_transform(
        self,
        triple: ExtendedLevyTriple,
        grid: np.ndarray,
        trajectory: Optional[DriftTrajectory] = None,
    ) -> Quadruple:
        """
        Quadruple (b-bar, A-bar, eta-bar, nu-bar) of z_t = x_t b_t^-1 on ``grid``,
        with b evaluated at the left end of every cell.
        """
        group = triple.group
        grid = np.asarray(grid, dtype=float)
        traj = trajectory or self.drift_trajectory(triple.drift, group, grid)
        base = self.as_quadruple(triple, grid)
        ads = group.adjoint(traj.values[:-1])
        cov = np.einsum("kip,kpq,kjq->kij", ads, base.cov_increments, ads)
        drift = np.zeros_like(base.drift_increments)
        intensities = []
        for k, cell in enumerate(base.intensities):
            b = traj.values[k]
            moved = []
            for mass, law in cell:
                image = conjugated(law, group, b)
                drift[k] += mass * (self._phi_integral(group, image) - ads[k] @ self._phi_integral(group, law))
                moved.append((mass, image))
            intensities.append(moved)
        jump_laws = {
            k: transformed(law, traj.left_values[k], group.inverse(traj.values[k]))
            for k, law in base.jump_laws.items()
        }
        return Quadruple(group, grid, drift, cov, intensities, jump_laws)

    def transform_quadruple_by_drift(self, q: Quadruple, u_components: np.ndarray) -> Quadruple:
        """
        Quadruple of z_t u_t for a continuous finite-variation drift u with
        components ``u_components`` on ``q.grid``.
        """
        group = q.group
        u_components = np.asarray(u_components, dtype=float)
        u_values = self.components_to_drift_path(group, q.grid, u_components)
        u_inv = group.inverse(u_values)
        ads = group.adjoint(u_inv[:-1])
        cov = np.einsum("kip,kpq,kjq->kij", ads, q.cov_increments, ads)
        drift = np.einsum("kij,kj->ki", ads, q.drift_increments) + np.diff(u_components, axis=0)
        intensities = []
        for k, cell in enumerate(q.intensities):
            moved = []
            for mass, law in cell:
                image = conjugated(law, group, u_inv[k])
                drift[k] += mass * (self._phi_integral(group, image) - ads[k] @ self._phi_integral(group, law))
                moved.append((mass, image))
            intensities.append(moved)
        jump_laws = {k: conjugated(law, group, u_inv[k]) for k, law in q.jump_laws.items()}
        return Quadruple(group, q.grid, drift, cov, intensities, jump_laws)

    def atom_means(self, triple: ExtendedLevyTriple) -> List[Tuple[float, np.ndarray]]:
        return [(a.time, mean_of_measure(a.law.as_discrete(), triple.group)) for a in triple.atoms.atoms]


# Global service instance
triple_service = TripleService()
