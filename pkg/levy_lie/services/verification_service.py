"""
Monte-Carlo checks of the martingale property that represents a process by
its extended Levy triple.

Every functional is evaluated on a whole ensemble at once and returned as an
(M, K+1) array on the ensemble grid. Integrals in time are left-endpoint
Riemann sums over the grid cells, and the fixed-jump term at an atom u uses
the value just before the jump.
"""
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from levy_lie.core.config import settings
from levy_lie.core.exceptions import ConfigError, GridMismatch, InvalidTriple
from levy_lie.models.group import EuclideanGroup, GroupDescriptor
from levy_lie.models.measure import DiscreteMeasure, total_variation
from levy_lie.models.path import PathEnsemble, SamplePath
from levy_lie.models.test_function import TestFunction, make_bank
from levy_lie.models.triple import TIME_TOL, ExtendedLevyTriple, Quadruple, grid_index
from levy_lie.schemas.experiment import MartingaleForm, VerificationSection
from levy_lie.schemas.reports import (
    CharacteristicFunctionReport,
    FixedJumpLawEntry,
    FixedJumpLawReport,
    MartingaleEntry,
    MartingaleReport,
    RoundTripReport,
)
from levy_lie.services.simulation_service import simulation_service
from levy_lie.services.triple_service import triple_service

logger = logging.getLogger(__name__)

Paths = Union[PathEnsemble, SamplePath]


@dataclass(frozen=True)
class Conditioner:
    """Bounded functional h of the path on [0, s]"""
    name: str
    fn: Callable[[PathEnsemble, float], np.ndarray]

    def __call__(self, ensemble: PathEnsemble, s: float) -> np.ndarray:
        return self.fn(ensemble, s)


def _phi_at(j: int, t_scale: float = 1.0, wrap: Optional[Callable] = None) -> Callable:
    def fn(ensemble: PathEnsemble, s: float) -> np.ndarray:
        x = ensemble.values[:, ensemble.index_of(s * t_scale)]
        value = ensemble.group.coordinates(x)[:, j]
        return wrap(value) if wrap else value
    return fn


def _cos_norm_half(ensemble: PathEnsemble, s: float) -> np.ndarray:
    x = ensemble.values[:, ensemble.index_of(s / 2.0)]
    return np.cos(np.linalg.norm(ensemble.group.coordinates(x), axis=-1))


def make_conditioners(group: GroupDescriptor, size: int = 5) -> List[Conditioner]:
    """
    1, phi_j(x_s) for the first min(d, 3) coordinates, sin and cos of
    phi_1(x_s) as fillers, and cos |phi(x_{s/2})|.
    """
    bank = [Conditioner("one", lambda ens, s: np.ones(ens.n_paths))]
    bank += [Conditioner(f"phi-{j}", _phi_at(j)) for j in range(min(group.dim, 3))]
    fillers = [Conditioner("sin-phi-0", _phi_at(0, wrap=np.sin)), Conditioner("cos-phi-0", _phi_at(0, wrap=np.cos))]
    while len(bank) < size - 1 and fillers:
        bank.append(fillers.pop(0))
    bank.append(Conditioner("cos-norm-half", _cos_norm_half))
    return bank[:size]


def ramp_function(group: GroupDescriptor, width: float) -> Callable[[np.ndarray], np.ndarray]:
    """0 on the r_in ball, rising smoothly to 1 at radius r_in + width"""
    def fn(x: np.ndarray) -> np.ndarray:
        s = (group.log_radius(x) - group.bump_inner) / width
        inside = (s > 0.0) & (s < 1.0)
        safe = np.where(inside, s, 0.0)
        ramp = np.where(inside, 1.0 - np.exp(1.0 - 1.0 / (1.0 - safe ** 2)), 0.0)
        return np.where(s >= 1.0, 1.0, ramp)
    return fn


def default_pairs(horizon: float, atom_times: Sequence[float] = ()) -> List[Tuple[float, float]]:
    """(0, T/2), (T/4, 3T/4), (T/2, T) and (u - 0.1, u + 0.1) around every atom u <= T, clipped to [0, T]."""
    pairs = [(0.0, horizon / 2.0), (horizon / 4.0, 3.0 * horizon / 4.0), (horizon / 2.0, horizon)]
    for u in atom_times:
        if 0.0 < u <= horizon:
            pairs.append((max(u - 0.1, 0.0), min(u + 0.1, horizon)))
    return pairs


class VerificationService:
    """
    M_t f in its shifted, finite-variation and quadruple forms, and the
    statistical checks built on them.
    """

    # ========================================================================
    # Building blocks
    # ========================================================================

    def _as_ensemble(self, paths: Paths, group: GroupDescriptor) -> PathEnsemble:
        return PathEnsemble.from_paths([paths], group) if isinstance(paths, SamplePath) else paths

    def _check_grid(self, ensemble: PathEnsemble, grid: np.ndarray) -> None:
        if ensemble.grid.shape != grid.shape or not np.allclose(ensemble.grid, grid, atol=1e-9):
            raise GridMismatch(
                "path grid differs from the quadruple grid",
                details={"path_cells": len(ensemble.grid) - 1, "quadruple_cells": len(grid) - 1},
            )

    def _jump_term(self, f: TestFunction, y: np.ndarray, fy: np.ndarray, support: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """sum_i w_i f(y x_i) - total * f(y) for every row of y"""
        moved = f(y[:, None] @ support[None])
        return moved @ weights - weights.sum() * fy

    # ========================================================================
    # M_t f
    # ========================================================================

    def compute_quadruple_M(self, paths: Paths, q: Quadruple, f: TestFunction) -> np.ndarray:
        """
        The (b, A, eta, nu) martingale functional of z:
        f(z_t) - int xi f db - 1/2 int xi xi f dA
        - int int [f(z x) - f(z) - phi(x) . xi f] eta(ds, dx)
        - sum_u int [f(z_{u-} x) - f(z_{u-})] nu_u(dx).

        Raises:
            GridMismatch: If the path grid is not the quadruple grid
        """
        group = q.group
        ensemble = self._as_ensemble(paths, group)
        self._check_grid(ensemble, q.grid)
        M, K = ensemble.n_paths, q.n_cells
        out = np.empty((M, K + 1))
        compensator = np.zeros(M)
        laws = [[(mass, law.as_discrete()) for mass, law in cell] for cell in q.intensities]
        for k in range(K + 1):
            if k in q.jump_laws:
                left = ensemble.left_value(k)
                nu = q.jump_laws[k].as_discrete()
                compensator += self._jump_term(f, left, f(left), nu.support, nu.weights)
            y = ensemble.values[:, k]
            if k == K:
                out[:, k] = f(y) - compensator
                break
            fy, grad, hess = f.derivatives(y)
            out[:, k] = fy - compensator
            compensator += grad @ q.drift_increments[k]
            compensator += 0.5 * np.einsum("mjk,jk->m", hess, q.cov_increments[k])
            for mass, law in laws[k]:
                if not len(law):
                    continue
                phi_bar = law.weights @ group.coordinates(law.support)
                compensator += mass * (self._jump_term(f, y, fy, law.support, law.weights) - grad @ phi_bar)
        return out

    def compute_Mtf(self, paths: Paths, triple: ExtendedLevyTriple, f: TestFunction) -> np.ndarray:
        """
        M_t f of the shifted process z_t = x_t b_t^-1 with the b-conjugated
        derivatives [Ad(b_s) xi_j][Ad(b_s) xi_k] f(z_s).

        Raises:
            InvalidTriple: If the triple does not validate
            GridMismatch: If an atom time is not a grid point
        """
        self._require_valid(triple)
        ensemble = self._as_ensemble(paths, triple.group)
        return self._shifted_residual(self._shifted_inputs(ensemble, triple), f)

    def _shifted_inputs(self, ensemble: PathEnsemble, triple: ExtendedLevyTriple):
        traj = triple_service.drift_trajectory(triple.drift, triple.group, ensemble.grid)
        z = simulation_service.split_shifted(ensemble, traj)
        return z, traj, triple_service.as_quadruple(triple, ensemble.grid)

    def _shifted_residual(self, inputs, f: TestFunction) -> np.ndarray:
        z, traj, q = inputs
        group = q.group
        M, K = z.n_paths, q.n_cells
        out = np.empty((M, K + 1))
        compensator = np.zeros(M)
        for k in range(K + 1):
            if k in q.jump_laws:
                left = z.left_value(k)
                b_left = traj.left_values[k]
                h = group.inverse(b_left) @ traj.values[k]
                nu = q.jump_laws[k].as_discrete()
                moved = b_left @ nu.support @ group.inverse(h) @ group.inverse(b_left)
                compensator += self._jump_term(f, left, f(left), moved, nu.weights)
            y = z.values[:, k]
            if k == K:
                out[:, k] = f(y) - compensator
                break
            fy, grad, hess = f.derivatives(y)
            out[:, k] = fy - compensator
            b = traj.values[k]
            ad = group.adjoint(b)
            b_inv = group.inverse(b)
            compensator += 0.5 * np.einsum("mpq,pj,jk,qk->m", hess, ad, q.cov_increments[k], ad)
            for mass, law in q.intensities[k]:
                law = law.as_discrete()
                if not len(law):
                    continue
                phi_bar = ad @ (law.weights @ group.coordinates(law.support))
                moved = b @ law.support @ b_inv
                compensator += mass * (self._jump_term(f, y, fy, moved, law.weights) - grad @ phi_bar)
        return out

    def compute_Mtf_finite_variation(self, paths: Paths, triple: ExtendedLevyTriple, f: TestFunction) -> np.ndarray:
        """The finite-variation form on x itself: the quadruple (b^c, A, eta^c, nu)."""
        self._require_valid(triple)
        ensemble = self._as_ensemble(paths, triple.group)
        return self.compute_quadruple_M(ensemble, triple_service.as_quadruple(triple, ensemble.grid), f)

    def _require_valid(self, triple: ExtendedLevyTriple) -> None:
        report = triple_service.validate_extended_triple(triple)
        if not report.valid:
            raise InvalidTriple(f"triple '{triple.name}' is invalid", details=report.messages())

    def residual_functional(
        self,
        ensemble: PathEnsemble,
        triple: ExtendedLevyTriple,
        form: MartingaleForm = MartingaleForm.SHIFTED,
    ) -> Callable[[TestFunction], np.ndarray]:
        """f -> M f on ``ensemble`` in the requested form, with the path transforms done once."""
        if form == MartingaleForm.SHIFTED:
            inputs = self._shifted_inputs(ensemble, triple)
            return lambda f: self._shifted_residual(inputs, f)
        if form == MartingaleForm.FINITE_VARIATION:
            q = triple_service.as_quadruple(triple, ensemble.grid)
            return lambda f: self.compute_quadruple_M(ensemble, q, f)
        traj = triple_service.drift_trajectory(triple.drift, triple.group, ensemble.grid)
        z = simulation_service.split_shifted(ensemble, traj)
        q = triple_service.bar_transform(triple, ensemble.grid, traj)
        return lambda f: self.compute_quadruple_M(z, q, f)

    # ========================================================================
    # Martingale test
    # ========================================================================

    def martingale_test(
        self,
        paths: Union[PathEnsemble, Iterable[PathEnsemble]],
        triple: ExtendedLevyTriple,
        bank: Optional[Sequence[TestFunction]] = None,
        pairs: Optional[Sequence[Tuple[float, float]]] = None,
        conditioners: Optional[Sequence[Conditioner]] = None,
        cfg: Optional[VerificationSection] = None,
    ) -> MartingaleReport:
        """
        Mean over paths of (M_t f - M_s f) h(x on [0, s]) for every
        (f, s, t, h), with its standard error and z-score.

        Args:
            paths: One ensemble or an iterable of ensemble chunks
            triple: The triple claimed to represent the paths
            bank: Test functions (default bank of ``cfg.bank_size``)
            pairs: (s, t) pairs (default schedule when omitted)
            conditioners: Conditioning functionals (default bank of five)
            cfg: Form, z threshold and pass rate

        Returns:
            MartingaleReport; a failing property is reported, never raised
        """
        cfg = cfg or VerificationSection()
        group = triple.group
        bank = list(bank or make_bank(group, size=cfg.bank_size))
        conditioners = list(conditioners or make_conditioners(group))
        self._require_valid(triple)
        chunks = [paths] if isinstance(paths, PathEnsemble) else paths

        sums = sumsq = None
        n_total = 0
        observed = {f.name: 0.0 for f in bank}
        horizon = None
        for chunk in chunks:
            if horizon is None:
                horizon = chunk.horizon
                pairs = list(pairs or cfg.pairs or default_pairs(horizon, triple.atoms.times))
                sums = np.zeros((len(bank), len(pairs), len(conditioners)))
                sumsq = np.zeros_like(sums)
                q = self._form_quadruple(triple, chunk.grid, cfg.form)
            h_values = np.stack(
                [np.stack([h(chunk, s) for h in conditioners], axis=-1) for s, _ in pairs], axis=0
            )
            residual = self.residual_functional(chunk, triple, cfg.form)
            for a, f in enumerate(bank):
                m = residual(f)
                observed[f.name] = max(observed[f.name], float(np.abs(m).max()))
                for p, (s, t) in enumerate(pairs):
                    diff = m[:, chunk.index_of(t)] - m[:, chunk.index_of(s)]
                    stat = diff[:, None] * h_values[p]
                    sums[a, p] += stat.sum(axis=0)
                    sumsq[a, p] += (stat ** 2).sum(axis=0)
            n_total += chunk.n_paths
            logger.info(f"Martingale test: {n_total} path(s) accumulated")
        if n_total == 0:
            raise ConfigError("martingale test received no paths")
        if n_total < cfg.min_paths:
            logger.warning(f"Martingale test on {n_total} paths, fewer than {cfg.min_paths}")

        entries = []
        for a, f in enumerate(bank):
            for p, (s, t) in enumerate(pairs):
                for c, h in enumerate(conditioners):
                    mean = sums[a, p, c] / n_total
                    var = max(sumsq[a, p, c] / n_total - mean ** 2, 0.0) * n_total / max(n_total - 1, 1)
                    stderr = float(np.sqrt(var / n_total))
                    z = float(mean / max(stderr, 1e-12))
                    entries.append(MartingaleEntry(
                        f_id=f.name, s=float(s), t=float(t), h_id=h.name,
                        mean=float(mean), stderr=stderr, z=z, n=n_total,
                        passed=abs(z) <= cfg.z_threshold,
                    ))
        report = MartingaleReport(
            form=MartingaleForm(cfg.form).value,
            n_paths=n_total,
            z_threshold=cfg.z_threshold,
            required_pass_rate=cfg.pass_rate,
            entries=entries,
            bounds={f.name: self.martingale_bound(q, f) for f in bank},
            observed_max=observed,
        )
        status = "✓" if report.passed else "✗"
        logger.info(f"{status} Martingale test ({report.form}): pass rate {report.pass_rate:.3f}, max |z| {report.max_abs_z:.2f}")
        return report

    def _form_quadruple(self, triple: ExtendedLevyTriple, grid: np.ndarray, form: MartingaleForm) -> Quadruple:
        if form == MartingaleForm.FINITE_VARIATION:
            return triple_service.as_quadruple(triple, grid)
        return triple_service.bar_transform(triple, grid)

    # ========================================================================
    # Bound on |M_t f|
    # ========================================================================

    def derivative_sup_norms(self, f: TestFunction, group: GroupDescriptor, n_points: int = 2000) -> Tuple[float, float, float]:
        """Sampled sup norms of f, xi f and xi xi f (entrywise max)"""
        rng = np.random.default_rng(0)
        radius = min(group.cutoff_radius, 4.0)
        v = rng.uniform(-radius, radius, size=(n_points, group.dim))
        points = group.exp(v)
        if f.origin is None:
            points = np.concatenate([points, f.center[None], points @ f.center])
        fv, grad, hess = f.derivatives(points)
        return float(np.abs(fv).max()), float(np.abs(grad).max()), float(np.abs(hess).max())

    def derivative_check(
        self,
        f: TestFunction,
        group: GroupDescriptor,
        g: np.ndarray,
        step: Optional[float] = None,
    ) -> Tuple[float, float]:
        """
        Largest deviation of the closed-form xi f and xi xi f from central
        differences along g exp(s xi_j) exp(t xi_k), over the points ``g``.
        """
        h = step or settings.derivative_check_step
        n = group.matrix_size
        g = np.asarray(g, dtype=float).reshape(-1, n, n)
        _, grad, hess = f.derivatives(g)
        plus = group.exp(h * np.eye(group.dim))
        minus = group.exp(-h * np.eye(group.dim))
        fd_grad = (f(g[:, None] @ plus[None]) - f(g[:, None] @ minus[None])) / (2.0 * h)
        corners = {}
        for a, first in (("+", plus), ("-", minus)):
            for b, second in (("+", plus), ("-", minus)):
                corners[a + b] = f(g[:, None, None] @ first[None, :, None] @ second[None, None, :])
        fd_hess = (corners["++"] - corners["+-"] - corners["-+"] + corners["--"]) / (4.0 * h * h)
        return float(np.abs(grad - fd_grad).max()), float(np.abs(hess - fd_hess).max())

    def martingale_bound(self, q: Quadruple, f: TestFunction) -> float:
        """
        sup|f| plus, per cell, sup|xi f| |db|_1 + 1/2 sup|xi xi f| |dA|_1 and
        mass * (2 sup|f| + sup|xi f| int |phi|_1), plus 2 sup|f| per atom.
        """
        group = q.group
        f_sup, g_sup, h_sup = self.derivative_sup_norms(f, group)
        bound = f_sup
        bound += g_sup * float(np.abs(q.drift_increments).sum())
        bound += 0.5 * h_sup * float(np.abs(q.cov_increments).sum())
        for cell in q.intensities:
            for mass, law in cell:
                law = law.as_discrete()
                phi_l1 = float(law.weights @ np.abs(group.coordinates(law.support)).sum(axis=-1)) if len(law) else 0.0
                bound += mass * (2.0 * f_sup + g_sup * phi_l1)
        bound += 2.0 * f_sup * len(q.jump_laws)
        return bound

    # ========================================================================
    # Fixed-jump laws and the classical cross-check
    # ========================================================================

    def fixed_jump_law_check(
        self,
        ensemble: PathEnsemble,
        triple: ExtendedLevyTriple,
        tolerance: float = 0.05,
        shifted: bool = False,
    ) -> FixedJumpLawReport:
        """
        Total variation between the empirical law of x_{u-}^-1 x_u and nu_u
        (or of z_{u-}^-1 z_u and nu-bar_u with ``shifted``) for every atom u
        with a discrete law.
        """
        group = triple.group
        paths, laws = ensemble, {}
        if shifted:
            traj = triple_service.drift_trajectory(triple.drift, group, ensemble.grid)
            paths = simulation_service.split_shifted(ensemble, traj)
            laws = triple_service.bar_transform(triple, ensemble.grid, traj).jump_laws
        report = FixedJumpLawReport()
        for atom in triple.atoms.atoms:
            k = grid_index(ensemble.grid, atom.time)
            if k is None:
                continue
            law = laws.get(k, atom.law) if shifted else atom.law
            if not isinstance(law, DiscreteMeasure):
                logger.info(f"Atom at t={atom.time:g} has a continuous law; total variation skipped")
                continue
            empirical = DiscreteMeasure.empirical(paths.fixed_increments(k))
            tv = total_variation(empirical, law, group)
            report.entries.append(FixedJumpLawEntry(
                time=float(atom.time), total_variation=tv, tolerance=tolerance,
                n=ensemble.n_paths, passed=tv <= tolerance,
            ))
        return report

    def characteristic_function_check(
        self,
        ensemble: PathEnsemble,
        triple: ExtendedLevyTriple,
        frequencies: Optional[np.ndarray] = None,
        t: Optional[float] = None,
        tolerance: float = 0.02,
    ) -> CharacteristicFunctionReport:
        """
        Empirical E exp(i w . x_t) against the exact exponent
        i w.b^c(t) - 1/2 w'A(t)w + sum mass * int (e^{i w.y} - 1 - i w.phi(y)) rho(dy),
        times nu_u(w) for every atom u <= t. RD only.

        Raises:
            ConfigError: If the group is not RD
        """
        group = triple.group
        if not isinstance(group, EuclideanGroup):
            raise ConfigError("characteristic function check requires the RD group")
        d = group.dim
        t = ensemble.horizon if t is None else t
        if frequencies is None:
            axis = np.linspace(-1.0, 1.0, 5)
            if d <= 2:
                frequencies = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
            else:
                frequencies = np.concatenate([np.outer(axis, np.eye(d)[j]) for j in range(d)])
        w = np.asarray(frequencies, dtype=float)

        x = group.log(ensemble.values[:, ensemble.index_of(t)], strict=False)
        empirical = np.exp(1j * x @ w.T).mean(axis=0)

        exponent = 1j * w @ triple.drift.components_at(np.array([t]))[0]
        exponent = exponent - 0.5 * np.einsum("fi,ij,fj->f", w, triple.cov.at([t])[0], w)
        for mass, law in triple.levy_c.intensity_on(0.0, t):
            law = law.as_discrete()
            y = group.log(law.support, strict=False)
            phi = group.coordinates(law.support)
            exponent = exponent + mass * ((np.exp(1j * y @ w.T) - 1.0 - 1j * phi @ w.T).T @ law.weights)
        exact = np.exp(exponent)
        for atom in triple.atoms.atoms:
            if atom.time <= t + TIME_TOL:
                law = atom.law.as_discrete()
                exact = exact * (np.exp(1j * group.log(law.support, strict=False) @ w.T).T @ law.weights)
        error = float(np.abs(empirical - exact).max())
        return CharacteristicFunctionReport(
            time=float(t),
            frequencies=w.tolist(),
            empirical=np.stack([empirical.real, empirical.imag], axis=-1).tolist(),
            exact=np.stack([exact.real, exact.imag], axis=-1).tolist(),
            max_error=error,
            tolerance=tolerance,
        )

    # ========================================================================
    # Round trip
    # ========================================================================

    def _endpoint(self, triple: ExtendedLevyTriple, horizon: float) -> np.ndarray:
        points = list(triple.drift.grid) + [a.time for a in triple.drift.atoms] + [horizon]
        grid = np.unique(np.clip(np.array(points, dtype=float), 0.0, horizon))
        return triple_service.drift_trajectory(triple.drift, triple.group, grid).values[-1]

    def round_trip_check(
        self,
        estimated: ExtendedLevyTriple,
        truth: ExtendedLevyTriple,
        horizon: float,
        time_tolerance: float,
        widths: Sequence[float] = (0.5, 1.0, 2.0),
        law_bin: float = 0.25,
    ) -> RoundTripReport:
        """
        Compare an estimated triple with the one that generated the paths:
        trace A(T) within 15%, eta^c(T, f) within 10% for ramp functions
        vanishing near e, every atom detected with nu-hat within 0.05 in total
        variation, and the drift endpoint within 0.05.

        ``law_bin`` is the radius within which an estimated atom is matched to
        a support point of nu; the estimated increment carries one simulation
        step of diffusion.
        """
        group = truth.group
        report = RoundTripReport()
        est_trace = float(np.trace(estimated.cov.at([horizon])[0]))
        true_trace = float(np.trace(truth.cov.at([horizon])[0]))
        report.add("trace-A", est_trace, true_trace, abs(est_trace - true_trace), 0.15 * max(true_trace, 1e-12))
        for width in widths:
            f = ramp_function(group, width)
            est = float(estimated.levy_c.integrate(horizon, f))
            target = float(truth.levy_c.integrate(horizon, f))
            report.add(f"eta-ramp-{width:g}", est, target, abs(est - target), 0.10 * max(abs(target), 0.05))
        detected = {a.time: a.law for a in estimated.atoms.atoms}
        for atom in truth.atoms.atoms:
            if atom.time > horizon + TIME_TOL:
                continue
            nearest = min(detected, key=lambda u: abs(u - atom.time), default=None)
            if nearest is None or abs(nearest - atom.time) > time_tolerance:
                report.add(f"atom-time@{atom.time:g}", -1.0 if nearest is None else nearest, atom.time, horizon, time_tolerance)
                continue
            report.add(f"atom-time@{atom.time:g}", nearest, atom.time, abs(nearest - atom.time), time_tolerance)
            if isinstance(atom.law, DiscreteMeasure):
                tv = total_variation(detected[nearest], atom.law, group, tol=law_bin)
                report.add(f"atom-law@{atom.time:g}", tv, 0.0, tv, 0.05)
        distance = float(group.distance(self._endpoint(estimated, horizon), self._endpoint(truth, horizon)))
        report.add("drift-endpoint", distance, 0.0, distance, 0.05)
        status = "✓" if report.passed else "✗"
        logger.info(f"{status} Round trip: {sum(e.passed for e in report.entries)}/{len(report.entries)} checks passed")
        return report


# Global service instance
verification_service = VerificationService()
