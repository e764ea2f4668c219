"""
Reading and writing declaration files, path tables and reports.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar, Union
import hashlib
import json
import logging

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from levy_lie.core.config import settings
from levy_lie.core.exceptions import ConfigError
from levy_lie.models.group import GroupDescriptor, get_group
from levy_lie.models.measure import DiscreteMeasure, GaussianLaw, LaplaceLaw, SpatialLaw, mean_of_measure
from levy_lie.models.path import PathEnsemble
from levy_lie.models.space import (
    HomogeneousSpace,
    KInvariantLaw,
    SpaceEnsemble,
    SpaceFixedJump,
    SpaceLevyPiece,
    SpaceTriple,
)
from levy_lie.models.triple import (
    CovMatrixFunction,
    DriftAtom,
    DriftPath,
    ExtendedLevyTriple,
    FixedJump,
    FixedJumpAtoms,
    LevyMeasureFunctionC,
    LevyPiece,
)
from levy_lie.schemas.experiment import ExperimentConfig
from levy_lie.schemas.reports import RunReport
from levy_lie.schemas.triple_file import (
    CovSpec,
    DiscreteLawSpec,
    DriftAtomSpec,
    DriftSpec,
    ElementSpec,
    FixedJumpSpec,
    GaussianLawSpec,
    GroupSpec,
    KInvariantLawSpec,
    LaplaceLawSpec,
    LevyPieceSpec,
    LevySpec,
    SpaceSpec,
    TripleFile,
)

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)
AnyTriple = Union[ExtendedLevyTriple, SpaceTriple]


class IOService:
    """
    JSON declarations, CSV/JSON path output and report files.
    """

    # ========================================================================
    # JSON documents
    # ========================================================================

    def load_json(self, path: Union[str, Path]) -> Any:
        """
        Raises:
            ConfigError: If the file is missing or is not valid JSON
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e.strerror}", details={"file": str(path)})
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(
                f"{path}: {e.msg} at line {e.lineno}, column {e.colno}",
                details={"file": str(path), "line": e.lineno, "column": e.colno},
            )

    def parse_model(self, model: Type[ModelT], data: Any, source: str = "<document>") -> ModelT:
        """
        Raises:
            ConfigError: With one entry per failing field
        """
        try:
            return model.model_validate(data)
        except ValidationError as e:
            fields = [
                {"field": ".".join(str(part) for part in err["loc"]), "message": err["msg"]}
                for err in e.errors()
            ]
            summary = "; ".join(f"{f['field']}: {f['message']}" for f in fields[:3])
            raise ConfigError(f"{source}: invalid {model.__name__} ({summary})", details=fields)

    def load_experiment(self, path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
        data = self.load_json(path)
        if overrides:
            for dotted, value in overrides.items():
                if value is None:
                    continue
                node = data
                *parents, leaf = dotted.split(".")
                for key in parents:
                    node = node.setdefault(key, {})
                node[leaf] = value
        base = Path(path).parent
        for key in ("triple", "lifted_triple", "reference_triple"):
            value = data.get(key) if isinstance(data, dict) else None
            if isinstance(value, str) and not Path(value).is_absolute() and (base / value).is_file():
                data[key] = str(base / value)
        return self.parse_model(ExperimentConfig, data, str(path))

    # ========================================================================
    # Triple declarations
    # ========================================================================

    def build_group(self, spec: GroupSpec) -> GroupDescriptor:
        return get_group(spec.name, spec.dim, spec.bump_inner, spec.bump_outer, spec.cutoff_radius)

    def element(self, spec: ElementSpec, group: GroupDescriptor) -> np.ndarray:
        if spec.log is not None:
            if len(spec.log) != group.dim:
                raise ConfigError(f"log coordinates need {group.dim} entries, got {len(spec.log)}")
            return group.exp(np.array(spec.log, dtype=float))
        matrix = np.array(spec.matrix, dtype=float)
        if matrix.shape != (group.matrix_size, group.matrix_size):
            raise ConfigError(f"matrix must be {group.matrix_size}x{group.matrix_size}, got {matrix.shape}")
        return matrix

    def build_law(self, spec, group: GroupDescriptor) -> SpatialLaw:
        if isinstance(spec, DiscreteLawSpec):
            return DiscreteMeasure(np.stack([self.element(e, group) for e in spec.support]), np.array(spec.weights))
        if isinstance(spec, GaussianLawSpec):
            return GaussianLaw(group, np.asarray(spec.sigma, dtype=float), None if spec.mean is None else np.array(spec.mean))
        if isinstance(spec, LaplaceLawSpec):
            return LaplaceLaw(group, np.asarray(spec.scale, dtype=float), None if spec.mean is None else np.array(spec.mean))
        raise ConfigError(f"law kind '{spec.kind}' is only allowed in space triples")

    def _space_law(self, spec) -> KInvariantLaw:
        if not isinstance(spec, KInvariantLawSpec):
            raise ConfigError(f"space triples take k-invariant laws, got '{spec.kind}'")
        return KInvariantLaw(np.array(spec.colatitudes), np.array(spec.weights))

    def triple_from_file(self, doc: TripleFile) -> AnyTriple:
        """
        Build the triple a declaration describes. Drift jumps missing at
        fixed-jump times are filled in with the mean of the fixed-jump law.

        Raises:
            ConfigError: If shapes do not match the group
        """
        group = self.build_group(doc.group)
        if doc.space is not None:
            return self._space_triple(doc, group)
        d = group.dim
        cov_values = (
            np.zeros((len(doc.cov.grid), d, d)) if doc.cov.matrices is None else np.array(doc.cov.matrices, dtype=float)
        )
        if cov_values.shape[1:] != (d, d):
            raise ConfigError(f"covariance matrices must be {d}x{d}", details={"shape": list(cov_values.shape)})
        components = (
            np.zeros((len(doc.drift.grid), d)) if doc.drift.components is None else np.array(doc.drift.components, dtype=float)
        )
        if components.shape[1] != d:
            raise ConfigError(f"drift components need {d} columns", details={"shape": list(components.shape)})
        atoms = [FixedJump(a.time, self.build_law(a.law, group)) for a in doc.atoms]
        drift_atoms = [DriftAtom(a.time, self.element(a.jump, group)) for a in doc.drift.atoms]
        declared = {round(a.time, 12) for a in drift_atoms}
        for atom in atoms:
            if round(atom.time, 12) not in declared:
                drift_atoms.append(DriftAtom(atom.time, mean_of_measure(atom.law.as_discrete(), group)))
        pieces = [LevyPiece(p.start, p.end, p.rate, self.build_law(p.law, group)) for p in doc.levy.pieces]
        return ExtendedLevyTriple(
            group=group,
            drift=DriftPath(np.array(doc.drift.grid), components, tuple(drift_atoms)),
            cov=CovMatrixFunction(np.array(doc.cov.grid), cov_values),
            levy_c=LevyMeasureFunctionC(tuple(pieces)),
            atoms=FixedJumpAtoms(tuple(atoms)),
            name=doc.name,
        )

    def _space_triple(self, doc: TripleFile, group: GroupDescriptor) -> SpaceTriple:
        if doc.group.name != "SO3":
            raise ConfigError("space triples live on S2 = SO3/SO2; group must be SO3")
        spec = doc.space
        space = HomogeneousSpace(group, twist=spec.twist, irreducible=spec.irreducible)
        n = space.dim
        cov_values = (
            np.zeros((len(doc.cov.grid), n, n)) if doc.cov.matrices is None else np.array(doc.cov.matrices, dtype=float)
        )
        if cov_values.shape[1:] != (n, n):
            raise ConfigError(f"space covariance matrices must be {n}x{n}", details={"shape": list(cov_values.shape)})
        return SpaceTriple(
            space=space,
            cov=CovMatrixFunction(np.array(doc.cov.grid), cov_values),
            pieces=tuple(SpaceLevyPiece(p.start, p.end, p.rate, self._space_law(p.law)) for p in doc.levy.pieces),
            atoms=tuple(SpaceFixedJump(a.time, self._space_law(a.law)) for a in doc.atoms),
            drift_grid=None if spec.drift_grid is None else np.array(spec.drift_grid),
            drift_points=None if spec.drift_points is None else np.array(spec.drift_points),
            name=doc.name,
        )

    def _group_spec(self, group: GroupDescriptor) -> GroupSpec:
        return GroupSpec(
            name=group.name,
            dim=group.dim if group.name == "RD" else None,
            bump_inner=group.bump_inner,
            bump_outer=group.bump_outer,
            cutoff_radius=group.cutoff_radius if np.isfinite(group.cutoff_radius) else None,
        )

    def _law_spec(self, law):
        if isinstance(law, KInvariantLaw):
            return KInvariantLawSpec(colatitudes=law.colatitudes.tolist(), weights=law.weights.tolist())
        if isinstance(law, GaussianLaw):
            return GaussianLawSpec(
                sigma=np.asarray(law.sigma, dtype=float).tolist(),
                mean=None if law.mean is None else np.asarray(law.mean).tolist(),
            )
        if isinstance(law, LaplaceLaw):
            return LaplaceLawSpec(
                scale=np.asarray(law.scale, dtype=float).tolist(),
                mean=None if law.mean is None else np.asarray(law.mean).tolist(),
            )
        measure = law.as_discrete()
        return DiscreteLawSpec(
            support=[ElementSpec(matrix=g.tolist()) for g in measure.support],
            weights=measure.weights.tolist(),
        )

    def triple_to_file(self, triple: AnyTriple) -> TripleFile:
        if isinstance(triple, SpaceTriple):
            space = triple.space
            return TripleFile(
                name=triple.name,
                group=self._group_spec(space.group),
                cov=CovSpec(grid=triple.cov.grid.tolist(), matrices=triple.cov.values.tolist()),
                levy=LevySpec(pieces=[
                    LevyPieceSpec(start=p.start, end=p.end, rate=p.rate, law=self._law_spec(p.law)) for p in triple.pieces
                ]),
                atoms=[FixedJumpSpec(time=a.time, law=self._law_spec(a.law)) for a in triple.atoms],
                space=SpaceSpec(
                    twist=space.twist,
                    irreducible=space.irreducible,
                    drift_grid=None if triple.drift_grid is None else np.asarray(triple.drift_grid).tolist(),
                    drift_points=None if triple.drift_points is None else np.asarray(triple.drift_points).tolist(),
                ),
            )
        return TripleFile(
            name=triple.name,
            group=self._group_spec(triple.group),
            drift=DriftSpec(
                grid=triple.drift.grid.tolist(),
                components=triple.drift.components.tolist(),
                atoms=[DriftAtomSpec(time=a.time, jump=ElementSpec(matrix=np.asarray(a.jump).tolist())) for a in triple.drift.atoms],
            ),
            cov=CovSpec(grid=triple.cov.grid.tolist(), matrices=triple.cov.values.tolist()),
            levy=LevySpec(pieces=[
                LevyPieceSpec(start=p.start, end=p.end, rate=p.rate, law=self._law_spec(p.law)) for p in triple.levy_c.pieces
            ]),
            atoms=[FixedJumpSpec(time=a.time, law=self._law_spec(a.law)) for a in triple.atoms.atoms],
        )

    def load_triple(self, path: Union[str, Path]) -> AnyTriple:
        doc = self.parse_model(TripleFile, self.load_json(path), str(path))
        triple = self.triple_from_file(doc)
        logger.info(f"Loaded triple '{doc.name}' on {doc.group.name} from {path}")
        return triple

    def save_triple(self, triple: AnyTriple, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = self.triple_to_file(triple)
        path.write_text(json.dumps(doc.model_dump(mode="json", exclude_none=True), sort_keys=True, indent=2), encoding="utf-8")
        return path

    # ========================================================================
    # Paths
    # ========================================================================

    def paths_frame(self, ensemble: PathEnsemble) -> pd.DataFrame:
        """
        One row per path and grid point (kind ``value``) plus a ``left`` row
        before every fixed jump, with the flattened matrix in m00, m01, ...
        """
        n = ensemble.values.shape[-1]
        columns = [f"m{i}{j}" for i in range(n) for j in range(n)]
        frames = []
        M, K1 = ensemble.values.shape[:2]
        path_id = np.repeat(np.arange(M) + ensemble.path_offset, K1)
        t = np.tile(ensemble.grid, M)
        values = pd.DataFrame(ensemble.values.reshape(M * K1, n * n), columns=columns)
        values.insert(0, "kind", "value")
        values.insert(0, "t", t)
        values.insert(0, "path_id", path_id)
        values["order"] = 1
        frames.append(values)
        for k, left in sorted(ensemble.left_values.items()):
            rows = pd.DataFrame(left.reshape(M, n * n), columns=columns)
            rows.insert(0, "kind", "left")
            rows.insert(0, "t", float(ensemble.grid[k]))
            rows.insert(0, "path_id", np.arange(M) + ensemble.path_offset)
            rows["order"] = 0
            frames.append(rows)
        table = pd.concat(frames, ignore_index=True)
        table = table.sort_values(["path_id", "t", "order"], kind="stable").drop(columns="order")
        return table.reset_index(drop=True)

    def space_paths_frame(self, ensemble: SpaceEnsemble) -> pd.DataFrame:
        M, K1 = ensemble.points.shape[:2]
        table = pd.DataFrame({
            "path_id": np.repeat(np.arange(M), K1),
            "t": np.tile(ensemble.grid, M),
            "kind": "value",
            "x": ensemble.points[..., 0].reshape(-1),
            "y": ensemble.points[..., 1].reshape(-1),
            "z": ensemble.points[..., 2].reshape(-1),
            "order": 1,
        })
        frames = [table]
        for k, left in sorted(ensemble.left_points.items()):
            frames.append(pd.DataFrame({
                "path_id": np.arange(M),
                "t": float(ensemble.grid[k]),
                "kind": "left",
                "x": left[:, 0],
                "y": left[:, 1],
                "z": left[:, 2],
                "order": 0,
            }))
        table = pd.concat(frames, ignore_index=True).sort_values(["path_id", "t", "order"], kind="stable")
        return table.drop(columns="order").reset_index(drop=True)

    def events_document(self, ensemble: PathEnsemble) -> List[dict]:
        """Event lists of every path: time, kind and increment matrix"""
        return [
            {
                "path_id": i + ensemble.path_offset,
                "origin": path.origin.tolist(),
                "events": [{"t": e.time, "kind": e.kind.value, "increment": e.increment.tolist()} for e in path.events],
            }
            for i, path in enumerate(ensemble)
        ]

    def write_paths(
        self,
        ensemble: Union[PathEnsemble, SpaceEnsemble],
        path: Union[str, Path],
        fmt: str = "csv",
        append: bool = False,
    ) -> Path:
        """
        Write an ensemble as a CSV table, or as event lists with ``fmt="json"``.
        With ``append`` the CSV rows (or JSON paths) are added to an existing file.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        csv_args = dict(index=False, float_format="%.17g", mode="a" if append else "w", header=not append)
        if isinstance(ensemble, SpaceEnsemble):
            self.space_paths_frame(ensemble).to_csv(path, **csv_args)
        elif fmt == "json":
            documents = json.loads(path.read_text(encoding="utf-8")) if append and path.exists() else []
            documents.extend(self.events_document(ensemble))
            path.write_text(json.dumps(documents, sort_keys=True), encoding="utf-8")
        else:
            self.paths_frame(ensemble).to_csv(path, **csv_args)
        logger.info(f"✓ Wrote {len(ensemble)} path(s) to {path}")
        return path

    # ========================================================================
    # Reports
    # ========================================================================

    def config_hash(self, config: Union[BaseModel, dict]) -> str:
        data = config.model_dump(mode="json") if isinstance(config, BaseModel) else config
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()[:16]

    def run_report(self, command: str, config: Union[BaseModel, dict], seed: int, passed: bool, sections: Dict[str, dict]) -> RunReport:
        return RunReport(
            command=command,
            version=settings.app_version,
            config_hash=self.config_hash(config),
            seed=seed,
            passed=passed,
            sections=sections,
        )

    def write_report(self, report: RunReport, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2), encoding="utf-8")
        logger.info(f"✓ Wrote report to {path}")
        return path


# Global service instance
io_service = IOService()
