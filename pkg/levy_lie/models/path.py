"""
Sample paths as ordered event lists, and ensembles of paths on a shared grid.

A ``SamplePath`` stores left increments: the value at t is the origin times the
ordered product of every increment with time <= t. A ``PathEnsemble`` stores
grid values for many paths at once together with what is needed to rebuild
each path's event list.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Optional
import enum
import logging

import numpy as np

from levy_lie.core.config import settings
from levy_lie.models.group import GroupDescriptor
from levy_lie.models.triple import TIME_TOL

logger = logging.getLogger(__name__)


class EventKind(str, enum.Enum):
    """Kind of a path increment"""
    STEP = "step"
    POISSON_JUMP = "poisson_jump"
    FIXED_JUMP = "fixed_jump"


class Scheme(str, enum.Enum):
    """Simulation scheme"""
    FINITE_VARIATION = "finite-variation-generator"
    SHIFTED_Z = "shifted-z"


@dataclass(frozen=True)
class PathEvent:
    time: float
    kind: EventKind
    increment: np.ndarray


@dataclass
class SamplePath:
    events: List[PathEvent]
    origin: np.ndarray
    grid: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.events])

    def _product(self, events: Iterable[PathEvent]) -> np.ndarray:
        value = np.array(self.origin, dtype=float)
        for event in events:
            value = value @ event.increment
        return value

    def value_at(self, t: float) -> np.ndarray:
        return self._product(e for e in self.events if e.time <= t + TIME_TOL)

    def left_value_at(self, t: float) -> np.ndarray:
        return self._product(e for e in self.events if e.time < t - TIME_TOL)

    def values_on_grid(self, group: Optional[GroupDescriptor] = None) -> np.ndarray:
        """x_{t_k} for every grid point, renormalized periodically when a group is given."""
        out = np.empty((len(self.grid),) + np.shape(self.origin))
        value = np.array(self.origin, dtype=float)
        cursor = 0
        for k, t in enumerate(self.grid):
            while cursor < len(self.events) and self.events[cursor].time <= t + TIME_TOL:
                value = value @ self.events[cursor].increment
                cursor += 1
                if group is not None and cursor % settings.renormalize_every == 0:
                    value = group.renormalize(value)
            out[k] = value
        return out

    def fixed_jump_times(self) -> List[float]:
        return [e.time for e in self.events if e.kind == EventKind.FIXED_JUMP]


@dataclass
class PathEnsemble:
    """
    M paths on a shared grid.

    ``values[i, k]`` is x_{t_k} of path i. ``left_values[k]`` holds the values
    just before the fixed jump at grid index k. Poisson jumps are recorded as
    (path, cell, increment) with cell k meaning the step (t_{k-1}, t_k].
    """
    group: GroupDescriptor
    grid: np.ndarray
    values: np.ndarray
    left_values: Dict[int, np.ndarray] = field(default_factory=dict)
    jump_paths: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    jump_cells: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    jump_increments: Optional[np.ndarray] = None
    seed: int = 0
    scheme: Scheme = Scheme.FINITE_VARIATION
    path_offset: int = 0

    def __post_init__(self):
        if self.jump_increments is None:
            n = self.values.shape[-1]
            self.jump_increments = np.zeros((0, n, n))

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.n_paths

    def __getitem__(self, i: int) -> SamplePath:
        return self.path(i)

    def __iter__(self) -> Iterator[SamplePath]:
        return (self.path(i) for i in range(self.n_paths))

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def index_of(self, t: float) -> int:
        """Largest grid index with t_k <= t"""
        return int(np.searchsorted(self.grid, t + TIME_TOL, side="right") - 1)

    def left_value(self, k: int) -> np.ndarray:
        return self.left_values.get(k, self.values[:, k])

    def fixed_increments(self, k: int) -> np.ndarray:
        """x_{t_k-}^-1 x_{t_k} for every path"""
        return self.group.inverse(self.left_value(k)) @ self.values[:, k]

    def path(self, i: int) -> SamplePath:
        """Rebuild the event list of path ``i``."""
        n = self.values.shape[-1]
        mine = np.flatnonzero(self.jump_paths == i)
        by_cell: Dict[int, List[np.ndarray]] = {}
        for j in mine:
            by_cell.setdefault(int(self.jump_cells[j]), []).append(self.jump_increments[j])
        identity = np.eye(n)
        events: List[PathEvent] = []
        for k in range(1, len(self.grid)):
            t = float(self.grid[k])
            left = self.left_values[k][i] if k in self.left_values else self.values[i, k]
            poissons = by_cell.get(k, [])
            product = identity
            for inc in poissons:
                product = product @ inc
            step = self.group.inverse(self.values[i, k - 1]) @ left @ self.group.inverse(product)
            events.append(PathEvent(t, EventKind.STEP, step))
            events.extend(PathEvent(t, EventKind.POISSON_JUMP, inc) for inc in poissons)
            if k in self.left_values:
                fixed = self.group.inverse(left) @ self.values[i, k]
                if self.group.distance(identity, fixed) > 1e-15:
                    events.append(PathEvent(t, EventKind.FIXED_JUMP, fixed))
        return SamplePath(events, self.values[i, 0].copy(), self.grid.copy())

    @classmethod
    def from_paths(
        cls,
        paths: List[SamplePath],
        group: GroupDescriptor,
        seed: int = 0,
        scheme: Scheme = Scheme.FINITE_VARIATION,
    ) -> "PathEnsemble":
        """Assemble paths (possibly on different grids) onto the union grid."""
        grid = np.unique(np.concatenate([p.grid for p in paths] + [p.times for p in paths if p.events]))
        keep = np.concatenate([[True], np.diff(grid) > TIME_TOL])
        grid = grid[keep]
        values = np.stack([replace(p, grid=grid).values_on_grid(group) for p in paths])
        fixed_idx = sorted({
            int(np.argmin(np.abs(grid - t))) for p in paths for t in p.fixed_jump_times()
        })
        left_values = {k: np.stack([p.left_value_at(grid[k]) for p in paths]) for k in fixed_idx}
        # left value at t excludes everything at t; add back the step and Poisson parts
        for k in fixed_idx:
            for i, p in enumerate(paths):
                value = left_values[k][i]
                for e in p.events:
                    if abs(e.time - grid[k]) <= TIME_TOL and e.kind != EventKind.FIXED_JUMP:
                        value = value @ e.increment
                left_values[k][i] = value
        jp, jc, ji = [], [], []
        for i, p in enumerate(paths):
            for e in p.events:
                if e.kind == EventKind.POISSON_JUMP:
                    jp.append(i)
                    jc.append(int(np.argmin(np.abs(grid - e.time))))
                    ji.append(e.increment)
        n = values.shape[-1]
        return cls(
            group=group,
            grid=grid,
            values=values,
            left_values=left_values,
            jump_paths=np.array(jp, dtype=int),
            jump_cells=np.array(jc, dtype=int),
            jump_increments=np.array(ji).reshape(-1, n, n),
            seed=seed,
            scheme=scheme,
        )

    def subset(self, indices: np.ndarray) -> "PathEnsemble":
        indices = np.asarray(indices, dtype=int)
        remap = -np.ones(self.n_paths, dtype=int)
        remap[indices] = np.arange(indices.size)
        mask = remap[self.jump_paths] >= 0 if self.jump_paths.size else np.zeros(0, dtype=bool)
        return PathEnsemble(
            group=self.group,
            grid=self.grid,
            values=self.values[indices],
            left_values={k: v[indices] for k, v in self.left_values.items()},
            jump_paths=remap[self.jump_paths[mask]],
            jump_cells=self.jump_cells[mask],
            jump_increments=self.jump_increments[mask],
            seed=self.seed,
            scheme=self.scheme,
        )
