"""Core data containers: time grids, snapshot series, trajectory sets and
coefficient series, plus the CSV/JSON file formats used to persist them.

All containers are frozen dataclasses holding read-only float64 arrays.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed time grids or datasets."""


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Ordered observation times.

    ``span`` is the raw interval that is mapped onto [0, 1] on rescaling. It
    defaults to the first and last grid time, but a sub-grid (e.g. two
    snapshots out of a longer experiment) can carry the span of the parent
    experiment so that all of its datasets share one clock.
    """

    times: np.ndarray
    rescaled: bool = False
    span: Optional[tuple] = None
    original: Optional["TimeGrid"] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        t = _frozen(self.times)
        if t.ndim != 1 or t.size < 1:
            raise DatasetError("time grid must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(t)):
            raise DatasetError("time grid contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise DatasetError("time grid must be strictly increasing")
        object.__setattr__(self, "times", t)
        span = self.span
        if span is None:
            span = (float(t[0]), float(t[-1]))
        span = (float(span[0]), float(span[1]))
        if span[0] > t[0] or span[1] < t[-1]:
            raise DatasetError(f"span {span} does not contain the grid times")
        object.__setattr__(self, "span", span)

    def __len__(self):
        return self.times.size

    def subgrid(self, indices: Sequence[int]) -> "TimeGrid":
        """Grid restricted to ``indices``, keeping this grid's span."""
        return TimeGrid(self.times[list(indices)], rescaled=self.rescaled, span=self.span)


def rescale_time_grid(grid: TimeGrid) -> TimeGrid:
    """Map ``grid.span`` affinely onto [0, 1].

    The raw grid is kept in ``original`` for reporting.
    """
    if grid.rescaled:
        raise DatasetError("time grid is already rescaled")
    t0, t1 = grid.span
    if t1 == t0:
        raise DatasetError("cannot rescale a degenerate time grid (t_max == t_min)")
    times = (grid.times - t0) / (t1 - t0)
    # pin the endpoints against rounding
    if grid.times[0] == t0:
        times[0] = 0.0
    if grid.times[-1] == t1:
        times[-1] = 1.0
    return TimeGrid(times, rescaled=True, span=(0.0, 1.0), original=grid)


@dataclass(frozen=True)
class SnapshotSeries:
    """Unpaired population samples, one ``(n_r, d)`` array per grid time."""

    grid: TimeGrid
    samples: tuple

    def __post_init__(self):
        samples = tuple(_frozen(np.atleast_2d(s)) for s in self.samples)
        if len(samples) != len(self.grid):
            raise DatasetError(
                f"{len(samples)} sample sets for a grid of {len(self.grid)} times"
            )
        object.__setattr__(self, "samples", samples)

    @property
    def d(self) -> int:
        return self.samples[0].shape[1]

    def pooled(self) -> np.ndarray:
        return np.concatenate(self.samples, axis=0)


@dataclass(frozen=True)
class TrajectorySet:
    """``K`` paired paths stored as a ``(K, R+1, d)`` array aligned to ``grid``."""

    grid: TimeGrid
    paths: np.ndarray

    def __post_init__(self):
        paths = _frozen(self.paths)
        if paths.ndim != 3:
            raise DatasetError("trajectory array must have shape (K, R+1, d)")
        if paths.shape[1] != len(self.grid):
            raise DatasetError(
                f"length mismatch: paths have {paths.shape[1]} points, grid has {len(self.grid)} times"
            )
        object.__setattr__(self, "paths", paths)

    @property
    def K(self) -> int:
        return self.paths.shape[0]

    @property
    def d(self) -> int:
        return self.paths.shape[2]

    def subset(self, indices) -> "TrajectorySet":
        return TrajectorySet(self.grid, self.paths[np.asarray(indices)])

    def to_snapshots(self, time_indices=None) -> SnapshotSeries:
        """Discard the pairing and keep the population at each time."""
        if time_indices is None:
            time_indices = range(len(self.grid))
        time_indices = list(time_indices)
        return SnapshotSeries(
            self.grid.subgrid(time_indices), tuple(self.paths[:, r, :] for r in time_indices)
        )


@dataclass(frozen=True)
class Dataset:
    """A snapshot series, a trajectory set, or both sharing one clock."""

    name: str
    snapshots: Optional[SnapshotSeries] = None
    trajectories: Optional[TrajectorySet] = None

    def __post_init__(self):
        if self.snapshots is None and self.trajectories is None:
            raise DatasetError(f"dataset {self.name!r} is empty")
        if self.snapshots is not None and self.trajectories is not None:
            if self.snapshots.grid.span != self.trajectories.grid.span:
                raise DatasetError("snapshot and trajectory grids have different spans")

    @property
    def kind(self) -> str:
        if self.snapshots is not None and self.trajectories is not None:
            return "integrated"
        return "snapshot" if self.snapshots is not None else "trajectory"

    @property
    def span(self) -> tuple:
        grid = self.snapshots.grid if self.snapshots is not None else self.trajectories.grid
        return grid.span

    @property
    def d(self) -> int:
        return self.snapshots.d if self.snapshots is not None else self.trajectories.d

    def all_points(self) -> np.ndarray:
        parts = []
        if self.snapshots is not None:
            parts.append(self.snapshots.pooled())
        if self.trajectories is not None:
            parts.append(self.trajectories.paths.reshape(-1, self.trajectories.d))
        return np.concatenate(parts, axis=0)


@dataclass(frozen=True)
class CoefficientSeries:
    """Galerkin coefficients ``c_r`` (rows of ``coeffs``) on a grid."""

    grid: TimeGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(np.atleast_2d(self.coeffs))
        if c.shape[0] != len(self.grid):
            raise DatasetError("one coefficient vector per grid time is required")
        if np.any(c < 0) or np.any(np.abs(c.sum(axis=1) - 1.0) > 1e-10):
            raise DatasetError("coefficient vectors must lie on the probability simplex")
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.coeffs.shape[1]


def validate_dataset(ds) -> list:
    """Return a list of human-readable findings; empty means well formed.

    Accepts a :class:`Dataset` or the raw parts (anything with ``samples`` or
    ``paths``). Never raises.
    """
    findings = []
    parts = []
    if isinstance(ds, Dataset):
        parts = [p for p in (ds.snapshots, ds.trajectories) if p is not None]
    else:
        parts = [ds]
    dims = set()
    for part in parts:
        times = np.asarray(getattr(part.grid, "times", part.grid), dtype=float)
        if times.size < 2:
            findings.append("time grid has fewer than 2 entries")
        if np.any(np.diff(times) <= 0):
            findings.append("non-monotone time grid")
        if hasattr(part, "samples"):
            if len(part.samples) != times.size:
                findings.append("length mismatch: sample sets vs. grid times")
            for r, s in enumerate(part.samples):
                s = np.asarray(s, dtype=float)
                if s.size == 0:
                    findings.append(f"empty snapshot at time index {r}")
                    continue
                s = np.atleast_2d(s)
                dims.add(s.shape[1])
                if not np.all(np.isfinite(s)):
                    findings.append(f"non-finite coordinate at time index {r}")
        if hasattr(part, "paths"):
            for k, path in enumerate(part.paths):
                path = np.asarray(path, dtype=float)
                if path.shape[0] != times.size:
                    findings.append(f"length mismatch: trajectory {k} has {path.shape[0]} points")
                if path.size:
                    dims.add(np.atleast_2d(path).shape[-1])
                if not np.all(np.isfinite(path)):
                    findings.append(f"non-finite coordinate in trajectory {k}")
    if len(dims) > 1:
        findings.append(f"dimension mismatch: {sorted(dims)}")
    return findings


# -- file formats -----------------------------------------------------------

def write_grid(path, grid: TimeGrid) -> None:
    payload = {"times": [float(t) for t in grid.times]}
    if grid.span != (float(grid.times[0]), float(grid.times[-1])):
        payload["span"] = list(grid.span)
    Path(path).write_text(json.dumps(payload) + "\n")


def read_grid(path) -> TimeGrid:
    payload = json.loads(Path(path).read_text())
    if "times" not in payload:
        raise DatasetError(f"{path}: missing 'times'")
    return TimeGrid(payload["times"], span=payload.get("span"))


def grid_path_for(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".grid.json")


def write_samples_csv(path, dataset: Dataset, grid: TimeGrid) -> None:
    """Write ``dataset`` with ``time_index`` relative to ``grid``.

    Snapshot rows use ``entity_id = -1``; trajectory rows use the path index.
    """
    d = dataset.d
    lookup = {float(t): i for i, t in enumerate(grid.times)}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_index", "entity_id"] + [f"x{i + 1}" for i in range(d)])
        if dataset.snapshots is not None:
            s = dataset.snapshots
            for t, pts in zip(s.grid.times, s.samples):
                ti = lookup[float(t)]
                for x in pts:
                    w.writerow([ti, -1] + [repr(float(v)) for v in x])
        if dataset.trajectories is not None:
            tr = dataset.trajectories
            tidx = [lookup[float(t)] for t in tr.grid.times]
            for k, path in enumerate(tr.paths):
                for ti, x in zip(tidx, path):
                    w.writerow([ti, k] + [repr(float(v)) for v in x])


def read_samples_csv(path, grid: Optional[TimeGrid] = None, name: Optional[str] = None) -> Dataset:
    """Read a samples CSV (and its sibling ``.grid.json`` unless ``grid`` is given)."""
    path = Path(path)
    if grid is None:
        grid = read_grid(grid_path_for(path))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["time_index", "entity_id"]:
            raise DatasetError(f"{path}: bad header {header}")
        rows = [r for r in reader if r]
    if not rows:
        raise DatasetError(f"{path}: no samples")
    data = np.array(rows, dtype=float)
    tidx = data[:, 0].astype(int)
    ent = data[:, 1].astype(int)
    x = data[:, 2:]
    if np.any(tidx < 0) or np.any(tidx >= len(grid)):
        raise DatasetError(f"{path}: time_index outside the grid")

    snapshots = None
    snap = ent == -1
    if snap.any():
        used = sorted(set(tidx[snap].tolist()))
        snapshots = SnapshotSeries(
            grid.subgrid(used), tuple(x[snap & (tidx == r)] for r in used)
        )

    trajectories = None
    traj = ent >= 0
    if traj.any():
        used = sorted(set(tidx[traj].tolist()))
        ids = sorted(set(ent[traj].tolist()))
        paths = np.full((len(ids), len(used), x.shape[1]), np.nan)
        kpos = {e: i for i, e in enumerate(ids)}
        rpos = {r: i for i, r in enumerate(used)}
        seen = np.zeros(paths.shape[:2], dtype=bool)
        for e, r, xi in zip(ent[traj], tidx[traj], x[traj]):
            paths[kpos[e], rpos[r]] = xi
            seen[kpos[e], rpos[r]] = True
        if not seen.all():
            raise DatasetError(f"{path}: length mismatch, some trajectories miss grid times")
        trajectories = TrajectorySet(grid.subgrid(used), paths)

    return Dataset(name or path.stem, snapshots=snapshots, trajectories=trajectories)



@dataclass(frozen=True)
class TrajectoryCoefficients:
    """Per-path Galerkin coefficients, shape ``(K, R+1, N)``.

    Rows are NaN where the observed point fell outside every basis support.
    """

    grid: TimeGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.ndim != 3 or c.shape[1] != len(self.grid):
            raise DatasetError("trajectory coefficients must have shape (K, R+1, N)")
        object.__setattr__(self, "coeffs", c)

    @property
    def K(self) -> int:
        return self.coeffs.shape[0]

    @property
    def N(self) -> int:
        return self.coeffs.shape[2]
