"""Solutions, grid archives, uniform selection and archive metrics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .morphology import MorphologyGenome
from .neuro import ControllerGenome


@dataclass(eq=False)
class Solution:
    morphology: MorphologyGenome
    controller: ControllerGenome
    fitness: float = math.nan
    trajectories: np.ndarray | None = None  # (n_targets, n_samples, 2)
    mean_distances: np.ndarray | None = None
    id: int = -1  # run-local, normally the index of the evaluation that produced it

    @property
    def evaluated(self) -> bool:
        return not math.isnan(self.fitness)

    @property
    def sensory_data(self) -> np.ndarray:
        if self.trajectories is None:
            raise ValueError("solution has not been evaluated")
        return np.asarray(self.trajectories).reshape(-1)

    @property
    def morphology_descriptor(self) -> tuple[int, int]:
        return self.morphology.descriptor


Cell = tuple[int, ...]


class Archive:
    """Grid archive keeping the lowest-fitness solution per cell."""

    def __init__(self, dims: Iterable[int], name: str = ""):
        self.dims = tuple(int(d) for d in dims)
        self.name = name
        self.cells: dict[Cell, Solution] = {}

    def __len__(self):
        return len(self.cells)

    def __contains__(self, cell):
        return tuple(cell) in self.cells

    def __getitem__(self, cell) -> Solution:
        return self.cells[tuple(cell)]

    def _check(self, cell) -> Cell:
        cell = tuple(int(c) for c in cell)
        if len(cell) != len(self.dims) or any(not 0 <= c < d for c, d in zip(cell, self.dims)):
            raise IndexError(f"cell {cell} outside archive of shape {self.dims}")
        return cell

    def add(self, solution: Solution, cell) -> str:
        """Insert if the cell is empty or the solution is strictly better.

        Returns "inserted", "replaced" or "rejected".
        """
        cell = self._check(cell)
        cur = self.cells.get(cell)
        if cur is None:
            self.cells[cell] = solution
            return "inserted"
        if solution.fitness < cur.fitness:
            self.cells[cell] = solution
            return "replaced"
        return "rejected"

    def occupied(self) -> list[Cell]:
        return sorted(self.cells)

    def solutions(self) -> list[Solution]:
        return [self.cells[c] for c in self.occupied()]

    def items(self) -> list[tuple[Cell, Solution]]:
        return [(c, self.cells[c]) for c in self.occupied()]

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def coverage(self) -> float:
        return len(self.cells) / self.size

    def qd_score(self, initial_distance: float) -> float:
        """Sum over occupied cells of the distance closed, in centimetres."""
        return float(sum((initial_distance - s.fitness) * 100.0 for s in self.cells.values()))

    def best(self) -> Solution | None:
        if not self.cells:
            return None
        return min(self.solutions(), key=lambda s: s.fitness)

    def copy(self) -> "Archive":
        a = Archive(self.dims, self.name)
        a.cells = dict(self.cells)
        return a

    def fitness_grid(self) -> np.ndarray:
        g = np.full(self.dims, np.nan)
        for c, s in self.cells.items():
            g[c] = s.fitness
        return g


def reinsert(archive: Archive, descriptor: Callable[[Solution], Cell]) -> Archive:
    """Rebuild an archive under a new descriptor function.

    Occupants are inserted in ascending order of their previous cell, so when
    two collide the earlier one keeps the cell unless the later is strictly
    better.
    """
    new = Archive(archive.dims, archive.name)
    for _, sol in archive.items():
        new.add(sol, descriptor(sol))
    return new


def random_selection(archives: list[Archive], batch_size: int, rng: np.random.Generator) -> list[Solution]:
    """Uniform selection with replacement over occupied cells.

    The batch is split evenly across archives, remainder going to the first.
    """
    share, extra = divmod(batch_size, len(archives))
    out = []
    for k, archive in enumerate(archives):
        n = share + (1 if k < extra else 0)
        cells = archive.occupied()
        if not cells:
            raise ValueError(f"cannot select from empty archive {archive.name!r}")
        for i in rng.integers(len(cells), size=n):
            out.append(archive.cells[cells[int(i)]])
    return out


def fitness_heatmap(archive: Archive, initial_distance: float | None = None) -> np.ndarray:
    """2-D matrix for display: the archive grid itself, or for 4-D archives the
    best value over the trailing two dimensions.  Values are raw fitness (m)
    or, with ``initial_distance``, distance closed in cm.  Empty cells are NaN."""
    grid = archive.fitness_grid()
    if grid.ndim > 2:
        with np.errstate(all="ignore"):
            flat = grid.reshape(grid.shape[0], grid.shape[1], -1)
            empty = np.all(np.isnan(flat), axis=2)
            grid = np.where(empty, np.nan, np.nanmin(np.where(np.isnan(flat), np.inf, flat), axis=2))
    if initial_distance is not None:
        grid = (initial_distance - grid) * 100.0
    return grid


def write_heatmap_csv(path, matrix: np.ndarray):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in matrix:
            w.writerow(["" if math.isnan(v) else repr(float(v)) for v in row])


def read_heatmap_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[math.nan if v == "" else float(v) for v in row] for row in csv.reader(fh)])


# --------------------------------------------------------------------------
# CSV round trip


def export_archive(archive: Archive, directory, initial_distance: float | None = None,
                   filename: str | None = None) -> Path:
    """Write ``<name>.csv`` plus one controller JSON per solution.

    Columns: the cell indices, fitness (m), distance closed (cm, if
    ``initial_distance`` is given), the morphology record and the path of the
    controller file relative to ``directory``.
    """
    directory = Path(directory)
    ctrl_dir = directory / "controllers"
    ctrl_dir.mkdir(parents=True, exist_ok=True)
    path = directory / (filename or f"{archive.name or 'archive'}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"c{i}" for i in range(len(archive.dims))]
                   + ["fitness_m", "fitness_cm", "morphology", "controller", "solution_id"])
        for cell, sol in archive.items():
            tag = sol.id if sol.id >= 0 else "_".join(map(str, cell))
            rel = f"controllers/{tag}.json"
            (directory / rel).write_text(sol.controller.to_record())
            fs = "" if initial_distance is None else repr(float((initial_distance - sol.fitness) * 100.0))
            w.writerow(list(cell) + [repr(float(sol.fitness)), fs, sol.morphology.to_record(), rel, sol.id])
    return path


def import_archive(path, dims: Iterable[int] | None = None, name: str | None = None) -> Archive:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, rows = rows[0], rows[1:]
    n_dims = sum(1 for h in header if h.startswith("c") and h[1:].isdigit())
    if dims is None:
        dims = [max((int(r[i]) for r in rows), default=0) + 1 for i in range(n_dims)]
    a = Archive(dims, name if name is not None else path.stem)
    col = {h: k for k, h in enumerate(header)}
    for r in rows:
        cell = tuple(int(v) for v in r[:n_dims])
        ctrl = ControllerGenome.from_record((path.parent / r[col["controller"]]).read_text())
        sol = Solution(MorphologyGenome.from_record(r[col["morphology"]]), ctrl, float(r[col["fitness_m"]]),
                       id=int(r[col["solution_id"]]))
        a.cells[cell] = sol
    return a
