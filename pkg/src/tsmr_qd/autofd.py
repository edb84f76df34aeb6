"""Automatically defined feature descriptors.

Sensory data (flattened head trajectories) are standardized, projected on the
first principal components and discretized into equal-width bins.  The
projection is refit on the archive occupants at scheduled generations, and
bin bounds grow whenever a new batch falls outside them; in both cases the
archive is rebuilt under the new mapping.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .qd import Archive, Cell, Solution, reinsert

PAPER_SCHEDULE = (0, 50, 150, 350, 750, 1550)
DESK_SCHEDULE = (0, 10, 30, 70)


class OutOfBoundsError(ValueError):
    pass


@dataclass
class Standardizer:
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    constant: np.ndarray | None = None

    def fit(self, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.constant = std <= 1e-12 * np.maximum(1.0, np.abs(self.mean))
        self.scale = np.where(self.constant, 1.0, std)
        return self

    def transform(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        Z[:, self.constant] = 0.0
        return Z


@dataclass
class PCA:
    n_components: int = 2
    components: np.ndarray | None = None  # (n_components, n_features)
    explained_variance: np.ndarray | None = None

    def fit(self, Z) -> "PCA":
        Z = np.asarray(Z, dtype=np.float64)
        if Z.shape[0] < 2:
            raise ValueError("PCA needs at least two samples")
        Zc = Z - Z.mean(axis=0)
        _, s, vt = np.linalg.svd(Zc, full_matrices=False)
        comps = np.zeros((self.n_components, Z.shape[1]))
        var = np.zeros(self.n_components)
        k = min(self.n_components, vt.shape[0])
        comps[:k] = vt[:k]
        var[:k] = s[:k] ** 2 / (Z.shape[0] - 1)
        for i in range(k):
            j = int(np.argmax(np.abs(comps[i])))
            if comps[i, j] < 0:
                comps[i] = -comps[i]
        self.components = comps
        self.explained_variance = var
        return self

    def transform(self, Z) -> np.ndarray:
        # row by row, so a row's projection does not depend on the batch it came in
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        return np.array([self.components @ z for z in Z]).reshape(len(Z), -1)


def equal_width_edges(lo: float, hi: float, n_bins: int) -> np.ndarray:
    if not hi - lo > 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, n_bins + 1)


def bin_index(value: float, edges: np.ndarray) -> int:
    """Bin of ``value``; boundary values go to the upper bin, the top edge to the last bin."""
    if not edges[0] <= value <= edges[-1]:
        raise OutOfBoundsError(f"{value} outside [{edges[0]}, {edges[-1]}]")
    i = int(np.searchsorted(edges, value, side="right")) - 1
    return min(i, len(edges) - 2)


@dataclass
class FeatureProjector:
    n_bins: tuple[int, ...] = (9, 10)
    standardizer: Standardizer = field(default_factory=Standardizer)
    pca: PCA | None = None
    edges: list[np.ndarray] = field(default_factory=list)
    fitted: bool = False

    def __post_init__(self):
        self.n_bins = tuple(self.n_bins)
        if self.pca is None:
            self.pca = PCA(len(self.n_bins))

    def fit(self, X) -> "FeatureProjector":
        """Fit standardization, axes and bounds on the rows of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 3:
            raise ValueError("fitting needs at least three rows of sensory data")
        self.standardizer.fit(X)
        self.pca.fit(self.standardizer.transform(X))
        self.fitted = True
        self.recompute_bounds(self.transform(X))
        return self

    def transform(self, X) -> np.ndarray:
        if not self.fitted:
            raise RuntimeError("projector is not fitted")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.pca.transform(self.standardizer.transform(X))

    def recompute_bounds(self, values) -> None:
        values = np.atleast_2d(values)
        self.edges = [equal_width_edges(values[:, i].min(), values[:, i].max(), n)
                      for i, n in enumerate(self.n_bins)]

    def out_of_bounds(self, values) -> np.ndarray:
        values = np.atleast_2d(values)
        lo = np.array([e[0] for e in self.edges])
        hi = np.array([e[-1] for e in self.edges])
        return np.any((values < lo) | (values > hi), axis=1)

    def discretize(self, values) -> Cell:
        values = np.ravel(values)
        return tuple(bin_index(float(v), e) for v, e in zip(values, self.edges))

    def cell(self, sensory) -> Cell:
        return self.discretize(self.transform(sensory)[0])

    def clamped_cell(self, sensory) -> tuple[Cell, bool]:
        """Cell with values clamped into the bounds, and whether clamping happened."""
        v = self.transform(sensory)[0]
        lo = np.array([e[0] for e in self.edges])
        hi = np.array([e[-1] for e in self.edges])
        c = np.clip(v, lo, hi)
        return self.discretize(c), bool(np.any(c != v))

    def to_dict(self) -> dict:
        return {
            "n_bins": list(self.n_bins),
            "mean": self.standardizer.mean.tolist(),
            "scale": self.standardizer.scale.tolist(),
            "constant": self.standardizer.constant.tolist(),
            "components": self.pca.components.tolist(),
            "explained_variance": self.pca.explained_variance.tolist(),
            "edges": [e.tolist() for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureProjector":
        p = cls(tuple(d["n_bins"]))
        p.standardizer = Standardizer(np.array(d["mean"]), np.array(d["scale"]), np.array(d["constant"], dtype=bool))
        p.pca = PCA(len(p.n_bins), np.array(d["components"]), np.array(d["explained_variance"]))
        p.edges = [np.array(e) for e in d["edges"]]
        p.fitted = True
        return p


def _sensory(solutions: Sequence[Solution]) -> np.ndarray:
    return np.stack([s.sensory_data for s in solutions])


@dataclass
class AutoMap:
    """An archive whose trailing dimensions come from a :class:`FeatureProjector`.

    ``prefix`` maps a solution to the leading, hand-defined part of its cell
    (empty for a purely automatic archive).
    """

    archive: Archive
    projector: FeatureProjector
    schedule: tuple[int, ...] = PAPER_SCHEDULE
    prefix: Callable[[Solution], Cell] = lambda s: ()
    trace: list[dict] = field(default_factory=list)

    def descriptor(self, sol: Solution) -> Cell:
        return tuple(self.prefix(sol)) + self.projector.cell(sol.sensory_data)

    def _log(self, generation: int, op: str, **extra):
        self.trace.append({"generation": generation, "op": op, **extra})

    def _reinsert(self, generation: int):
        before = len(self.archive)
        self.archive = reinsert(self.archive, self.descriptor)
        # occupants whose stored cell disagrees with a fresh projection (should be 0)
        stale = sum(self.descriptor(s) != c for c, s in self.archive.items())
        self._log(generation, "reinsert", before=before, after=len(self.archive), stale=stale)

    def add_batch(self, batch: Sequence[Solution], generation: int) -> list[str]:
        X = _sensory(batch)
        if not self.projector.fitted:
            self.projector.fit(X)
            self._log(generation, "fit", rows=len(X))
        elif generation in self.schedule:
            occupants = self.archive.solutions()
            if len(occupants) >= 3:
                self.projector.fit(_sensory(occupants))
                self._log(generation, "refit", rows=len(occupants))
                self._reinsert(generation)
            else:
                self._log(generation, "refit_skipped", rows=len(occupants))
        values = self.projector.transform(X)
        self._log(generation, "transform", rows=len(X))
        if self.projector.out_of_bounds(values).any():
            self._log(generation, "out_of_bounds", rows=int(self.projector.out_of_bounds(values).sum()))
            occupants = self.archive.solutions()
            allv = values if not occupants else np.vstack([self.projector.transform(_sensory(occupants)), values])
            self.projector.recompute_bounds(allv)
            self._log(generation, "recompute_bounds")
            self._reinsert(generation)
            values = self.projector.transform(X)
            self._log(generation, "transform", rows=len(X))
        results = []
        for sol, v in zip(batch, values):
            cell = tuple(self.prefix(sol)) + self.projector.discretize(v)
            results.append(self.archive.add(sol, cell))
        self._log(generation, "insert", rows=len(batch), accepted=sum(r != "rejected" for r in results))
        return results
