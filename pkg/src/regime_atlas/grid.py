"""The regime mapping grid: per-stamp membership of every series.

The grid records, for each window stamp, which regime each series
exhibits; label 0 is reserved for stamps where the series has no fully
observed window. The label matrix is the single source of truth;
cells, trajectories and lifespans are derived views of it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .community import Partition, Profile
from .errors import ConfigError, DataError
from .scanner import WindowedView
from .window_select import RegimeCatalog

NONE_REGIME = 0


@dataclass
class MappingGrid:
    """(K+1) x b regime membership plus per-cell node features."""

    n_regimes: int
    window_size: int
    ids: tuple[str, ...]
    labels: np.ndarray  # (N, b) int, 0 = no observation
    features: dict[tuple[int, int], dict[int, np.ndarray]] = field(default_factory=dict)
    # features[(label, stamp)][series_index] -> embedding vector

    @property
    def n_series(self) -> int:
        return self.labels.shape[0]

    @property
    def n_stamps(self) -> int:
        return self.labels.shape[1]

    def cell(self, label: int, stamp: int) -> np.ndarray:
        """Series indices exhibiting ``label`` at ``stamp`` (ascending)."""
        self._check_stamp(stamp)
        if not 0 <= label <= self.n_regimes:
            raise ConfigError(f"label must be in 0..{self.n_regimes}, got {label}")
        return np.flatnonzero(self.labels[:, stamp] == label)

    def column(self, stamp: int) -> list[np.ndarray]:
        """All K+1 cells of one column, ordered by label 0..K."""
        return [self.cell(r, stamp) for r in range(self.n_regimes + 1)]

    def trajectory(self, series_index: int, up_to_stamp: int | None = None) -> np.ndarray:
        """Regime labels of one series through ``up_to_stamp`` (1-based count)."""
        if not 0 <= series_index < self.n_series:
            raise ConfigError(f"series index {series_index} out of range")
        up_to = self.n_stamps if up_to_stamp is None else up_to_stamp
        if not 1 <= up_to <= self.n_stamps:
            raise ConfigError(f"up_to_stamp must be in 1..{self.n_stamps}, got {up_to}")
        return self.labels[series_index, :up_to].copy()

    def lifespan(self, regime: int) -> tuple[list[np.ndarray], np.ndarray]:
        """Per-stamp member sets and counts of one regime."""
        if not 1 <= regime <= self.n_regimes:
            raise ConfigError(f"regime must be in 1..{self.n_regimes}, got {regime}")
        members = [self.cell(regime, j) for j in range(self.n_stamps)]
        counts = np.array([len(m) for m in members])
        return members, counts

    def check_column_partition(self) -> None:
        """Every series must hold exactly one label in 0..K at every stamp."""
        if (self.labels < 0).any() or (self.labels > self.n_regimes).any():
            raise DataError("grid labels outside 0..K")

    def extend(self, new_labels: np.ndarray) -> None:
        """Append one predicted column."""
        new_labels = np.asarray(new_labels, dtype=int)
        if new_labels.shape != (self.n_series,):
            raise ConfigError("new column must hold one label per series")
        if (new_labels < 0).any() or (new_labels > self.n_regimes).any():
            raise DataError("predicted labels outside 0..K")
        self.labels = np.column_stack([self.labels, new_labels])

    def set_features(self, label: int, stamp: int, vectors: dict[int, np.ndarray]) -> None:
        self.features[(label, stamp)] = {int(i): np.asarray(v, dtype=float) for i, v in vectors.items()}

    def feature_of(self, series_index: int, stamp: int) -> np.ndarray | None:
        label = int(self.labels[series_index, stamp])
        cell = self.features.get((label, stamp))
        if cell is None:
            return None
        return cell.get(series_index)

    def _check_stamp(self, stamp: int) -> None:
        if not 0 <= stamp < self.n_stamps:
            raise ConfigError(f"stamp {stamp} out of range 0..{self.n_stamps - 1}")


def build_grid(
    catalog: RegimeCatalog,
    partitions: list[Partition],
    view: WindowedView,
    ids: tuple[str, ...],
) -> MappingGrid:
    """Populate the grid from the canonicalized per-stamp partitions."""
    n, b = view.n_series, view.n_stamps
    if len(partitions) != b:
        raise ConfigError("need one partition per stamp")
    labels = np.zeros((n, b), dtype=int)
    for part in partitions:
        j = part.stamp
        seen = np.zeros(n, dtype=bool)
        for g, members in enumerate(part.groups):
            label = catalog.assignment[(j, g)]
            if seen[members].any():
                dup = int(members[seen[members]][0])
                raise DataError(f"series {dup} assigned to two groups at stamp {j}")
            seen[members] = True
            labels[members, j] = label
        mismatch = seen != view.observed[:, j]
        if mismatch.any():
            raise DataError(f"partition at stamp {j} does not cover the observed series")
    grid = MappingGrid(
        n_regimes=catalog.n_regimes,
        window_size=catalog.window_size,
        ids=ids,
        labels=labels,
    )
    grid.check_column_partition()
    return grid


def grid_to_json(grid: MappingGrid, profiles: list[Profile]) -> str:
    cells = [
        [grid.cell(r, j).tolist() for j in range(grid.n_stamps)]
        for r in range(grid.n_regimes + 1)
    ]
    features = {
        f"{label},{stamp}": {str(i): v.tolist() for i, v in sorted(vecs.items())}
        for (label, stamp), vecs in sorted(grid.features.items())
    }
    payload = {
        "n_regimes": grid.n_regimes,
        "n_stamps": grid.n_stamps,
        "window_size": grid.window_size,
        "ids": list(grid.ids),
        "cells": cells,
        "features": features,
        "profiles": [
            {"label": r + 1, "shape": p.shape.tolist(), "mean": p.mean, "sd": p.sd}
            for r, p in enumerate(profiles)
        ],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def grid_from_json(text: str) -> tuple[MappingGrid, list[Profile]]:
    payload = json.loads(text)
    n_regimes = payload["n_regimes"]
    b = payload["n_stamps"]
    ids = tuple(payload["ids"])
    labels = np.zeros((len(ids), b), dtype=int)
    for r, rows in enumerate(payload["cells"]):
        for j, members in enumerate(rows):
            labels[np.asarray(members, dtype=int), j] = r
    grid = MappingGrid(
        n_regimes=n_regimes,
        window_size=payload["window_size"],
        ids=ids,
        labels=labels,
    )
    for key, vecs in payload["features"].items():
        label, stamp = (int(p) for p in key.split(","))
        grid.set_features(label, stamp, {int(i): np.asarray(v) for i, v in vecs.items()})
    profiles = [
        Profile(shape=np.asarray(p["shape"]), mean=p["mean"], sd=p["sd"])
        for p in payload["profiles"]
    ]
    return grid, profiles


def heatmap_rows(grid: MappingGrid) -> list[list[float]]:
    """Per-regime, per-stamp occupancy fractions (last row = no observation)."""
    n = grid.n_series
    rows = []
    for r in list(range(1, grid.n_regimes + 1)) + [NONE_REGIME]:
        rows.append([len(grid.cell(r, j)) / n for j in range(grid.n_stamps)])
    return rows
