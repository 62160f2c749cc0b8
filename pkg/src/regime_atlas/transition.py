"""Time-varying transition matrices between regimes.

Three views over a consecutive stamp pair: the ensemble-wide sudden
switch matrix (Jaccard overlap of memberships), a per-series matrix of
historical pair frequencies, and their composition: the effective
per-series transition, normalized over the whole matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import MappingGrid


@dataclass(frozen=True)
class TransitionMatrix:
    """(K+1)x(K+1) entries indexed by labels 0..K (0 = no observation)."""

    kind: str  # "Q", "Pi" or "Theta"
    from_stamp: int  # 0-based stamp j; matrix covers (j, j+1)
    entries: np.ndarray
    series_index: int | None = None

    @property
    def degenerate(self) -> bool:
        return float(self.entries.sum()) == 0.0


def global_switch(grid: MappingGrid, stamp: int) -> TransitionMatrix:
    """Jaccard overlap of every label cell at ``stamp`` with every cell at
    the next stamp. Empty-vs-empty pairs get 0 under the 0/0 convention."""
    if not 0 <= stamp < grid.n_stamps - 1:
        raise ConfigError(f"stamp must be in 0..{grid.n_stamps - 2}, got {stamp}")
    k1 = grid.n_regimes + 1
    cur = grid.labels[:, stamp]
    nxt = grid.labels[:, stamp + 1]
    counts_cur = np.bincount(cur, minlength=k1).astype(float)
    counts_nxt = np.bincount(nxt, minlength=k1).astype(float)
    inter = np.zeros((k1, k1))
    np.add.at(inter, (cur, nxt), 1.0)
    union = counts_cur[:, None] + counts_nxt[None, :] - inter
    entries = np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)
    return TransitionMatrix(kind="Q", from_stamp=stamp, entries=entries)


def jaccard_matrix(cells_a: list[np.ndarray], cells_b: list[np.ndarray]) -> np.ndarray:
    """Jaccard overlaps between two cell columns (used by forecasting)."""
    k1 = len(cells_a)
    entries = np.zeros((k1, k1))
    sets_b = [set(int(x) for x in c) for c in cells_b]
    for a in range(k1):
        sa = set(int(x) for x in cells_a[a])
        for b in range(k1):
            sb = sets_b[b]
            union = len(sa | sb)
            if union:
                entries[a, b] = len(sa & sb) / union
    return entries


def pair_counts(trajectory: np.ndarray, n_labels: int) -> np.ndarray:
    """Counts of consecutive label pairs along a trajectory."""
    counts = np.zeros((n_labels, n_labels))
    if len(trajectory) >= 2:
        np.add.at(counts, (trajectory[:-1], trajectory[1:]), 1.0)
    return counts


def series_switch(grid: MappingGrid, series_index: int, stamp: int) -> TransitionMatrix:
    """Pair frequencies of one series' trajectory through ``stamp + 1``.

    The division is by trajectory length - 1 globally, so all entries sum
    to one; a too-short trajectory yields the all-zero (degenerate)
    matrix.
    """
    if not 0 <= stamp < grid.n_stamps - 1:
        raise ConfigError(f"stamp must be in 0..{grid.n_stamps - 2}, got {stamp}")
    traj = grid.trajectory(series_index, up_to_stamp=stamp + 2)
    return TransitionMatrix(
        kind="Pi",
        from_stamp=stamp,
        entries=pi_from_trajectory(traj, grid.n_regimes + 1),
        series_index=series_index,
    )


def pi_from_trajectory(trajectory: np.ndarray, n_labels: int) -> np.ndarray:
    if len(trajectory) < 2:
        return np.zeros((n_labels, n_labels))
    return pair_counts(trajectory, n_labels) / (len(trajectory) - 1)


def effective_transition(
    series_matrix: np.ndarray, global_matrix: np.ndarray
) -> np.ndarray:
    """Fuse the series' own history with the ensemble switch matrix.

    Each (a, b) cell multiplies the series' historical frequency of the
    a-to-b switch with the ensemble-wide probability of the same switch;
    the total fused mass normalizes the result so entries sum to one, or
    everything is zero when the fusion carries no mass.
    """
    if series_matrix.shape != global_matrix.shape:
        raise ConfigError("matrices must share shape")
    numerator = series_matrix * global_matrix
    denom = float(numerator.sum())
    if denom <= 0.0:
        return np.zeros_like(numerator)
    return numerator / denom


def effective_transition_matrix(
    pi: TransitionMatrix, q: TransitionMatrix
) -> TransitionMatrix:
    if pi.from_stamp != q.from_stamp:
        raise ConfigError("matrices cover different stamp pairs")
    return TransitionMatrix(
        kind="Theta",
        from_stamp=pi.from_stamp,
        entries=effective_transition(pi.entries, q.entries),
        series_index=pi.series_index,
    )
