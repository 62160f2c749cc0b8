"""Window splitting, symbolic discretization and per-stamp network build.

Every series is cut into contiguous windows of a fixed size; fully
observed windows are discretized on a 10-symbol scale and projected into
a weighted network whose edge weights count positions where two windows
share the same symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .panel import SeriesPanel

N_SYMBOLS = 10

_VALUE_TOL = 1e-9


@dataclass(frozen=True)
class WindowedView:
    """Panel re-shaped into per-stamp windows.

    ``values[i, j]`` is the window of series i at stamp j (length equals
    the window size); ``observed[i, j]`` is False when that window has at
    least one missing point, in which case the series feeds the
    none-regime row downstream.
    """

    window_size: int
    values: np.ndarray  # (N, b, window_size)
    observed: np.ndarray  # (N, b) bool

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def n_stamps(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class StampNetwork:
    """Weighted similarity network among observed windows at one stamp."""

    stamp: int  # 0-based window stamp
    node_ids: np.ndarray  # series indices of observed windows, ascending
    weights: np.ndarray  # (n, n) symmetric int, zero diagonal

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def edges(self):
        """Yield (i, k, weight) over the upper triangle, positive weights only."""
        n = self.n_nodes
        for a in range(n):
            for b in range(a + 1, n):
                w = self.weights[a, b]
                if w > 0:
                    yield int(self.node_ids[a]), int(self.node_ids[b]), int(w)


def window_split(panel: SeriesPanel, window_size: int) -> WindowedView:
    """Partition the panel into windows, dropping the trailing remainder."""
    m = panel.n_stamps
    if window_size < 2 or window_size > m:
        raise ConfigError(f"window size must be in [2, {m}], got {window_size}")
    b = m // window_size
    vals = panel.values[:, : b * window_size].reshape(panel.n_series, b, window_size)
    observed = ~np.isnan(vals).any(axis=2)
    return WindowedView(window_size=window_size, values=vals, observed=observed)


def sax_encode(values: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to symbol indices 0..9.

    Bins are half-open [a/10, (a+1)/10) with 1.0 clamped into the last
    bin. Values outside [0, 1] beyond a small tolerance are rejected.
    """
    values = np.asarray(values, dtype=float)
    if np.isnan(values).any():
        raise DataError("cannot SAX-encode a window with missing values")
    if (values < -_VALUE_TOL).any() or (values > 1 + _VALUE_TOL).any():
        bad = values[(values < -_VALUE_TOL) | (values > 1 + _VALUE_TOL)][0]
        raise DataError(f"value {bad!r} outside [0, 1]")
    clipped = np.clip(values, 0.0, 1.0)
    return np.minimum((clipped * N_SYMBOLS).astype(int), N_SYMBOLS - 1)


def membership_matrix(symbols: np.ndarray) -> np.ndarray:
    """One-hot (rows x 10*window) indicator of each position's symbol.

    Column block [10*l, 10*(l+1)) encodes the symbol at position l, so the
    product with its own transpose counts shared (position, symbol) pairs.
    """
    n, rho = symbols.shape
    out = np.zeros((n, rho * N_SYMBOLS), dtype=np.float32)
    rows = np.repeat(np.arange(n), rho)
    cols = (np.arange(rho) * N_SYMBOLS)[None, :] + symbols
    out[rows, cols.ravel()] = 1.0
    return out


def build_network(view: WindowedView, stamp: int) -> StampNetwork:
    """Build the weighted network of observed windows at one stamp."""
    node_ids = np.flatnonzero(view.observed[:, stamp])
    if len(node_ids) == 0:
        return StampNetwork(
            stamp=stamp,
            node_ids=node_ids,
            weights=np.zeros((0, 0), dtype=np.int64),
        )
    symbols = sax_encode(view.values[node_ids, stamp])
    delta = membership_matrix(symbols)
    weights = np.rint(delta @ delta.T).astype(np.int64)
    np.fill_diagonal(weights, 0)
    return StampNetwork(stamp=stamp, node_ids=node_ids, weights=weights)


def scan(panel: SeriesPanel, window_size: int) -> tuple[WindowedView, list[StampNetwork]]:
    """Window the panel and build one network per stamp."""
    view = window_split(panel, window_size)
    networks = [build_network(view, j) for j in range(view.n_stamps)]
    return view, networks


def dump_network(network: StampNetwork, path: str) -> None:
    """Write an `i k weight` edge list for inspection."""
    with open(path, "w") as fh:
        for i, k, w in network.edges():
            fh.write(f"{i} {k} {w}\n")
