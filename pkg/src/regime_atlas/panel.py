"""Series ensemble container, CSV ingestion and per-series normalization.

A panel holds N aligned univariate series over m time stamps. Values are
stored min-max normalized into [0, 1]; missing observations are NaN. The
original per-series (min, max) is kept so present values round-trip
exactly back to their raw scale.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

_CONSTANT_FILL = 0.5


@dataclass(frozen=True)
class ScaleInfo:
    """Per-series scaling metadata used for denormalization."""

    vmin: np.ndarray
    vmax: np.ndarray
    constant: np.ndarray  # bool, series had a single distinct value
    all_missing: np.ndarray  # bool, series had no present value at all


@dataclass(frozen=True)
class SeriesPanel:
    """Immutable ensemble of N series over m stamps, normalized to [0, 1].

    ``values[i, l]`` is NaN exactly where the observation is missing; the
    boolean ``gap_mask`` exposes the same information positionally.
    """

    values: np.ndarray  # (N, m) float64, normalized, NaN = missing
    ids: tuple[str, ...]
    scale: ScaleInfo

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def n_stamps(self) -> int:
        return self.values.shape[1]

    @property
    def gap_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def denormalize(self, normalized: np.ndarray | None = None) -> np.ndarray:
        """Map normalized values back to the original per-series scale."""
        v = self.values if normalized is None else np.asarray(normalized, dtype=float)
        span = self.scale.vmax - self.scale.vmin
        out = self.scale.vmin[:, None] + v * span[:, None]
        const = self.scale.constant
        if const.any():
            out[const] = np.where(np.isnan(v[const]), np.nan, self.scale.vmin[const, None])
        return out

    def denormalize_series(self, series_index: int, values: np.ndarray) -> np.ndarray:
        """Denormalize a vector belonging to one series."""
        values = np.asarray(values, dtype=float)
        if self.scale.constant[series_index]:
            return np.full_like(values, self.scale.vmin[series_index])
        lo = self.scale.vmin[series_index]
        hi = self.scale.vmax[series_index]
        return lo + values * (hi - lo)

    def with_gaps(self, extra_mask: np.ndarray) -> "SeriesPanel":
        """Return a copy with additional positions blanked out."""
        extra_mask = np.asarray(extra_mask, dtype=bool)
        if extra_mask.shape != self.values.shape:
            raise ConfigError("gap mask shape does not match panel shape")
        vals = self.values.copy()
        vals[extra_mask] = np.nan
        return SeriesPanel(values=vals, ids=self.ids, scale=self.scale)


@dataclass
class PanelWarnings:
    """Non-fatal conditions noticed during ingestion."""

    all_missing_series: list[str] = field(default_factory=list)
    constant_series: list[str] = field(default_factory=list)


def normalize_raw(
    raw: np.ndarray, ids: tuple[str, ...], mode: str = "per-series"
) -> tuple[SeriesPanel, PanelWarnings]:
    """Min-max normalize over present values, per series or panel-wide.

    Per-series scaling makes symbols comparable across heterogeneous
    ranges; the global mode keeps identical raw shapes identical after
    scaling, which suits ensembles drawn from shared generators.
    Constant series map to the mid-scale value and are flagged; series
    with no present values keep their NaNs and are flagged as well.
    """
    if mode not in ("per-series", "global"):
        raise ConfigError(f"unknown normalization mode {mode!r}")
    raw = np.asarray(raw, dtype=float)
    n = raw.shape[0]
    vmin = np.full(n, np.nan)
    vmax = np.full(n, np.nan)
    constant = np.zeros(n, dtype=bool)
    all_missing = np.zeros(n, dtype=bool)
    warnings = PanelWarnings()
    out = np.full_like(raw, np.nan)
    if mode == "global" and not np.isnan(raw).all():
        global_lo = float(np.nanmin(raw))
        global_hi = float(np.nanmax(raw))
    for i in range(n):
        row = raw[i]
        present = ~np.isnan(row)
        if not present.any():
            all_missing[i] = True
            warnings.all_missing_series.append(ids[i])
            continue
        if mode == "global":
            lo, hi = global_lo, global_hi
        else:
            lo = row[present].min()
            hi = row[present].max()
        vmin[i] = lo
        vmax[i] = hi
        if hi == lo:
            constant[i] = True
            warnings.constant_series.append(ids[i])
            out[i, present] = _CONSTANT_FILL
        else:
            out[i, present] = (row[present] - lo) / (hi - lo)
    panel = SeriesPanel(
        values=out,
        ids=ids,
        scale=ScaleInfo(vmin=vmin, vmax=vmax, constant=constant, all_missing=all_missing),
    )
    return panel, warnings


def load_csv(
    path: str, layout: str = "rows=time", normalization: str = "per-series"
) -> tuple[SeriesPanel, np.ndarray, PanelWarnings]:
    """Parse a CSV file into a normalized panel plus its gap mask.

    ``rows=time``: header row holds series ids, each following row is one
    time stamp. ``rows=series``: no header, first cell of each row is the
    series id and the rest are that series' values. Empty cells are
    missing observations.
    """
    if layout not in ("rows=time", "rows=series"):
        raise ConfigError(f"unknown layout {layout!r}; use rows=time or rows=series")
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: empty CSV")

    def parse_cell(cell: str, where: str) -> float:
        cell = cell.strip()
        if cell == "":
            return np.nan
        try:
            return float(cell)
        except ValueError:
            raise DataError(f"{path}: non-numeric cell {cell!r} at {where}") from None

    if layout == "rows=time":
        ids = tuple(c.strip() for c in rows[0])
        width = len(ids)
        data = []
        for rno, row in enumerate(rows[1:], start=2):
            if len(row) != width:
                raise DataError(f"{path}: ragged row {rno} (expected {width} cells, got {len(row)})")
            data.append([parse_cell(c, f"row {rno}") for c in row])
        if not data:
            raise DataError(f"{path}: no data rows")
        raw = np.asarray(data, dtype=float).T
    else:
        ids_list = []
        data = []
        width = len(rows[0]) - 1
        for rno, row in enumerate(rows, start=1):
            if len(row) - 1 != width:
                raise DataError(f"{path}: ragged row {rno} (expected {width} values, got {len(row) - 1})")
            ids_list.append(row[0].strip())
            data.append([parse_cell(c, f"row {rno}") for c in row[1:]])
        ids = tuple(ids_list)
        raw = np.asarray(data, dtype=float)
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate series ids")
    panel, warnings = normalize_raw(raw, ids, normalization)
    return panel, panel.gap_mask, warnings


def save_scale_info(panel: SeriesPanel, path: str) -> None:
    """Write the JSON sidecar holding per-series scaling metadata."""
    payload = {
        "ids": list(panel.ids),
        "vmin": [None if np.isnan(v) else v for v in panel.scale.vmin],
        "vmax": [None if np.isnan(v) else v for v in panel.scale.vmax],
        "constant": panel.scale.constant.tolist(),
        "all_missing": panel.scale.all_missing.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def save_panel_csv(panel: SeriesPanel, path: str, denorm: bool = False) -> None:
    """Write the panel in the documented rows=time CSV format."""
    vals = panel.denormalize() if denorm else panel.values
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(panel.ids)
        for l in range(panel.n_stamps):
            writer.writerow(["" if np.isnan(v) else repr(float(v)) for v in vals[:, l]])
