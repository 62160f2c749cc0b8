"""Shared fixtures and small builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from regime_atlas.panel import SeriesPanel, ScaleInfo, normalize_raw


def panel_from_normalized(values: np.ndarray) -> SeriesPanel:
    """Wrap already-normalized values (NaN = missing) into a panel."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    return SeriesPanel(
        values=values.copy(),
        ids=tuple(f"S{i + 1}" for i in range(n)),
        scale=ScaleInfo(
            vmin=np.zeros(n),
            vmax=np.ones(n),
            constant=np.zeros(n, dtype=bool),
            all_missing=np.zeros(n, dtype=bool),
        ),
    )


def panel_from_raw(raw: np.ndarray, mode: str = "per-series") -> SeriesPanel:
    raw = np.asarray(raw, dtype=float)
    ids = tuple(f"S{i + 1}" for i in range(raw.shape[0]))
    panel, _ = normalize_raw(raw, ids, mode)
    return panel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
