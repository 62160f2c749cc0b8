"""Synthetic benchmark generator and controlled value deletion.

Each generated series is a concatenation of fixed-length segments; every
segment draws one of five base waveforms according to a per-segment
switching law, evaluated on local time so a regime's shape is identical
wherever it recurs. Gaussian noise is added before normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .panel import SeriesPanel, normalize_raw

N_REGIMES = 5

_SWITCH_TOL = 1e-9


def _fct_1(t: np.ndarray) -> np.ndarray:
    return np.cos(2 * np.pi * t / 5) + np.cos(np.pi * (t - 3))


def _fct_2(t: np.ndarray) -> np.ndarray:
    return np.sin(np.pi * t / 2 - 3) - np.sin(np.pi * t / 6)


def _fct_3(t: np.ndarray) -> np.ndarray:
    return (
        np.tan(np.pi * t / 2 - 3)
        - 0.5 * np.cos(np.pi * (t - 3) / 6)
        + np.cos(np.pi * (t - 13))
    )


def _fct_4(t: np.ndarray) -> np.ndarray:
    return (
        np.sin(np.pi * t / 2 - 3)
        * np.cos(np.pi * (t - 3) / 6)
        * np.cos(np.pi * (t - 13))
    )


def _fct_5(t: np.ndarray) -> np.ndarray:
    return np.cos(3 * np.pi * t / 5) + np.sin(2 * np.pi * t / 5 - t)


REGIME_FUNCTIONS = (_fct_1, _fct_2, _fct_3, _fct_4, _fct_5)


def regime_waveform(regime: int, length: int) -> np.ndarray:
    """Raw waveform of one regime evaluated on local time 0..length-1.

    Sampling on integer points keeps every waveform finite (the one with
    a tangent term has no pole at integers).
    """
    if not 1 <= regime <= N_REGIMES:
        raise ConfigError(f"regime must be in 1..{N_REGIMES}, got {regime}")
    return REGIME_FUNCTIONS[regime - 1](np.arange(length, dtype=float))


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic ensemble.

    ``switch_law`` gives per-segment regime probabilities: either a single
    row of 5 probabilities applied to every segment, or one row per
    segment. None means the uniform 1/5 law.
    """

    n_series: int
    n_stamps: int
    segment_len: int = 75
    switch_law: np.ndarray | None = None
    noise_sd: float = 0.05
    seed: int = 0

    def resolved_switch_law(self) -> np.ndarray:
        n_segments = self.n_segments
        if self.switch_law is None:
            law = np.full((n_segments, N_REGIMES), 1.0 / N_REGIMES)
        else:
            law = np.asarray(self.switch_law, dtype=float)
            if law.ndim == 1:
                law = np.tile(law, (n_segments, 1))
            if law.shape != (n_segments, N_REGIMES):
                raise ConfigError(
                    f"switch_law must have shape ({n_segments}, {N_REGIMES}) or ({N_REGIMES},), got {law.shape}"
                )
        if (law < 0).any():
            raise ConfigError("switch_law probabilities must be nonnegative")
        sums = law.sum(axis=1)
        if np.abs(sums - 1.0).max() > _SWITCH_TOL:
            bad = int(np.abs(sums - 1.0).argmax())
            raise ConfigError(f"switch_law row {bad} sums to {sums[bad]!r}, expected 1")
        return law

    @property
    def n_segments(self) -> int:
        # trailing partial segment still gets a regime draw
        return -(-self.n_stamps // self.segment_len)

    def validate(self) -> None:
        if self.n_series < 1 or self.n_stamps < 1:
            raise ConfigError("n_series and n_stamps must be positive")
        if self.segment_len < 1:
            raise ConfigError("segment_len must be positive")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")
        self.resolved_switch_law()


def generate_synthetic(cfg: SynthConfig) -> tuple[SeriesPanel, np.ndarray, np.ndarray]:
    """Generate the panel, its (all-false) gap mask and ground-truth labels.

    Returns ``(panel, gap_mask, labels)`` where ``labels[i, l]`` is the
    regime (1..5) that produced the value of series i at time l.
    """
    cfg.validate()
    law = cfg.resolved_switch_law()
    rng = np.random.default_rng(cfg.seed)
    n, m, seg = cfg.n_series, cfg.n_stamps, cfg.segment_len
    n_segments = cfg.n_segments

    # draw all regimes first so noise draws do not perturb the labels
    regimes = np.empty((n, n_segments), dtype=int)
    for s in range(n_segments):
        regimes[:, s] = rng.choice(N_REGIMES, size=n, p=law[s]) + 1

    base = np.stack([regime_waveform(r, seg) for r in range(1, N_REGIMES + 1)])
    raw = np.empty((n, m), dtype=float)
    labels = np.empty((n, m), dtype=int)
    for s in range(n_segments):
        lo = s * seg
        hi = min(m, lo + seg)
        chunk = base[regimes[:, s] - 1, : hi - lo]
        raw[:, lo:hi] = chunk
        labels[:, lo:hi] = regimes[:, s][:, None]
    if cfg.noise_sd > 0:
        raw = raw + rng.normal(0.0, cfg.noise_sd, size=raw.shape)

    # all series come from the same five generators, so one panel-wide
    # scale keeps a regime's shape identical across series
    ids = tuple(f"S{i + 1}" for i in range(n))
    panel, _ = normalize_raw(raw, ids, mode="global")
    return panel, panel.gap_mask, labels


def delete_values(panel: SeriesPanel, seed: int) -> tuple[SeriesPanel, np.ndarray]:
    """Blank out a random time interval from a random subset of series.

    Draws a count of series in [1, N//30], then one gap length in
    [m//30, m//10] and one start stamp; all drawn series lose their
    values over the same closed interval. Deterministic under ``seed``.
    """
    n, m = panel.n_series, panel.n_stamps
    if n < 30:
        raise ConfigError(f"delete_values needs n_series >= 30, got {n}")
    if m < 30:
        raise ConfigError(f"delete_values needs n_stamps >= 30, got {m}")
    rng = np.random.default_rng(seed)
    count = int(rng.integers(1, n // 30 + 1))
    chosen = rng.choice(n, size=count, replace=False)
    gap_len = int(rng.integers(m // 30, m // 10 + 1))
    start = int(rng.integers(1, m - gap_len + 1))  # 1-based stamp
    extra = np.zeros((n, m), dtype=bool)
    extra[np.sort(chosen)[:, None], np.arange(start - 1, start + gap_len)] = True
    corrupted = panel.with_gaps(extra)
    return corrupted, corrupted.gap_mask
