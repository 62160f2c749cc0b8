"""Forecasting future regimes, gaps and series values.

One step ahead: the ensemble switch matrix, each series' history matrix
and each series' features are predicted by successor-averaging nearest
neighbors over their own histories; the composed per-series transition,
discounted by regime survival, picks the next regime; the regime profile
plus an uncertainty band gives the values. Multi-step forecasts repeat
the process on the extended grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .community import Profile
from .errors import ConfigError
from .grid import MappingGrid
from .survival import GammaBaseline, fit_baseline, fit_coefficients, hazard
from .transition import effective_transition, jaccard_matrix, pi_from_trajectory

EMBED_DIM = 8


@dataclass
class KnnPredictor:
    """Successor-averaging nearest-neighbor regression over a history.

    The prediction for the next object is the mean of the successors of
    the k historical objects closest to the latest one (Euclidean on the
    flattened representation). With fewer than k+1 objects the latest
    object is returned unchanged, flagged as a persistence fallback.
    """

    k: int
    history: list[np.ndarray]

    def predict(self) -> tuple[np.ndarray, bool]:
        n = len(self.history)
        if n == 0:
            raise ConfigError("empty history")
        if n - 1 < self.k:
            return self.history[-1].copy(), True
        query = self.history[-1].ravel()
        candidates = np.stack([h.ravel() for h in self.history[:-1]])
        dists = np.sqrt(((candidates - query) ** 2).sum(axis=1))
        chosen = np.argsort(dists, kind="stable")[: self.k]
        pred = np.mean([self.history[t + 1] for t in chosen], axis=0)
        return pred, False


def knn_predict(history: list[np.ndarray], k: int) -> tuple[np.ndarray, bool]:
    return KnnPredictor(k=k, history=list(history)).predict()


def transition_probability(
    theta: np.ndarray,
    surv_next: np.ndarray,
    alpha: int,
    beta: int,
    survival_factor: str = "risk",
) -> float:
    """Effective transition combined with the target regime's survival.

    Switches into a regime are weighted by the chance the regime's
    lifespan ends (one minus survival, the default "risk" reading) or by
    survival itself when the flipped sensitivity reading is requested;
    switches into the no-observation label carry no survival factor.
    """
    base = float(theta[alpha, beta])
    if beta == 0:
        return base
    s = float(surv_next[beta])
    factor = (1.0 - s) if survival_factor == "risk" else s
    return base * factor


def tp_row(
    theta: np.ndarray,
    surv_next: np.ndarray,
    alpha: int,
    survival_factor: str = "risk",
) -> np.ndarray:
    k1 = theta.shape[0]
    return np.array(
        [transition_probability(theta, surv_next, alpha, b, survival_factor) for b in range(k1)]
    )


def forecast_values(profile: Profile, tp: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Point forecast (profile at its level) and its symmetric band.

    Band half-width is (1 - tp) * sd / 2, constant across the window.
    """
    point = profile.shape + profile.mean
    half = (1.0 - tp) * profile.sd / 2.0
    return point, point - half, point + half


@dataclass
class Forecast:
    """One series' forecast at one future stamp."""

    series_index: int
    stamp: int  # 0-based stamp index in the extended grid
    regime: int
    tp: float
    values: np.ndarray | None
    lower: np.ndarray | None
    upper: np.ndarray | None
    fallback: bool = False


@dataclass
class ForecastEngine:
    """Iteratively extends a fitted grid with predicted columns."""

    grid: MappingGrid
    profiles: list[Profile]
    knn_k: int = 3
    survival_factor: str = "risk"
    baseline_weights: str = "exhibiting"
    feature_dim: int = EMBED_DIM

    n_observed: int = field(init=False)
    baselines: list[GammaBaseline] = field(init=False)
    predicted_features: dict[tuple[int, int], np.ndarray] = field(default_factory=dict, init=False)
    _coef_cache: dict[tuple[int, int], np.ndarray] = field(default_factory=dict, init=False)
    _hazards: dict[int, np.ndarray] = field(default_factory=dict, init=False)

    def __post_init__(self):
        self.n_observed = self.grid.n_stamps
        n_series = self.grid.n_series
        self.baselines = []
        for r in range(1, self.grid.n_regimes + 1):
            _, counts = self.grid.lifespan(r)
            weights = counts if self.baseline_weights == "exhibiting" else n_series - counts
            self.baselines.append(fit_baseline(weights, regime=r))
        for j in range(self.n_observed):
            self._hazards[j] = self._stamp_hazards(j)

    # -- feature access -------------------------------------------------

    def _feature(self, i: int, stamp: int) -> np.ndarray | None:
        if stamp < self.n_observed:
            return self.grid.feature_of(i, stamp)
        return self.predicted_features.get((i, stamp))

    def _feature_history(self, i: int) -> list[np.ndarray]:
        out = []
        for j in range(self.grid.n_stamps):
            v = self._feature(i, j)
            if v is not None:
                out.append(np.asarray(v, dtype=float))
        return out

    def _cell_features(self, regime: int, stamp: int, labels_col: np.ndarray) -> np.ndarray | None:
        members = np.flatnonzero(labels_col == regime)
        feats = [self._feature(int(i), stamp) for i in members]
        feats = [f for f in feats if f is not None]
        if not feats:
            return None
        return np.stack(feats)

    # -- survival -------------------------------------------------------

    def _coef(self, regime: int, stamp: int) -> np.ndarray:
        key = (regime, stamp)
        cached = self._coef_cache.get(key)
        if cached is not None:
            return cached
        history = []
        for l in range(stamp):
            history.append(self._cell_features(regime, l, self.grid.labels[:, l]))
        usable = [f for f in history if f is not None and len(f) > 0]
        if usable:
            coef, _ = fit_coefficients(usable, self.feature_dim, regime=regime)
        else:
            coef = np.zeros(self.feature_dim)
        self._coef_cache[key] = coef
        return coef

    def _stamp_hazards(self, stamp: int, labels_col: np.ndarray | None = None) -> np.ndarray:
        """Hazard of every regime at one (0-based) stamp."""
        col = self.grid.labels[:, stamp] if labels_col is None else labels_col
        out = np.zeros(self.grid.n_regimes + 1)
        for r in range(1, self.grid.n_regimes + 1):
            feats = self._cell_features(r, stamp, col)
            out[r] = hazard(stamp + 1, feats, self._coef(r, stamp), self.baselines[r - 1])
        return out

    def survival_through(self, stamp: int, extra_col: np.ndarray | None = None) -> np.ndarray:
        """Survival of every regime through a (0-based) stamp index.

        ``extra_col`` supplies a provisional column when ``stamp`` is one
        past the current grid.
        """
        total = np.zeros(self.grid.n_regimes + 1)
        for j in range(stamp + 1):
            if j in self._hazards:
                total += self._hazards[j]
            elif extra_col is not None and j == stamp:
                total += self._provisional_hazards(j, extra_col)
            else:
                raise ConfigError(f"no hazards available at stamp {j}")
        surv = np.exp(-total)
        surv[0] = 1.0  # no lifespan notion for the no-observation label
        return surv

    def _provisional_hazards(self, stamp: int, col: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.n_regimes + 1)
        for r in range(1, self.grid.n_regimes + 1):
            members = np.flatnonzero(col == r)
            feats = [self.predicted_features.get((int(i), stamp)) for i in members]
            feats = [f for f in feats if f is not None]
            coef = self._coef(r, stamp)
            out[r] = hazard(stamp + 1, np.stack(feats) if feats else None, coef, self.baselines[r - 1])
        return out

    # -- one forecast step ----------------------------------------------

    def step(self) -> list[Forecast]:
        """Predict the next column and append it to the grid."""
        grid = self.grid
        t = grid.n_stamps  # 0-based index of the stamp being predicted
        k1 = grid.n_regimes + 1
        if t < 2:
            raise ConfigError("need at least 2 stamps to forecast")

        q_history = [
            jaccard_matrix(grid.column(j), grid.column(j + 1)) for j in range(t - 1)
        ]
        q_hat, _ = knn_predict(q_history, self.knn_k)

        thetas: list[np.ndarray] = []
        alphas = grid.labels[:, t - 1]
        for i in range(grid.n_series):
            traj = grid.trajectory(i)
            pi_history = [pi_from_trajectory(traj[: j + 2], k1) for j in range(t - 1)]
            pi_hat, _ = knn_predict(pi_history, self.knn_k)
            thetas.append(effective_transition(pi_hat, q_hat))

            feats = self._feature_history(i)
            if feats:
                f_hat, _ = knn_predict(feats, self.knn_k)
            else:
                f_hat = np.zeros(self.feature_dim)
            self.predicted_features[(i, t)] = f_hat

        # provisional column from the raw composed transition, needed to
        # evaluate survival through the predicted stamp
        provisional = np.empty(grid.n_series, dtype=int)
        for i in range(grid.n_series):
            row = thetas[i][alphas[i]]
            provisional[i] = int(np.argmax(row)) if row.sum() > 0 else int(alphas[i])

        surv = self.survival_through(t, extra_col=provisional)

        forecasts: list[Forecast] = []
        final = np.empty(grid.n_series, dtype=int)
        for i in range(grid.n_series):
            row = tp_row(thetas[i], surv, int(alphas[i]), self.survival_factor)
            if row.sum() > 0:
                label = int(np.argmax(row))
                tp = float(row[label])
                fallback = False
            else:
                label = int(alphas[i])
                tp = 0.0
                fallback = True
            final[i] = label
            if label >= 1:
                point, lower, upper = forecast_values(self.profiles[label - 1], tp)
            else:
                point = lower = upper = None
            forecasts.append(
                Forecast(
                    series_index=i,
                    stamp=t,
                    regime=label,
                    tp=tp,
                    values=point,
                    lower=lower,
                    upper=upper,
                    fallback=fallback,
                )
            )

        grid.extend(final)
        self._hazards[t] = self._stamp_hazards(t)
        return forecasts

    def run(self, horizon: int) -> list[list[Forecast]]:
        if horizon < 1:
            raise ConfigError("horizon must be >= 1")
        return [self.step() for _ in range(horizon)]
