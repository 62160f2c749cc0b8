"""Time-dependent Cox model of regime lifespans.

Per regime: a Gamma baseline fitted to the stamp distribution weighted by
membership counts, per-stamp coefficient vectors maximizing a partial
log-likelihood over strictly past stamps (Newton-Raphson with ridge and
step-halving), and the cumulative survival curve from left-Riemann
integration of the hazard.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

logger = logging.getLogger(__name__)

EXP_CLIP = 30.0
MAX_NR_ITER = 100
GRAD_TOL = 1e-8
RIDGE = 1e-6


@dataclass(frozen=True)
class GammaBaseline:
    """Gamma(shape, rate) baseline hazard evaluated at stamp indices."""

    regime: int
    shape: float
    rate: float
    degenerate: bool = False

    def pdf(self, stamp: float | np.ndarray) -> float | np.ndarray:
        """Density at a (1-based) stamp index."""
        j = np.asarray(stamp, dtype=float)
        out = np.zeros_like(j)
        pos = j > 0
        k, lam = self.shape, self.rate
        log_pdf = (
            k * math.log(lam)
            - math.lgamma(k)
            + (k - 1.0) * np.log(j[pos])
            - lam * j[pos]
        )
        out[pos] = np.exp(log_pdf)
        return out if out.ndim else float(out)


@dataclass
class CoxCoefficients:
    """Per-stamp coefficient vectors of one regime."""

    regime: int
    vectors: dict[int, np.ndarray] = field(default_factory=dict)  # stamp -> (dim,)
    converged: dict[int, bool] = field(default_factory=dict)

    def at(self, stamp: int, dim: int) -> np.ndarray:
        return self.vectors.get(stamp, np.zeros(dim))


@dataclass(frozen=True)
class SurvivalCurve:
    """Cumulative survival of one regime over consecutive stamps."""

    regime: int
    values: np.ndarray  # values[j-1] = survival through stamp j

    def at(self, stamp: int) -> float:
        return float(self.values[stamp - 1])


def fit_baseline(counts: np.ndarray, regime: int = 0) -> GammaBaseline:
    """Gamma fit to the stamp axis weighted by per-stamp member counts.

    Stamps are 1-based; moments of the count-weighted stamp distribution
    give shape = mean^2/var and rate = mean/var. Zero total weight or a
    single-stamp support degenerates to an exponential-like fit, flagged.
    """
    counts = np.asarray(counts, dtype=float)
    if len(counts) < 2:
        raise ConfigError("baseline fit needs at least 2 stamps")
    if (counts < 0).any():
        raise ConfigError("baseline counts must be nonnegative")
    stamps = np.arange(1, len(counts) + 1, dtype=float)
    total = counts.sum()
    if total <= 0:
        return GammaBaseline(regime=regime, shape=1.0, rate=1.0, degenerate=True)
    mean = float((stamps * counts).sum() / total)
    var = float((((stamps - mean) ** 2) * counts).sum() / total)
    if var <= 0:
        return GammaBaseline(regime=regime, shape=1.0, rate=1.0 / mean, degenerate=True)
    return GammaBaseline(regime=regime, shape=mean * mean / var, rate=mean / var)


def _clipped_dots(features: np.ndarray, coef: np.ndarray) -> tuple[np.ndarray, bool]:
    dots = features @ coef
    clipped = bool((np.abs(dots) > EXP_CLIP).any())
    if clipped:
        logger.warning("risk-factor dot products clipped at ±%s", EXP_CLIP)
    return np.clip(dots, -EXP_CLIP, EXP_CLIP), clipped


def hazard(
    stamp: int,
    members_features: np.ndarray | None,
    coef: np.ndarray,
    baseline: GammaBaseline,
) -> float:
    """Baseline density times the mean risk factor of the cell's members.

    An empty cell has zero hazard by definition.
    """
    if members_features is None or len(members_features) == 0:
        return 0.0
    dots, _ = _clipped_dots(np.asarray(members_features, dtype=float), coef)
    return float(baseline.pdf(stamp) * np.exp(dots).mean())


def partial_log_likelihood(
    coef: np.ndarray,
    history: list[np.ndarray],
) -> float:
    """Sum over past stamps of each member's log share of its cell's risk.

    ``history[l]`` holds the feature matrix of the regime's cell at past
    stamp l; empty cells contribute nothing.
    """
    coef = np.asarray(coef, dtype=float)
    total = 0.0
    for feats in history:
        if feats is None or len(feats) == 0:
            continue
        dots, _ = _clipped_dots(np.asarray(feats, dtype=float), coef)
        lse = float(np.logaddexp.reduce(dots))
        total += float(dots.sum()) - len(dots) * lse
    return total


def pll_gradient_hessian(
    coef: np.ndarray,
    history: list[np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient and Hessian of the partial log-likelihood."""
    dim = len(coef)
    grad = np.zeros(dim)
    hess = np.zeros((dim, dim))
    for feats in history:
        if feats is None or len(feats) == 0:
            continue
        feats = np.asarray(feats, dtype=float)
        dots, _ = _clipped_dots(feats, coef)
        w = np.exp(dots - dots.max())
        w = w / w.sum()
        mean_soft = w @ feats
        n = len(feats)
        grad += feats.sum(axis=0) - n * mean_soft
        centered = feats - mean_soft
        cov_soft = (centered * w[:, None]).T @ centered
        hess -= n * cov_soft
    return grad, hess


def fit_coefficients(
    history: list[np.ndarray],
    dim: int,
    regime: int = 0,
) -> tuple[np.ndarray, bool]:
    """Maximize the partial log-likelihood by Newton-Raphson.

    Starts at zero, ridges the Hessian when singular, halves the step when
    the objective would decrease, and stops at a small gradient or the
    iteration cap. Returns (coefficients, converged flag).
    """
    nonempty = [f for f in history if f is not None and len(f) > 0]
    if not nonempty:
        raise ConfigError("no historical stamps with members to fit on")
    coef = np.zeros(dim)
    ll = partial_log_likelihood(coef, history)
    for _ in range(MAX_NR_ITER):
        grad, hess = pll_gradient_hessian(coef, history)
        if np.abs(grad).max() < GRAD_TOL:
            return coef, True
        neg_hess = -hess + RIDGE * np.eye(dim)
        try:
            step = np.linalg.solve(neg_hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(neg_hess + 1e-3 * np.eye(dim), grad)
        scale = 1.0
        improved = False
        for _ in range(30):
            cand = coef + scale * step
            cand_ll = partial_log_likelihood(cand, history)
            if cand_ll >= ll:
                coef, ll = cand, cand_ll
                improved = True
                break
            scale *= 0.5
        if not improved:
            return coef, False
    grad, _ = pll_gradient_hessian(coef, history)
    return coef, bool(np.abs(grad).max() < GRAD_TOL)


def survival_curve(hazards: np.ndarray, regime: int = 0) -> SurvivalCurve:
    """exp(-cumulative hazard) with unit-stamp left-Riemann integration."""
    hazards = np.asarray(hazards, dtype=float)
    if (hazards < 0).any():
        raise ConfigError("hazards must be nonnegative")
    values = np.exp(-np.cumsum(hazards))
    return SurvivalCurve(regime=regime, values=values)


def lifespan_residual(counts: np.ndarray, hazards: np.ndarray) -> np.ndarray:
    """Cumulative member count minus cumulative hazard, per stamp.

    Diagnostic only: the difference between the observed counting process
    and the fitted cumulative intensity. No distributional property is
    asserted for it anywhere in the pipeline.
    """
    counts = np.asarray(counts, dtype=float)
    hazards = np.asarray(hazards, dtype=float)
    if counts.shape != hazards.shape:
        raise ConfigError("counts and hazards must align")
    return np.cumsum(counts) - np.cumsum(hazards)


@dataclass
class RegimeSurvivalModel:
    """Fitted survival artifacts of one regime."""

    regime: int
    baseline: GammaBaseline
    coefficients: CoxCoefficients
    hazards: np.ndarray
    curve: SurvivalCurve


def fit_regime_survival(
    regime: int,
    feature_history: list[np.ndarray | None],
    counts: np.ndarray,
    dim: int,
) -> RegimeSurvivalModel:
    """Fit baseline, per-stamp coefficients and the survival curve.

    ``feature_history[j]`` is the feature matrix of the regime's cell at
    stamp j (0-based), or None/empty when no series exhibits the regime.
    Coefficients at stamp j are fitted on strictly earlier stamps; stamps
    with no usable history keep a zero vector.
    """
    b = len(feature_history)
    coeffs = CoxCoefficients(regime=regime)
    hazards = np.zeros(b)
    baseline = fit_baseline(counts, regime=regime)
    for j in range(b):
        past = [f for f in feature_history[:j] if f is not None and len(f) > 0]
        if past:
            coef, converged = fit_coefficients(past, dim, regime=regime)
        else:
            coef, converged = np.zeros(dim), True
        coeffs.vectors[j] = coef
        coeffs.converged[j] = converged
        hazards[j] = hazard(j + 1, feature_history[j], coef, baseline)
    return RegimeSurvivalModel(
        regime=regime,
        baseline=baseline,
        coefficients=coeffs,
        hazards=hazards,
        curve=survival_curve(hazards, regime=regime),
    )
