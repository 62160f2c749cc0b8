"""End-to-end orchestration: ingest, window search, grid build, embedding,
survival fitting, transitions, forecasting and scoring.

One run populates one model directory. Every artifact is deterministic
under a fixed seed; wall-clock timings go to a separate sidecar so the
report itself is byte-reproducible.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .community import detect_communities
from .embedding import EMBED_DIM, embed_cell_gcn, embed_cell_spectral
from .errors import AtlasError, ConfigError, StageFailure
from .forecaster import Forecast, ForecastEngine
from .grid import MappingGrid, build_grid, grid_to_json, heatmap_rows
from .metrics import adjusted_rand_index, f1_binary, mape, rmse
from .panel import PanelWarnings, SeriesPanel, load_csv, save_scale_info
from .scanner import StampNetwork, WindowedView, scan
from .synthetic import SynthConfig, delete_values, generate_synthetic
from .transition import effective_transition, global_switch, pi_from_trajectory
from .window_select import (
    DensityCurve,
    RegimeCatalog,
    canonicalize_regimes,
    default_size_grid,
    select_window,
    sweep,
)


@dataclass
class PipelineConfig:
    """Everything a run needs; exactly one data source must be set."""

    csv_path: str | None = None
    csv_layout: str = "rows=time"
    synth: SynthConfig | None = None
    corrupt_seed: int | None = None

    rho_set: list[int] | None = None
    epsilon: float = 0.01
    window_size: int | None = None  # fixed size skips the sweep
    theta_match: float = 0.05
    # the map equation merges boundary-straddling windows into their parent
    # groups, which keeps the density curve smooth for convergence testing;
    # modularity recovers planted groups exactly, which the grid needs
    sweep_method: str = "map-equation"
    community_method: str = "modularity"

    embed_engine: str = "gcn"
    embed_seed: int = 0

    baseline_weights: str = "exhibiting"
    survival_factor: str = "risk"
    knn_k: int = 3
    horizon: int = 4
    holdout: int = 0  # trailing stamps excluded from fitting, used for scoring

    def validate(self) -> None:
        if (self.csv_path is None) == (self.synth is None):
            raise ConfigError("exactly one of csv_path or synth must be provided")
        if self.embed_engine not in ("gcn", "spectral"):
            raise ConfigError(f"unknown embedding engine {self.embed_engine!r}")
        for method in (self.sweep_method, self.community_method):
            if method not in ("map-equation", "modularity"):
                raise ConfigError(f"unknown community method {method!r}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.holdout < 0:
            raise ConfigError("holdout must be >= 0")
        if self.knn_k < 1:
            raise ConfigError("knn_k must be >= 1")


@dataclass
class PipelineResult:
    config: PipelineConfig
    panel: SeriesPanel
    warnings: PanelWarnings
    truth_labels: np.ndarray | None
    curve: DensityCurve | None
    window_size: int
    catalog: RegimeCatalog
    grid: MappingGrid  # extended with forecast columns
    n_fit_stamps: int
    engine: ForecastEngine
    forecasts: list[list[Forecast]]
    report: dict
    timings: dict[str, float] = field(default_factory=dict)


def _write_json(path: str, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _fmt(x) -> str:
    return repr(float(x))


def run_pipeline(
    config: PipelineConfig,
    out_dir: str,
    panel: SeriesPanel | None = None,
    truth_labels: np.ndarray | None = None,
) -> PipelineResult:
    """Execute every stage, persisting artifacts into ``out_dir``.

    A pre-built ``panel`` (with optional ground-truth labels) bypasses
    ingestion; the config's data source is ignored in that case.
    """
    if panel is None:
        config.validate()
    os.makedirs(out_dir, exist_ok=True)
    timings: dict[str, float] = {}
    flags: list[str] = []

    def stage(name):
        class _Timer:
            def __enter__(self_inner):
                self_inner.t0 = time.perf_counter()

            def __exit__(self_inner, exc_type, exc, tb):
                timings[name] = time.perf_counter() - self_inner.t0
                # config and data problems keep their own exit semantics;
                # anything else aborts as a named stage failure
                if exc is not None and not isinstance(exc, AtlasError):
                    raise StageFailure(name, str(exc)) from exc

        return _Timer()

    # -- ingest ----------------------------------------------------------
    with stage("ingest"):
        warnings = PanelWarnings()
        if panel is None:
            truth_labels = None
            if config.csv_path is not None:
                panel, _, warnings = load_csv(config.csv_path, config.csv_layout)
            else:
                panel, _, truth_labels = generate_synthetic(config.synth)
        if config.corrupt_seed is not None:
            panel, _ = delete_values(panel, config.corrupt_seed)
        save_scale_info(panel, os.path.join(out_dir, "scale_info.json"))
        flags.extend(f"all-missing:{s}" for s in warnings.all_missing_series)
        flags.extend(f"constant:{s}" for s in warnings.constant_series)

    # -- window sweep & selection -----------------------------------------
    curve = None
    with stage("sweep"):
        if config.window_size is not None:
            window_size = int(config.window_size)
            if window_size < 2 or window_size > panel.n_stamps:
                raise ConfigError(f"fixed window size {window_size} out of range")
            _write_csv(os.path.join(out_dir, "density_curve.csv"), ["rho", "score"], [])
        else:
            sizes = config.rho_set or default_size_grid(panel.n_stamps)
            curve = sweep(panel, sizes, config.epsilon, config.sweep_method)
            window_size = select_window(curve)
            _write_csv(
                os.path.join(out_dir, "density_curve.csv"),
                ["rho", "score"],
                [[s, _fmt(v)] for s, v in curve.entries],
            )

    # -- scan and cluster the fit prefix ----------------------------------
    with stage("scan"):
        b_total = panel.n_stamps // window_size
        n_fit = b_total - config.holdout
        if n_fit < 3:
            raise ConfigError(
                f"holdout {config.holdout} leaves {n_fit} fit stamps at window size {window_size}"
            )
        fit_panel = SeriesPanel(
            values=panel.values[:, : n_fit * window_size].copy(),
            ids=panel.ids,
            scale=panel.scale,
        )
        view, networks = scan(fit_panel, window_size)

    with stage("communities"):
        partitions = [detect_communities(net, config.community_method) for net in networks]

    with stage("canonicalize"):
        catalog = canonicalize_regimes(view, partitions, config.theta_match)
        _write_json(
            os.path.join(out_dir, "regimes.json"),
            {
                "n_regimes": catalog.n_regimes,
                "window_size": window_size,
                "theta_match": catalog.theta_match,
                "profiles": [
                    {"label": r + 1, "shape": p.shape.tolist(), "mean": p.mean, "sd": p.sd}
                    for r, p in enumerate(catalog.profiles)
                ],
            },
        )

    with stage("grid"):
        grid = build_grid(catalog, partitions, view, panel.ids)
        _write_csv(
            os.path.join(out_dir, "grid_heatmap.csv"),
            ["row"] + [f"stamp_{j + 1}" for j in range(grid.n_stamps)],
            [
                [label] + [_fmt(v) for v in row]
                for label, row in zip(
                    [f"R{r}" for r in range(1, grid.n_regimes + 1)] + ["R0"],
                    heatmap_rows(grid),
                )
            ],
        )

    with stage("embed"):
        _embed_grid(grid, networks, view, config)
        _write_json(os.path.join(out_dir, "grid.json"), json.loads(grid_to_json(grid, catalog.profiles)))
        _write_embeddings_2d(grid, os.path.join(out_dir, "embeddings_2d.csv"))

    with stage("survival"):
        engine = ForecastEngine(
            grid=grid,
            profiles=catalog.profiles,
            knn_k=config.knn_k,
            survival_factor=config.survival_factor,
            baseline_weights=config.baseline_weights,
            feature_dim=EMBED_DIM,
        )
        _write_survival_artifacts(engine, out_dir)

    with stage("transitions"):
        _write_transition_artifacts(grid, out_dir)

    with stage("forecast"):
        forecasts = engine.run(config.horizon)
        _write_forecasts_csv(panel, grid, forecasts, os.path.join(out_dir, "forecasts.csv"))
        # survival artifacts now extend through the forecast stamps
        _write_survival_artifacts(engine, out_dir)

    with stage("score"):
        report = _score(config, panel, truth_labels, grid, forecasts, n_fit, window_size, catalog, curve, flags)
        _write_json(os.path.join(out_dir, "report.json"), report)
        _write_json(os.path.join(out_dir, "timings.json"), {k: round(v, 6) for k, v in timings.items()})

    return PipelineResult(
        config=config,
        panel=panel,
        warnings=warnings,
        truth_labels=truth_labels,
        curve=curve,
        window_size=window_size,
        catalog=catalog,
        grid=grid,
        n_fit_stamps=n_fit,
        engine=engine,
        forecasts=forecasts,
        report=report,
        timings=timings,
    )


def _embed_grid(grid: MappingGrid, networks: list[StampNetwork], view: WindowedView, config: PipelineConfig) -> None:
    """Embed every non-empty regime cell of the fit grid."""
    for j in range(grid.n_stamps):
        net = networks[j]
        pos = {int(s): p for p, s in enumerate(net.node_ids)}
        for r in range(1, grid.n_regimes + 1):
            members = grid.cell(r, j)
            if len(members) == 0:
                continue
            idx = np.array([pos[int(i)] for i in members])
            sub_weights = net.weights[np.ix_(idx, idx)]
            content = view.values[members, j]
            if config.embed_engine == "gcn":
                emb = embed_cell_gcn(
                    sub_weights, content, members, j, r, grid.window_size, seed=config.embed_seed
                )
            else:
                emb = embed_cell_spectral(sub_weights, content, members, j, r, grid.window_size)
            grid.set_features(r, j, emb.vectors)


def _write_embeddings_2d(grid: MappingGrid, path: str) -> None:
    """Project all cell vectors onto their two leading principal axes."""
    rows = []
    pooled = []
    meta = []
    for (label, stamp), vecs in sorted(grid.features.items()):
        for i, v in sorted(vecs.items()):
            pooled.append(v)
            meta.append((stamp, label, i))
    if pooled:
        x = np.stack(pooled)
        centered = x - x.mean(axis=0)
        cov = centered.T @ centered / max(1, len(x) - 1)
        vals, vecs = np.linalg.eigh(cov)
        order = np.argsort(-vals)[:2]
        basis = vecs[:, order]
        for col in range(basis.shape[1]):
            anchor = np.argmax(np.abs(basis[:, col]))
            if basis[anchor, col] < 0:
                basis[:, col] = -basis[:, col]
        proj = centered @ basis
        for (stamp, label, i), p in zip(meta, proj):
            rows.append([stamp + 1, label, i, _fmt(p[0]), _fmt(p[1] if proj.shape[1] > 1 else 0.0)])
    _write_csv(path, ["stamp", "regime", "series", "pc1", "pc2"], rows)


def _write_survival_artifacts(engine: ForecastEngine, out_dir: str) -> None:
    grid = engine.grid
    payload = {}
    curve_rows = []
    coeff_rows = []
    hazards = np.stack([engine._hazards[j] for j in range(grid.n_stamps)])
    survival = np.exp(-np.cumsum(hazards, axis=0))
    for r in range(1, grid.n_regimes + 1):
        base = engine.baselines[r - 1]
        coefs = {}
        for j in range(grid.n_stamps):
            coef = engine._coef(r, j)
            coefs[str(j + 1)] = [float(c) for c in coef]
            for d, c in enumerate(coef):
                coeff_rows.append([r, j + 1, d, _fmt(c)])
        payload[str(r)] = {
            "gamma": {"shape": base.shape, "rate": base.rate, "degenerate": base.degenerate},
            "coefficients": coefs,
            "hazards": [float(h) for h in hazards[:, r]],
            "curve": [float(s) for s in survival[:, r]],
        }
        for j in range(grid.n_stamps):
            curve_rows.append([j + 1, r, _fmt(survival[j, r])])
    _write_json(os.path.join(out_dir, "survival.json"), payload)
    _write_csv(os.path.join(out_dir, "survival_curves.csv"), ["stamp", "regime", "survival"], curve_rows)
    _write_csv(os.path.join(out_dir, "cox_coeffs.csv"), ["regime", "stamp", "dim", "value"], coeff_rows)


def _write_transition_artifacts(grid: MappingGrid, out_dir: str) -> None:
    k1 = grid.n_regimes + 1
    payload = {"Q": {}, "theta": {}}
    theta_rows = []
    for j in range(grid.n_stamps - 1):
        q = global_switch(grid, j)
        payload["Q"][str(j + 1)] = [[float(v) for v in row] for row in q.entries]
        per_series = {}
        for i in range(grid.n_series):
            traj = grid.trajectory(i, up_to_stamp=j + 2)
            theta = effective_transition(pi_from_trajectory(traj, k1), q.entries)
            sparse = [
                [a, b, float(theta[a, b])]
                for a in range(k1)
                for b in range(k1)
                if theta[a, b] != 0.0
            ]
            per_series[grid.ids[i]] = sparse
            for a, b, v in sparse:
                theta_rows.append([grid.ids[i], j + 1, a, b, _fmt(v)])
        payload["theta"][str(j + 1)] = per_series
    _write_json(os.path.join(out_dir, "transitions.json"), payload)
    _write_csv(
        os.path.join(out_dir, "theta_edges.csv"),
        ["series", "from_stamp", "alpha", "beta", "value"],
        theta_rows,
    )


def _write_forecasts_csv(
    panel: SeriesPanel,
    grid: MappingGrid,
    forecasts: list[list[Forecast]],
    path: str,
) -> None:
    rows = []
    for step in forecasts:
        for fc in step:
            sid = grid.ids[fc.series_index]
            if fc.regime == 0:
                rows.append([sid, fc.stamp + 1, fc.regime, _fmt(fc.tp), "", "", "", ""])
                continue
            point = panel.denormalize_series(fc.series_index, fc.values)
            lo = panel.denormalize_series(fc.series_index, fc.lower)
            hi = panel.denormalize_series(fc.series_index, fc.upper)
            for t in range(len(point)):
                lo_t, hi_t = sorted((lo[t], hi[t]))
                rows.append(
                    [sid, fc.stamp + 1, fc.regime, _fmt(fc.tp), t, _fmt(point[t]), _fmt(lo_t), _fmt(hi_t)]
                )
    _write_csv(
        path,
        ["series_id", "stamp", "regime", "tp", "t_index", "value", "lower", "upper"],
        rows,
    )


def _truth_window_labels(truth_labels: np.ndarray, window_size: int, stamp: int) -> np.ndarray:
    """Majority ground-truth label of every series' window at one stamp."""
    window = truth_labels[:, stamp * window_size : (stamp + 1) * window_size]
    out = np.empty(window.shape[0], dtype=int)
    for i in range(window.shape[0]):
        out[i] = int(np.bincount(window[i]).argmax())
    return out


def _score(
    config: PipelineConfig,
    panel: SeriesPanel,
    truth_labels: np.ndarray | None,
    grid: MappingGrid,
    forecasts: list[list[Forecast]],
    n_fit: int,
    window_size: int,
    catalog: RegimeCatalog,
    curve: DensityCurve | None,
    flags: list[str],
) -> dict:
    rho = window_size
    gap = panel.gap_mask
    b_total = panel.n_stamps // rho

    value_scores = {}
    missing_scores = {}
    for s, step in enumerate(forecasts, start=1):
        t = n_fit - 1 + s  # 0-based stamp being scored
        if t >= b_total:
            break
        window = slice(t * rho, (t + 1) * rho)
        truth_vals = panel.values[:, window]
        truth_has_gap = gap[:, window].any(axis=1)

        pred_chunks = []
        truth_chunks = []
        pred_gap = np.zeros(panel.n_series, dtype=bool)
        for fc in step:
            i = fc.series_index
            pred_gap[i] = fc.regime == 0
            if fc.regime >= 1 and not truth_has_gap[i]:
                pred_chunks.append(fc.values)
                truth_chunks.append(truth_vals[i])
        if pred_chunks:
            pred = np.concatenate(pred_chunks)
            truth = np.concatenate(truth_chunks)
            m = mape(pred, truth)
            value_scores[str(s)] = {
                "mape": m,
                "rmse": rmse(pred, truth),
                "n_series": len(pred_chunks),
            }
        else:
            value_scores[str(s)] = {"mape": None, "rmse": None, "n_series": 0}
        missing_scores[str(s)] = f1_binary(pred_gap, truth_has_gap)

    ari_per_stamp = None
    if truth_labels is not None:
        ari_per_stamp = []
        for j in range(n_fit):
            observed = grid.labels[:, j] >= 1
            if observed.sum() < 2:
                ari_per_stamp.append(None)
                continue
            truth_j = _truth_window_labels(truth_labels, rho, j)
            ari_per_stamp.append(
                adjusted_rand_index(grid.labels[observed, j], truth_j[observed])
            )

    report = {
        "config": {
            "source": config.csv_path or "synthetic",
            "window_size_fixed": config.window_size,
            "epsilon": config.epsilon,
            "theta_match": config.theta_match,
            "sweep_method": config.sweep_method,
            "community_method": config.community_method,
            "embed_engine": config.embed_engine,
            "embed_seed": config.embed_seed,
            "baseline_weights": config.baseline_weights,
            "survival_factor": config.survival_factor,
            "knn_k": config.knn_k,
            "horizon": config.horizon,
            "holdout": config.holdout,
            "synth_seed": config.synth.seed if config.synth else None,
            "corrupt_seed": config.corrupt_seed,
        },
        "window_size": window_size,
        "n_regimes": catalog.n_regimes,
        "n_fit_stamps": n_fit,
        "density_curve": [[s, v] for s, v in curve.entries] if curve else [],
        "values": value_scores,
        "missing_f1": missing_scores,
        "ari_per_stamp": ari_per_stamp,
        "ari_mean": (
            float(np.mean([a for a in ari_per_stamp if a is not None]))
            if ari_per_stamp and any(a is not None for a in ari_per_stamp)
            else None
        ),
        "flags": sorted(flags),
    }
    return report
