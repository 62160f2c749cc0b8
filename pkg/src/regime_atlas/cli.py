"""Command-line entry point.

Verbs: ingest, synth, corrupt, scan, fit, forecast, bench, report.
The ATLAS_SEED environment variable overrides any seed argument.
Exit codes: 0 success, 2 config error, 3 data error, 4 stage failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .community import detect_communities
from .errors import AtlasError, ConfigError
from .forecaster import ForecastEngine
from .grid import grid_from_json
from .panel import ScaleInfo, SeriesPanel, load_csv, save_panel_csv, save_scale_info
from .pipeline import PipelineConfig, _write_forecasts_csv, run_pipeline
from .scanner import scan
from .synthetic import SynthConfig, delete_values, generate_synthetic


def _seed(value: int) -> int:
    env = os.environ.get("ATLAS_SEED")
    return int(env) if env else value


def _parse_rho_set(text: str) -> list[int]:
    try:
        parts = [int(p) for p in text.split(":")]
    except ValueError:
        raise ConfigError(f"bad --rho-set {text!r}; expected a:b:step") from None
    if len(parts) == 1:
        return parts
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3 or parts[2] < 1:
        raise ConfigError(f"bad --rho-set {text!r}; expected a:b:step")
    return list(range(parts[0], parts[1] + 1, parts[2]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atlas", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("ingest", help="normalize a CSV into a panel directory")
    p.add_argument("--csv", required=True)
    p.add_argument("--layout", default="rows=time", choices=["rows=time", "rows=series"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark panel")
    p.add_argument("--n", type=int, default=450)
    p.add_argument("--m", type=int, default=1125)
    p.add_argument("--seg-len", type=int, default=75)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("corrupt", help="delete a random interval from random series")
    p.add_argument("--csv", required=True)
    p.add_argument("--layout", default="rows=time", choices=["rows=time", "rows=series"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("scan", help="window, discretize and dump stamp networks")
    p.add_argument("--csv", required=True)
    p.add_argument("--layout", default="rows=time", choices=["rows=time", "rows=series"])
    p.add_argument("--rho", type=int, required=True)
    p.add_argument("--dump-networks", metavar="DIR")
    p.add_argument("--dump-partitions", action="store_true")

    p = sub.add_parser("fit", help="full model fit without forecasting")
    p.add_argument("--csv")
    p.add_argument("--layout", default="rows=time", choices=["rows=time", "rows=series"])
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--n", type=int, default=450)
    p.add_argument("--m", type=int, default=1125)
    p.add_argument("--seg-len", type=int, default=75)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho-set", type=str)
    p.add_argument("--rho", type=int, help="fixed window size, skips the sweep")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--theta-match", type=float, default=0.05)
    p.add_argument("--engine", default="gcn", choices=["gcn", "spectral"])
    p.add_argument("--sweep-method", default="map-equation", choices=["map-equation", "modularity"])
    p.add_argument("--community-method", default="modularity", choices=["map-equation", "modularity"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("forecast", help="forecast from a fitted model directory")
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--out", default="forecasts.csv")

    p = sub.add_parser("bench", help="synthetic benchmark with holdout scoring")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--csv")
    p.add_argument("--layout", default="rows=time", choices=["rows=time", "rows=series"])
    p.add_argument("--n", type=int, default=450)
    p.add_argument("--m", type=int, default=1125)
    p.add_argument("--seg-len", type=int, default=75)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", action="store_true")
    p.add_argument("--rho-set", type=str)
    p.add_argument("--rho", type=int)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--theta-match", type=float, default=0.05)
    p.add_argument("--engine", default="gcn", choices=["gcn", "spectral"])
    p.add_argument("--sweep-method", default="map-equation", choices=["map-equation", "modularity"])
    p.add_argument("--community-method", default="modularity", choices=["map-equation", "modularity"])
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--holdout", type=int, default=4)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="print the summary of a model directory")
    p.add_argument("--model", required=True)
    return parser


def _cmd_ingest(args) -> int:
    panel, _, warnings = load_csv(args.csv, args.layout)
    os.makedirs(args.out, exist_ok=True)
    save_panel_csv(panel, os.path.join(args.out, "panel.csv"))
    save_scale_info(panel, os.path.join(args.out, "scale_info.json"))
    for sid in warnings.all_missing_series:
        print(f"warning: series {sid} has no observations", file=sys.stderr)
    for sid in warnings.constant_series:
        print(f"warning: series {sid} is constant; normalized to 0.5", file=sys.stderr)
    print(f"ingested {panel.n_series} series x {panel.n_stamps} stamps -> {args.out}")
    return 0


def _cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_series=args.n,
        n_stamps=args.m,
        segment_len=args.seg_len,
        noise_sd=args.noise,
        seed=_seed(args.seed),
    )
    panel, _, labels = generate_synthetic(cfg)
    os.makedirs(args.out, exist_ok=True)
    save_panel_csv(panel, os.path.join(args.out, "panel.csv"))
    save_scale_info(panel, os.path.join(args.out, "scale_info.json"))
    np.savetxt(os.path.join(args.out, "truth_labels.csv"), labels, fmt="%d", delimiter=",")
    print(f"generated {panel.n_series} series x {panel.n_stamps} stamps -> {args.out}")
    return 0


def _cmd_corrupt(args) -> int:
    panel, _, _ = load_csv(args.csv, args.layout)
    corrupted, _ = delete_values(panel, _seed(args.seed))
    os.makedirs(args.out, exist_ok=True)
    save_panel_csv(corrupted, os.path.join(args.out, "panel.csv"))
    save_scale_info(corrupted, os.path.join(args.out, "scale_info.json"))
    added = int(corrupted.gap_mask.sum() - panel.gap_mask.sum())
    print(f"deleted {added} values -> {args.out}")
    return 0


def _cmd_scan(args) -> int:
    panel, _, _ = load_csv(args.csv, args.layout)
    view, networks = scan(panel, args.rho)
    print(f"{view.n_stamps} stamps at window size {args.rho}")
    if args.dump_networks:
        os.makedirs(args.dump_networks, exist_ok=True)
        for net in networks:
            path = os.path.join(args.dump_networks, f"network_{net.stamp + 1}.txt")
            with open(path, "w") as fh:
                for i, k, w in net.edges():
                    fh.write(f"{i} {k} {w}\n")
                if args.dump_partitions:
                    part = detect_communities(net)
                    fh.write("# partition\n")
                    for g, members in enumerate(part.groups):
                        for node in members:
                            fh.write(f"{int(node)} {g}\n")
    return 0


def _pipeline_config(args, holdout: int) -> PipelineConfig:
    synth = None
    csv_path = None
    if getattr(args, "synthetic", False):
        synth = SynthConfig(
            n_series=args.n,
            n_stamps=args.m,
            segment_len=args.seg_len,
            noise_sd=args.noise,
            seed=_seed(args.seed),
        )
    elif args.csv:
        csv_path = args.csv
    else:
        raise ConfigError("provide --csv PATH or --synthetic")
    return PipelineConfig(
        csv_path=csv_path,
        csv_layout=args.layout,
        synth=synth,
        corrupt_seed=_seed(args.seed) if getattr(args, "corrupt", False) else None,
        rho_set=_parse_rho_set(args.rho_set) if args.rho_set else None,
        epsilon=args.epsilon,
        window_size=args.rho,
        theta_match=args.theta_match,
        sweep_method=args.sweep_method,
        community_method=args.community_method,
        embed_engine=args.engine,
        embed_seed=_seed(getattr(args, "seed", 0)),
        horizon=args.horizon if hasattr(args, "horizon") else 4,
        holdout=holdout,
    )


def _cmd_fit(args) -> int:
    args.horizon = 1  # fit still exercises the one-step-ahead surface
    config = _pipeline_config(args, holdout=0)
    result = run_pipeline(config, args.out)
    print(
        f"window size {result.window_size}, {result.catalog.n_regimes} regimes, "
        f"{result.n_fit_stamps} stamps -> {args.out}"
    )
    return 0


def _cmd_bench(args) -> int:
    config = _pipeline_config(args, holdout=args.holdout)
    result = run_pipeline(config, args.out)
    values = result.report["values"]
    summary = ", ".join(
        f"h{h}: mape={v['mape']:.3f}" if v["mape"] is not None else f"h{h}: n/a"
        for h, v in sorted(values.items())
    )
    print(f"window size {result.window_size}, {result.catalog.n_regimes} regimes; {summary}")
    print(f"report -> {os.path.join(args.out, 'report.json')}")
    return 0


def _cmd_forecast(args) -> int:
    grid_path = os.path.join(args.model, "grid.json")
    with open(grid_path) as fh:
        grid, profiles = grid_from_json(fh.read())
    engine = ForecastEngine(grid=grid, profiles=profiles, knn_k=args.k)
    forecasts = engine.run(args.horizon)

    scale_path = os.path.join(args.model, "scale_info.json")
    with open(scale_path) as fh:
        scale = json.load(fh)
    panel = SeriesPanel(
        values=np.zeros((len(scale["ids"]), 1)),
        ids=tuple(scale["ids"]),
        scale=ScaleInfo(
            vmin=np.array([np.nan if v is None else v for v in scale["vmin"]]),
            vmax=np.array([np.nan if v is None else v for v in scale["vmax"]]),
            constant=np.array(scale["constant"], dtype=bool),
            all_missing=np.array(scale["all_missing"], dtype=bool),
        ),
    )
    _write_forecasts_csv(panel, grid, forecasts, args.out)
    print(f"{args.horizon} stamps forecast -> {args.out}")
    return 0


def _cmd_report(args) -> int:
    with open(os.path.join(args.model, "report.json")) as fh:
        report = json.load(fh)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "synth": _cmd_synth,
    "corrupt": _cmd_corrupt,
    "scan": _cmd_scan,
    "fit": _cmd_fit,
    "forecast": _cmd_forecast,
    "bench": _cmd_bench,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except AtlasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
