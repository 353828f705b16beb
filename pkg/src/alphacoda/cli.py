"""
Command-line front end.

    alphacoda ingest  FILE [--source hmd|csv] [--no-rebuild-from-qx] --out DIR
    alphacoda tune     --config RUN.toml --out DIR
    alphacoda forecast --config RUN.toml --out DIR
    alphacoda evaluate --config RUN.toml --out DIR

Numerics come from the config file; flags only pick commands, paths, the
seed and the thread count. Exit codes: 0 success, 2 input error,
3 computation error, 4 contradictory configuration.
"""

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .config import DataSection, load_config
from .errors import (
    AlphaCodaError,
    ConfigContradiction,
    ConfigError,
    DataGapError,
    FormatError,
    ParseError,
)
from .evaluation import ExperimentConfig, ComparisonTable, run_window_experiment
from .lifetable import read_hmd, read_series_csv, write_series_csv
from .metrics import parse_criterion
from .pipeline import bootstrap_forecast, fit_forecast
from .tuning import tune_alpha_multi

log = logging.getLogger("alphacoda")

EXIT_OK, EXIT_INPUT, EXIT_COMPUTE, EXIT_CONFIG = 0, 2, 3, 4


def fmt(x):
    """Fixed 12-significant-digit rendering; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def to_json(obj):
    return json.dumps(_round_floats(obj), indent=2, sort_keys=True, default=_json_default) + "\n"


def write_atomic(path, text):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(fmt(v) if not isinstance(v, str) else v for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Data loading


def _label(path):
    return Path(path).stem


def load_one(path, data):
    if data.source == "csv":
        with open(path, "rb") as fh:
            series = read_series_csv(fh.read())
        return series
    return read_hmd(path, rebuild_from_qx=data.rebuild_from_qx, radix=data.radix)


def load_all(cfg):
    paths = cfg.data.paths
    if not paths:
        raise ConfigError("data.path is required")
    return [(_label(p), load_one(p, cfg.data)) for p in paths]


# ---------------------------------------------------------------------------
# SVG fan chart


def fan_chart_svg(result, width=720, height=420, pad=48):
    """A static fan chart: bands at the last horizon, point forecasts for all."""
    ages = result.ages.astype(float)
    ymax = float(np.nanmax(result.point))
    for lo, hi in result.intervals.values():
        ymax = max(ymax, float(np.nanmax(hi)))
    ymax = ymax * 1.05 if ymax > 0 else 1.0

    def sx(a):
        return pad + (a - ages[0]) / max(ages[-1] - ages[0], 1) * (width - 2 * pad)

    def sy(v):
        return height - pad - v / ymax * (height - 2 * pad)

    def path(xs, ys):
        return " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">age</text>',
        f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" '
        f'text-anchor="middle">share of deaths</text>',
    ]
    for g in sorted(result.intervals):
        lo, hi = result.intervals[g]
        upper = path(ages, hi[-1])
        lower = path(ages[::-1], lo[-1][::-1])
        out.append(f'<polygon points="{upper} {lower}" fill="steelblue" fill-opacity="0.2"/>')
    H = len(result.years)
    for i in range(H):
        shade = int(200 * (1 - i / max(H - 1, 1)))
        out.append(
            f'<polyline points="{path(ages, result.point[i])}" fill="none" '
            f'stroke="rgb({shade},{shade},255)" stroke-width="1.2"/>'
        )
    out.append(
        f'<text x="{width - pad}" y="{pad - 10}" text-anchor="end" font-size="12">'
        f'{result.spec.label}, {int(result.years[0])}-{int(result.years[-1])}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Commands


def cmd_ingest(args):
    data = DataSection(source=args.source, rebuild_from_qx=args.rebuild_from_qx, radix=args.radix)
    series = load_one(args.input, data)
    out = Path(args.out)
    label = _label(args.input)
    write_atomic(out / f"{label}_series.csv", write_series_csv(series))
    summary = {
        "input": str(args.input),
        "n": series.n,
        "D": series.D,
        "first_year": int(series.years[0]),
        "last_year": int(series.years[-1]),
        "zero_cells": series.zero_cells(),
        "rebuild_from_qx": data.rebuild_from_qx,
        "radix": data.radix,
    }
    write_atomic(out / f"{label}_summary.json", to_json(summary))
    print(f"{label}: n={series.n} D={series.D} zero_cells={series.zero_cells()}")
    return EXIT_OK


def _tune(cfg, series, seed, workers):
    return tune_alpha_multi(
        series, cfg.forecast.H, tuple(cfg.experiment.criteria),
        k_rule=cfg.model.k_rule, model_rule=cfg.model.model_rule,
        grid_step=cfg.experiment.grid_step, refine=cfg.experiment.refine,
        B=cfg.forecast.B or None, gammas=tuple(cfg.forecast.gammas), seed=seed, workers=workers,
    )


def cmd_tune(cfg, args):
    if not cfg.wants_tuning:
        raise ConfigContradiction("nothing to tune: transform.alpha is fixed or kind is not 'alpha'")
    cfg.check_intervals()
    out = Path(args.out)
    for label, series in load_all(cfg):
        results = _tune(cfg, series, args.seed, args.threads)
        summary = []
        for crit, res in results.items():
            summary.append({
                "criterion": crit,
                "alpha_star": res.alpha_star,
                "error": res.error,
                "ilr_infeasible": res.ilr_infeasible,
                "n_evaluated": len(res.profile),
            })
            write_atomic(out / f"profile_{label}_{crit}.csv",
                         csv_text(("alpha", "error"), res.profile))
            print(f"{label} {crit}: alpha*={res.alpha_star:.4f} error={res.error:.6g}")
        meta = {"series": label, "H": cfg.forecast.H, "k_rule": cfg.model.k_rule,
                "model_rule": cfg.model.model_rule, "seed": args.seed, "results": summary}
        write_atomic(out / f"tune_{label}.json", to_json(meta))
    return EXIT_OK


def cmd_forecast(cfg, args):
    cfg.check_intervals()
    fc = cfg.forecast
    out = Path(args.out)
    for label, series in load_all(cfg):
        tuned = None
        if cfg.wants_tuning:
            crit = cfg.experiment.criteria[0]
            tuned = _tune(cfg, series, args.seed, args.threads)[crit]
            spec = cfg.transform_spec(tuned.alpha_star)
        else:
            spec = cfg.transform_spec()
        if fc.B:
            res = bootstrap_forecast(series, spec, fc.H, cfg.model.k_rule, cfg.model.model_rule,
                                     B=fc.B, gammas=tuple(fc.gammas), seed=args.seed)
        else:
            res = fit_forecast(series, spec, fc.H, cfg.model.k_rule, cfg.model.model_rule)
        gammas = sorted(res.intervals, reverse=True)
        header = ["year", "age", "point"]
        for g in gammas:
            header += [f"lb_{g:g}", f"ub_{g:g}"]
        rows = []
        for i, year in enumerate(res.years):
            for j, age in enumerate(res.ages):
                row = [int(year), int(age), res.point[i, j]]
                for g in gammas:
                    row += [res.intervals[g][0][i, j], res.intervals[g][1][i, j]]
                rows.append(row)
        write_atomic(out / f"forecast_{label}.csv", csv_text(header, rows))
        meta = {
            "series": label,
            "transform": {"kind": spec.kind, "alpha": spec.alpha},
            "tuned_on": tuned.criterion if tuned else None,
            "K": res.K,
            "models": res.models,
            "clamp_count": res.clamp_count,
            "failed_paths": res.failed_paths,
            "seed": args.seed,
            "H": fc.H,
            "B": fc.B,
            "gammas": list(fc.gammas) if fc.B else [],
            "k_rule": cfg.model.k_rule,
            "model_rule": cfg.model.model_rule,
            "first_year": int(res.years[0]),
            "config": cfg.model_dump(),
        }
        write_atomic(out / f"forecast_{label}.json", to_json(meta))
        write_atomic(out / f"fan_{label}.svg", fan_chart_svg(res))
        print(f"{label}: {spec.label} K={res.K} models={', '.join(res.models)}")
    return EXIT_OK


def cmd_evaluate(cfg, args):
    cfg.check_intervals()
    ex = cfg.experiment
    fc = cfg.forecast
    out = Path(args.out)
    total = failed = 0
    tuned_cache = {}
    all_series = load_all(cfg)
    for scheme in ex.schemes:
        table = ComparisonTable()
        curves, fans = [], []
        for label, series in all_series:
            econf = ExperimentConfig(
                scheme=scheme, H=fc.H, methods=tuple(ex.methods), criteria=tuple(ex.criteria),
                k_rule=cfg.model.k_rule, model_rule=cfg.model.model_rule,
                gammas=tuple(fc.gammas), B=fc.B, seed=args.seed, grid_step=ex.grid_step,
                refine=ex.refine, retune_per_origin=ex.retune_per_origin, workers=args.threads,
            )
            result = run_window_experiment(series, econf, label=label, tuned=tuned_cache.get(label))
            tuned_cache[label] = result.tuning
            table.rows.extend(result.table.rows)
            first_year = int(series.years[-fc.H])
            for r in result.table.rows:
                if r.get("per_horizon") is not None:
                    for h, v in enumerate(r["per_horizon"], start=1):
                        curves.append([label, scheme, r["method"], r["criterion"], h, v])
            seen = set()
            for r in result.table.rows:
                key = r.get("key")
                if key is None or (r["method"], key) in seen or r.get("failure"):
                    continue
                seen.add((r["method"], key))
                bt = result.backtests[key]
                for h in range(1, fc.H + 1):
                    for j, age in enumerate(series.ages):
                        row = [label, scheme, r["method"], first_year + h - 1, h, int(age),
                               bt.actual[h - 1, j], bt.forecasts[0, h - 1, j]]
                        for g in sorted(bt.bounds, reverse=True):
                            row += [bt.bounds[g][0][0, h - 1, j], bt.bounds[g][1][0, h - 1, j]]
                        fans.append(row)
        table.mark_best()
        total += len(table.rows)
        failed += len(table.failed)
        write_atomic(out / f"comparison_{scheme}.csv", table.to_csv())
        write_atomic(out / f"comparison_{scheme}.json", table.to_json())
        write_atomic(out / f"horizon_errors_{scheme}.csv",
                     csv_text(("series", "scheme", "method", "criterion", "h", "value"), curves))
        band_cols = []
        if fc.B and any(parse_criterion(c)[1] is not None for c in ex.criteria):
            for g in sorted(fc.gammas, reverse=True):
                band_cols += [f"lb_{g:g}", f"ub_{g:g}"]
        fans = [r[: 8 + len(band_cols)] + [None] * (8 + len(band_cols) - len(r)) for r in fans]
        write_atomic(out / f"fan_data_{scheme}.csv", csv_text(
            ["series", "scheme", "method", "year", "h", "age", "actual", "point"] + band_cols, fans))
        print(f"{scheme}: {len(table.rows)} cells, {len(table.failed)} failed")
        for r in table.rows:
            mark = "*" if r.get("best") else " "
            value = fmt(r["value"]) if r["value"] is not None else f"FAILED ({r['failure']})"
            print(f"  {mark} {r['series']:<16} {r['criterion']:<8} {r['method']:<12} {value}")
    meta = {"seed": args.seed, "config": cfg.model_dump(),
            "tuned_alpha": {label: {c: t.alpha_star for c, t in tuned.items()}
                            for label, tuned in tuned_cache.items()}}
    write_atomic(out / "evaluate.json", to_json(meta))
    if total and failed == total:
        log.error("every cell failed")
        return EXIT_COMPUTE
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="alphacoda", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override forecast.seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads across origins")

    p = sub.add_parser("ingest", help="parse a life table and write the series CSV")
    p.add_argument("input")
    p.add_argument("--source", choices=("hmd", "csv"), default="hmd")
    p.add_argument("--rebuild-from-qx", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--radix", type=float, default=1e5)
    common(p, config=False)
    for name, text in (("tune", "choose alpha on the validation block"),
                       ("forecast", "point forecasts and bootstrap intervals"),
                       ("evaluate", "out-of-sample comparison tables")):
        common(sub.add_parser(name, help=text))
    return parser


COMMANDS = {"tune": cmd_tune, "forecast": cmd_forecast, "evaluate": cmd_evaluate}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        if args.command == "ingest":
            return cmd_ingest(args)
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = cfg.forecast.seed
        return COMMANDS[args.command](cfg, args)
    except ConfigContradiction as exc:
        print(f"error: contradictory configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ParseError, DataGapError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AlphaCodaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
