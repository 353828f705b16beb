"""
Out-of-sample comparisons of forecasting methods.

The last ``H`` years are held out and forecast from ``H`` origins with an
expanding or a rolling training window. Transform-based methods (tuned
alpha, fixed alpha, ilr, clr, eda) and a Lee-Carter baseline on log
mortality rates are scored with the horizon-averaged criteria and collected
into a long-format comparison table.
"""

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .compositions import TransformSpec, closure
from .errors import DomainError, FitError
from .lifetable import qx_from_death_composition, rebuild_dx_from_qx
from .metrics import POINT_CRITERIA, parse_criterion, score_backtest
from .pipeline import DEFAULT_GAMMAS, EIGENVALUE_RATIO, backtest, fts_predictor
from .timeseries import fit_rwd, forecast
from .tuning import make_split, tune_alpha_multi

log = logging.getLogger(__name__)

METHODS = ("alpha", "ilr", "clr", "eda", "lee_carter")
RATE_FLOOR = 1e-10


# ---------------------------------------------------------------------------
# Lee-Carter baseline


@dataclass
class LeeCarterFit:
    ax: np.ndarray
    bx: np.ndarray
    kt: np.ndarray
    drift: float
    forecast: np.ndarray


def lee_carter_fit_forecast(log_rates, H):
    """Lee-Carter fit on an ``(n, D)`` matrix of log rates (years by ages)
    with a random-walk-with-drift forecast of the period index.

    ``bx`` sums to 1 and ``kt`` to 0. Returns forecast log rates of shape
    ``(H, D)`` inside a :class:`LeeCarterFit`.
    """
    M = np.asarray(log_rates, dtype=float)
    if not np.all(np.isfinite(M)):
        raise DomainError("log rates must be finite")
    ax = M.mean(axis=0)
    X = M - ax
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] <= 1e-12 * max(1.0, np.abs(M).max()):
        raise FitError("Lee-Carter: log rates have no variation over time")
    v = Vt[0]
    if abs(v.sum()) < 1e-12:
        raise FitError("Lee-Carter: age loadings sum to zero; cannot normalise")
    bx = v / v.sum()
    kt = U[:, 0] * s[0] * v.sum()
    kt = kt - kt.mean()
    rw = fit_rwd(kt)
    k_hat, _ = forecast(rw, H)
    return LeeCarterFit(ax, bx, kt, rw.drift, ax + np.outer(k_hat, bx))


def rates_to_qx(rates, a=0.5):
    """Death probabilities from central rates, ``q = m / (1 + (1 - a) m)``,
    clipped to [0, 1] with the last age closed at 1.

    Returns
    -------
    qx : ndarray
    clipped : ndarray of bool
    """
    m = np.atleast_2d(np.asarray(rates, dtype=float))
    raw = m / (1.0 + (1.0 - a) * m)
    q = np.clip(raw, 0.0, 1.0)
    clipped = raw != q
    q[:, -1] = 1.0
    return q, clipped


def rates_to_death_compositions(rates, radix=1e5, a=0.5):
    """Life-table death distributions (rows sum to 1) implied by central rates."""
    q, _ = rates_to_qx(rates, a)
    return closure(np.vstack([rebuild_dx_from_qx(row, radix) for row in q]))


def death_compositions_to_rates(values, a=0.5):
    """Central rates implied by death distributions: invert the life table for
    ``q`` and apply ``m = q / (1 - (1 - a) q)``. Floored before logs."""
    q = qx_from_death_composition(values)
    m = q / (1.0 - (1.0 - a) * q)
    return np.maximum(m, RATE_FLOOR)


def lee_carter_predictor(radix=1e5, a=0.5):
    """``fit_predict`` callable for :func:`~alphacoda.pipeline.backtest`."""

    def fit_predict(train, h):
        log_m = np.log(death_compositions_to_rates(train, a))
        fit = lee_carter_fit_forecast(log_m, h)
        return rates_to_death_compositions(np.exp(fit.forecast), radix, a), {}, {"K": 1}

    return fit_predict


# ---------------------------------------------------------------------------
# Experiments


@dataclass
class ExperimentConfig:
    """One comparison experiment.

    ``methods`` entries are ``"alpha"`` (tuned on the validation block per
    criterion), ``"alpha=<value>"`` (fixed), ``"ilr"``, ``"clr"``, ``"eda"``
    or ``"lee_carter"``. With ``retune_per_origin`` the tuned alpha is
    re-chosen inside every training window instead of frozen (slow).
    """

    scheme: str = "expanding"
    H: int = 10
    methods: tuple = METHODS
    criteria: tuple = POINT_CRITERIA
    k_rule: object = EIGENVALUE_RATIO
    model_rule: str = "auto_arima"
    gammas: tuple = DEFAULT_GAMMAS
    B: int = 1000
    seed: int = 0
    grid_step: float = 0.01
    refine: bool = True
    retune_per_origin: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.H < 1:
            raise DomainError("H must be at least 1")
        if self.scheme not in ("expanding", "rolling"):
            raise DomainError(f"scheme must be 'expanding' or 'rolling', got {self.scheme!r}")
        for m in self.methods:
            _method_spec(m)
        for c in self.criteria:
            parse_criterion(c)

    @property
    def needs_bands(self):
        return any(parse_criterion(c)[1] is not None for c in self.criteria)


def _method_spec(method):
    if method in ("ilr", "clr", "eda"):
        return TransformSpec(method)
    if method in ("alpha", "lee_carter"):
        return None
    if method.startswith("alpha="):
        return TransformSpec("alpha", float(method.split("=", 1)[1]))
    raise DomainError(f"unknown method {method!r}")


@dataclass
class ComparisonTable:
    """Long-format table: one row per (series, scheme, criterion, H, k_rule, method).

    Rows carry ``value`` (horizon-averaged error) or a ``failure`` reason,
    and ``best`` marks the smallest value within each
    (series, scheme, criterion, H, k_rule) group.
    """

    rows: list = field(default_factory=list)

    def add(self, **row):
        self.rows.append(row)

    def mark_best(self):
        groups = {}
        for r in self.rows:
            key = (r["series"], r["scheme"], r["criterion"], r["H"], r["k_rule"])
            groups.setdefault(key, []).append(r)
        for rows in groups.values():
            vals = [r["value"] for r in rows if r["value"] is not None and np.isfinite(r["value"])]
            best = min(vals) if vals else None
            for r in rows:
                r["best"] = best is not None and r["value"] is not None and bool(
                    np.isclose(r["value"], best, rtol=1e-9, atol=0.0)
                )
        return self

    def value(self, criterion, method, **keys):
        for r in self.rows:
            if r["criterion"] == criterion and r["method"] == method and all(
                r[k] == v for k, v in keys.items()
            ):
                return r["value"]
        raise KeyError((criterion, method, keys))

    @property
    def failed(self):
        return [r for r in self.rows if r.get("failure")]

    COLUMNS = ("series", "scheme", "criterion", "H", "k_rule", "method", "alpha",
               "value", "best", "failure")

    def to_csv(self):
        out = io.StringIO()
        w = csv.DictWriter(out, fieldnames=self.COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            row = dict(r)
            for key in ("value", "alpha"):
                if isinstance(row.get(key), float):
                    row[key] = f"{row[key]:.12g}"
            w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in self.COLUMNS})
        return out.getvalue()

    def to_json(self):
        def clean(v):
            if isinstance(v, float):
                return float(f"{v:.12g}") if np.isfinite(v) else None
            return v

        return json.dumps([{k: clean(r.get(k)) for k in self.COLUMNS} for r in self.rows], indent=2)


@dataclass
class ExperimentResult:
    """``reports`` and ``backtests`` are keyed by the ``key`` stored on each
    table row, so methods sharing a transform share one backtest."""

    table: ComparisonTable
    reports: dict
    tuning: dict
    backtests: dict


def run_window_experiment(series, config, label="series", tuned=None):
    """Score every configured method on the held-out last ``H`` years.

    Alpha is tuned on the validation block (test block unseen) once per
    criterion, unless ``tuned`` supplies ``{criterion: TuneResult}`` from an
    earlier run. Failures are recorded per cell.

    Returns
    -------
    ExperimentResult
    """
    values = np.asarray(getattr(series, "values", series), dtype=float)
    radix = getattr(series, "radix", 1e5)
    H = config.H
    n = values.shape[0]
    if n < 2 * H + 10:
        raise DomainError(f"need n >= 2H + 10 observations, got n={n}, H={H}")
    k_label = config.k_rule if config.k_rule == EIGENVALUE_RATIO else f"K={config.k_rule}"
    B = config.B if config.needs_bands else 0
    point_crit = [c for c in config.criteria if parse_criterion(c)[1] is None]

    tuning = dict(tuned or {})
    if ("alpha" in config.methods and not config.retune_per_origin
            and any(c not in tuning for c in config.criteria)):
        make_split(n, H)
        todo = [c for c in config.criteria if c not in tuning]
        tuning.update(tune_alpha_multi(
            values, H, todo, k_rule=config.k_rule, model_rule=config.model_rule,
            grid_step=config.grid_step, refine=config.refine, B=config.B,
            gammas=config.gammas, seed=config.seed, workers=config.workers,
        ))

    backtests, reports = {}, {}
    lc = lee_carter_predictor(radix)

    def run(key, predictor, criteria):
        if key not in backtests:
            bt = backtest(values, H, predictor, scheme=config.scheme, workers=config.workers)
            backtests[key] = bt
            reports[key] = None if bt.failures else score_backtest(bt, criteria)
        return backtests[key], reports[key]

    table = ComparisonTable()
    for method in config.methods:
        for crit in config.criteria:
            row = dict(series=label, scheme=config.scheme, criterion=crit, H=H,
                       k_rule=k_label, method=method, alpha=None, value=None, failure=None)
            if method == "lee_carter":
                if crit not in point_crit:
                    row["failure"] = "not applicable: Lee-Carter gives point forecasts only"
                    table.add(**row)
                    continue
                key = ("lee_carter",)
                bt, rep = run(key, lc, point_crit)
            elif method == "alpha" and config.retune_per_origin:
                pred = _retuning_predictor(config, crit, B)
                key = ("alpha", "retuned", crit)
                bt, rep = run(key, pred, config.criteria)
            else:
                spec = _method_spec(method)
                if spec is None:
                    spec = TransformSpec("alpha", tuning[crit].alpha_star)
                if spec.kind == "alpha":
                    row["alpha"] = spec.alpha
                pred = fts_predictor(spec, config.k_rule, config.model_rule, B,
                                     config.gammas, config.seed)
                key = (spec.kind, spec.alpha)
                bt, rep = run(key, pred, config.criteria)
            row["key"] = key
            if rep is None:
                row["failure"] = "; ".join(sorted({r for _, r in bt.failures}))
            else:
                row["value"] = rep.averaged[crit]
                row["per_horizon"] = rep.per_horizon[crit]
            table.add(**row)
    table.mark_best()
    return ExperimentResult(table, reports, tuning, backtests)


def _retuning_predictor(config, criterion, B):
    def fit_predict(train, h):
        a = tune_alpha_multi(
            train, config.H, (criterion,), k_rule=config.k_rule, model_rule=config.model_rule,
            grid_step=config.grid_step, refine=config.refine, B=config.B,
            gammas=config.gammas, seed=config.seed,
        )[criterion].alpha_star
        inner = fts_predictor(TransformSpec("alpha", a), config.k_rule, config.model_rule,
                              B, config.gammas, config.seed)
        point, bands, info = inner(train, h)
        info["alpha"] = a
        return point, bands, info

    return fit_predict


def fan_chart_rows(result, gamma=None):
    """Long-format plot data ``(year, age, point, lb, ub)`` from a ForecastResult."""
    rows = []
    bands = result.intervals.get(gamma) if gamma is not None else None
    for i, year in enumerate(result.years):
        for j, age in enumerate(result.ages):
            lo = bands[0][i, j] if bands else None
            hi = bands[1][i, j] if bands else None
            rows.append((int(year), int(age), result.point[i, j], lo, hi))
    return rows
