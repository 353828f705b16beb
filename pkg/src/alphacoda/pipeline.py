"""
Fitting and forecasting a series of compositions end to end.

Each year's composition is transformed, the transformed curves are
decomposed into principal components, every retained score series gets a
univariate time-series model, and forecast scores are mapped back through
the inverse transform. Prediction intervals come from a bootstrap that
resamples in-sample multi-step score forecast errors together with whole
residual curves.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .compositions import alpha_inverse, alpha_transform
from .decomposition import fit_pca, select_k, truncate
from .errors import DomainError, ZeroInLogError
from .timeseries import auto_arima, fit_rwd, forecast

EIGENVALUE_RATIO = "eigenvalue_ratio"
MODEL_RULES = ("auto_arima", "rwd")
DEFAULT_B = 1000
DEFAULT_GAMMAS = (0.2, 0.05)


def _check_k_rule(k_rule):
    if k_rule == EIGENVALUE_RATIO:
        return k_rule
    if isinstance(k_rule, (int, np.integer)) and not isinstance(k_rule, bool) and k_rule >= 1:
        return int(k_rule)
    raise DomainError(f"k_rule must be {EIGENVALUE_RATIO!r} or a positive integer, got {k_rule!r}")


@dataclass
class FittedFTS:
    """Transform, decomposition and score models fitted to one training block."""

    spec: object
    D: int
    decomposition: object
    models: list
    eigenvalues: np.ndarray
    n: int

    @property
    def K(self):
        return self.decomposition.K

    def fitted_values(self):
        """In-sample reconstructions on the simplex from the K retained components."""
        return alpha_inverse(self.decomposition.fitted(), self.spec, D=self.D)

    def forecast_scores(self, H):
        points, insample = [], []
        for m in self.models:
            pt, ins = forecast(m, H)
            points.append(pt)
            insample.append(ins)
        return np.column_stack(points), np.stack(insample, axis=-1)

    def model_labels(self):
        return [str(m.spec) if m.method != "rwd" else "RWD" for m in self.models]


def transform_series(values, spec, years=None):
    """Row-wise transform; zero-in-log errors name the offending (year, age)."""
    try:
        return alpha_transform(values, spec)
    except ZeroInLogError as exc:
        if exc.index is not None and len(exc.index) == 2:
            row, age = exc.index
            year = years[row] if years is not None else row
            raise ZeroInLogError(
                f"{spec.label} needs strictly positive data; zero at year {year}, age index {age}",
                index=(year, age),
            ) from None
        raise


def fit_model(values, spec, k_rule=EIGENVALUE_RATIO, model_rule="auto_arima", years=None):
    """Fit the transform / PCA / score-model chain to an ``(n, D)`` block."""
    k_rule = _check_k_rule(k_rule)
    if model_rule not in MODEL_RULES:
        raise DomainError(f"model_rule must be one of {MODEL_RULES}, got {model_rule!r}")
    values = np.asarray(values, dtype=float)
    n, D = values.shape
    Z = transform_series(values, spec, years)
    full = fit_pca(Z)
    lam = full.eigenvalues
    if lam[0] <= 1e-14 * max(1.0, np.abs(Z).max()):
        K = 1
    elif k_rule == EIGENVALUE_RATIO:
        K = select_k(lam, n)
    else:
        K = min(k_rule, full.K)
    decomp = truncate(full, K)
    fitter = auto_arima if model_rule == "auto_arima" else fit_rwd
    models = [fitter(decomp.scores[:, k]) for k in range(K)]
    return FittedFTS(spec, D, decomp, models, lam, n)


@dataclass
class ForecastResult:
    """Point forecasts, optional bootstrap paths and pointwise intervals.

    ``intervals`` maps each gamma to ``(lower, upper)`` arrays of shape (H, D)
    at nominal coverage ``1 - gamma``. Bounds are pointwise quantiles and
    are deliberately not re-closed.
    """

    horizons: np.ndarray
    years: np.ndarray
    ages: np.ndarray
    point: np.ndarray
    spec: object
    K: int
    models: list
    bootstrap: np.ndarray | None = None
    intervals: dict = field(default_factory=dict)
    clamp_count: int = 0
    failed_paths: int = 0
    seed: int | None = None


def _forecast_years(series, H):
    return series.years[-1] + np.arange(1, H + 1) if series is not None else np.arange(1, H + 1)


def fit_forecast(series, spec, H, k_rule=EIGENVALUE_RATIO, model_rule="auto_arima"):
    """Point forecasts ``H`` years ahead of a :class:`CompositionSeries`."""
    if H < 1:
        raise DomainError("horizon must be at least 1")
    model = fit_model(series.values, spec, k_rule, model_rule, series.years)
    return _point_result(model, series, H)


def _point_result(model, series, H):
    scores, _ = model.forecast_scores(H)
    z = model.decomposition.reconstruct(scores)
    point, clamped = alpha_inverse(z, model.spec, D=model.D, return_clamped=True)
    return ForecastResult(
        horizons=np.arange(1, H + 1), years=_forecast_years(series, H), ages=series.ages,
        point=point, spec=model.spec, K=model.K, models=model.model_labels(),
        clamp_count=int(clamped.sum()),
    )


def bootstrap_paths(model, H, B, rng):
    """Bootstrap forecasts on the simplex, shape (B, H, D).

    Score forecast errors are drawn independently for every (b, h, k) from
    the in-sample h-step errors of component k; residual curves are drawn
    whole, independently for every (b, h).

    Returns
    -------
    paths : ndarray, shape (B, H, D); rows of failed paths are NaN
    point_scores : ndarray, shape (H, K)
    n_clamped, n_failed : int
    """
    decomp = model.decomposition
    scores = decomp.scores
    n, K = scores.shape
    if n <= H:
        raise DomainError(f"need more than H={H} observations to bootstrap, got {n}")
    point, insample = model.forecast_scores(H)
    draws = np.empty((B, H, K))
    for h in range(1, H + 1):
        for k in range(K):
            err = scores[:, k] - insample[h - 1, :, k]
            err = err[np.isfinite(err)]
            if err.size == 0:
                err = np.zeros(1)
            draws[:, h - 1, k] = err[rng.integers(err.size, size=B)]
    res_idx = rng.integers(n, size=(B, H))
    z = decomp.mean + (point[None] + draws) @ decomp.components + decomp.residuals[res_idx]
    paths, clamped = alpha_inverse(
        z.reshape(B * H, -1), model.spec, D=model.D, return_clamped=True, on_degenerate="nan"
    )
    failed = ~np.isfinite(paths).all(axis=1)
    return paths.reshape(B, H, -1), point, int(clamped.sum()), int(failed.sum())


def quantile_bands(paths, gammas):
    """Pointwise ``gamma/2`` and ``1 - gamma/2`` quantiles (linear
    interpolation) across the first axis."""
    out = {}
    for g in gammas:
        lo, hi = np.nanquantile(paths, [g / 2, 1 - g / 2], axis=0, method="linear")
        out[float(g)] = (lo, hi)
    return out


def bootstrap_forecast(series, spec, H, k_rule=EIGENVALUE_RATIO, model_rule="auto_arima",
                       B=DEFAULT_B, gammas=DEFAULT_GAMMAS, seed=0):
    """Point forecasts plus bootstrap prediction intervals.

    Parameters
    ----------
    series : CompositionSeries
    spec : TransformSpec
    H : int
        Forecast horizon.
    k_rule : "eigenvalue_ratio" or int
    model_rule : {"auto_arima", "rwd"}
    B : int
        Bootstrap replications, at least 100.
    gammas : sequence of float
        Significance levels; each yields a ``1 - gamma`` band.
    seed : int

    Returns
    -------
    ForecastResult
    """
    if B < 100:
        raise DomainError(f"B must be at least 100, got {B}")
    for g in gammas:
        if not 0 < g < 1:
            raise DomainError(f"gamma must lie in (0, 1), got {g}")
    model = fit_model(series.values, spec, k_rule, model_rule, series.years)
    result = _point_result(model, series, H)
    rng = np.random.default_rng(seed)
    paths, _, n_clamped, n_failed = bootstrap_paths(model, H, B, rng)
    result.bootstrap = paths
    result.intervals = quantile_bands(paths, gammas)
    result.clamp_count += n_clamped
    result.failed_paths = n_failed
    result.seed = seed
    return result


# ---------------------------------------------------------------------------
# Multi-origin backtests


@dataclass
class Backtest:
    """Forecasts of the last ``H`` rows of a block from ``H`` origins.

    ``forecasts[i, j]`` is the (j+1)-step forecast from origin ``i``, i.e.
    of ``actual[i + j]``; entries past the end of the block are NaN.
    ``bounds`` maps gamma to ``(lower, upper)`` arrays of the same shape.
    """

    actual: np.ndarray
    forecasts: np.ndarray
    bounds: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    K: list = field(default_factory=list)
    clamp_count: int = 0

    @property
    def H(self):
        return self.actual.shape[0]

    def horizon_block(self, h):
        """Rows scored at horizon h: (actual, forecast) of shape (H-h+1, D)."""
        i = np.arange(self.H - h + 1)
        return self.actual[i + h - 1], self.forecasts[i, h - 1]

    def horizon_bounds(self, h, gamma):
        i = np.arange(self.H - h + 1)
        lo, hi = self.bounds[gamma]
        return lo[i, h - 1], hi[i, h - 1]


def backtest(values, H, fit_predict, scheme="expanding", workers=1):
    """Run ``fit_predict(train, h_max)`` from every origin of the last ``H``
    rows of ``values``.

    The training block grows by one row per origin (``expanding``) or keeps
    the length of the first origin's block (``rolling``). ``fit_predict``
    returns ``(point (h_max, D), bounds {gamma: (lo, hi)}, info dict)`` and
    receives a read-only copy holding rows before the origin only.
    Exceptions are recorded per origin. Origins are independent, so
    ``workers > 1`` runs them on a thread pool with identical results.
    """
    values = np.asarray(values, dtype=float)
    N, D = values.shape
    if scheme not in ("expanding", "rolling"):
        raise DomainError(f"unknown scheme {scheme!r}")
    if H < 1:
        raise DomainError("H must be at least 1")
    if N - H < 3:
        raise DomainError(f"need at least 3 training rows before a block of {H}")
    window = N - H

    def run_origin(i):
        m = N - H + i
        start = 0 if scheme == "expanding" else m - window
        train = values[start:m].copy()
        train.setflags(write=False)
        try:
            return i, fit_predict(train, H - i), None
        except Exception as exc:  # recorded per origin; the experiment continues
            return i, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_origin, range(H)))
    else:
        outcomes = [run_origin(i) for i in range(H)]

    F = np.full((H, H, D), np.nan)
    bounds = {}
    bt = Backtest(actual=values[N - H:], forecasts=F, bounds=bounds)
    for i, out, err in outcomes:
        if err is not None:
            bt.failures.append((i, err))
            continue
        point, bands, info = out
        F[i, : H - i] = point
        for g, (lo, hi) in bands.items():
            if g not in bounds:
                bounds[g] = (np.full((H, H, D), np.nan), np.full((H, H, D), np.nan))
            bounds[g][0][i, : H - i] = lo
            bounds[g][1][i, : H - i] = hi
        bt.K.append(info.get("K"))
        bt.clamp_count += info.get("clamp_count", 0)
    return bt


def fts_predictor(spec, k_rule=EIGENVALUE_RATIO, model_rule="auto_arima", B=0,
                  gammas=DEFAULT_GAMMAS, seed=0):
    """A ``fit_predict`` callable for :func:`backtest` using the transform chain.

    With ``B > 0`` each origin also gets bootstrap bands; the origin's RNG is
    seeded from ``(seed, len(train), h)`` so results do not depend on call order.
    """

    def fit_predict(train, h):
        model = fit_model(train, spec, k_rule, model_rule)
        scores, _ = model.forecast_scores(h)
        z = model.decomposition.reconstruct(scores)
        point, clamped = alpha_inverse(z, spec, D=model.D, return_clamped=True)
        info = {"K": model.K, "clamp_count": int(clamped.sum())}
        bands = {}
        if B:
            rng = np.random.default_rng([seed, len(train), h])
            paths, _, n_clamped, _ = bootstrap_paths(model, h, B, rng)
            bands = quantile_bands(paths, gammas)
            info["clamp_count"] += n_clamped
        return point, bands, info

    return fit_predict
