"""
alphacoda: forecasting time series of compositions.

Age distributions of life-table deaths (or any unit-sum vectors) are mapped
through the alpha-transformation, decomposed into principal components
whose scores are forecast by ARIMA models, and mapped back to the simplex.
Bootstrap intervals, validation-based tuning of alpha and an out-of-sample
evaluation harness are included.
"""

from .compositions import (
    CLR,
    EDA,
    ILR,
    TransformSpec,
    alpha,
    alpha_inverse,
    alpha_transform,
    as_composition,
    closure,
    clr_transform,
    helmert,
    ilr_transform,
)
from .decomposition import PCDecomposition, fit_pca, select_k, truncate
from .errors import *  # noqa: F401,F403
from .evaluation import (
    ComparisonTable,
    ExperimentConfig,
    lee_carter_fit_forecast,
    rates_to_death_compositions,
    run_window_experiment,
)
from .lifetable import (
    CompositionSeries,
    LifeTableRecord,
    build_series,
    parse_hmd_lifetable,
    read_hmd,
    read_series_csv,
    rebuild_dx_from_qx,
    write_series_csv,
)
from .metrics import ecp, goodness_of_fit, interval_metrics, interval_score, jsd, kld, score_backtest
from .pipeline import backtest, bootstrap_forecast, fit_forecast, fit_model
from .timeseries import ArimaSpec, auto_arima, fit_arima, fit_rwd, forecast
from .tuning import make_split, tune_alpha, tune_alpha_multi

__version__ = "0.1.0"
