"""Choosing alpha by forecasting a validation block.

The data are split into training ``1:(n-2H)``, validation
``(n-2H+1):(n-H)`` and testing ``(n-H+1):n`` blocks. Only the first two
are read here: the validation block is forecast from expanding training
windows, and alpha is chosen to minimise a horizon-averaged error, first
over a grid and then by golden-section search around the best grid point.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .compositions import TransformSpec
from .errors import DomainError, TuningError
from .metrics import parse_criterion, score_backtest
from .pipeline import DEFAULT_B, EIGENVALUE_RATIO, backtest, fts_predictor

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SplitPlan:
    """Zero-based index ranges of the three blocks."""

    n: int
    H: int

    @property
    def train(self):
        return np.arange(0, self.n - 2 * self.H)

    @property
    def validation(self):
        return np.arange(self.n - 2 * self.H, self.n - self.H)

    @property
    def test(self):
        return np.arange(self.n - self.H, self.n)


def make_split(n, H):
    if H < 1:
        raise DomainError("H must be at least 1")
    if n <= 2 * H + 10:
        raise DomainError(f"need n > 2H + 10 observations, got n={n}, H={H}")
    return SplitPlan(n, H)


@dataclass
class TuneResult:
    alpha_star: float
    criterion: str
    error: float
    profile: list = field(default_factory=list)
    infeasible: list = field(default_factory=list)

    @property
    def ilr_infeasible(self):
        return 0.0 in self.infeasible


class _ValidationObjective:
    """Validation-block errors for every requested criterion, memoised by alpha."""

    def __init__(self, values, H, criteria, k_rule, model_rule, B, gammas, seed, workers=1):
        self.values = values
        self.H = H
        self.criteria = criteria
        self.k_rule = k_rule
        self.model_rule = model_rule
        self.B = B
        self.gammas = gammas
        self.seed = seed
        self.workers = workers
        self.cache = {}

    def __call__(self, a):
        a = round(float(a), 12)
        if a in self.cache:
            return self.cache[a]
        spec = TransformSpec("alpha", a)
        fp = fts_predictor(spec, self.k_rule, self.model_rule, self.B, self.gammas, self.seed)
        bt = backtest(self.values, self.H, fp, scheme="expanding", workers=self.workers)
        errors = None
        if bt.failures:
            reasons = {r for _, r in bt.failures}
            log.info("alpha=%g infeasible: %s", a, "; ".join(sorted(reasons)))
        else:
            errors = score_backtest(bt, self.criteria).averaged
        self.cache[a] = errors
        return errors


def _golden(f, lo, hi, tol):
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = f(d)


def tune_alpha_multi(series, H, criteria=("KLD",), k_rule=EIGENVALUE_RATIO,
                     model_rule="auto_arima", grid_step=0.01, refine=True, tol=1e-4,
                     B=None, gammas=None, seed=0, workers=1):
    """Tune alpha for several criteria while sharing the forecasts.

    Parameters
    ----------
    series : CompositionSeries or ndarray, shape (n, D)
        The full sample; its last ``H`` rows (the test block) are dropped
        before anything is computed.
    H : int
    criteria : sequence of str
        Labels such as ``"KLD"``, ``"JSD_a"``, ``"CPD_0.2"``, ``"S_0.05"``.
    grid_step : float
        Spacing of the alpha grid on [0, 1].
    refine : bool
        Golden-section refinement to width ``tol`` around the grid minimum.
    B : int, optional
        Bootstrap size for interval criteria (default 1000).
    workers : int
        Threads used across forecast origins.

    Returns
    -------
    dict
        Criterion label to :class:`TuneResult`.
    """
    values = np.asarray(getattr(series, "values", series), dtype=float)
    plan = make_split(values.shape[0], H)
    visible = values[: plan.test[0]]
    if not np.all(np.isfinite(visible)):
        raise DomainError("training/validation blocks contain non-finite values")

    interval_gammas = sorted({g for c in criteria for k, g in [parse_criterion(c)] if g is not None})
    if interval_gammas:
        B = DEFAULT_B if B is None else B
        gammas = tuple(interval_gammas) if gammas is None else tuple(gammas)
    else:
        B, gammas = 0, ()
    objective = _ValidationObjective(visible, H, tuple(criteria), k_rule, model_rule, B, gammas,
                                     seed, workers)

    n_grid = int(round(1.0 / grid_step))
    grid = np.linspace(0.0, 1.0, n_grid + 1)
    infeasible = []
    # every training window is a prefix of visible[:-1]
    if np.any(visible[:-1] <= 0):
        infeasible.append(0.0)
        grid = grid[1:]
    for a in grid:
        if objective(a) is None and a not in infeasible:
            infeasible.append(float(a))

    results = {}
    for crit in criteria:
        def err(a, crit=crit):
            e = objective(a)
            return np.inf if e is None else e[crit]

        feasible = [(a, err(a)) for a in grid if np.isfinite(err(a))]
        if not feasible:
            raise TuningError(f"no feasible alpha for {crit}")
        a0 = min(feasible, key=lambda t: (t[1], t[0]))[0]
        if refine:
            _golden(err, max(0.0, a0 - grid_step), min(1.0, a0 + grid_step), tol)
        profile = sorted(
            (a, e[crit]) for a, e in objective.cache.items() if e is not None
        )
        best = min(profile, key=lambda t: (t[1], t[0]))
        results[crit] = TuneResult(best[0], crit, best[1], profile, sorted(infeasible))
    return results


def tune_alpha(series, H, criterion="KLD", **kwargs):
    """Alpha minimising one validation criterion; see :func:`tune_alpha_multi`."""
    return tune_alpha_multi(series, H, (criterion,), **kwargs)[criterion]
