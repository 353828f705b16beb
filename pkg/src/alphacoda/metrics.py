"""
Forecast accuracy measures for age distributions of deaths.

Point measures compare forecast and observed distributions by a symmetric
Kullback-Leibler divergence and two Jensen-Shannon divergences. Interval
measures are the empirical coverage, its absolute deviation from nominal
(CPD) and the Gneiting-Raftery interval score. Every block measure averages
over all (year, age) cells of the block it is given; horizon profiles come
from :func:`score_backtest`.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

DEFAULT_FLOOR = 1e-15
POINT_CRITERIA = ("KLD", "JSD_a", "JSD_g")


def _pair(actual, forecast, floor):
    a = np.asarray(actual, dtype=float)
    f = np.asarray(forecast, dtype=float)
    if a.shape != f.shape:
        raise DomainError(f"shape mismatch: {a.shape} vs {f.shape}")
    if floor <= 0:
        raise DomainError("floor must be positive")
    return np.maximum(a, floor), np.maximum(f, floor)


def _kl_cells(p, q):
    return p * (np.log(p) - np.log(q))


def kld(actual, forecast, floor=DEFAULT_FLOOR):
    """Symmetric Kullback-Leibler divergence averaged over cells.

    Both arguments are floored at ``floor`` before taking logs.
    """
    a, f = _pair(actual, forecast, floor)
    return float(np.mean(_kl_cells(a, f) + _kl_cells(f, a)))


def jsd(actual, forecast, mean_kind="arithmetic", floor=DEFAULT_FLOOR):
    """Jensen-Shannon divergence averaged over cells.

    ``mean_kind="geometric"`` uses the elementwise ``sqrt(d * d_hat)`` as the
    reference without renormalising it, so this variant is not bounded the
    way the usual JSD is.
    """
    a, f = _pair(actual, forecast, floor)
    if mean_kind == "arithmetic":
        m = 0.5 * (a + f)
    elif mean_kind == "geometric":
        m = np.sqrt(a * f)
    else:
        raise DomainError(f"mean_kind must be 'arithmetic' or 'geometric', got {mean_kind!r}")
    return float(0.5 * np.mean(_kl_cells(a, m)) + 0.5 * np.mean(_kl_cells(f, m)))


def _bands(actual, lb, ub):
    d = np.asarray(actual, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if not (d.shape == lb.shape == ub.shape):
        raise DomainError("actual, lb and ub must share a shape")
    if np.any(lb > ub):
        raise DomainError("lower bound exceeds upper bound")
    return d, lb, ub


def ecp(actual, lb, ub):
    """Share of cells inside ``[lb, ub]``; boundary values count as covered."""
    d, lb, ub = _bands(actual, lb, ub)
    return float(1.0 - np.mean((d < lb) | (d > ub)))


def interval_score(actual, lb, ub, gamma):
    """Mean interval score ``(ub - lb) + 2/gamma * distance outside the band``."""
    d, lb, ub = _bands(actual, lb, ub)
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    s = (ub - lb) + (2.0 / gamma) * ((lb - d) * (d < lb) + (d - ub) * (d > ub))
    return float(np.mean(s))


def interval_metrics(actual, lb, ub, gamma):
    """ECP, CPD and mean interval score of one block at level ``1 - gamma``."""
    e = ecp(actual, lb, ub)
    return {"ECP": e, "CPD": abs(e - (1.0 - gamma)), "S": interval_score(actual, lb, ub, gamma)}


def goodness_of_fit(actual, fitted):
    """In-sample R^2 (against age-wise means over years) and RMSE over all cells."""
    d = np.asarray(actual, dtype=float)
    f = np.asarray(fitted, dtype=float)
    if d.shape != f.shape:
        raise DomainError(f"shape mismatch: {d.shape} vs {f.shape}")
    sse = np.sum((d - f) ** 2)
    sst = np.sum((d - d.mean(axis=0)) ** 2)
    if sst == 0:
        raise DomainError("R^2 undefined: observed series has zero variance")
    return float(1.0 - sse / sst), float(np.sqrt(np.mean((d - f) ** 2)))


# ---------------------------------------------------------------------------
# Horizon profiles


def criterion_name(kind, gamma=None):
    """Canonical label, e.g. ``"KLD"`` or ``"CPD_0.2"``."""
    if kind in POINT_CRITERIA:
        return kind
    if kind in ("CPD", "S", "ECP"):
        return f"{kind}_{gamma:g}"
    raise DomainError(f"unknown criterion {kind!r}")


def parse_criterion(name):
    """Split a label into ``(kind, gamma)``; gamma is None for point criteria."""
    if name in POINT_CRITERIA:
        return name, None
    kind, _, g = name.partition("_")
    if kind in ("CPD", "S", "ECP") and g:
        try:
            return kind, float(g)
        except ValueError:
            pass
    raise DomainError(f"unknown criterion {name!r}")


@dataclass
class MetricReport:
    """Per-horizon values and their horizon averages, keyed by criterion label."""

    per_horizon: dict = field(default_factory=dict)
    averaged: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.averaged[name]


def score_backtest(bt, criteria=POINT_CRITERIA, floor=DEFAULT_FLOOR):
    """Evaluate a :class:`~alphacoda.pipeline.Backtest` horizon by horizon.

    For horizon h the block holds the h-step forecasts from every origin
    that has one; the averaged value is the plain mean over h = 1..H.
    """
    report = MetricReport()
    H = bt.H
    for name in criteria:
        kind, gamma = parse_criterion(name)
        vals = np.empty(H)
        for h in range(1, H + 1):
            a, f = bt.horizon_block(h)
            if kind == "KLD":
                vals[h - 1] = kld(a, f, floor)
            elif kind == "JSD_a":
                vals[h - 1] = jsd(a, f, "arithmetic", floor)
            elif kind == "JSD_g":
                vals[h - 1] = jsd(a, f, "geometric", floor)
            else:
                if gamma not in bt.bounds:
                    raise DomainError(f"no bands at gamma={gamma} for criterion {name}")
                lo, hi = bt.horizon_bounds(h, gamma)
                vals[h - 1] = interval_metrics(a, lo, hi, gamma)[kind]
        report.per_horizon[name] = vals
        report.averaged[name] = float(vals.mean())
    return report
