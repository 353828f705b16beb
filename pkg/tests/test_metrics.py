import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from alphacoda.errors import DomainError
from alphacoda.metrics import (
    criterion_name,
    ecp,
    goodness_of_fit,
    interval_metrics,
    interval_score,
    jsd,
    kld,
    parse_criterion,
    score_backtest,
)
from alphacoda.pipeline import Backtest

D = np.array([0.5, 0.3, 0.2])
F = np.array([0.4, 0.4, 0.2])

positive = arrays(np.float64, 12, elements=st.floats(1e-6, 1.0))


def reference_kld(a, f):
    total = 0.0
    for x, y in zip(a, f):
        total += x * math.log(x / y) + y * math.log(y / x)
    return total / len(a)


def test_kld_hand_example():
    expression = (0.5 * math.log(0.5 / 0.4) + 0.3 * math.log(0.3 / 0.4) + 0.0
                  + 0.4 * math.log(0.4 / 0.5) + 0.4 * math.log(0.4 / 0.3) + 0.0) / 3
    assert kld(D, F) == pytest.approx(expression, abs=1e-12)
    assert kld(D, F) == pytest.approx(0.0170275, abs=1e-6)


def test_jsd_arithmetic_hand_example():
    m = (D + F) / 2
    expected = 0.5 * np.mean(D * np.log(D / m)) + 0.5 * np.mean(F * np.log(F / m))
    assert jsd(D, F) == pytest.approx(expected, abs=1e-12)
    assert jsd(D, F) == pytest.approx(0.0021224, abs=1e-6)


def test_jsd_geometric_uses_raw_geometric_mean():
    g = np.sqrt(D * F)
    expected = 0.5 * np.mean(D * np.log(D / g)) + 0.5 * np.mean(F * np.log(F / g))
    assert jsd(D, F, "geometric") == pytest.approx(expected, abs=1e-14)


@given(positive, positive)
def test_kld_matches_reference_loop(a, f):
    assert kld(a, f) == pytest.approx(reference_kld(a, f), rel=1e-9, abs=1e-15)


@given(positive, positive)
def test_divergence_properties(a, f):
    assert kld(a, f) >= 0
    assert kld(a, f) == pytest.approx(kld(f, a), rel=1e-12, abs=1e-18)
    assert jsd(a, f) >= -1e-15
    assert jsd(a, f) <= 0.5 * kld(a, f) + 1e-12


@given(positive)
def test_divergences_vanish_on_identity(a):
    assert kld(a, a) == 0
    assert jsd(a, a) == 0
    assert abs(jsd(a, a, "geometric")) < 1e-15


@given(positive, positive)
def test_floor_sensitivity(a, f):
    assert abs(kld(a, f, floor=1e-15) - kld(a, f, floor=5e-16)) < 1e-6


def test_zeros_are_floored():
    val = kld([0.5, 0.5, 0.0], [0.4, 0.4, 0.2])
    assert np.isfinite(val) and val > 0


def test_shape_and_kind_checks():
    with pytest.raises(DomainError):
        kld(D, F[:2])
    with pytest.raises(DomainError):
        jsd(D, F, "harmonic")


# --- intervals ---------------------------------------------------------------


def test_full_coverage():
    out = interval_metrics(D, D - 0.1, D + 0.1, 0.2)
    assert out["ECP"] == 1.0 and out["CPD"] == pytest.approx(0.2)


def test_interval_score_hand_example():
    assert interval_score([0.5], [1.0], [2.0], 0.2) == pytest.approx(6.0)


def test_boundary_is_covered_without_penalty():
    assert ecp([1.0], [1.0], [2.0]) == 1.0
    assert interval_score([1.0], [1.0], [2.0], 0.05) == pytest.approx(1.0)


def test_crossed_bounds_rejected():
    with pytest.raises(DomainError):
        ecp([1.0], [2.0], [1.0])


@given(arrays(np.float64, 8, elements=st.floats(-5, 5)),
       arrays(np.float64, 8, elements=st.floats(0, 2)),
       arrays(np.float64, 8, elements=st.floats(0, 2)),
       st.sampled_from([0.05, 0.2]))
def test_interval_score_properties(d, below, above, g):
    lb, ub = d - below, d + above
    s = interval_score(d, lb, ub, g)
    assert s >= 0
    assert interval_score(d, d, d, g) == 0.0
    assert s >= interval_score(d, d, d, g)
    wider = interval_score(d, lb - 0.1, ub + 0.1, g)
    assert wider > s
    out = interval_metrics(d, lb, ub, g)
    assert 0 <= out["ECP"] <= 1
    assert out["CPD"] == pytest.approx(abs(out["ECP"] - (1 - g)))


# --- goodness of fit ---------------------------------------------------------


def test_goodness_of_fit_identities(rng):
    X = rng.dirichlet(np.ones(5), size=20)
    assert goodness_of_fit(X, X) == (1.0, 0.0)
    r2, _ = goodness_of_fit(X, np.broadcast_to(X.mean(axis=0), X.shape))
    assert r2 == pytest.approx(0.0, abs=1e-12)


def test_goodness_of_fit_zero_variance():
    X = np.tile([0.2, 0.8], (5, 1))
    with pytest.raises(DomainError):
        goodness_of_fit(X, X)


# --- horizon profiles --------------------------------------------------------


def test_criterion_labels():
    assert criterion_name("CPD", 0.2) == "CPD_0.2"
    assert parse_criterion("S_0.05") == ("S", 0.05)
    assert parse_criterion("KLD") == ("KLD", None)
    with pytest.raises(DomainError):
        parse_criterion("MAPE")


def test_score_backtest_divisors(rng):
    H, Dn = 4, 6
    actual = rng.dirichlet(np.ones(Dn), size=H)
    F = np.full((H, H, Dn), np.nan)
    for i in range(H):
        for j in range(H - i):
            F[i, j] = rng.dirichlet(np.ones(Dn))
    lo, hi = F - 0.05, F + 0.05
    bt = Backtest(actual=actual, forecasts=F, bounds={0.2: (lo, hi)})
    rep = score_backtest(bt, ("KLD", "JSD_a", "JSD_g", "ECP_0.2", "CPD_0.2", "S_0.2"))
    for h in range(1, H + 1):
        rows = range(H - h + 1)
        a = np.array([actual[i + h - 1] for i in rows])
        f = np.array([F[i, h - 1] for i in rows])
        # mean over (H + 1 - h) years and all ages
        expected = np.sum(a * np.log(a / f) + f * np.log(f / a)) / ((H + 1 - h) * Dn)
        assert rep.per_horizon["KLD"][h - 1] == pytest.approx(expected, rel=1e-12)
    for name, curve in rep.per_horizon.items():
        assert rep.averaged[name] == pytest.approx(curve.mean(), abs=1e-12)
    assert np.all(rep.per_horizon["KLD"] >= 0)


def test_score_backtest_needs_bands(rng):
    bt = Backtest(actual=np.full((2, 3), 1 / 3), forecasts=np.full((2, 2, 3), 1 / 3))
    with pytest.raises(DomainError):
        score_backtest(bt, ("CPD_0.2",))
