"""
Univariate models for principal-component scores.

ARIMA(p, d, q) models with an optional mean/drift term are fitted by exact
Gaussian maximum likelihood: the differenced series is put in state-space
form and the likelihood is evaluated with a Kalman filter, with sigma^2
concentrated out. AR and MA coefficients are optimised through partial
autocorrelations so every candidate is stationary and invertible.

``auto_arima`` picks d by repeated KPSS tests and then walks the (p, q)
grid stepwise by AICc, in the manner of Hyndman and Khandakar (2008).
"""

import threading
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DomainError, FitError

MAX_P = 5
MAX_Q = 5
MAX_D = 2
ROOT_MARGIN = 1.001
KPSS_CRIT_5PCT = 0.463
PACF_BOUND = 0.999

# warning filters are process-global; serialise changes across worker threads
_WARN_LOCK = threading.Lock()


@dataclass(frozen=True)
class ArimaSpec:
    p: int = 0
    d: int = 0
    q: int = 0
    include_drift: bool = False

    def __post_init__(self):
        if not (0 <= self.p <= MAX_P and 0 <= self.q <= MAX_Q and 0 <= self.d <= MAX_D):
            raise DomainError(f"orders out of range: {self}")
        if self.include_drift and self.d > 1:
            raise DomainError("a drift term needs d <= 1")

    @property
    def n_params(self):
        """Parameter count used by AICc (coefficients, drift, sigma^2)."""
        return self.p + self.q + int(self.include_drift) + 1

    def __str__(self):
        drift = " + drift" if self.include_drift else ""
        return f"ARIMA({self.p},{self.d},{self.q}){drift}"


@dataclass(frozen=True)
class FittedModel:
    """A fitted score model. ``drift`` is the mean of the d-times
    differenced series (the level for d = 0, the slope for d = 1)."""

    spec: ArimaSpec
    ar: np.ndarray
    ma: np.ndarray
    drift: float
    sigma2: float
    loglik: float
    aicc: float
    residuals: np.ndarray
    y: np.ndarray = field(repr=False)
    method: str = "exact"
    n_eval: int = 0

    @property
    def n_eff(self):
        return len(self.y) - self.spec.d

    @property
    def aic(self):
        return -2.0 * self.loglik + 2.0 * self.spec.n_params

    def min_root_modulus(self):
        """Smallest root modulus over the AR and MA polynomials (inf if none)."""
        return min(_min_root(-self.ar), _min_root(self.ma))

    def roots_ok(self):
        return self.min_root_modulus() > ROOT_MARGIN


def _min_root(coef):
    # roots of 1 + c1 z + ... + ck z^k
    coef = np.trim_zeros(np.asarray(coef, dtype=float), "b")
    if coef.size == 0:
        return np.inf
    return float(np.abs(np.roots(np.r_[coef[::-1], 1.0])).min())


# ---------------------------------------------------------------------------
# Parameter transforms


@numba.njit(cache=True)
def _pacf_to_coef(r):
    phi = np.zeros(r.size)
    for k in range(r.size):
        prev = phi[:k].copy()
        phi[k] = r[k]
        for j in range(k):
            phi[j] = prev[j] - r[k] * prev[k - 1 - j]
    return phi


def pacf_to_coef(r):
    """Durbin-Levinson map from partial autocorrelations to AR coefficients."""
    return _pacf_to_coef(np.asarray(r, dtype=float))


def coef_to_pacf(phi):
    """Inverse of :func:`pacf_to_coef`; returns None for non-stationary input."""
    a = np.array(phi, dtype=float)
    r = np.zeros(a.size)
    for k in range(a.size - 1, -1, -1):
        r[k] = a[k]
        if abs(r[k]) >= 1.0:
            return None
        a[:k] = (a[:k] + r[k] * a[:k][::-1]) / (1.0 - r[k] ** 2)
    return r


@numba.njit(cache=True)
def _unpack(u, p, q):
    ar = _pacf_to_coef(PACF_BOUND * np.tanh(u[:p]))
    ma = -_pacf_to_coef(PACF_BOUND * np.tanh(u[p:p + q]))
    return ar, ma


def _to_unconstrained(coef, sign, cap=0.95):
    r = coef_to_pacf(sign * np.asarray(coef)) if len(coef) else np.zeros(0)
    if r is None:
        r = np.zeros(len(coef))
    return np.arctanh(np.clip(r / PACF_BOUND, -cap, cap))


# ---------------------------------------------------------------------------
# State space / Kalman filter


@numba.njit(cache=True)
def _system(phi, theta):
    p, q = phi.size, theta.size
    r = max(p, q + 1)
    T = np.zeros((r, r))
    for i in range(p):
        T[i, 0] = phi[i]
    for i in range(r - 1):
        T[i, i + 1] = 1.0
    R = np.zeros(r)
    R[0] = 1.0
    for i in range(q):
        R[i + 1] = theta[i]
    return T, R


@numba.njit(cache=True)
def _initial_cov(T, R):
    r = T.shape[0]
    A = np.eye(r * r) - np.kron(T, T)
    rhs = np.outer(R, R).reshape(r * r)
    P = np.linalg.solve(A, rhs).reshape((r, r))
    return 0.5 * (P + P.T)


@numba.njit(cache=True)
def _kalman(x, phi, theta, keep_states):
    """Innovations v, their variances F (sigma^2 = 1) and optionally the
    filtered states a_{t|t}."""
    T, R = _system(phi, theta)
    r = T.shape[0]
    p = phi.size
    n = x.size
    a = np.zeros(r)
    an = np.zeros(r)
    P = _initial_cov(T, R)
    TP = np.zeros((r, r))
    Pz = np.zeros(r)
    v = np.empty(n)
    F = np.empty(n)
    states = np.zeros((n if keep_states else 0, r))
    for t in range(n):
        vt = x[t] - a[0]
        Ft = P[0, 0]
        if Ft < 1e-12:
            Ft = 1e-12
        v[t] = vt
        F[t] = Ft
        for i in range(r):
            Pz[i] = P[i, 0]
        for i in range(r):
            a[i] += Pz[i] * vt / Ft
            for j in range(r):
                P[i, j] -= Pz[i] * Pz[j] / Ft
        if keep_states:
            for i in range(r):
                states[t, i] = a[i]
        # companion transition: (T a)_i = phi_i a_0 + a_{i+1}
        for i in range(r):
            an[i] = (phi[i] * a[0] if i < p else 0.0) + (a[i + 1] if i + 1 < r else 0.0)
        for i in range(r):
            a[i] = an[i]
        for i in range(r):
            for j in range(r):
                TP[i, j] = (phi[i] * P[0, j] if i < p else 0.0) + (P[i + 1, j] if i + 1 < r else 0.0)
        for i in range(r):
            for j in range(r):
                P[i, j] = (TP[i, 0] * phi[j] if j < p else 0.0) + (TP[i, j + 1] if j + 1 < r else 0.0) + R[i] * R[j]
    return v, F, states


@numba.njit(cache=True)
def _css_innovations(x, phi, theta):
    n = x.size
    p, q = phi.size, theta.size
    e = np.zeros(n)
    for t in range(n):
        s = x[t]
        for i in range(p):
            if t - 1 - i >= 0:
                s -= phi[i] * x[t - 1 - i]
        for j in range(q):
            if t - 1 - j >= 0:
                s -= theta[j] * e[t - 1 - j]
        e[t] = s
    return e


@numba.njit(cache=True)
def _concentrated_nll(x, ar, ma, exact):
    """Negative log-likelihood with sigma^2 profiled out (constants dropped)."""
    n = x.size
    if exact:
        v, F, _ = _kalman(x, ar, ma, False)
        ssq = np.sum(v * v / F)
        return 0.5 * n * np.log(max(ssq / n, 1e-300)) + 0.5 * np.sum(np.log(F))
    e = _css_innovations(x, ar, ma)
    return 0.5 * n * np.log(max(np.dot(e, e) / n, 1e-300))


@numba.njit(cache=True)
def _objective(u, w, p, q, drift, center, scale, exact):
    ar, ma = _unpack(u, p, q)
    mu = center + scale * u[p + q] if drift else 0.0
    val = _concentrated_nll(w - mu, ar, ma, exact)
    if not np.isfinite(val):
        return 1e300
    return val


@numba.njit(cache=True)
def _nelder_mead(u0, step, w, p, q, drift, center, scale, exact, maxfev, fatol, xatol):
    """Standard Nelder-Mead (reflect 1, expand 2, contract 1/2, shrink 1/2).

    Returns the best point, its value, evaluations used and a success flag.
    """
    m = u0.size
    sim = np.empty((m + 1, m))
    fs = np.empty(m + 1)
    sim[0] = u0
    for i in range(m):
        sim[i + 1] = u0
        sim[i + 1, i] += step
    for i in range(m + 1):
        fs[i] = _objective(sim[i], w, p, q, drift, center, scale, exact)
    nfev = m + 1
    success = False
    while nfev < maxfev:
        order = np.argsort(fs)
        sim = sim[order]
        fs = fs[order]
        if np.max(np.abs(fs[1:] - fs[0])) <= fatol and np.max(np.abs(sim[1:] - sim[0])) <= xatol:
            success = True
            break
        xbar = np.zeros(m)
        for i in range(m):
            xbar += sim[i]
        xbar /= m
        xr = 2.0 * xbar - sim[m]
        fr = _objective(xr, w, p, q, drift, center, scale, exact)
        nfev += 1
        shrink = False
        if fr < fs[0]:
            xe = 3.0 * xbar - 2.0 * sim[m]
            fe = _objective(xe, w, p, q, drift, center, scale, exact)
            nfev += 1
            if fe < fr:
                sim[m] = xe
                fs[m] = fe
            else:
                sim[m] = xr
                fs[m] = fr
        elif fr < fs[m - 1]:
            sim[m] = xr
            fs[m] = fr
        else:
            if fr < fs[m]:
                xc = 1.5 * xbar - 0.5 * sim[m]
                fc = _objective(xc, w, p, q, drift, center, scale, exact)
                nfev += 1
                if fc <= fr:
                    sim[m] = xc
                    fs[m] = fc
                else:
                    shrink = True
            else:
                xcc = 0.5 * xbar + 0.5 * sim[m]
                fcc = _objective(xcc, w, p, q, drift, center, scale, exact)
                nfev += 1
                if fcc < fs[m]:
                    sim[m] = xcc
                    fs[m] = fcc
                else:
                    shrink = True
            if shrink:
                for i in range(1, m + 1):
                    sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                    fs[i] = _objective(sim[i], w, p, q, drift, center, scale, exact)
                nfev += m
    best = np.argmin(fs)
    return sim[best].copy(), fs[best], nfev, success


def _loglik(x, ar, ma, exact):
    n = x.size
    if exact:
        v, F, _ = _kalman(x, ar, ma, False)
        sigma2 = np.sum(v * v / F) / n
        logdet = np.sum(np.log(F))
        resid = v
    else:
        resid = _css_innovations(x, ar, ma)
        sigma2 = np.dot(resid, resid) / n
        logdet = 0.0
    s2 = max(sigma2, 1e-300)
    ll = -0.5 * (n * np.log(2 * np.pi * s2) + logdet + n)
    return ll, sigma2, resid


# ---------------------------------------------------------------------------
# Fitting


def _diff(y, d):
    w = np.asarray(y, dtype=float)
    for _ in range(d):
        w = np.diff(w)
    return w


def _hannan_rissanen(x, p, q):
    """Regression starting values for AR and MA coefficients."""
    n = x.size
    ar0, ma0 = np.zeros(p), np.zeros(q)
    if p + q == 0:
        return ar0, ma0
    e = x.copy()
    if q > 0:
        m = int(min(max(p + q + 2, np.log(n) ** 2), n // 3))
        if m >= 1 and n - m > m + 1:
            X = np.column_stack([x[m - i - 1:n - i - 1] for i in range(m)])
            coef, *_ = np.linalg.lstsq(X, x[m:], rcond=None)
            e = np.zeros(n)
            e[m:] = x[m:] - X @ coef
    s = max(p, q)
    if n - s <= p + q + 1:
        return ar0, ma0
    cols = [x[s - i - 1:n - i - 1] for i in range(p)]
    cols += [e[s - j - 1:n - j - 1] for j in range(q)]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), x[s:], rcond=None)
    return coef[:p], coef[p:]


def _aicc(loglik, k, n_eff):
    if n_eff - k - 1 <= 0:
        return np.inf
    return -2.0 * loglik + 2.0 * k * n_eff / (n_eff - k - 1)


def fit_arima(y, spec, exact=True, maxfev=1000, tol=1e-8):
    """Fit an ARIMA model by maximum likelihood.

    Parameters
    ----------
    y : array_like
        Observed series.
    spec : ArimaSpec
    exact : bool
        Exact state-space likelihood (default) or conditional sum of squares.
        The exact route falls back to CSS when it cannot be evaluated.
    maxfev : int
        Function-evaluation budget of each Nelder-Mead run.
    tol : float
        Convergence tolerance on the log-likelihood.

    Returns
    -------
    FittedModel

    Raises
    ------
    DomainError
        The differenced series is shorter than ``p + q + 2``.
    FitError
        The optimiser did not converge; ``diagnostics`` holds the best point.
    """
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError("series contains non-finite values")
    p, d, q = spec.p, spec.d, spec.q
    if len(y) - d < p + q + 2:
        raise DomainError(f"series too short for {spec}: length {len(y)}")
    w = _diff(y, d)
    n = w.size
    center = w.mean() if spec.include_drift else 0.0
    scale = w.std() if w.std() > 0 else 1.0

    if p + q == 0:
        ll, sigma2, resid = _loglik(w - center, np.zeros(0), np.zeros(0), True)
        return _finish(y, spec, np.zeros(0), np.zeros(0), center, sigma2, ll, resid, "exact", 0)

    ar0, ma0 = _hannan_rissanen(w - center, p, q)
    u0 = np.concatenate([
        _to_unconstrained(ar0, 1.0),
        _to_unconstrained(ma0, -1.0),
        [0.0] if spec.include_drift else [],
    ])

    def unpack(u):
        ar, ma = _unpack(u, p, q)
        mu = center + scale * u[p + q] if spec.include_drift else 0.0
        return ar, ma, mu

    args = (w, p, q, spec.include_drift, center, scale)
    use_exact = bool(exact)
    if use_exact:
        try:
            if _objective(u0, *args, True) >= 1e300:
                use_exact = False
        except Exception:  # singular stationary covariance
            use_exact = False
    method = "exact" if use_exact else "css"

    nfev = 0
    u = u0
    converged = False
    for _ in range(3):
        u_new, fval, used, ok = _nelder_mead(u, 0.1, *args, use_exact, maxfev, tol, 1e-5)
        nfev += used
        moved = np.max(np.abs(u_new - u))
        u = u_new
        if ok and moved < 1e-3:
            converged = True
            break
    if not converged and not ok:
        ar, ma, mu = unpack(u)
        raise FitError(
            f"{spec}: optimiser did not converge after {nfev} evaluations",
            diagnostics={"ar": ar, "ma": ma, "drift": mu, "nll": fval, "nfev": nfev},
        )
    ar, ma, mu = unpack(u)
    ll, sigma2, resid = _loglik(w - mu, ar, ma, use_exact)
    return _finish(y, spec, ar, ma, mu, sigma2, ll, resid, method, nfev)


def _finish(y, spec, ar, ma, mu, sigma2, ll, resid, method, nfev):
    n_eff = len(y) - spec.d
    full_resid = np.full(len(y), np.nan)
    full_resid[spec.d:] = resid
    return FittedModel(
        spec=spec, ar=np.asarray(ar, float), ma=np.asarray(ma, float), drift=float(mu),
        sigma2=float(sigma2), loglik=float(ll), aicc=float(_aicc(ll, spec.n_params, n_eff)),
        residuals=full_resid, y=np.array(y, dtype=float), method=method, n_eval=nfev,
    )


def fit_rwd(y):
    """Random walk with drift: drift is the mean first difference and
    sigma^2 the sample variance of the first differences."""
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        raise DomainError("random walk with drift needs at least 3 observations")
    w = np.diff(y)
    mu = w.mean()
    sigma2 = w.var(ddof=1)
    n = w.size
    ll = -0.5 * (n * np.log(2 * np.pi * max(sigma2, 1e-300)) + np.sum((w - mu) ** 2) / max(sigma2, 1e-300))
    if sigma2 == 0:
        ll = -0.5 * n * (np.log(2 * np.pi * 1e-300) + 1.0)
    return _finish(y, ArimaSpec(0, 1, 0, True), np.zeros(0), np.zeros(0), mu, sigma2, ll, w - mu, "rwd", 0)


# ---------------------------------------------------------------------------
# Order selection


def kpss_statistic(x, lags=None):
    """KPSS level-stationarity statistic with Bartlett weights and the
    short bandwidth ``floor(4 (n/100)^(1/4))``."""
    from statsmodels.tsa.stattools import kpss
    from statsmodels.tools.sm_exceptions import InterpolationWarning

    x = np.asarray(x, dtype=float)
    if lags is None:
        lags = int(4 * (len(x) / 100) ** 0.25)
    with _WARN_LOCK, warnings.catch_warnings():
        warnings.simplefilter("ignore", InterpolationWarning)
        stat, *_ = kpss(x, regression="c", nlags=lags)
    return float(stat)


def ndiffs(y, max_d=MAX_D):
    """Number of differences needed: difference while KPSS rejects level
    stationarity at the 5% level."""
    x = np.asarray(y, dtype=float)
    d = 0
    while d < max_d:
        if x.size < 4 or np.ptp(x) == 0:
            break
        if kpss_statistic(x) <= KPSS_CRIT_5PCT:
            break
        x = np.diff(x)
        d += 1
    return d


def auto_arima(y, max_p=MAX_P, max_q=MAX_Q, max_d=MAX_D, exact=True):
    """Stepwise AICc search over ARIMA orders.

    ``d`` comes from repeated KPSS tests. The search starts from
    (0,0), (1,0), (0,1) and (2,2) (with a drift/mean term when ``d <= 1``,
    plus (0,0) without one) and moves to the best neighbour (p or q changed
    by one, both changed by one, or the drift toggled) until AICc stops
    improving. Candidates with AR/MA roots within 1.001 of the unit circle
    or failed fits are discarded.
    """
    y = np.asarray(y, dtype=float)
    if len(y) < 10:
        raise DomainError("auto_arima needs at least 10 observations")
    if not np.all(np.isfinite(y)):
        raise DomainError("series contains non-finite values")
    if np.ptp(y) == 0:
        return fit_arima(y, ArimaSpec(0, 0, 0, True))
    d = ndiffs(y, max_d)
    n_eff = len(y) - d
    allow_drift = d <= 1
    cache = {}

    def evaluate(p, q, drift):
        key = (p, q, drift)
        if key in cache:
            return cache[key]
        model = None
        if p > max_p or q > max_q:
            cache[key] = None
            return None
        spec = ArimaSpec(p, d, q, drift)
        if n_eff - spec.n_params - 1 > 0 and n_eff >= p + q + 2:
            try:
                model = fit_arima(y, spec, exact=exact)
                if not (model.roots_ok() and np.isfinite(model.aicc)):
                    model = None
            except (FitError, DomainError, np.linalg.LinAlgError):
                model = None
        cache[key] = model
        return model

    start = [(0, 0), (1, 0), (0, 1), (2, 2)]
    candidates = [(p, q, allow_drift) for p, q in start] + [(0, 0, False)]
    best = None
    for key in candidates:
        m = evaluate(*key)
        if m is not None and (best is None or m.aicc < best.aicc):
            best = m
    if best is None:
        raise FitError("no candidate ARIMA model could be fitted")

    moves = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1), (-1, 1), (1, -1)]
    improved = True
    while improved:
        improved = False
        p0, q0, c0 = best.spec.p, best.spec.q, best.spec.include_drift
        neighbours = [(p0 + dp, q0 + dq, c0) for dp, dq in moves if p0 + dp >= 0 and q0 + dq >= 0]
        if allow_drift:
            neighbours.append((p0, q0, not c0))
        for key in neighbours:
            m = evaluate(*key)
            if m is not None and m.aicc < best.aicc - 1e-10:
                best = m
                improved = True
                break
    return best


# ---------------------------------------------------------------------------
# Forecasting


def _undifference(level_hist, w_hat):
    """Integrate differenced forecasts. ``level_hist[k]`` holds the last
    value of the k-times differenced series at the origin (k < d);
    ``w_hat`` has shape (m, h)."""
    out = w_hat
    for last in reversed(level_hist):
        out = last[:, None] + np.cumsum(out, axis=1)
    return out


def forecast(model, h, y=None):
    """Point forecasts and in-sample multi-step forecasts.

    Parameters
    ----------
    model : FittedModel
    h : int
        Maximum horizon.
    y : array_like, optional
        The series the model was fitted on (defaults to ``model.y``).

    Returns
    -------
    point : ndarray, shape (h,)
        Conditional means ``y[n+1..n+h]`` given the full sample.
    insample : ndarray, shape (h, n)
        ``insample[j-1, t]`` is the j-step forecast of ``y[t]`` made at
        origin ``t - j`` with the fitted parameters held fixed; NaN where no
        such origin exists.
    """
    if h < 1:
        raise DomainError("forecast horizon must be at least 1")
    y = model.y if y is None else np.asarray(y, dtype=float)
    n = len(y)
    d = model.spec.d
    w = _diff(y, d)
    x = w - model.drift
    if model.method == "rwd" or (model.ar.size == 0 and model.ma.size == 0):
        states = np.zeros((x.size, 1))
        rows = np.zeros((h, 1))
    else:
        _, _, states = _kalman(x, model.ar, model.ma, True)
        T, _ = _system(model.ar, model.ma)
        rows = np.empty((h, T.shape[0]))
        Tj = np.eye(T.shape[0])
        for j in range(h):
            Tj = Tj @ T
            rows[j] = Tj[0]

    # origins s = 0..n-1 (data y[0..s]); filtered state exists for s >= d
    origins = np.arange(n)
    A = np.zeros((n, rows.shape[1]))
    A[d:] = states
    w_hat = A @ rows.T + model.drift
    valid = origins >= max(d - 1, 0)
    levels = []
    for k in range(d):
        series = _diff(y, k)
        aligned = np.full(n, np.nan)
        aligned[k:] = series
        levels.append(aligned)
    paths = _undifference(levels, w_hat)
    paths[~valid] = np.nan

    point = paths[-1]
    insample = np.full((h, n), np.nan)
    for j in range(1, h + 1):
        if j < n:
            insample[j - 1, j:] = paths[: n - j, j - 1]
    return point, insample
