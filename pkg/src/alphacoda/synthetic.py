"""
Simulated data for demos and tests.

``simulate_life_tables`` produces single-year period life tables shaped
like real ones (HMD text layout included) from a Siler hazard whose
parameters trend over time. ``simulate_fts`` draws compositions from the
forecasting model itself: a mean curve plus random-walk scores on fixed
components plus residual noise, mapped through an inverse transform.
"""

import numpy as np

from .compositions import TransformSpec, alpha_inverse, helmert
from .lifetable import DEFAULT_RADIX, N_AGES, LifeTableRecord


def siler_hazard(ages, infant, background, senescent, slope, infant_decay=1.2):
    """Siler hazard ``a1 exp(-b1 x) + a2 + a3 exp(b3 x)``."""
    x = np.asarray(ages, dtype=float)
    return infant * np.exp(-infant_decay * x) + background + senescent * np.exp(slope * x)


def simulate_life_tables(years=range(1921, 2021), sex="female", seed=0,
                         radix=DEFAULT_RADIX, n_ages=N_AGES, integer_deaths=True):
    """Period life tables with declining mortality.

    Parameters
    ----------
    years : iterable of int
    sex : {"female", "male"}
        Males get higher hazards and a slower decline.
    seed : int
    integer_deaths : bool
        Round ``lx`` and ``dx`` to whole numbers, which produces zero counts
        at the oldest ages while ``qx`` stays positive.

    Returns
    -------
    list of LifeTableRecord
    """
    rng = np.random.default_rng(seed)
    years = np.asarray(list(years))
    ages = np.arange(n_ages)
    male = sex == "male"
    t = (years - years[0]) / max(1, len(years) - 1)
    shocks = np.cumsum(rng.normal(0.0, 0.03, size=(len(years), 3)), axis=0)
    records = []
    for i, year in enumerate(years):
        infant = 0.08 * np.exp(-3.5 * t[i] + shocks[i, 0]) * (1.2 if male else 1.0)
        background = 2.5e-3 * np.exp(-2.0 * t[i] + shocks[i, 1]) * (1.5 if male else 1.0)
        senescent = 6e-5 * np.exp(-(1.0 if male else 1.3) * t[i] + shocks[i, 2]) * (1.4 if male else 1.0)
        mx = siler_hazard(ages, infant, background, senescent, 0.095 + 0.01 * t[i])
        qx = 1.0 - np.exp(-mx)
        qx[-1] = 1.0
        lx = np.empty(n_ages)
        dx = np.empty(n_ages)
        alive = float(radix)
        for x in range(n_ages):
            lx[x] = alive
            dx[x] = alive * qx[x]
            alive -= dx[x]
        qx = np.round(qx, 5)
        if integer_deaths:
            # counts are published rounded; qx keeps its model value
            lx = np.round(lx)
            dx = np.round(np.append(-np.diff(lx), lx[-1]))
        for x in range(n_ages):
            records.append(LifeTableRecord(int(year), x, float(qx[x]), float(dx[x]),
                                           float(lx[x]), float(mx[x])))
    return records


def format_hmd(records, country="Synthetica", sex="Females"):
    """Render records in the HMD ``*ltper_1x1.txt`` text layout."""
    lines = [
        f"{country}, Life tables (period 1x1), {sex}\tSimulated data",
        "",
        "  Year          Age         mx       qx    ax      lx      dx      Lx       Tx     ex",
    ]
    top = max(r.age for r in records)
    for r in records:
        age = f"{r.age}+" if r.age == top else str(r.age)
        lines.append(
            f"  {r.year:4d}  {age:>11}  {r.mx:9.6f} {r.qx:8.5f}  0.50 {r.lx:7.0f} {r.dx:7.0f}"
            f" {r.lx:7.0f} {r.lx:8.0f}  0.00"
        )
    return "\n".join(lines) + "\n"


def simulate_fts(n, D, spec=None, K=2, drift=(-0.03, 0.01), score_sd=(0.1, 0.05),
                 noise_sd=0.02, seed=0, scale=1.0):
    """Compositions generated by the mean + random-walk-scores + noise model.

    Components are orthonormal in the transformed space (a fixed smooth
    basis mapped through the Helmert rotation). Scores are random walks
    with drift; residual curves are independent Gaussian noise.

    Returns
    -------
    values : ndarray, shape (n, D)
    truth : dict
        ``mean``, ``components`` and ``scores`` used.
    """
    spec = TransformSpec("alpha", 0.5) if spec is None else spec
    rng = np.random.default_rng(seed)
    p = spec.output_dim(D)
    x = np.linspace(0.0, 1.0, D)
    base = np.vstack([np.cos(np.pi * (k + 1) * x) for k in range(K)])
    base = base - base.mean(axis=1, keepdims=True)
    comp = base @ helmert(D).T if spec.kind != "clr" else base
    comp, _ = np.linalg.qr(comp.T)
    comp = comp.T[:K]
    mean_curve = -4.0 * (x - 0.7) ** 2
    mean = mean_curve @ helmert(D).T if spec.kind != "clr" else mean_curve - mean_curve.mean()
    mean = scale * mean
    drift = np.resize(np.asarray(drift, dtype=float), K)
    sd = np.resize(np.asarray(score_sd, dtype=float), K)
    scores = np.cumsum(drift + sd * rng.standard_normal((n, K)), axis=0)
    scores -= scores.mean(axis=0)
    z = mean + scale * (scores @ comp) + noise_sd * rng.standard_normal((n, p))
    values = alpha_inverse(z, spec, D=D)
    return values, {"mean": mean, "components": comp, "scores": scores}


def two_factor_matrix(n=100, p=50, strengths=(10.0, 7.0), noise_sd=0.05, seed=0):
    """``n x p`` matrix with two orthogonal factors of given strength plus noise."""
    rng = np.random.default_rng(seed)
    L, _ = np.linalg.qr(rng.standard_normal((p, len(strengths))))
    F = rng.standard_normal((n, len(strengths))) * np.asarray(strengths)
    return F @ L.T + noise_sd * rng.standard_normal((n, p))
