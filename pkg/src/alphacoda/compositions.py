"""
Helmert bases and the alpha-transformation family for compositional data.

A composition is a vector of D non-negative parts closed to sum 1. The
alpha-transformation maps it to R^(D-1):

    z = H @ (D * closure(d ** alpha) - 1) / alpha

with ``H`` the Helmert sub-matrix. ``alpha = 0`` is the isometric log-ratio
(ilr) limit and ``alpha = 1`` is plain Euclidean data analysis (eda). The clr
transform is the ``alpha = 0`` case without the Helmert rotation.

All functions accept a single composition (shape ``(D,)``) or a stack of
compositions (shape ``(n, D)``) and operate row-wise.
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    DegenerateInverseError,
    InvalidDimensionError,
    InvalidParameterError,
    ZeroInLogError,
)

CLOSURE_TOL = 1e-9
# below this value of alpha * |log-ratio| the power map is evaluated by its series
SERIES_CUTOFF = 1e-8

KINDS = ("alpha", "ilr", "clr", "eda")


class ClosureWarning(UserWarning):
    """Input rows did not sum to 1 and were renormalized."""


@dataclass(frozen=True)
class TransformSpec:
    """Which member of the transform family to apply.

    ``alpha`` is required for ``kind="alpha"`` and must be omitted otherwise.
    """

    kind: str = "alpha"
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown transform kind {self.kind!r}")
        if self.kind == "alpha":
            if self.alpha is None:
                raise InvalidParameterError("kind='alpha' needs an alpha value")
            a = float(self.alpha)
            if not (0.0 <= a <= 1.0) or not np.isfinite(a):
                raise InvalidParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
            object.__setattr__(self, "alpha", a)
        elif self.alpha is not None:
            raise InvalidParameterError(f"kind={self.kind!r} takes no alpha value")

    @property
    def power(self):
        """Effective power: 0 for ilr/clr, 1 for eda."""
        if self.kind == "alpha":
            return self.alpha
        return 1.0 if self.kind == "eda" else 0.0

    @property
    def uses_logs(self):
        return self.power == 0.0

    def output_dim(self, D):
        return D if self.kind == "clr" else D - 1

    @property
    def label(self):
        if self.kind == "alpha":
            return f"alpha={self.alpha:g}"
        return self.kind


def alpha(a):
    """Shorthand for ``TransformSpec("alpha", a)``."""
    return TransformSpec("alpha", a)


ILR = TransformSpec("ilr")
CLR = TransformSpec("clr")
EDA = TransformSpec("eda")


@lru_cache(maxsize=32)
def _helmert_cached(D):
    H = np.zeros((D - 1, D))
    for k in range(1, D):
        c = 1.0 / np.sqrt(k * (k + 1))
        H[k - 1, :k] = c
        H[k - 1, k] = -k * c
    H.setflags(write=False)
    return H


def helmert(D):
    """Helmert sub-matrix of order D: the full Helmert matrix without its
    constant first row.

    Row k (1-based) holds k entries ``1/sqrt(k(k+1))`` followed by
    ``-k/sqrt(k(k+1))`` and zeros, so rows are orthonormal and sum to zero.

    Parameters
    ----------
    D : int
        Number of parts, at least 2.

    Returns
    -------
    H : ndarray, shape (D-1, D), read-only
    """
    if int(D) != D or D < 2:
        raise InvalidDimensionError(f"Helmert matrix needs D >= 2, got {D}")
    return _helmert_cached(int(D))


def closure(x):
    """Rescale non-negative rows to sum 1."""
    x = np.asarray(x, dtype=float)
    return x / x.sum(axis=-1, keepdims=True)


def as_composition(x, tol=CLOSURE_TOL):
    """Validate and close compositions.

    Negative entries are rejected. Rows whose sum is off 1 by more than
    ``tol`` are renormalized and a :class:`ClosureWarning` is issued.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2):
        raise InvalidDimensionError(f"expected 1-D or 2-D input, got shape {x.shape}")
    if x.shape[-1] < 2:
        raise InvalidDimensionError("a composition needs at least 2 parts")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("composition contains non-finite values")
    if np.any(x < 0):
        raise InvalidParameterError("composition contains negative parts")
    s = x.sum(axis=-1, keepdims=True)
    if np.any(s <= 0):
        raise InvalidParameterError("composition has zero total")
    if np.any(np.abs(s - 1.0) > tol):
        warnings.warn("rows renormalized to sum 1", ClosureWarning, stacklevel=2)
    return x / s


def _require_positive(d):
    bad = np.argwhere(d <= 0)
    if bad.size:
        raise ZeroInLogError(
            f"log-ratio transform needs strictly positive parts; "
            f"found {d[tuple(bad[0])]:g} at index {tuple(int(i) for i in bad[0])}",
            index=tuple(int(i) for i in bad[0]),
        )


def clr_transform(d):
    """Centred log-ratio ``log(d / geometric_mean(d))``; rows sum to zero."""
    d = np.asarray(d, dtype=float)
    _require_positive(d)
    logd = np.log(d)
    return logd - logd.mean(axis=-1, keepdims=True)


def ilr_transform(d):
    """Isometric log-ratio, the Helmert rotation of clr."""
    s = clr_transform(d)
    return s @ helmert(s.shape[-1]).T


def _power_bracket(d, a):
    """Return ``(D * closure(d**a) - 1) / a`` row-wise."""
    if np.all(d > 0):
        # expm1 form avoids cancellation when a is small:
        # D*e^{u_j}/sum(e^u) - 1 = (expm1(u_j) - m) / (1 + m), m = mean(expm1(u))
        c = np.log(d)
        c = c - c.mean(axis=-1, keepdims=True)
        if a * np.abs(c).max() < SERIES_CUTOFF:
            # second-order expansion; the next term is below machine precision
            return c + 0.5 * a * (c * c - (c * c).mean(axis=-1, keepdims=True))
        u = a * c
        e = np.expm1(u)
        m = e.mean(axis=-1, keepdims=True)
        return (e - m) / (1.0 + m) / a
    D = d.shape[-1]
    p = d ** a
    return (D * p / p.sum(axis=-1, keepdims=True) - 1.0) / a


def alpha_transform(d, spec):
    """Map compositions to unconstrained coordinates.

    Parameters
    ----------
    d : array_like, shape (D,) or (n, D)
        Compositions. Zeros are allowed only when the effective power is > 0.
    spec : TransformSpec

    Returns
    -------
    z : ndarray, shape (..., D-1), or (..., D) for clr
    """
    d = np.asarray(d, dtype=float)
    D = d.shape[-1]
    if D < 2:
        raise InvalidDimensionError("a composition needs at least 2 parts")
    if np.any(d < 0):
        raise InvalidParameterError("composition contains negative parts")
    if spec.kind == "clr":
        return clr_transform(d)
    a = spec.power
    if a == 0.0:
        return ilr_transform(d)
    return _power_bracket(closure(d), a) @ helmert(D).T


def alpha_inverse(z, spec, D=None, return_clamped=False, on_degenerate="raise"):
    """Map coordinates back onto the simplex.

    For a positive power ``a`` the pre-image is ``nu = a * H.T @ z + 1``;
    negative entries of ``nu`` are clamped to zero before taking
    ``nu ** (1/a)`` and closing. The computation runs in log space so small
    ``a`` neither overflows nor loses precision.

    Parameters
    ----------
    z : array_like, shape (p,) or (n, p)
    spec : TransformSpec
    D : int, optional
        Number of parts; inferred from ``z`` when omitted.
    return_clamped : bool
        Also return a boolean array flagging rows in which clamping occurred.
    on_degenerate : {"raise", "nan"}
        What to do with rows whose components were all clamped.

    Returns
    -------
    d : ndarray, shape (..., D)
    clamped : ndarray of bool, shape (...,), only if ``return_clamped``

    Raises
    ------
    DegenerateInverseError
        If every component of some row was clamped.
    """
    z = np.asarray(z, dtype=float)
    if D is None:
        D = z.shape[-1] if spec.kind == "clr" else z.shape[-1] + 1
    if z.shape[-1] != spec.output_dim(D):
        raise InvalidDimensionError(
            f"expected {spec.output_dim(D)} coordinates for D={D}, got {z.shape[-1]}"
        )
    a = spec.power
    if spec.kind == "clr":
        logx = z
        clamped = np.zeros(z.shape[:-1], dtype=bool)
    else:
        u = z @ helmert(D)
        if a == 0.0:
            logx = u
            clamped = np.zeros(z.shape[:-1], dtype=bool)
        else:
            au = a * u
            neg = au < -1.0
            clamped = neg.any(axis=-1)
            dead = neg.all(axis=-1)
            if np.any(dead):
                if on_degenerate == "raise":
                    raise DegenerateInverseError(
                        "all components clamped to zero; no valid composition"
                    )
                neg = neg & ~dead[..., None]
            with np.errstate(divide="ignore", invalid="ignore"):
                if np.abs(au).max() < SERIES_CUTOFF:
                    logx = u - 0.5 * a * u * u
                else:
                    logx = np.where(neg, -np.inf, np.log1p(np.where(neg, 0.0, au)) / a)
    logx = logx - logx.max(axis=-1, keepdims=True)
    d = closure(np.exp(logx))
    if a > 0.0 and spec.kind != "clr" and np.any(dead):
        d[dead] = np.nan
    if return_clamped:
        return d, clamped
    return d
