"""Principal-component decomposition of transformed series and the
eigenvalue-ratio rule for choosing how many components to keep."""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

RELATIVE_ZERO = 1e-14


@dataclass(frozen=True)
class PCDecomposition:
    """Mean, eigenpairs and scores of an ``(n, p)`` data matrix.

    ``data = mean + scores @ components + residuals`` holds exactly for the
    rows that were decomposed. ``eigenvalues`` always holds the full
    spectrum; ``components`` and ``scores`` hold the first ``K``.
    """

    mean: np.ndarray
    eigenvalues: np.ndarray
    components: np.ndarray
    scores: np.ndarray
    residuals: np.ndarray

    @property
    def K(self):
        return self.components.shape[0]

    def fitted(self):
        return self.mean + self.scores @ self.components

    def reconstruct(self, scores):
        """Map score vectors (shape ``(..., K)``) back to data space."""
        return self.mean + np.asarray(scores) @ self.components


def fit_pca(Z):
    """Decompose the rows of ``Z`` into mean plus principal components.

    Eigenpairs are those of the sample covariance (divisor n-1), obtained
    from the thin SVD of the centred matrix. All ``min(n-1, p)`` components
    are retained; each is signed so that its largest-magnitude entry is
    positive.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise DomainError(f"expected a 2-D matrix, got shape {Z.shape}")
    n, p = Z.shape
    if n < 3:
        raise DomainError(f"need at least 3 rows, got {n}")
    if not np.all(np.isfinite(Z)):
        raise DomainError("non-finite entries in data matrix")
    mean = Z.mean(axis=0)
    X = Z - mean
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    r = min(n - 1, p)
    s, Vt = s[:r], Vt[:r]
    pivot = np.abs(Vt).argmax(axis=1)
    signs = np.sign(Vt[np.arange(r), pivot])
    signs[signs == 0] = 1.0
    Vt = Vt * signs[:, None]
    scores = X @ Vt.T
    residuals = X - scores @ Vt
    return PCDecomposition(mean, s**2 / (n - 1), Vt, scores, residuals)


def truncate(decomp, K):
    """Keep the first ``K`` components; truncated directions move into the
    residuals."""
    if not 1 <= K <= decomp.K:
        raise DomainError(f"K must lie in 1..{decomp.K}, got {K}")
    comps = decomp.components[:K]
    scores = decomp.scores[:, :K]
    data = decomp.fitted() + decomp.residuals
    residuals = data - decomp.mean - scores @ comps
    return replace(decomp, components=comps, scores=scores, residuals=residuals)


def select_k(eigenvalues, n):
    """Number of components by the ridge-type eigenvalue-ratio criterion.

    Minimises ``lam[k+1]/lam[k]`` over ``1 <= k <= K_max``, where a ratio
    is replaced by 1 once ``lam[k]/lam[0]`` drops below
    ``theta = 1/log(max(lam[0], n))``, and ``K_max`` counts eigenvalues at
    or above their mean. Ties go to the smaller k.

    Eigenvalues below ``1e-14 * lam[0]`` are treated as zero.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0:
        raise DomainError("empty eigenvalue list")
    if n < 2:
        raise DomainError("n must be at least 2")
    if lam[0] <= 0:
        raise DomainError("leading eigenvalue must be positive")
    if np.any(np.diff(lam) > 1e-12 * lam[0]):
        raise DomainError("eigenvalues must be non-increasing")
    lam = np.where(lam < RELATIVE_ZERO * lam[0], 0.0, lam)
    theta = 1.0 / np.log(max(lam[0], n))
    k_max = int(np.count_nonzero(lam >= lam.mean()))
    best_k, best = 1, np.inf
    for k in range(1, k_max + 1):
        lk = lam[k - 1]
        if lk <= 0:
            break
        nxt = lam[k] if k < lam.size else 0.0
        crit = nxt / lk if lk / lam[0] >= theta else 1.0
        if crit < best:
            best_k, best = k, crit
    return best_k
