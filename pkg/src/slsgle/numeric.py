"""
Dense linear-algebra primitives, sampling and scalar operators.

Every stochastic routine takes an explicit seed and draws from numpy's
PCG64 generator, so identical seeds give bit-identical streams on every
platform numpy supports.
"""

import numpy as np

from .exceptions import ConstantColumnError, DimensionMismatchError, NotPsdError


def soft_threshold(a, b):
    """Soft-thresholding operator ``sign(a) * max(|a| - b, 0)``.

    Works elementwise on arrays; returns a Python float for scalar input.
    """
    if np.any(np.asarray(b) < 0):
        raise ValueError("threshold must be nonnegative")
    out = np.sign(a) * np.maximum(np.abs(a) - b, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def psd_tolerance(M):
    """Absolute eigenvalue slack used when deciding whether ``M`` is PSD."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return 1e-8 * float(np.max(np.abs(M)))


def check_symmetric_psd(M, name="matrix"):
    """Validate that ``M`` is square, finite, symmetric and PSD.

    Returns the matrix as a float array. Symmetry is checked to a relative
    1e-10; the caller gets back the exactly symmetrized ``(M + M.T) / 2``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NotPsdError(f"{name} has non-finite entries")
    scale = max(float(np.max(np.abs(M))), 1.0) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * scale:
        raise NotPsdError(f"{name} is not symmetric")
    M = 0.5 * (M + M.T)
    if M.size:
        lam_min = np.linalg.eigvalsh(M)[0]
        if lam_min < -psd_tolerance(M):
            raise NotPsdError(f"{name} has eigenvalue {lam_min:.3g} < 0")
    return M


def standardize_columns(X, return_params=False):
    """Center each column and scale it so that ``mean(x**2) == 1``.

    Parameters
    ----------
    X : array_like, shape (n, p)
    return_params : bool
        Also return the column means and scales, so that
        ``X_std = (X - mean) / scale``.

    Raises
    ------
    ConstantColumnError
        If a column has zero variance.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatchError("X must be two-dimensional")
    n = X.shape[0]
    if n < 2:
        raise DimensionMismatchError("need at least two rows to standardize")
    mean = X.mean(axis=0)
    Xc = X - mean
    scale = np.sqrt(np.mean(Xc ** 2, axis=0))
    # relative test: a column of identical values leaves only rounding noise
    tiny = 1e-12 * np.maximum(np.abs(mean), 1.0)
    bad = np.flatnonzero(scale <= tiny)
    if bad.size:
        raise ConstantColumnError(int(bad[0]))
    Xs = Xc / scale
    if return_params:
        return Xs, mean, scale
    return Xs


def sample_covariance(X):
    """Biased sample covariance ``Xc.T @ Xc / n`` of column-centered ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatchError("X must be two-dimensional")
    n = X.shape[0]
    if n < 2:
        raise DimensionMismatchError("need at least two rows")
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / n
    return 0.5 * (S + S.T)


def chol_or_eigh_factor(M):
    """Return ``L`` with ``L.T @ L == M`` for a symmetric PSD ``M``.

    Uses a Cholesky factor when ``M`` is positive definite and falls back
    to a symmetric eigendecomposition (negative eigenvalues clipped to 0)
    when it is singular, which is always the case for graph Laplacians.
    Rows/columns with a zero diagonal are exactly zero in ``L``.
    """
    M = check_symmetric_psd(M, "M")
    p = M.shape[0]
    L = np.zeros_like(M)
    keep = np.flatnonzero(np.diag(M) > 0)
    if keep.size == 0:
        return L
    sub = M[np.ix_(keep, keep)]
    try:
        C = np.linalg.cholesky(sub)
        # cholesky succeeds on some numerically singular input; check it
        if np.min(np.diag(C)) <= 1e-7 * np.sqrt(np.max(np.diag(sub))):
            raise np.linalg.LinAlgError
        F = C.T
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(sub)
        w = np.clip(w, 0.0, None)
        F = np.sqrt(w)[:, None] * V.T
    L[np.ix_(keep, keep)] = F
    assert L.shape == (p, p)
    return L


def make_rng(seed):
    """PCG64 generator from an int seed or a sequence of ints."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def mvn_sample(mean, cov, n, seed):
    """Draw ``n`` i.i.d. rows from ``N(mean, cov)``.

    Parameters
    ----------
    mean : array_like, shape (p,) or scalar
    cov : array_like, shape (p, p)
        Symmetric PSD covariance. Singular covariances are allowed.
    n : int
    seed : int, sequence of int, or numpy Generator

    Returns
    -------
    ndarray, shape (n, p)
    """
    cov = check_symmetric_psd(cov, "cov")
    p = cov.shape[0]
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (p,))
    if int(n) < 1:
        raise ValueError("n must be positive")
    L = chol_or_eigh_factor(cov)
    Z = make_rng(seed).standard_normal((int(n), p))
    return Z @ L + mean
