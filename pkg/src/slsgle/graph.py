"""
Predictor-graph estimation and graph Laplacians.

The graphical lasso gives a sparse precision matrix whose off-diagonal
pattern is the conditional-dependence graph. Five correlation-based
adjacency rules are provided as rivals. Either source is turned into a
Laplacian ``Gamma = D - A`` whose quadratic form is

    b' Gamma b = sum_{j<k} |a_jk| (b_j - s_jk b_k)^2,    s_jk = sign(a_jk).
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import _kernels
from .exceptions import (
    ConvergenceWarning,
    DimensionMismatchError,
    DivergentWeightError,
    InvalidAlphaError,
    NotPsdError,
)
from .numeric import check_symmetric_psd, psd_tolerance

MEASURES = ("N1", "N2", "N3", "N4", "N5")


@dataclass(frozen=True)
class GlassoConfig:
    lambda0: float
    max_sweeps: int = 200
    tol: float = 1e-5
    penalize_diagonal: bool = False

    def __post_init__(self):
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")


@dataclass
class PrecisionEstimate:
    """Graphical-lasso output.

    Attributes
    ----------
    theta : ndarray, shape (p, p)
        Estimated precision matrix, symmetric positive definite.
    lambda0 : float
    converged : bool
    sweeps : int
    objective_trace : ndarray
        Penalized negative log-likelihood after each sweep.
    kkt_residual : float
    """

    theta: np.ndarray
    lambda0: float
    converged: bool
    sweeps: int = 0
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kkt_residual: float = 0.0

    @property
    def edge_set(self):
        p = self.theta.shape[0]
        iu, ju = np.triu_indices(p, k=1)
        keep = self.theta[iu, ju] != 0
        return {(int(i), int(j)) for i, j in zip(iu[keep], ju[keep])}


@dataclass
class AdjacencyMatrix:
    """Weighted adjacency ``a`` (zero diagonal) with edge signs ``s``."""

    a: np.ndarray
    s: np.ndarray
    measure_id: str

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if a.shape != s.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError("a and s must be matching square matrices")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency diagonal must be zero")
        if not (np.array_equal(a, a.T) and np.array_equal(s, s.T)):
            raise ValueError("adjacency must be symmetric")
        self.a, self.s = a, s


@dataclass
class LaplacianMatrix:
    gamma: np.ndarray
    source: str

    @property
    def p(self):
        return self.gamma.shape[0]

    def to_csv(self, path):
        write_matrix_csv(self.gamma, path)

    def to_edge_json(self, path):
        write_edge_json(self.gamma, path)


def glasso_objective(theta, sigma_hat, lambda0, penalize_diagonal=False):
    """``-log|Theta| + tr(Theta S) + lambda0 * ||Theta||_1``."""
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return np.inf
    pen = np.abs(theta).sum()
    if not penalize_diagonal:
        pen -= np.abs(np.diag(theta)).sum()
    return -logdet + float(np.sum(theta * sigma_hat)) + lambda0 * pen


def glasso_kkt_residual(sigma_hat, theta, cfg):
    """Largest violation of the subgradient conditions of the glasso problem.

    ``theta`` may be a :class:`PrecisionEstimate` or a plain matrix.
    """
    if isinstance(theta, PrecisionEstimate):
        theta = theta.theta
    theta = np.asarray(theta, dtype=float)
    S = np.asarray(sigma_hat, dtype=float)
    try:
        np.linalg.cholesky(theta)
    except np.linalg.LinAlgError:
        raise NotPsdError("theta is not positive definite") from None
    grad = S - np.linalg.inv(theta)
    lam = cfg.lambda0
    pen = np.full(theta.shape, lam)
    if not cfg.penalize_diagonal:
        np.fill_diagonal(pen, 0.0)
    nz = theta != 0
    viol = np.where(nz,
                    np.abs(grad + pen * np.sign(theta)),
                    np.maximum(0.0, np.abs(grad) - pen))
    return float(viol.max()) if viol.size else 0.0


def glasso_fit(sigma_hat, cfg):
    """Graphical lasso by block coordinate descent over columns.

    Each column solves a lasso subproblem in Gram form by coordinate
    descent. Iteration stops once the largest entry change of the
    precision estimate between sweeps, relative to its largest entry, is
    below ``cfg.tol`` and the KKT residual is below ``cfg.tol``.

    Parameters
    ----------
    sigma_hat : array_like, shape (p, p)
        Sample covariance.
    cfg : GlassoConfig

    Returns
    -------
    PrecisionEstimate
        If the sweep limit is hit a :class:`ConvergenceWarning` is issued
        and the last iterate is returned with ``converged=False``.
    """
    S = check_symmetric_psd(sigma_hat, "sigma_hat")
    p = S.shape[0]
    lam = float(cfg.lambda0)
    if np.any(np.diag(S) <= 0):
        raise NotPsdError("sigma_hat has a non-positive diagonal entry")
    if lam == 0 and np.linalg.eigvalsh(S)[0] <= psd_tolerance(S):
        raise NotPsdError("sigma_hat is singular and lambda0 == 0")
    W = S.copy()
    if cfg.penalize_diagonal:
        W[np.diag_indices(p)] += lam
    if p == 1:
        theta = np.array([[1.0 / W[0, 0]]])
        obj = glasso_objective(theta, S, lam, cfg.penalize_diagonal)
        return PrecisionEstimate(theta, lam, True, 1, np.array([obj]), 0.0)

    B = np.zeros((p, p))
    inner_tol = min(1e-10, cfg.tol * 1e-4)
    theta_prev = np.diag(1.0 / np.diag(W))
    trace = []
    converged = False
    kkt = np.inf
    sweeps = 0
    for sweep in range(cfg.max_sweeps):
        _kernels.glasso_sweep(S, W, B, lam, inner_tol, 10_000)
        theta = _kernels.precision_from_glasso(W, B)
        sweeps = sweep + 1
        trace.append(glasso_objective(theta, S, lam, cfg.penalize_diagonal))
        change = np.max(np.abs(theta - theta_prev)) / max(np.max(np.abs(theta)), 1e-300)
        theta_prev = theta
        if change <= cfg.tol:
            kkt = glasso_kkt_residual(S, theta, cfg)
            if kkt <= cfg.tol:
                converged = True
                break
    if not converged:
        kkt = glasso_kkt_residual(S, theta, cfg)
        warnings.warn(f"glasso did not converge in {cfg.max_sweeps} sweeps "
                      f"(kkt residual {kkt:.2e})", ConvergenceWarning, stacklevel=2)
    return PrecisionEstimate(theta, lam, converged, sweeps, np.array(trace), float(kkt))


def default_lambda0_grid(sigma_hat, num=10):
    """Log-spaced grid on ``[0.01, 1] * max |off-diagonal of sigma_hat|``."""
    S = np.asarray(sigma_hat, dtype=float)
    off = np.abs(S - np.diag(np.diag(S)))
    top = float(off.max()) if off.size else 0.0
    if top == 0:
        top = 1.0
    return top * np.logspace(-2, 0, num)


def fisher_threshold(n, alpha=0.05, p=2):
    """Correlation threshold from a Bonferroni-corrected Fisher z-test.

    ``r = tanh(z_{1 - a/2} / sqrt(n - 3))`` with ``a = alpha / (p(p-1)/2)``.
    """
    if not 0 < alpha < 1:
        raise InvalidAlphaError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 4:
        raise ValueError("need n >= 4 for the Fisher transformation")
    pairs = max(p * (p - 1) // 2, 1)
    z = norm.isf(alpha / pairs / 2.0)
    return math.tanh(z / math.sqrt(n - 3))


def adjacency_from_correlation(R, measure, r=None, k=1.0):
    """Correlation-based adjacency rules.

    ====  ==========================  ============
    id    weight a_jk                 sign s_jk
    ====  ==========================  ============
    N1    1{r_jk > r}                 +1
    N2    1{|r_jk| > r}               sign(r_jk)
    N3    max(0, r_jk)^k              +1
    N4    |r_jk|^k                    sign(r_jk)
    N5    |r_jk|^k / (1 - |r_jk|)     sign(r_jk)
    ====  ==========================  ============
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DimensionMismatchError("R must be square")
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    if measure in ("N1", "N2"):
        if r is None or not 0 < r < 1:
            raise ValueError("threshold r in (0, 1) is required for N1/N2")
    elif k <= 0:
        raise ValueError("k must be positive")
    R = 0.5 * (R + R.T)
    off = ~np.eye(R.shape[0], dtype=bool)
    absR = np.abs(R)
    sgn = np.where(R < 0, -1.0, 1.0)
    if measure == "N1":
        a, s = (R > r).astype(float), np.ones_like(R)
    elif measure == "N2":
        a, s = (absR > r).astype(float), sgn
    elif measure == "N3":
        a, s = np.maximum(0.0, R) ** k, np.ones_like(R)
    elif measure == "N4":
        a, s = absR ** k, sgn
    else:
        if np.any(absR[off] >= 1):
            raise DivergentWeightError("N5 weight diverges at |r| = 1")
        a = np.zeros_like(R)
        a[off] = absR[off] ** k / (1.0 - absR[off])
        s = sgn
    a = np.where(off, a, 0.0)
    s = np.where(off, s, 1.0)
    return AdjacencyMatrix(a, s, measure)


def laplacian_from_precision(theta):
    """``D - Theta`` with ``d_j = sum_k |theta_jk|`` (diagonal included)."""
    theta = np.asarray(theta, dtype=float)
    G = np.diag(np.abs(theta).sum(axis=1)) - theta
    return 0.5 * (G + G.T)


def laplacian_from_adjacency(adj):
    signed = adj.s * np.abs(adj.a)
    G = np.diag(np.abs(adj.a).sum(axis=1)) - signed
    return 0.5 * (G + G.T)


def laplacian_build(source):
    """Build a :class:`LaplacianMatrix` from a precision estimate or adjacency."""
    if isinstance(source, PrecisionEstimate):
        G, tag = laplacian_from_precision(source.theta), "PRECISION"
    elif isinstance(source, AdjacencyMatrix):
        G, tag = laplacian_from_adjacency(source), source.measure_id
    else:
        raise TypeError("source must be a PrecisionEstimate or AdjacencyMatrix")
    try:
        G = check_symmetric_psd(G, "Laplacian")
    except NotPsdError as err:
        raise NotPsdError(f"malformed source for Laplacian: {err}") from None
    return LaplacianMatrix(G, tag)


def laplacian_quadratic_form(weights, beta):
    """Pairwise form ``sum_{j<k} |w_jk| (b_j - sign(w_jk) b_k)^2``.

    ``weights`` carries signed edge weights off the diagonal (its diagonal
    is ignored). Used as an independent check of ``b' Gamma b``.
    """
    W = np.asarray(weights, dtype=float)
    beta = np.asarray(beta, dtype=float)
    iu, ju = np.triu_indices(W.shape[0], k=1)
    w = W[iu, ju]
    s = np.where(w < 0, -1.0, 1.0)
    return float(np.sum(np.abs(w) * (beta[iu] - s * beta[ju]) ** 2))


def write_matrix_csv(M, path):
    """Dense row-major CSV with a header row of column indices."""
    M = np.asarray(M, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(str(j) for j in range(M.shape[1])) + "\n")
        for row in M:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def edge_list(M):
    """Upper-triangle nonzero off-diagonal entries as ``{"i","j","w"}`` dicts."""
    M = np.asarray(M, dtype=float)
    iu, ju = np.triu_indices(M.shape[0], k=1)
    keep = M[iu, ju] != 0
    return [{"i": int(i), "j": int(j), "w": float(M[i, j])}
            for i, j in zip(iu[keep], ju[keep])]


def write_edge_json(M, path):
    with open(path, "w") as fh:
        json.dump({"edges": edge_list(M)}, fh, indent=2)
