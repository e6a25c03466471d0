"""
Laplacian-penalized sparse regression.

Minimizes

    0.5 * ||y - X b||^2 + P(b) + 0.5 * lambda2 * b' Gamma b

where ``P`` is the l1 penalty ``lambda1 * ||b||_1`` or an MCP penalty.
The main route is cyclic coordinate descent with a running residual.
:func:`augmented_lasso_fit` solves the same l1 problem as a plain lasso
on an augmented data set and serves as an independent check.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import (
    ConvergenceWarning,
    DimensionMismatchError,
    InactiveCoefficientError,
    NotPsdError,
)
from .graph import LaplacianMatrix, PrecisionEstimate
from .numeric import check_symmetric_psd, chol_or_eigh_factor

PENALTY_KINDS = {"l1": _kernels.L1, "mcp": _kernels.MCP}


@dataclass
class RegressionProblem:
    """Response ``y`` (n,), design ``X`` (n, p) and Laplacian ``gamma`` (p, p)."""

    y: np.ndarray
    X: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.y = np.ascontiguousarray(self.y, dtype=float).ravel()
        self.X = np.ascontiguousarray(self.X, dtype=float)
        if isinstance(self.gamma, LaplacianMatrix):
            self.gamma = self.gamma.gamma
        self.gamma = np.ascontiguousarray(self.gamma, dtype=float)
        if self.X.ndim != 2:
            raise DimensionMismatchError("X must be two-dimensional")
        n, p = self.X.shape
        if self.y.shape[0] != n:
            raise DimensionMismatchError(f"y has length {self.y.shape[0]}, X has {n} rows")
        if self.gamma.shape != (p, p):
            raise DimensionMismatchError(f"gamma must be {p}x{p}, got {self.gamma.shape}")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def max_lambda1(self):
        """Smallest l1 level at which the zero vector is optimal."""
        return float(np.max(np.abs(self.X.T @ self.y))) if self.p else 0.0


@dataclass(frozen=True)
class PenaltySpec:
    kind: str = "l1"
    lambda1: float = 0.0
    mcp_gamma: float = 3.0

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValueError(f"penalty kind must be one of {sorted(PENALTY_KINDS)}")
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be nonnegative")
        if self.mcp_gamma <= 1:
            raise ValueError("mcp_gamma must exceed 1")


@dataclass(frozen=True)
class SolverConfig:
    lambda2: float = 0.0
    tol: float = 1e-4
    max_passes: int = 1000
    # "xty" (X'y / n), "zeros", or an explicit starting vector
    beta_init: object = "xty"

    def __post_init__(self):
        if self.lambda2 < 0:
            raise ValueError("lambda2 must be nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass
class FitResult:
    beta: np.ndarray
    lambda1: float
    lambda2: float
    objective: float
    passes_used: int
    converged: bool
    kkt_residual: float
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def active_set(self):
        return [int(j) for j in np.flatnonzero(self.beta)]

    def to_dict(self):
        return {
            "lambda1": float(self.lambda1),
            "lambda2": float(self.lambda2),
            "beta": [float(b) for b in self.beta],
            "active_set": self.active_set,
            "objective": float(self.objective),
            "kkt_residual": float(self.kkt_residual),
            "converged": bool(self.converged),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _mcp_scale(X):
    # Curvature unit of the loss: mean squared column norm (n for
    # standardized columns, 1 for unit-norm columns).
    colsq = np.einsum("ij,ij->j", X, X)
    return float(colsq.mean()) if colsq.size and colsq.mean() > 0 else 1.0


def objective_value(prob, beta, pen, lambda2):
    """Penalized least-squares objective at ``beta``."""
    beta = np.ascontiguousarray(beta, dtype=float)
    if beta.shape != (prob.p,):
        raise DimensionMismatchError(f"beta must have length {prob.p}")
    return float(_kernels.sls_objective(prob.X, prob.y, prob.gamma, beta, pen.lambda1,
                                        float(lambda2), PENALTY_KINDS[pen.kind],
                                        pen.mcp_gamma, _mcp_scale(prob.X)))


def kkt_check(prob, pen, lambda2, beta):
    """Maximum violation of the l1 stationarity conditions.

    For ``b_j != 0`` the violation is ``|g_j + lambda1 sign(b_j)|`` and for
    ``b_j == 0`` it is ``max(0, |g_j| - lambda1)``, with
    ``g = -X'(y - X b) + lambda2 Gamma b``.
    """
    if pen.kind != "l1":
        raise ValueError("kkt_check is defined for the l1 penalty")
    beta = np.ascontiguousarray(beta, dtype=float)
    return float(_kernels.sls_kkt(prob.X, prob.y, prob.gamma, beta, pen.lambda1, float(lambda2)))


def _initial_beta(prob, init):
    if isinstance(init, str):
        if init == "xty":
            return prob.X.T @ prob.y / prob.n
        if init == "zeros":
            return np.zeros(prob.p)
        raise ValueError(f"unknown beta_init {init!r}")
    beta = np.array(init, dtype=float).ravel()
    if beta.shape != (prob.p,):
        raise DimensionMismatchError("beta_init has the wrong length")
    return beta


def coordinate_descent_fit(prob, pen, cfg=SolverConfig(), check_gamma=True):
    """Cyclic coordinate descent.

    Each coordinate is set to ``S(a_j, lambda1) / (||x_j||^2 + lambda2 G_jj)``
    with ``a_j = x_j'(y - y~) - lambda2 sum_{k != j} G_jk b_k`` and ``y~``
    the fit without coordinate ``j``. Iteration stops when a pass changes
    the coefficients by less than ``cfg.tol`` in l1 norm and the KKT
    residual is at most ``10 * cfg.tol``.

    MCP gives only a local minimum.
    """
    if check_gamma:
        check_symmetric_psd(prob.gamma, "gamma")
    beta0 = np.ascontiguousarray(_initial_beta(prob, cfg.beta_init))
    lam1, lam2 = float(pen.lambda1), float(cfg.lambda2)
    if lam1 >= prob.max_lambda1():
        # zero satisfies the stationarity conditions exactly
        beta0 = np.zeros(prob.p)
    beta, passes, converged, trace = _kernels.sls_coordinate_descent(
        prob.X, prob.y, prob.gamma, beta0, lam1, lam2, PENALTY_KINDS[pen.kind],
        float(pen.mcp_gamma), _mcp_scale(prob.X), float(cfg.tol), 10.0 * cfg.tol,
        int(cfg.max_passes))
    kkt = kkt_check(prob, pen, lam2, beta) if pen.kind == "l1" else float("nan")
    if not converged:
        warnings.warn(f"coordinate descent stopped after {passes} passes", ConvergenceWarning,
                      stacklevel=2)
    return FitResult(beta, lam1, lam2, float(trace[-1]), int(passes), bool(converged), kkt,
                     trace)


def lasso_fit(X, y, lambda1, tol=1e-12, max_passes=100_000, beta_init=None):
    """Plain lasso ``0.5*||y - X b||^2 + lambda1 ||b||_1`` in Gram form."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    V = np.ascontiguousarray(X.T @ X)
    b = np.ascontiguousarray(X.T @ y)
    start = np.zeros(X.shape[1]) if beta_init is None else np.asarray(beta_init, dtype=float)
    beta, passes, ok = _kernels.lasso_gram_cd(V, b, float(lambda1), start, tol, max_passes)
    if not ok:
        warnings.warn("plain lasso did not converge", ConvergenceWarning, stacklevel=2)
    return beta, passes, ok


def augmented_lasso_fit(prob, pen, lambda2, tol=1e-12):
    """Solve the l1 problem as a plain lasso on augmented data.

    With ``L'L = Gamma``, ``X* = (1 + lambda2)^(-1/2) [X; sqrt(lambda2) L]``
    and ``y* = [y; 0]`` one has ``X* b* = [X b; sqrt(lambda2) L b]`` for
    ``b = b* / sqrt(1 + lambda2)``, so the lasso on ``(y*, X*)`` with level
    ``lambda1 / sqrt(1 + lambda2)`` returns ``b*``.
    """
    if pen.kind != "l1":
        raise ValueError("augmented route applies to the l1 penalty only")
    lambda2 = float(lambda2)
    if lambda2 < 0:
        raise ValueError("lambda2 must be nonnegative")
    try:
        L = chol_or_eigh_factor(prob.gamma)
    except NotPsdError as err:
        raise NotPsdError(f"gamma is not PSD: {err}") from None
    c = np.sqrt(1.0 + lambda2)
    X_aug = np.vstack([prob.X, np.sqrt(lambda2) * L]) / c
    y_aug = np.concatenate([prob.y, np.zeros(prob.p)])
    beta_star, passes, ok = lasso_fit(X_aug, y_aug, pen.lambda1 / c, tol=tol)
    beta = beta_star / c
    return FitResult(beta, pen.lambda1, lambda2, objective_value(prob, beta, pen, lambda2),
                     int(passes), bool(ok), kkt_check(prob, pen, lambda2, beta))


@dataclass
class GroupingDiagnostic:
    """Both sides of the grouping identity for a conditionally dependent pair.

    ``lhs`` is ``|b_j - b_k|`` (``theta_jk > 0``) or ``|b_j + b_k|``
    (``theta_jk < 0``); ``rhs`` is
    ``|(x_j -/+ x_k)' z| / (lambda2 (sum_{l != j}|theta_jl| +/- theta_jk))``
    with ``z = y - X b``. ``kkt_residual`` is the largest absolute value
    of the exact per-coordinate stationarity equations for ``j`` and ``k``,
    which hold at the optimum without any row-exchangeability assumption.
    """

    form: str
    lhs: float
    rhs: float
    kkt_residual: float
    same_sign: bool

    @property
    def gap(self):
        return self.lhs - self.rhs


def grouping_gap(prob, fit, j, k, theta, lambda2):
    if isinstance(theta, PrecisionEstimate):
        theta = theta.theta
    theta = np.asarray(theta, dtype=float)
    b = np.asarray(fit.beta, dtype=float)
    if b[j] == 0 or b[k] == 0:
        raise InactiveCoefficientError(f"coefficients {j} and {k} must both be nonzero")
    tjk = theta[j, k]
    if tjk == 0:
        raise ValueError(f"theta[{j}, {k}] is zero: the pair is not connected")
    z = prob.y - prob.X @ b
    row_abs = np.abs(theta[j]).sum() - abs(theta[j, j])
    if tjk > 0:
        form = "difference"
        lhs = abs(b[j] - b[k])
        rhs = abs((prob.X[:, j] - prob.X[:, k]) @ z) / (lambda2 * (row_abs + tjk))
    else:
        form = "sum"
        lhs = abs(b[j] + b[k])
        rhs = abs((prob.X[:, j] + prob.X[:, k]) @ z) / (lambda2 * (row_abs - tjk))

    def stationarity(i):
        others = np.arange(len(b)) != i
        deg = np.abs(theta[i, others]).sum()
        return (-(prob.X[:, i] @ z) + fit.lambda1 * np.sign(b[i]) + lambda2 * b[i] * deg
                - lambda2 * (theta[i, others] @ b[others]))

    kkt = max(abs(stationarity(j)), abs(stationarity(k)))
    return GroupingDiagnostic(form, float(lhs), float(rhs), float(kkt),
                              bool(np.sign(b[j]) == np.sign(b[k])))


def zero_inclusion_gap(prob, pen, lambda2, beta):
    """Per-coordinate ``|x_j'(y - Xb) - lambda2 sum_{k != j} G_jk b_k| - lambda1``.

    Nonpositive (up to solver tolerance) at every inactive coordinate of an
    optimal l1 fit.
    """
    beta = np.asarray(beta, dtype=float)
    G = prob.gamma
    cross = G @ beta - np.diag(G) * beta
    score = prob.X.T @ (prob.y - prob.X @ beta) - lambda2 * cross
    return np.abs(score) - pen.lambda1

