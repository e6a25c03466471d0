"""
Tuning-parameter selection by BIC and support-size targeting.

BIC here is ``n log(rss / n) + df log(n)`` with ``df`` the number of
nonzero coefficients. The Laplacian term's effect on the effective
degrees of freedom is ignored.
"""

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateRssError, UnreachableSizeError
from .graph import (
    GlassoConfig,
    default_lambda0_grid,
    glasso_fit,
    laplacian_from_precision,
)
from .numeric import sample_covariance, standardize_columns
from .solver import FitResult, PenaltySpec, RegressionProblem, SolverConfig, coordinate_descent_fit

DEFAULT_LAMBDA2_GRID = (0.01, 0.1, 0.5, 1.0, 5.0, 10.0)


def default_lambda1_grid(X, y, num=30):
    """Log-spaced grid on ``[0.01, 1] * ||X'y||_inf``."""
    top = float(np.max(np.abs(np.asarray(X).T @ np.asarray(y))))
    if top == 0:
        top = 1.0
    return top * np.logspace(-2, 0, num)


def _check_grid(name, values, allow_zero=True):
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if np.any(arr < 0) or (not allow_zero and np.any(arr == 0)):
        raise ValueError(f"{name} must be {'nonnegative' if allow_zero else 'positive'}")
    if np.any(np.diff(arr) <= 0):
        raise ValueError(f"{name} must be strictly ascending")
    return arr


@dataclass
class TuningGrid:
    """Tuning grids; ``None`` entries are filled from the data.

    ``lambda2_grid`` may contain 0 (a pure lasso column of the grid).
    """

    lambda0_grid: object = None
    lambda1_grid: object = None
    lambda2_grid: object = DEFAULT_LAMBDA2_GRID

    def __post_init__(self):
        if self.lambda0_grid is not None:
            self.lambda0_grid = _check_grid("lambda0_grid", self.lambda0_grid)
        if self.lambda1_grid is not None:
            self.lambda1_grid = _check_grid("lambda1_grid", self.lambda1_grid)
        if self.lambda2_grid is not None:
            self.lambda2_grid = _check_grid("lambda2_grid", self.lambda2_grid)

    def resolve(self, X, y):
        """Concrete grids for standardized ``X`` and centered ``y``."""
        l0 = self.lambda0_grid
        if l0 is None:
            l0 = default_lambda0_grid(sample_covariance(X))
        l1 = self.lambda1_grid if self.lambda1_grid is not None else default_lambda1_grid(X, y)
        l2 = self.lambda2_grid if self.lambda2_grid is not None else np.array(DEFAULT_LAMBDA2_GRID)
        return TuningGrid(l0, l1, l2)


def bic_score(prob, fit):
    """Return ``(bic, df, rss)`` of a fit.

    Raises
    ------
    DegenerateRssError
        If the residual sum of squares is exactly zero.
    """
    beta = np.asarray(fit.beta if isinstance(fit, FitResult) else fit, dtype=float)
    resid = prob.y - prob.X @ beta
    rss = float(resid @ resid)
    if rss <= 0:
        raise DegenerateRssError("rss is zero; BIC is undefined")
    n = prob.n
    df = int(np.count_nonzero(beta))
    return n * math.log(rss / n) + df * math.log(n), df, rss


@dataclass
class SelectionReport:
    """Outcome of a BIC grid search.

    ``fit`` lives on the standardized scale; :meth:`coef` maps it back.
    Records in ``bic_table`` are dicts with keys lambda0, lambda1, lambda2,
    df, rss, bic (lambda0 is ``None`` when the graph was supplied).
    """

    best: tuple
    bic_table: list
    fit: FitResult
    precision: object = None
    gamma: object = None
    x_mean: object = None
    x_scale: object = None
    y_mean: float = 0.0
    path_monotone: bool = True

    def coef(self):
        """Coefficients and intercept on the original data scale."""
        beta = np.asarray(self.fit.beta, dtype=float)
        if self.x_scale is None:
            return beta.copy(), float(self.y_mean)
        b = beta / self.x_scale
        return b, float(self.y_mean - self.x_mean @ b)

    def to_dict(self):
        l0, l1, l2 = self.best
        return {
            "best": {"lambda0": None if l0 is None else float(l0),
                     "lambda1": float(l1), "lambda2": float(l2)},
            "fit": self.fit.to_dict(),
            "bic_table": [_clean_record(r) for r in self.bic_table],
            "path_monotone": bool(self.path_monotone),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def write_bic_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda0", "lambda1", "lambda2", "df", "rss", "bic"])
            for r in self.bic_table:
                w.writerow(["" if r["lambda0"] is None else repr(float(r["lambda0"])),
                            repr(float(r["lambda1"])), repr(float(r["lambda2"])), r["df"],
                            repr(float(r["rss"])), repr(float(r["bic"]))])


def _clean_record(r):
    out = dict(r)
    for key in ("lambda0", "lambda1", "lambda2", "rss", "bic"):
        if out[key] is not None:
            out[key] = float(out[key])
    out["df"] = int(out["df"])
    return out


def _run_chain(prob, lambda1_desc, lambda2, tol, max_passes):
    """Warm-started fits along a descending lambda1 path."""
    fits = []
    beta = np.zeros(prob.p)
    for lam1 in lambda1_desc:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = coordinate_descent_fit(
                prob, PenaltySpec("l1", float(lam1)),
                SolverConfig(float(lambda2), tol=tol, max_passes=max_passes, beta_init=beta),
                check_gamma=False)
        beta = fit.beta
        fits.append(fit)
    return fits


def _best_index(records):
    # minimum BIC; ties go to the sparser model (larger lambda1, then lambda2)
    keyed = [(r["bic"], -r["lambda1"], -r["lambda2"], i) for i, r in enumerate(records)
             if np.isfinite(r["bic"])]
    if not keyed:
        raise DegenerateRssError("no grid cell has a finite BIC")
    return min(keyed)[3]


def select_over_graphs(y, X, graphs, lambda1_grid, lambda2_grid, tol=1e-4, max_passes=1000,
                       threads=1, strict_path=False):
    """BIC search over supplied Laplacians and (lambda1, lambda2) grids.

    Parameters
    ----------
    y, X : arrays
        Already centered / standardized data.
    graphs : list of (label, gamma, precision-or-None)
        ``label`` is reported as lambda0.
    strict_path : bool
        Raise when the support size grows with lambda1 along a chain;
        otherwise the event is only reported through ``path_monotone``.

    Returns
    -------
    records, fits, path_monotone
    """
    lambda1_desc = np.sort(np.asarray(lambda1_grid, dtype=float))[::-1]
    lambda2_grid = np.asarray(lambda2_grid, dtype=float)
    tasks = [(gi, l2) for gi in range(len(graphs)) for l2 in lambda2_grid]
    probs = [RegressionProblem(y, X, g[1]) for g in graphs]

    def work(task):
        gi, l2 = task
        return _run_chain(probs[gi], lambda1_desc, l2, tol, max_passes)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chains = list(pool.map(work, tasks))
    else:
        chains = [work(t) for t in tasks]

    records, fits = [], []
    monotone = True
    for (gi, l2), chain in zip(tasks, chains):
        sizes = [len(f.active_set) for f in chain]
        # chain runs from large to small lambda1: sizes should not shrink
        if any(b < a for a, b in zip(sizes, sizes[1:])):
            monotone = False
            msg = (f"support size not monotone in lambda1 at graph {graphs[gi][0]}, "
                   f"lambda2={l2}: {sizes}")
            if strict_path:
                raise RuntimeError(msg)
        for fit in chain:
            try:
                bic, df, rss = bic_score(probs[gi], fit)
            except DegenerateRssError:
                bic, df, rss = float("nan"), len(fit.active_set), 0.0
            records.append({"lambda0": graphs[gi][0], "lambda1": fit.lambda1, "lambda2": l2,
                            "df": df, "rss": rss, "bic": bic, "_graph": gi})
            fits.append(fit)
    return records, fits, monotone


def _prepare(y, X, standardize):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if standardize:
        Xs, mean, scale = standardize_columns(X, return_params=True)
        y_mean = float(y.mean())
        return y - y_mean, Xs, mean, scale, y_mean
    return y, X, None, None, 0.0


def grid_search(y, X, grid=None, *, standardize=True, glasso_tol=1e-5, tol=1e-4,
                max_passes=1000, threads=1, strict_path=False):
    """Tune ``(lambda0, lambda1, lambda2)`` of the two-stage estimator by BIC.

    For every lambda0 the graphical lasso is fit to the sample covariance of
    the standardized predictors and turned into a Laplacian; each
    ``(lambda1, lambda2)`` cell is then fit by coordinate descent, warm
    started along decreasing lambda1. A single-entry ``lambda0_grid`` fixes
    lambda0.
    """
    path = grid_path(y, X, grid, standardize=standardize, glasso_tol=glasso_tol, tol=tol,
                     max_passes=max_passes, threads=threads, strict_path=strict_path)
    return _finish(path.records, path.fits, path.graphs, path.x_mean, path.x_scale,
                   path.y_mean, path.monotone)


@dataclass
class GridPath:
    """Every fit of a full grid, before any selection."""

    records: list
    fits: list
    graphs: list
    x_mean: object
    x_scale: object
    y_mean: float
    monotone: bool

    def coefs(self):
        """Original-scale coefficient vectors, one per record."""
        if self.x_scale is None:
            return [np.asarray(f.beta, dtype=float) for f in self.fits]
        return [np.asarray(f.beta, dtype=float) / self.x_scale for f in self.fits]


def grid_path(y, X, grid=None, *, standardize=True, glasso_tol=1e-5, tol=1e-4,
              max_passes=1000, threads=1, strict_path=False):
    """Fit every ``(lambda0, lambda1, lambda2)`` cell; see :func:`grid_search`."""
    yc, Xs, mean, scale, y_mean = _prepare(y, X, standardize)
    grid = (grid or TuningGrid()).resolve(Xs, yc)
    S = sample_covariance(Xs)
    graphs = []
    for lam0 in grid.lambda0_grid:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pe = glasso_fit(S, GlassoConfig(float(lam0), tol=glasso_tol))
        graphs.append((float(lam0), laplacian_from_precision(pe.theta), pe))
    records, fits, monotone = select_over_graphs(
        yc, Xs, graphs, grid.lambda1_grid, grid.lambda2_grid, tol=tol, max_passes=max_passes,
        threads=threads, strict_path=strict_path)
    return GridPath(records, fits, graphs, mean, scale, y_mean, monotone)


def select_with_graph(y, X, gamma, lambda1_grid=None, lambda2_grid=DEFAULT_LAMBDA2_GRID, *,
                      standardize=True, label=None, tol=1e-4, max_passes=1000, threads=1):
    """BIC search over ``(lambda1, lambda2)`` for a fixed Laplacian."""
    yc, Xs, mean, scale, y_mean = _prepare(y, X, standardize)
    if lambda1_grid is None:
        lambda1_grid = default_lambda1_grid(Xs, yc)
    lambda2_grid = _check_grid("lambda2_grid", lambda2_grid)
    graphs = [(label, np.asarray(gamma, dtype=float), None)]
    records, fits, monotone = select_over_graphs(
        yc, Xs, graphs, lambda1_grid, lambda2_grid, tol=tol, max_passes=max_passes,
        threads=threads)
    return _finish(records, fits, graphs, mean, scale, y_mean, monotone)


def _finish(records, fits, graphs, mean, scale, y_mean, monotone):
    i = _best_index(records)
    r = records[i]
    g = graphs[r["_graph"]]
    for rec in records:
        rec.pop("_graph")
    return SelectionReport(best=(r["lambda0"], r["lambda1"], r["lambda2"]), bic_table=records,
                           fit=fits[i], precision=g[2], gamma=g[1], x_mean=mean,
                           x_scale=scale, y_mean=y_mean, path_monotone=monotone)


def target_support_size(y, X, gamma, lambda2, m, *, tol=1e-4, max_passes=1000, steps=40):
    """Find a lambda1 whose fit has between ``m - 2`` and ``m`` nonzeros.

    Bisects lambda1 on ``[0, ||X'y||_inf]`` toward the smallest value whose
    support does not exceed ``m``, which gives the least-shrunk fit of the
    requested size. Among all fits visited, the one with the largest
    support not exceeding ``m`` is returned (ties: smaller lambda1).

    Raises
    ------
    UnreachableSizeError
        If even a vanishing lambda1 activates fewer than ``m - 2``
        coefficients.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if not 1 <= m <= p:
        raise ValueError(f"target size must lie in [1, {p}]")
    prob = RegressionProblem(y, X, gamma)
    top = prob.max_lambda1()

    def fit_at(lam1, start):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return coordinate_descent_fit(
                prob, PenaltySpec("l1", float(lam1)),
                SolverConfig(float(lambda2), tol=tol, max_passes=max_passes, beta_init=start),
                check_gamma=False)

    floor = top * 1e-8
    low_fit = fit_at(floor, np.zeros(p))
    size = len(low_fit.active_set)
    if size < m - 2:
        raise UnreachableSizeError(
            f"at most {size} coefficients become active; cannot reach {m - 2}..{m}")
    if size <= m:
        return low_fit

    candidates = []
    lo, hi = floor, top
    hi_beta = np.zeros(p)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        fit = fit_at(mid, hi_beta)
        k = len(fit.active_set)
        if k <= m:
            candidates.append(fit)
            hi, hi_beta = mid, fit.beta
        else:
            lo = mid
    if not candidates:
        candidates.append(fit_at(top, np.zeros(p)))
    return max(candidates, key=lambda f: (len(f.active_set), -f.lambda1))


def target_size_by_bic(y, X, gamma, lambda2_grid, m, **kwargs):
    """Run :func:`target_support_size` for each lambda2 and keep the BIC minimizer.

    Returns ``(fit, table)`` where ``table`` lists (lambda2, lambda1, df, bic).
    """
    prob = RegressionProblem(y, X, gamma)
    table = []
    best = None
    for l2 in lambda2_grid:
        fit = target_support_size(y, X, gamma, float(l2), m, **kwargs)
        try:
            bic = bic_score(prob, fit)[0]
        except DegenerateRssError:
            bic = -math.inf
        table.append((float(l2), fit.lambda1, len(fit.active_set), bic))
        if best is None or bic < best[0]:
            best = (bic, fit)
    return best[1], table
