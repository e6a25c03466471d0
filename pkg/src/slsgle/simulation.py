"""
Simulation scenarios and replication studies.

Four data-generating processes (block and global AR-type covariances,
block tridiagonal and random sparse precision matrices) plus the small
20-predictor design used to contrast the l1 and MCP penalties. A study
draws a fresh training set per (n, replicate), tunes every method by BIC
on the same data, and records l2 estimation error and out-of-sample
prediction MSE.
"""

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .exceptions import DimensionMismatchError, InvalidSpecError
from .graph import adjacency_from_correlation, fisher_threshold, laplacian_from_adjacency
from .numeric import make_rng, mvn_sample
from .selection import (
    DEFAULT_LAMBDA2_GRID,
    TuningGrid,
    grid_path,
    grid_search,
    select_with_graph,
)

SCENARIOS = ("EX1", "EX2", "EX3", "EX4", "FIG1")
METHODS = ("SLS-GLE", "SLS-N1", "SLS-N2", "SLS-N3", "SLS-N4", "SLS-N5", "ElasticNet", "Lasso")
FIG1_BETA = (3.0, 1.0, 5.0, 4.0, 9.0)
BLOCK = 5


@dataclass(frozen=True)
class ScenarioSpec:
    """Configuration of one simulated data set.

    ``beta`` overrides the default coefficient vector (``q`` leading
    entries equal to ``beta_value``). ``ex4_density`` and ``ex4_weight``
    control the random sparse precision matrix.
    """

    id: str = "EX3"
    n: int = 100
    p: int = 60
    q: int = 10
    beta_value: float = 1.5
    noise_sd: float = 1.0
    seed: int = 0
    beta: tuple = None
    n_test: int = 200
    ex4_density: float = 0.02
    ex4_weight: float = 0.5
    # seeds the random EX4 precision; None reuses ``seed``
    structure_seed: int = None

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise InvalidSpecError(f"unknown scenario {self.id!r}")
        if self.n < 1 or self.p < 1:
            raise InvalidSpecError("n and p must be positive")
        if not 0 <= self.q <= self.p:
            raise InvalidSpecError("q must lie in [0, p]")
        if self.id in ("EX1", "EX3", "FIG1") and self.p % BLOCK:
            raise InvalidSpecError(f"{self.id} needs p divisible by {BLOCK}")
        if self.noise_sd < 0:
            raise InvalidSpecError("noise_sd must be nonnegative")
        if self.beta is not None and len(self.beta) != self.p:
            raise InvalidSpecError("beta must have length p")

    def true_beta(self):
        if self.beta is not None:
            return np.asarray(self.beta, dtype=float)
        b = np.zeros(self.p)
        if self.id == "FIG1":
            k = min(len(FIG1_BETA), self.p)
            b[:k] = FIG1_BETA[:k]
        else:
            b[: self.q] = self.beta_value
        return b


def fig1_spec(n=50, seed=0, noise_sd=1.0):
    return ScenarioSpec("FIG1", n=n, p=20, q=5, noise_sd=noise_sd, seed=seed)


def _block_tridiagonal(p, diag=1.0, off=0.5):
    block = np.diag(np.full(BLOCK, diag)) + off * (np.eye(BLOCK, k=1) + np.eye(BLOCK, k=-1))
    return np.kron(np.eye(p // BLOCK), block)


def _ar_matrix(size, rho=0.8):
    idx = np.arange(size)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def ex4_precision(p, seed, density=0.02, weight=0.5):
    """Random sparse precision with condition number ``p`` and unit diagonal.

    Off-diagonal entries are ``weight`` with probability ``density``; the
    diagonal shift is chosen so that ``(l_max + d) / (l_min + d) = p``.
    All diagonal entries equal ``d`` so rescaling to unit diagonal leaves
    the condition number unchanged.
    """
    rng = make_rng([seed, 4])
    upper = np.triu(rng.random((p, p)) < density, k=1)
    F = weight * (upper | upper.T).astype(float)
    ev = np.linalg.eigvalsh(F)
    lo, hi = ev[0], ev[-1]
    if p == 1 or hi - lo <= 0:
        # edgeless draw: any shift gives condition number 1
        return np.eye(p)
    delta = (hi - p * lo) / (p - 1)
    theta = (F + delta * np.eye(p)) / delta
    return 0.5 * (theta + theta.T)


def scenario_covariance(spec):
    """Population covariance (and precision when the scenario defines one)."""
    p = spec.p
    if spec.id == "EX1":
        return np.kron(np.eye(p // BLOCK), _ar_matrix(BLOCK)), None
    if spec.id == "EX2":
        return _ar_matrix(p), None
    if spec.id in ("EX3", "FIG1"):
        theta = _block_tridiagonal(p)
    elif spec.id == "EX4":
        sseed = spec.seed if spec.structure_seed is None else spec.structure_seed
        theta = ex4_precision(p, sseed, spec.ex4_density, spec.ex4_weight)
    else:
        raise InvalidSpecError(spec.id)
    sigma = np.linalg.inv(theta)
    return 0.5 * (sigma + sigma.T), theta


def generate_dataset(spec, n=None, stream=0):
    """Draw ``(y, X, beta_true)`` with ``y = X beta + N(0, noise_sd^2)``.

    ``stream`` separates independent draws that share a spec (training
    set 0, test set 1, ...).
    """
    n = spec.n if n is None else n
    sigma, _ = scenario_covariance(spec)
    beta = spec.true_beta()
    rng = make_rng([spec.seed, int(n), int(stream)])
    X = mvn_sample(0.0, sigma, n, rng)
    y = X @ beta + spec.noise_sd * rng.standard_normal(n)
    return y, X, beta


def compute_metrics(beta_hat, beta_true, y_test, X_test, intercept=0.0):
    """``(||b_hat - b||_2, mean((y_test - X_test b_hat - intercept)^2))``."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    y_test = np.asarray(y_test, dtype=float)
    X_test = np.asarray(X_test, dtype=float)
    if beta_hat.shape != beta_true.shape or X_test.shape != (y_test.shape[0], beta_hat.shape[0]):
        raise DimensionMismatchError("inconsistent shapes for metrics")
    l2 = float(np.linalg.norm(beta_hat - beta_true))
    resid = y_test - X_test @ beta_hat - intercept
    return l2, float(np.mean(resid ** 2))


@dataclass
class ReplicationResult:
    method: str
    n: int
    replicate: int
    l2_error: float
    mse: float
    support_recovered: bool
    runtime_ms: int
    error: str = ""


@dataclass
class StudyConfig:
    """Grid and metric options shared by every method in a study.

    ``lambda0_grid=None`` uses the data-driven default; ``mse`` is
    ``"prediction"`` (fresh test draw) or ``"estimation"``
    (``||b_hat - b||^2 / p``).
    """

    lambda0_grid: object = None
    lambda1_num: int = 30
    lambda2_grid: tuple = DEFAULT_LAMBDA2_GRID
    fisher_alpha: float = 0.05
    adjacency_k: float = 1.0
    mse: str = "prediction"
    tol: float = 1e-4


def fit_method(method, y, X, cfg=None):
    """Tune one method by BIC and return ``(coef, intercept, report)``."""
    cfg = cfg or StudyConfig()
    n, p = X.shape
    if method == "SLS-GLE":
        grid = TuningGrid(cfg.lambda0_grid, None, cfg.lambda2_grid)
        report = grid_search(y, X, grid, tol=cfg.tol)
    elif method == "Lasso":
        report = select_with_graph(y, X, np.zeros((p, p)), lambda2_grid=[0.0], label=None,
                                   tol=cfg.tol)
    elif method == "ElasticNet":
        report = select_with_graph(y, X, np.eye(p), lambda2_grid=cfg.lambda2_grid, tol=cfg.tol)
    elif method.startswith("SLS-N") and method[4:] in ("N1", "N2", "N3", "N4", "N5"):
        measure = method[4:]
        R = np.corrcoef(X, rowvar=False)
        r = fisher_threshold(n, cfg.fisher_alpha, p) if measure in ("N1", "N2") else None
        adj = adjacency_from_correlation(R, measure, r=r, k=cfg.adjacency_k)
        report = select_with_graph(y, X, laplacian_from_adjacency(adj),
                                   lambda2_grid=cfg.lambda2_grid, tol=cfg.tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    coef, intercept = report.coef()
    return coef, intercept, report


def _run_cell(spec_base, n, rep, methods, seed, cfg, timings):
    # every (n, replicate) cell gets its own stream family; the EX4 graph is shared
    cell_seed = int(np.random.SeedSequence([seed, n, rep]).generate_state(1)[0])
    structure = spec_base.structure_seed if spec_base.structure_seed is not None else seed
    spec = replace(spec_base, n=n, seed=cell_seed, structure_seed=int(structure))
    y, X, beta = generate_dataset(spec, stream=0)
    y_test, X_test, _ = generate_dataset(spec, n=spec.n_test, stream=1)
    support = beta != 0
    out = []
    for method in methods:
        t0 = time.perf_counter()
        try:
            coef, intercept, _ = fit_method(method, y, X, cfg)
            l2, mse = compute_metrics(coef, beta, y_test, X_test, intercept)
            if cfg.mse == "estimation":
                mse = l2 ** 2 / spec.p
            rec = ReplicationResult(method, n, rep, l2, mse,
                                    bool(np.array_equal(coef != 0, support)),
                                    _elapsed(t0, timings))
        except Exception as err:  # recorded per cell; the study continues
            rec = ReplicationResult(method, n, rep, float("nan"), float("nan"), False,
                                    _elapsed(t0, timings),
                                    f"{type(err).__name__}: {err}")
        out.append(rec)
    return out


def _elapsed(t0, timings):
    return int(round(1000 * (time.perf_counter() - t0))) if timings else 0


def run_study(spec_base, n_list, methods, replications, seed, cfg=None, threads=1,
              timings=False):
    """Replicate every method over ``n_list`` x ``replications`` fresh data sets.

    Results are sorted by (method, n, replicate). ``runtime_ms`` holds wall
    time only when ``timings`` is set (it is 0 otherwise, keeping outputs
    reproducible byte for byte).
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    if replications < 1:
        raise ValueError("replications must be at least 1")
    cfg = cfg or StudyConfig()
    cells = [(int(n), rep) for n in n_list for rep in range(replications)]

    def work(cell):
        return _run_cell(spec_base, cell[0], cell[1], methods, seed, cfg, timings)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, cells))
    else:
        chunks = [work(c) for c in cells]
    results = [r for chunk in chunks for r in chunk]
    order = {m: i for i, m in enumerate(methods)}
    results.sort(key=lambda r: (order[r.method], r.n, r.replicate))
    return results


@dataclass
class SummaryRow:
    method: str
    n: int
    count: int
    l2_mean: float
    l2_se: float
    mse_mean: float
    mse_se: float
    support_rate: float


def summarize(results):
    """Mean and standard error of l2 error and MSE per (method, n)."""
    groups = {}
    for r in results:
        if r.error:
            continue
        groups.setdefault((r.method, r.n), []).append(r)
    rows = []
    for (method, n), rs in groups.items():
        l2 = np.array([r.l2_error for r in rs])
        mse = np.array([r.mse for r in rs])
        k = len(rs)
        se = (lambda v: float(v.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0)
        rows.append(SummaryRow(method, n, k, float(l2.mean()), se(l2), float(mse.mean()),
                               se(mse), float(np.mean([r.support_recovered for r in rs]))))
    methods = []
    for r in results:
        if r.method not in methods:
            methods.append(r.method)
    rows.sort(key=lambda s: (methods.index(s.method), s.n))
    return rows


RESULT_COLUMNS = ("method", "n", "replicate", "l2_error", "mse", "support_recovered",
                  "runtime_ms")
SUMMARY_COLUMNS = ("method", "n", "count", "l2_mean", "l2_se", "mse_mean", "mse_se",
                   "support_rate")


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_csv(results, include_runtime=True):
    cols = RESULT_COLUMNS if include_runtime else RESULT_COLUMNS[:-1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in results:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in cols])
    return buf.getvalue()


def summary_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in rows:
        d = asdict(s)
        w.writerow([_fmt(d[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def oracle_l2_error(y, X, beta_true, grid=None, tol=1e-4):
    """Smallest ``||b_hat - b||_2`` of the two-stage estimator over a tuning grid.

    The oracle knows the truth and picks the best cell, which isolates the
    estimator's error rate from the quality of the tuning rule.
    """
    path = grid_path(y, X, grid, tol=tol)
    beta_true = np.asarray(beta_true, dtype=float)
    return min(float(np.linalg.norm(b - beta_true)) for b in path.coefs())


def scaling_probe(spec_base, n_list, replications, seed, grid=None, tol=1e-4):
    """Mean oracle-tuned l2 error per sample size.

    Returns ``(means, ratios, predicted)`` where ``ratios`` compare
    consecutive sizes and ``predicted`` is ``sqrt(n_k / n_{k+1})``.
    """
    n_list = [int(n) for n in n_list]
    means = []
    for n in n_list:
        errs = []
        for rep in range(replications):
            cell_seed = int(np.random.SeedSequence([seed, n, rep]).generate_state(1)[0])
            spec = replace(spec_base, n=n, seed=cell_seed)
            y, X, beta = generate_dataset(spec)
            errs.append(oracle_l2_error(y, X, beta, grid, tol))
        means.append(float(np.mean(errs)))
    means = np.array(means)
    ns = np.array(n_list, dtype=float)
    return means, means[1:] / means[:-1], np.sqrt(ns[:-1] / ns[1:])
