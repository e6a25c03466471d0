"""
Sparse index tracking on rolling windows.

A panel of constituent prices and an index level is cut into consecutive
train/test windows. On each training window the predictors are
standardized, a graphical lasso graph is estimated, and for every target
subset size a Laplacian-penalized fit with that many active assets is
chosen by BIC over lambda2. The fit is then applied to the raw test-window
prices and scored by the annual tracking error of the implied returns.
"""

import csv
import datetime as dt
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    NonPositivePriceError,
    ParseError,
    TooShortError,
    UnsortedDatesError,
)
from .graph import GlassoConfig, glasso_fit, laplacian_from_precision
from .numeric import make_rng, sample_covariance, standardize_columns
from .selection import DEFAULT_LAMBDA2_GRID, target_size_by_bic

TRADING_DAYS = 252
MISSING_TOKENS = ("", "na", "nan", "null")


@dataclass(eq=False)
class PricePanel:
    """Aligned daily prices of an index and its candidate constituents.

    Attributes
    ----------
    dates : list of datetime.date
        Strictly increasing.
    index_prices : ndarray, shape (T,)
    asset_prices : ndarray, shape (T, N)
    asset_ids : list of str
    """

    dates: list
    index_prices: np.ndarray
    asset_prices: np.ndarray
    asset_ids: list

    def __post_init__(self):
        self.index_prices = np.asarray(self.index_prices, dtype=float).ravel()
        self.asset_prices = np.asarray(self.asset_prices, dtype=float)
        self.asset_ids = [str(a) for a in self.asset_ids]
        self.dates = list(self.dates)
        T = len(self.dates)
        if self.asset_prices.ndim != 2 or self.asset_prices.shape != (T, len(self.asset_ids)):
            raise ValueError("asset_prices must be T x N matching dates and asset_ids")
        if self.index_prices.shape[0] != T:
            raise ValueError("index_prices must have one entry per date")
        if len(set(self.asset_ids)) != len(self.asset_ids):
            raise ValueError("asset ids must be unique")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise UnsortedDatesError(f"dates not strictly increasing at {b}")
        bad = np.argwhere(~(self.asset_prices > 0))
        if bad.size:
            t, j = bad[0]
            raise NonPositivePriceError(self.asset_ids[j], self.dates[t])
        bad = np.flatnonzero(~(self.index_prices > 0))
        if bad.size:
            raise NonPositivePriceError("index", self.dates[bad[0]])

    def __eq__(self, other):
        if not isinstance(other, PricePanel):
            return NotImplemented
        return (self.dates == other.dates and self.asset_ids == other.asset_ids
                and np.array_equal(self.index_prices, other.index_prices)
                and np.array_equal(self.asset_prices, other.asset_prices))

    @property
    def n_dates(self):
        return len(self.dates)

    @property
    def n_assets(self):
        return len(self.asset_ids)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "index"] + self.asset_ids)
            for t, d in enumerate(self.dates):
                w.writerow([d.isoformat(), repr(float(self.index_prices[t]))]
                           + [repr(float(v)) for v in self.asset_prices[t]])


def _parse_price(token):
    token = token.strip()
    if token.lower() in MISSING_TOKENS:
        return math.nan
    return float(token)


def load_prices(path, sort_on_load=False, missing="reject", nonpositive="reject"):
    """Read a price panel from CSV.

    The header is ``date,index,<asset_id>...``; dates are ISO-8601.

    Parameters
    ----------
    sort_on_load : bool
        Sort rows by date instead of rejecting an unsorted file.
    missing : {"reject", "ffill", "drop"}
        Empty or ``NA`` asset cells either raise, are carried forward from
        the previous date (assets missing on the first date are dropped), or
        drop the asset. Dropping warns.
    nonpositive : {"reject", "drop"}
        Treatment of assets with a zero or negative price.

    Raises
    ------
    ParseError
        Malformed header, row width, date or number, or a missing index
        value that cannot be filled.
    NonPositivePriceError, UnsortedDatesError
    """
    if missing not in ("reject", "ffill", "drop"):
        raise ValueError(f"unknown missing policy {missing!r}")
    if nonpositive not in ("reject", "drop"):
        raise ValueError(f"unknown nonpositive policy {nonpositive!r}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(1, "empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3 or header[0].lower() != "date" or header[1].lower() != "index":
        raise ParseError(1, "header must be date,index,<asset_id>...")
    ids = header[2:]
    if len(set(ids)) != len(ids):
        raise ParseError(1, "duplicate asset id")

    dates, lines, values = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
        try:
            d = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise ParseError(lineno, f"bad date {row[0]!r}") from None
        try:
            vals = [_parse_price(c) for c in row[1:]]
        except ValueError as err:
            raise ParseError(lineno, str(err)) from None
        dates.append(d)
        lines.append(lineno)
        values.append(vals)
    if not dates:
        raise ParseError(len(rows), "no data rows")

    order = sorted(range(len(dates)), key=lambda i: dates[i])
    if order != list(range(len(dates))):
        if not sort_on_load:
            i = next(k for k in range(1, len(dates)) if dates[k] < dates[k - 1])
            raise UnsortedDatesError(f"line {lines[i]}: date {dates[i]} precedes {dates[i - 1]}")
        dates = [dates[i] for i in order]
        lines = [lines[i] for i in order]
        values = [values[i] for i in order]
    for k in range(1, len(dates)):
        if dates[k] == dates[k - 1]:
            raise UnsortedDatesError(f"line {lines[k]}: duplicate date {dates[k]}")

    data = np.array(values, dtype=float)
    index, prices = data[:, 0], data[:, 1:]

    if np.isnan(index).any():
        t = int(np.flatnonzero(np.isnan(index))[0])
        if missing != "ffill" or t == 0:
            raise ParseError(lines[t], "missing index value")
        index = _ffill(index[:, None])[:, 0]
    bad = np.flatnonzero(index <= 0)
    if bad.size:
        raise NonPositivePriceError("index", dates[bad[0]])

    keep = np.ones(len(ids), dtype=bool)
    holes = np.isnan(prices)
    if holes.any():
        if missing == "reject":
            t, j = np.argwhere(holes)[0]
            raise ParseError(lines[t], f"missing price for {ids[j]!r}")
        if missing == "ffill":
            prices = _ffill(prices)
            leading = np.isnan(prices).any(axis=0)
        else:
            leading = holes.any(axis=0)
        if leading.any():
            warnings.warn(f"dropping assets with missing prices: "
                          f"{[ids[j] for j in np.flatnonzero(leading)]}", stacklevel=2)
            keep &= ~leading
    nonpos = (prices <= 0).any(axis=0) & keep
    if nonpos.any():
        if nonpositive == "reject":
            j = int(np.flatnonzero(nonpos)[0])
            t = int(np.flatnonzero(prices[:, j] <= 0)[0])
            raise NonPositivePriceError(ids[j], dates[t])
        warnings.warn(f"dropping assets with non-positive prices: "
                      f"{[ids[j] for j in np.flatnonzero(nonpos)]}", stacklevel=2)
        keep &= ~nonpos
    return PricePanel(dates, index, prices[:, keep], [a for a, k in zip(ids, keep) if k])


def _ffill(a):
    out = a.copy()
    for t in range(1, out.shape[0]):
        gap = np.isnan(out[t])
        out[t, gap] = out[t - 1, gap]
    return out


def simple_returns(prices):
    """``r_t = (p_t - p_{t-1}) / p_{t-1}`` for a positive price series."""
    prices = np.asarray(prices, dtype=float).ravel()
    if prices.shape[0] < 2:
        raise TooShortError("need at least two prices")
    if not np.all(prices > 0):
        raise ValueError("prices must be positive")
    return np.diff(prices) / prices[:-1]


def annual_tracking_error(realized_returns, predicted_returns):
    """Annualized standard deviation (ddof 1) of the return errors.

    Examples
    --------
    >>> round(annual_tracking_error([0.01, -0.01], [0.0, 0.0]), 4)
    0.2245
    """
    r = np.asarray(realized_returns, dtype=float).ravel()
    r_hat = np.asarray(predicted_returns, dtype=float).ravel()
    if r.shape != r_hat.shape:
        raise ValueError("return series must have equal length")
    if r.shape[0] < 2:
        raise TooShortError("need at least two returns")
    return float(math.sqrt(TRADING_DAYS) * np.std(r - r_hat, ddof=1))


@dataclass(frozen=True)
class WindowConfig:
    """Rolling-window layout: training length, test length and step."""

    train: int = 100
    test: int = 20
    step: int = 20

    def __post_init__(self):
        if self.train < 2 or self.test < 2 or self.step < 1:
            raise ValueError("train and test need at least 2 rows and step at least 1")

    def splits(self, T):
        """``(train_range, test_range)`` pairs of ``range`` objects fitting in ``T`` rows."""
        out = []
        s = 0
        while s + self.train + self.test <= T:
            out.append((range(s, s + self.train),
                        range(s + self.train, s + self.train + self.test)))
            s += self.step
        return out


@dataclass
class WindowResult:
    window_start: dt.date
    window_end: dt.date
    m: int
    lambda1: float = math.nan
    lambda2: float = math.nan
    ate: float = math.nan
    selected_ids: list = field(default_factory=list)
    coef: np.ndarray = None
    intercept: float = math.nan
    predicted: np.ndarray = None
    realized: np.ndarray = None
    large_errors: int = 0
    error: str = ""

    def to_dict(self):
        def vec(v):
            return None if v is None else [float(x) for x in v]
        return {
            "window_start": self.window_start.isoformat(),
            "window_end": self.window_end.isoformat(),
            "m": int(self.m),
            "lambda1": _num(self.lambda1),
            "lambda2": _num(self.lambda2),
            "ate": _num(self.ate),
            "selected_ids": list(self.selected_ids),
            "intercept": _num(self.intercept),
            "predicted": vec(self.predicted),
            "realized": vec(self.realized),
            "large_errors": int(self.large_errors),
            "error": self.error,
        }


def _num(v):
    return None if v is None or not math.isfinite(v) else float(v)


@dataclass
class BacktestReport:
    """Per-window results of a rolling backtest, sorted by (start, m)."""

    windows: list
    subset_sizes: list
    mode: str
    large_error_threshold: float

    @property
    def failures(self):
        return [w for w in self.windows if w.error]

    def ate_by_size(self):
        """Mean ATE over successful windows for every subset size."""
        out = {}
        for m in self.subset_sizes:
            vals = [w.ate for w in self.windows if w.m == m and not w.error]
            out[m] = float(np.mean(vals)) if vals else math.nan
        return out

    def to_dict(self):
        return {
            "mode": self.mode,
            "subset_sizes": [int(m) for m in self.subset_sizes],
            "large_error_threshold": float(self.large_error_threshold),
            "ate_by_size": {str(m): _num(v) for m, v in self.ate_by_size().items()},
            "large_errors_by_size": {
                str(m): int(sum(w.large_errors for w in self.windows if w.m == m))
                for m in self.subset_sizes},
            "n_failures": len(self.failures),
            "windows": [w.to_dict() for w in self.windows],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def window_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["window_start", "window_end", "m", "lambda1", "lambda2", "ate",
                    "selected_ids"])
        for r in self.windows:
            w.writerow([r.window_start.isoformat(), r.window_end.isoformat(), r.m,
                        repr(float(r.lambda1)), repr(float(r.lambda2)), repr(float(r.ate)),
                        "|".join(r.selected_ids)])
        return buf.getvalue()


def _series(panel, mode):
    if mode == "price":
        return panel.index_prices, panel.asset_prices, panel.dates
    if mode == "returns":
        y = simple_returns(panel.index_prices)
        X = np.diff(panel.asset_prices, axis=0) / panel.asset_prices[:-1]
        return y, X, panel.dates[1:]
    raise ValueError(f"unknown mode {mode!r}")


def fit_window(y_train, X_train, subset_sizes, lambda2_grid, lambda0, tol=1e-6,
               max_passes=5000):
    """Fit one training window; returns ``{m: (coef, intercept, fit)}``.

    Only the training rows are used, so test data cannot leak into the
    standardization, the graph or the tuning choice.
    """
    Xs, mean, scale = standardize_columns(X_train, return_params=True)
    y_mean = float(np.mean(y_train))
    yc = np.asarray(y_train, dtype=float) - y_mean
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pe = glasso_fit(sample_covariance(Xs), GlassoConfig(float(lambda0)))
    gamma = laplacian_from_precision(pe.theta)
    out = {}
    for m in subset_sizes:
        fit, _ = target_size_by_bic(yc, Xs, gamma, lambda2_grid, int(m), tol=tol,
                                    max_passes=max_passes)
        coef = np.asarray(fit.beta) / scale
        out[m] = (coef, y_mean - float(mean @ coef), fit)
    return out


def _run_window(y, X, dates, split, panel, subset_sizes, lambda2_grid, lambda0, mode,
                threshold, tol):
    tr, te = split
    start, end = dates[tr.start], dates[te.stop - 1]
    try:
        fits = fit_window(y[tr.start:tr.stop], X[tr.start:tr.stop], subset_sizes,
                          lambda2_grid, lambda0, tol=tol)
    except Exception as err:  # recorded per window; the backtest continues
        msg = f"{type(err).__name__}: {err}"
        return [WindowResult(start, end, int(m), error=msg) for m in subset_sizes]
    out = []
    y_test, X_test = y[te.start:te.stop], X[te.start:te.stop]
    for m in subset_sizes:
        coef, intercept, fit = fits[m]
        pred = intercept + X_test @ coef
        res = WindowResult(start, end, int(m), fit.lambda1, fit.lambda2,
                           selected_ids=[panel.asset_ids[j] for j in np.flatnonzero(coef)],
                           coef=coef, intercept=intercept, predicted=pred, realized=y_test,
                           large_errors=int(np.sum(np.abs(pred - y_test) > threshold)))
        try:
            if mode == "price":
                res.ate = annual_tracking_error(simple_returns(y_test), simple_returns(pred))
            else:
                res.ate = annual_tracking_error(y_test, pred)
        except Exception as err:
            res.error = f"{type(err).__name__}: {err}"
        out.append(res)
    return out


def run_backtest(panel, subset_sizes, lambda2_grid=DEFAULT_LAMBDA2_GRID, lambda0=0.1,
                 window_cfg=None, mode="price", large_error_threshold=50.0, threads=1,
                 tol=1e-6):
    """Rolling-window tracking backtest.

    Parameters
    ----------
    panel : PricePanel
    subset_sizes : sequence of int
        Target numbers of assets; each fit holds between ``m - 2`` and
        ``m`` of them.
    lambda2_grid : sequence of float
        Candidates for the Laplacian weight, chosen per window by BIC.
    lambda0 : float
        Graphical lasso level on the standardized training predictors.
    mode : {"price", "returns"}
        Regress index levels on constituent prices, or index returns on
        constituent returns. In price mode the ATE compares the returns of
        the realized and predicted index paths within the test window.
    large_error_threshold : float
        Absolute forecast errors above this count as large.

    Returns
    -------
    BacktestReport
        Failed windows carry an ``error`` message and NaN metrics.
    """
    window_cfg = window_cfg or WindowConfig()
    subset_sizes = [int(m) for m in subset_sizes]
    if not subset_sizes:
        raise ValueError("need at least one subset size")
    y, X, dates = _series(panel, mode)
    splits = window_cfg.splits(len(dates))
    if not splits:
        raise TooShortError(f"panel has {len(dates)} usable rows; a window needs "
                            f"{window_cfg.train + window_cfg.test}")

    def work(split):
        return _run_window(y, X, dates, split, panel, subset_sizes, lambda2_grid, lambda0,
                           mode, large_error_threshold, tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, splits))
    else:
        chunks = [work(s) for s in splits]
    windows = [w for chunk in chunks for w in chunk]
    windows.sort(key=lambda w: (w.window_start, w.m))
    return BacktestReport(windows, subset_sizes, mode, float(large_error_threshold))


def _dates(T, start=dt.date(2020, 1, 1)):
    # business days only, so the calendar looks like a trading calendar
    out, d = [], start
    while len(out) < T:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def _random_walk_prices(rng, T, N, vol=0.015, start=100.0, returns=None):
    r = returns if returns is not None else rng.normal(0.0, vol, size=(T - 1, N))
    levels = np.vstack([np.zeros(N), np.cumsum(np.log1p(r), axis=0)])
    return start * np.exp(levels)


def synthetic_exact_panel(n_assets=30, T=140, k=10, vol=0.02, seed=0):
    """Index equal to a positive combination of the first ``k`` assets, no noise.

    Each asset's log price fluctuates independently around its own level
    (no common trend), so sample correlations between constituents stay
    small and the ``k`` members are identifiable from a 100-day window.
    """
    if not 1 <= k <= n_assets:
        raise ValueError(f"k must lie in [1, {n_assets}]")
    rng = make_rng(seed)
    levels = rng.uniform(20.0, 200.0, size=n_assets)
    prices = levels * np.exp(rng.normal(0.0, vol, size=(T, n_assets)))
    weights = rng.uniform(0.5, 1.5, size=k)
    index = prices[:, :k] @ weights
    return PricePanel(_dates(T), index, prices, [f"A{j:03d}" for j in range(n_assets)])


def synthetic_factor_panel(n_assets=100, T=240, n_factors=3, idio_vol=0.015,
                           noise_sd=0.0, seed=0):
    """Factor-model constituents with the index their equal-weight price sum.

    Asset returns load on a few common factors plus idiosyncratic noise,
    so a larger subset of assets tracks the full-universe index better.
    """
    rng = make_rng(seed)
    factors = rng.normal(0.0, 0.01, size=(T - 1, n_factors))
    loadings = rng.uniform(0.5, 1.5, size=(n_factors, n_assets)) / n_factors
    returns = factors @ loadings + rng.normal(0.0, idio_vol, size=(T - 1, n_assets))
    prices = _random_walk_prices(rng, T, n_assets, returns=returns,
                                 start=rng.uniform(20.0, 200.0, size=n_assets))
    index = prices.mean(axis=1)
    if noise_sd:
        index = index + rng.normal(0.0, noise_sd, size=T)
    return PricePanel(_dates(T), index, prices, [f"A{j:03d}" for j in range(n_assets)])
