import csv
import json
import math
import warnings

import numpy as np
import pytest

from slsgle.exceptions import DegenerateRssError, UnreachableSizeError
from slsgle.graph import GlassoConfig, glasso_fit, laplacian_from_precision
from slsgle.numeric import make_rng, sample_covariance, standardize_columns
from slsgle.selection import (
    SelectionReport,
    TuningGrid,
    _best_index,
    bic_score,
    default_lambda1_grid,
    grid_search,
    select_with_graph,
    target_size_by_bic,
    target_support_size,
)
from slsgle.simulation import ScenarioSpec, generate_dataset
from slsgle.solver import (
    FitResult,
    PenaltySpec,
    RegressionProblem,
    SolverConfig,
    coordinate_descent_fit,
)
from slsgle.tracking import synthetic_factor_panel


def small_problem(seed=0, n=40, p=8):
    rng = make_rng(seed)
    X = rng.normal(size=(n, p))
    y = X[:, :3] @ [2.0, -1.5, 1.0] + rng.normal(size=n)
    return y, X


def fake_fit(beta, lam1=1.0, lam2=0.0):
    return FitResult(np.asarray(beta, dtype=float), lam1, lam2, 0.0, 1, True, 0.0)


def test_bic_null_model():
    y, X = small_problem()
    prob = RegressionProblem(y, X, np.zeros((8, 8)))
    bic, df, rss = bic_score(prob, fake_fit(np.zeros(8)))
    assert df == 0
    assert rss == pytest.approx(y @ y)
    assert bic == pytest.approx(40 * math.log(y @ y / 40))


def test_bic_hand_computation_for_ols():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0], [0.5, 0.5], [-1.0, 2.0]])
    y = np.array([1.0, 2.0, 2.5, 0.0, 1.5, 3.5])
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    rss = float(np.sum((y - X @ beta) ** 2))
    prob = RegressionProblem(y, X, np.zeros((2, 2)))
    fit = coordinate_descent_fit(prob, PenaltySpec("l1", 0.0),
                                 SolverConfig(tol=1e-13, max_passes=100_000))
    bic, df, got = bic_score(prob, fit)
    assert df == 2
    assert got == pytest.approx(rss, rel=1e-9)
    assert bic == pytest.approx(6 * math.log(rss / 6) + 2 * math.log(6), rel=1e-9)


def test_bic_increases_with_df_at_equal_rss():
    y, X = small_problem()
    prob = RegressionProblem(y, X, np.zeros((8, 8)))
    b3 = np.array([1.0, 1.0, 1.0, 0, 0, 0, 0, 0])
    b5 = np.array([1.0, 1.0, 1.0, 1e-300, 1e-300, 0, 0, 0])
    s3, s5 = bic_score(prob, fake_fit(b3)), bic_score(prob, fake_fit(b5))
    assert s3[2] == s5[2]
    assert s3[0] < s5[0]


def test_bic_degenerate_rss():
    X = np.eye(3)
    y = np.array([1.0, 2.0, 3.0])
    with pytest.raises(DegenerateRssError):
        bic_score(RegressionProblem(y, X, np.zeros((3, 3))), fake_fit(y))


def test_tie_rule_prefers_sparser():
    recs = [{"bic": 1.0, "lambda1": 0.5, "lambda2": 1.0},
            {"bic": 1.0, "lambda1": 2.0, "lambda2": 0.1},
            {"bic": 1.0, "lambda1": 2.0, "lambda2": 5.0},
            {"bic": 3.0, "lambda1": 9.0, "lambda2": 9.0}]
    assert _best_index(recs) == 2


def test_grid_of_one_cell():
    y, X = small_problem(1)
    rep = grid_search(y, X, TuningGrid([0.1], [5.0], [0.5]))
    assert len(rep.bic_table) == 1
    r = rep.bic_table[0]
    assert rep.best == (r["lambda0"], r["lambda1"], r["lambda2"]) == (0.1, 5.0, 0.5)


def test_grid_above_null_threshold_selects_null_model():
    y, X = small_problem(2)
    Xs = standardize_columns(X)
    top = np.max(np.abs(Xs.T @ (y - y.mean())))
    rep = grid_search(y, X, TuningGrid([0.1], [top, 2 * top], [0.1, 1.0]))
    assert np.all(rep.fit.beta == 0)
    coef, intercept = rep.coef()
    assert np.all(coef == 0) and intercept == pytest.approx(y.mean())


def test_grid_search_is_exhaustive():
    y, X = small_problem(3)
    grid = TuningGrid([0.05, 0.2], None, [0.1, 1.0, 5.0])
    rep = grid_search(y, X, grid)
    assert len(rep.bic_table) == 2 * 30 * 3
    bics = np.array([r["bic"] for r in rep.bic_table])
    best = [r for r in rep.bic_table if r["bic"] == bics.min()]
    assert (rep.best[1], rep.best[2]) == max((r["lambda1"], r["lambda2"]) for r in best)


def test_report_coef_maps_back_to_raw_scale():
    y, X = small_problem(4)
    X = X * [1, 10, 0.1, 3, 1, 1, 5, 2] + 4.0
    rep = grid_search(y, X, TuningGrid([0.1], None, [0.5]))
    coef, intercept = rep.coef()
    Xs = (X - rep.x_mean) / rep.x_scale
    np.testing.assert_allclose(X @ coef + intercept, Xs @ rep.fit.beta + rep.y_mean, atol=1e-10)


def test_report_serialization(tmp_path):
    y, X = small_problem(5)
    rep = grid_search(y, X, TuningGrid([0.1], [1.0, 4.0], [0.5]))
    data = json.loads(rep.to_json())
    assert set(data["best"]) == {"lambda0", "lambda1", "lambda2"}
    assert len(data["bic_table"]) == 2
    path = tmp_path / "bic.csv"
    rep.write_bic_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["lambda0", "lambda1", "lambda2", "df", "rss", "bic"]
    assert len(rows) == 3
    assert isinstance(rep, SelectionReport)


def test_tuning_grid_validation():
    with pytest.raises(ValueError):
        TuningGrid([0.1, -1.0]).resolve(np.eye(3), np.ones(3))
    with pytest.raises(ValueError):
        TuningGrid(None, None, []).resolve(np.eye(3), np.ones(3))


def test_default_lambda1_grid():
    y, X = small_problem(6)
    grid = default_lambda1_grid(X, y)
    top = np.max(np.abs(X.T @ y))
    assert len(grid) == 30
    assert grid.max() == pytest.approx(top) and grid.min() == pytest.approx(0.01 * top)


def test_duplicate_column_never_lowers_best_bic():
    for seed in range(5):
        y, X = small_problem(seed + 10)
        base = select_with_graph(y, X, np.zeros((8, 8)), lambda2_grid=[0.0])
        Xd = np.column_stack([X, X[:, 5]])
        dup = select_with_graph(y, Xd, np.zeros((9, 9)), lambda1_grid=[
            r["lambda1"] for r in base.bic_table], lambda2_grid=[0.0])
        best = min(r["bic"] for r in base.bic_table)
        assert min(r["bic"] for r in dup.bic_table) >= best - 1e-9


def test_ex3_bic_support_covers_most_true_coefficients():
    hits = 0
    for rep in range(20):
        y, X, beta = generate_dataset(ScenarioSpec("EX3", n=100, p=60, seed=1000 + rep))
        coef, _ = grid_search(y, X).coef()
        hits += np.sum((coef != 0) & (beta != 0)) >= 8
    assert hits >= 16


def test_target_size_full_support():
    y, X = small_problem(7, n=60, p=10)
    Xs = standardize_columns(X)
    fit = target_support_size(y - y.mean(), Xs, np.zeros((10, 10)), 0.0, 10)
    assert len(fit.active_set) == 10


def test_target_size_unreachable():
    # orthogonal predictors and a response in one column's direction:
    # the others never correlate with the residual
    rng = make_rng(8)
    Q, _ = np.linalg.qr(rng.normal(size=(12, 4)))
    y = 3.0 * Q[:, 0]
    with pytest.raises(UnreachableSizeError):
        target_support_size(y, Q, np.zeros((4, 4)), 0.0, 4)
    assert target_support_size(y, Q, np.zeros((4, 4)), 0.0, 3).active_set == [0]
    with pytest.raises(ValueError):
        target_support_size(y, Q, np.zeros((4, 4)), 0.0, 0)


def _panel_window(seed=3):
    panel = synthetic_factor_panel(n_assets=100, T=100, seed=seed)
    Xs = standardize_columns(panel.asset_prices)
    y = panel.index_prices - panel.index_prices.mean()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        G = laplacian_from_precision(glasso_fit(sample_covariance(Xs), GlassoConfig(0.1)).theta)
    return y, Xs, G


def test_target_size_band_and_monotone_lambda():
    y, Xs, G = _panel_window()
    f40 = target_support_size(y, Xs, G, 0.1, 40)
    f20 = target_support_size(y, Xs, G, 0.1, 20)
    assert 38 <= len(f40.active_set) <= 40
    assert 18 <= len(f20.active_set) <= 20
    assert f20.lambda1 >= f40.lambda1


def test_target_size_by_bic_table():
    y, Xs, G = _panel_window(4)
    fit, table = target_size_by_bic(y, Xs, G, [0.01, 1.0], 20)
    assert [row[0] for row in table] == [0.01, 1.0]
    assert min(row[3] for row in table) == pytest.approx(
        bic_score(RegressionProblem(y, Xs, G), fit)[0])
