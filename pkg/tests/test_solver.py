import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.linear_model import ElasticNet, Lasso

from slsgle.exceptions import DimensionMismatchError, InactiveCoefficientError, NotPsdError
from slsgle.graph import laplacian_from_precision
from slsgle.numeric import make_rng, standardize_columns
from slsgle.selection import default_lambda1_grid
from slsgle.simulation import fig1_spec, generate_dataset, scenario_covariance
from slsgle.solver import (
    FitResult,
    PenaltySpec,
    RegressionProblem,
    SolverConfig,
    augmented_lasso_fit,
    coordinate_descent_fit,
    grouping_gap,
    kkt_check,
    lasso_fit,
    objective_value,
    zero_inclusion_gap,
)

TIGHT = SolverConfig(tol=1e-12, max_passes=100_000)


def instance(seed, n=50, p=20, psd_gamma=True):
    rng = make_rng(seed)
    X = standardize_columns(rng.normal(size=(n, p)))
    beta = np.zeros(p)
    beta[: min(5, p)] = rng.choice([-2.0, 2.0], size=min(5, p))
    y = X @ beta + rng.normal(size=n)
    A = rng.normal(size=(p, p)) * (rng.random((p, p)) < 0.3)
    G = A @ A.T / p if psd_gamma else np.zeros((p, p))
    return RegressionProblem(y - y.mean(), X, G)


def sk_lasso(prob, lam1):
    model = Lasso(alpha=lam1 / prob.n, fit_intercept=False, tol=1e-14, max_iter=1_000_000)
    model.fit(prob.X, prob.y)
    return model.coef_


def test_objective_examples():
    prob = instance(0)
    pen = PenaltySpec("l1", 3.0)
    assert objective_value(prob, np.zeros(prob.p), pen, 2.0) == pytest.approx(
        0.5 * prob.y @ prob.y)
    ols = np.linalg.lstsq(prob.X, prob.y, rcond=None)[0]
    rss = np.sum((prob.y - prob.X @ ols) ** 2)
    assert objective_value(prob, ols, PenaltySpec("l1", 0.0), 0.0) == pytest.approx(0.5 * rss)
    flat = RegressionProblem(prob.y, prob.X, np.zeros((prob.p, prob.p)))
    b = make_rng(1).normal(size=prob.p)
    lasso_obj = 0.5 * np.sum((prob.y - prob.X @ b) ** 2) + 3.0 * np.abs(b).sum()
    assert objective_value(flat, b, pen, 7.0) == pytest.approx(lasso_obj)


def test_objective_dimension_check():
    prob = instance(0)
    with pytest.raises(DimensionMismatchError):
        objective_value(prob, np.zeros(3), PenaltySpec(), 0.0)
    with pytest.raises(DimensionMismatchError):
        RegressionProblem(prob.y[:-1], prob.X, prob.gamma)


def test_null_threshold_gives_zero():
    prob = instance(2)
    pen = PenaltySpec("l1", prob.max_lambda1())
    for lam2 in (0.0, 1.0, 50.0):
        fit = coordinate_descent_fit(prob, pen, SolverConfig(lam2, beta_init="zeros"))
        assert np.all(fit.beta == 0)


@pytest.mark.parametrize("seed", range(5))
def test_lambda2_zero_matches_sklearn_lasso(seed):
    prob = instance(seed)
    lam1 = 0.2 * prob.max_lambda1()
    pen = PenaltySpec("l1", lam1)
    fit = coordinate_descent_fit(prob, pen, TIGHT)
    ref = sk_lasso(prob, lam1)
    np.testing.assert_allclose(fit.beta, ref, atol=1e-6)
    assert fit.objective == pytest.approx(objective_value(prob, ref, pen, 0.0), rel=1e-6)


def test_identity_gamma_matches_naive_elastic_net():
    prob = instance(7)
    prob = RegressionProblem(prob.y, prob.X, np.eye(prob.p))
    lam1, lam2 = 12.0, 8.0
    alpha = (lam1 + lam2) / prob.n
    model = ElasticNet(alpha=alpha, l1_ratio=lam1 / (lam1 + lam2), fit_intercept=False,
                       tol=1e-14, max_iter=1_000_000).fit(prob.X, prob.y)
    pen = PenaltySpec("l1", lam1)
    fit = coordinate_descent_fit(prob, pen, SolverConfig(lam2, tol=1e-12, max_passes=100_000))
    ref_obj = objective_value(prob, model.coef_, pen, lam2)
    assert abs(fit.objective - ref_obj) <= 1e-6 * abs(ref_obj)


def test_edgeless_graph_reproduces_lasso():
    prob = instance(3)
    theta = np.diag(make_rng(3).uniform(0.5, 2.0, size=prob.p))
    G = laplacian_from_precision(theta)
    assert np.all(G == 0)
    lam1 = 0.1 * prob.max_lambda1()
    fit = coordinate_descent_fit(RegressionProblem(prob.y, prob.X, G), PenaltySpec("l1", lam1),
                                 SolverConfig(5.0, tol=1e-12, max_passes=100_000))
    np.testing.assert_allclose(fit.beta, sk_lasso(prob, lam1), atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), frac=st.floats(0.02, 0.9), lam2=st.floats(0.0, 20.0))
def test_descent_and_kkt(seed, frac, lam2):
    prob = instance(seed, n=30, p=12)
    pen = PenaltySpec("l1", frac * prob.max_lambda1())
    cfg = SolverConfig(lam2)
    fit = coordinate_descent_fit(prob, pen, cfg)
    trace = fit.objective_trace
    assert np.all(np.diff(trace) <= 1e-9 * np.maximum(1.0, np.abs(trace[1:])))
    assert fit.converged
    assert fit.kkt_residual <= 10 * cfg.tol
    assert kkt_check(prob, pen, lam2, fit.beta) == pytest.approx(fit.kkt_residual)


def test_objective_field_matches_recomputation():
    prob = instance(4)
    pen = PenaltySpec("l1", 5.0)
    fit = coordinate_descent_fit(prob, pen, SolverConfig(2.0))
    assert abs(fit.objective - objective_value(prob, fit.beta, pen, 2.0)) <= 1e-10 * fit.objective


def test_kkt_perturbation_and_null():
    prob = instance(5)
    pen = PenaltySpec("l1", 8.0)
    fit = coordinate_descent_fit(prob, pen, SolverConfig(1.0, tol=1e-10, max_passes=100_000))
    bumped = fit.beta.copy()
    bumped[0] += 0.1
    assert kkt_check(prob, pen, 1.0, bumped) > kkt_check(prob, pen, 1.0, fit.beta)
    big = PenaltySpec("l1", 10 * prob.max_lambda1())
    assert kkt_check(prob, big, 1.0, np.zeros(prob.p)) == 0.0


def test_zero_inclusion_condition():
    prob = instance(6)
    pen = PenaltySpec("l1", 0.3 * prob.max_lambda1())
    cfg = SolverConfig(3.0)
    fit = coordinate_descent_fit(prob, pen, cfg)
    gap = zero_inclusion_gap(prob, pen, 3.0, fit.beta)
    inactive = fit.beta == 0
    assert inactive.any()
    assert np.all(gap[inactive] <= 10 * cfg.tol)


def test_augmented_lambda2_zero_is_plain_lasso():
    prob = instance(8)
    lam1 = 0.15 * prob.max_lambda1()
    fit = augmented_lasso_fit(prob, PenaltySpec("l1", lam1), 0.0)
    np.testing.assert_allclose(fit.beta, lasso_fit(prob.X, prob.y, lam1)[0], atol=1e-12)


def test_augmented_zero_gamma_formula():
    prob = instance(9, psd_gamma=False)
    lam1, lam2 = 10.0, 3.0
    c = np.sqrt(1 + lam2)
    fit = augmented_lasso_fit(prob, PenaltySpec("l1", lam1), lam2)
    ref = lasso_fit(prob.X / c, prob.y, lam1 / c)[0] / c
    np.testing.assert_allclose(fit.beta, ref, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_augmented_equals_coordinate_descent(seed):
    prob = instance(seed + 20, n=40, p=15)
    pen = PenaltySpec("l1", 0.1 * prob.max_lambda1())
    a = augmented_lasso_fit(prob, pen, 2.5)
    b = coordinate_descent_fit(prob, pen, SolverConfig(2.5, tol=1e-12, max_passes=100_000))
    assert abs(a.objective - b.objective) <= 1e-6 * abs(b.objective)
    assert np.max(np.abs(a.beta - b.beta)) <= 1e-4


def test_augmented_rejects_indefinite_gamma():
    prob = instance(1)
    bad = RegressionProblem(prob.y, prob.X, -np.eye(prob.p))
    with pytest.raises(NotPsdError):
        augmented_lasso_fit(bad, PenaltySpec("l1", 1.0), 1.0)
    with pytest.raises(NotPsdError):
        coordinate_descent_fit(bad, PenaltySpec("l1", 1.0))


def test_fig1_mcp_path_recovers_support():
    # beta_2 = 1 sits between strongly coupled neighbours; the concave
    # penalty reaches the exact support on the default lambda1 grid
    spec = fig1_spec(n=50, seed=0)
    y, X, beta = generate_dataset(spec)
    Xs = standardize_columns(X)
    yc = y - y.mean()
    _, theta = scenario_covariance(spec)
    prob = RegressionProblem(yc, Xs, laplacian_from_precision(theta))
    hits = []
    for lam1 in default_lambda1_grid(Xs, yc):
        fit = coordinate_descent_fit(prob, PenaltySpec("mcp", lam1, 3.0), SolverConfig(0.5))
        hits.append(np.array_equal(fit.beta != 0, beta != 0))
    assert any(hits)


def test_mcp_descends_and_is_sparser_bias():
    prob = instance(10)
    lam1 = 0.2 * prob.max_lambda1()
    l1 = coordinate_descent_fit(prob, PenaltySpec("l1", lam1), SolverConfig(1.0))
    mcp = coordinate_descent_fit(prob, PenaltySpec("mcp", lam1, 3.0), SolverConfig(1.0))
    assert np.all(np.diff(mcp.objective_trace) <= 1e-9 * np.abs(mcp.objective_trace[1:]))
    assert mcp.converged
    # MCP leaves large coefficients unshrunk
    big = np.abs(l1.beta) > 1.0
    assert np.all(np.abs(mcp.beta[big]) >= np.abs(l1.beta[big]) - 1e-8)


def test_mcp_with_huge_gamma_approaches_l1():
    prob = instance(11)
    lam1 = 0.2 * prob.max_lambda1()
    l1 = coordinate_descent_fit(prob, PenaltySpec("l1", lam1), TIGHT)
    mcp = coordinate_descent_fit(prob, PenaltySpec("mcp", lam1, 1e9), TIGHT)
    np.testing.assert_allclose(mcp.beta, l1.beta, atol=1e-6)


def test_grouping_exchangeable_columns():
    rng = make_rng(12)
    x = rng.normal(size=(60, 3))
    X = standardize_columns(np.column_stack([x[:, 0], x[:, 0], x[:, 1], x[:, 2]]))
    y = X @ [1.0, 1.0, 0.5, 0.0] + 0.1 * rng.normal(size=60)
    theta = np.array([[2.0, 0.5, 0.2, 0.0],
                      [0.5, 2.0, 0.2, 0.0],
                      [0.2, 0.2, 2.0, 0.0],
                      [0.0, 0.0, 0.0, 2.0]])
    prob = RegressionProblem(y - y.mean(), X, laplacian_from_precision(theta))
    fit = coordinate_descent_fit(prob, PenaltySpec("l1", 1.0), SolverConfig(2.0, **{
        "tol": 1e-13, "max_passes": 100_000}))
    d = grouping_gap(prob, fit, 0, 1, theta, 2.0)
    assert d.form == "difference"
    assert d.lhs == pytest.approx(0.0, abs=1e-9)
    assert d.rhs == pytest.approx(0.0, abs=1e-9)


def _symmetric_pair_instance(sign, seed):
    rng = make_rng(seed)
    p = 6
    theta = np.eye(p) * 3.0
    theta[0, 1] = theta[1, 0] = 0.6 * sign
    for k in range(2, p):
        w = rng.uniform(0.1, 0.4)
        theta[0, k] = theta[k, 0] = w
        theta[1, k] = theta[k, 1] = sign * w
    X = standardize_columns(rng.normal(size=(80, p)))
    b = np.array([1.5, 1.5 * sign, 0.5, 0.0, -0.7, 0.0])
    y = X @ b + 0.3 * rng.normal(size=80)
    return RegressionProblem(y - y.mean(), X, laplacian_from_precision(theta)), theta


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_grouping_identity_exact_kkt(sign):
    prob, theta = _symmetric_pair_instance(sign, 13)
    fit = coordinate_descent_fit(prob, PenaltySpec("l1", 2.0),
                                 SolverConfig(4.0, tol=1e-13, max_passes=100_000))
    d = grouping_gap(prob, fit, 0, 1, theta, 4.0)
    assert d.form == ("difference" if sign > 0 else "sum")
    assert d.kkt_residual <= 1e-8
    if d.same_sign == (sign > 0):
        # rows of theta agree up to the pair's sign, so both sides coincide
        assert d.lhs == pytest.approx(d.rhs, rel=1e-6, abs=1e-8)


def test_grouping_requires_active_pair():
    prob = instance(14)
    fit = coordinate_descent_fit(prob, PenaltySpec("l1", prob.max_lambda1()),
                                 SolverConfig(beta_init="zeros"))
    with pytest.raises(InactiveCoefficientError):
        grouping_gap(prob, fit, 0, 1, np.eye(prob.p) + 0.1, 1.0)


def test_fit_result_json_keys():
    prob = instance(15)
    fit = coordinate_descent_fit(prob, PenaltySpec("l1", 5.0), SolverConfig(1.0))
    data = json.loads(fit.to_json())
    assert set(data) == {"lambda1", "lambda2", "beta", "active_set", "objective",
                         "kkt_residual", "converged"}
    assert data["active_set"] == fit.active_set
    assert isinstance(fit, FitResult)


def test_non_convergence_warns():
    prob = instance(16)
    with pytest.warns(Warning):
        fit = coordinate_descent_fit(prob, PenaltySpec("l1", 0.01),
                                     SolverConfig(1.0, tol=1e-14, max_passes=2))
    assert not fit.converged
    assert fit.passes_used == 2


def test_beta_init_options():
    prob = instance(17)
    pen = PenaltySpec("l1", 3.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = coordinate_descent_fit(prob, pen, SolverConfig(1.0, tol=1e-12, max_passes=100_000))
        b = coordinate_descent_fit(prob, pen, SolverConfig(1.0, tol=1e-12, max_passes=100_000,
                                                           beta_init="zeros"))
        c = coordinate_descent_fit(prob, pen, SolverConfig(1.0, tol=1e-12, max_passes=100_000,
                                                           beta_init=np.ones(prob.p)))
    np.testing.assert_allclose(a.beta, b.beta, atol=1e-8)
    np.testing.assert_allclose(a.beta, c.beta, atol=1e-8)
    with pytest.raises(DimensionMismatchError):
        coordinate_descent_fit(prob, pen, SolverConfig(beta_init=np.ones(3)))
