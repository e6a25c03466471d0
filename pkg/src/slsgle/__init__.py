"""
Sparse regression with a graph-Laplacian penalty built from a graphical
lasso estimate of the predictor precision matrix.

The two-stage estimator first fits ``Theta`` by the graphical lasso, forms
the Laplacian ``Gamma = D - Theta`` and then solves

    0.5 * ||y - X b||^2 + lambda1 * ||b||_1 + 0.5 * lambda2 * b' Gamma b

by coordinate descent. Tuning is by BIC. Simulation and index-tracking
drivers sit on top.
"""

from .exceptions import (
    ConfigError,
    ConstantColumnError,
    ConvergenceWarning,
    DegenerateRssError,
    DimensionMismatchError,
    DivergentWeightError,
    InactiveCoefficientError,
    InvalidAlphaError,
    InvalidSpecError,
    NonPositivePriceError,
    NotPsdError,
    ParseError,
    SlsGleError,
    TooShortError,
    UnreachableSizeError,
    UnsortedDatesError,
)
from .graph import (
    AdjacencyMatrix,
    GlassoConfig,
    LaplacianMatrix,
    PrecisionEstimate,
    adjacency_from_correlation,
    fisher_threshold,
    glasso_fit,
    laplacian_build,
    laplacian_from_adjacency,
    laplacian_from_precision,
    laplacian_quadratic_form,
)
from .numeric import (
    check_symmetric_psd,
    chol_or_eigh_factor,
    make_rng,
    mvn_sample,
    psd_tolerance,
    sample_covariance,
    soft_threshold,
    standardize_columns,
)
from .selection import (
    SelectionReport,
    TuningGrid,
    bic_score,
    grid_search,
    select_with_graph,
    target_size_by_bic,
    target_support_size,
)
from .simulation import (
    ReplicationResult,
    ScenarioSpec,
    StudyConfig,
    compute_metrics,
    generate_dataset,
    run_study,
    scaling_probe,
    scenario_covariance,
    summarize,
)
from .solver import (
    FitResult,
    PenaltySpec,
    RegressionProblem,
    SolverConfig,
    augmented_lasso_fit,
    coordinate_descent_fit,
    grouping_gap,
    kkt_check,
    objective_value,
)
from .tracking import (
    BacktestReport,
    PricePanel,
    WindowConfig,
    annual_tracking_error,
    load_prices,
    run_backtest,
    simple_returns,
    synthetic_exact_panel,
    synthetic_factor_panel,
)

__version__ = "0.1.0"
