"""
Command-line entry point.

Every subcommand reads one JSON config file (``"version": 1``) and writes
its outputs into ``--output-dir``::

    slsgle simulate --config study.json --output-dir out/
    slsgle fit      --config fit.json   --output-dir out/
    slsgle tune     --config tune.json  --output-dir out/
    slsgle backtest --config bt.json    --output-dir out/

Exit codes: 0 success, 1 fatal error, 2 partial failure (some cells or
windows failed, outputs still written).
"""

import argparse
import csv
import json
import os
import sys
import warnings
from dataclasses import replace

import jsonschema
import numpy as np

from .exceptions import ConfigError, SlsGleError
from .graph import (
    GlassoConfig,
    adjacency_from_correlation,
    fisher_threshold,
    glasso_fit,
    laplacian_from_adjacency,
    laplacian_from_precision,
    read_matrix_csv,
)
from .numeric import sample_covariance, standardize_columns
from .selection import DEFAULT_LAMBDA2_GRID, TuningGrid, grid_search
from .simulation import (
    METHODS,
    SCENARIOS,
    ScenarioSpec,
    StudyConfig,
    results_csv,
    run_study,
    summarize,
    summary_csv,
)
from .solver import PenaltySpec, RegressionProblem, SolverConfig, coordinate_descent_fit
from .tracking import (
    WindowConfig,
    load_prices,
    run_backtest,
    synthetic_exact_panel,
    synthetic_factor_panel,
)

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
CONFIG_VERSION = 1

_POS_NUM = {"type": "number", "exclusiveMinimum": 0}
_NONNEG_NUM = {"type": "number", "minimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_GRID = {"type": "array", "items": _NONNEG_NUM, "minItems": 1}
_POS_GRID = {"type": "array", "items": _POS_NUM, "minItems": 1}


def _schema(props, required=()):
    return {
        "type": "object",
        "properties": {"version": {"const": CONFIG_VERSION}, **props},
        "required": ["version", *required],
        "additionalProperties": False,
    }


_GRAPH = {
    "type": "object",
    "properties": {
        "type": {"enum": ["glasso", "adjacency", "identity", "none", "laplacian_csv"]},
        "lambda0": _POS_NUM,
        "measure": {"enum": ["N1", "N2", "N3", "N4", "N5"]},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "k": _POS_NUM,
        "path": {"type": "string"},
    },
    "required": ["type"],
    "additionalProperties": False,
}

SCHEMAS = {
    "simulate": _schema({
        "scenario": {
            "type": "object",
            "properties": {
                "id": {"enum": list(SCENARIOS)},
                "p": _POS_INT,
                "q": {"type": "integer", "minimum": 0},
                "beta_value": {"type": "number"},
                "noise_sd": _NONNEG_NUM,
                "n_test": _POS_INT,
                "ex4_density": {"type": "number", "minimum": 0, "maximum": 1},
                "ex4_weight": {"type": "number"},
                "structure_seed": {"type": "integer", "minimum": 0},
            },
            "required": ["id"],
            "additionalProperties": False,
        },
        "n_list": {"type": "array", "items": _POS_INT, "minItems": 1},
        "methods": {"type": "array", "items": {"enum": list(METHODS)}, "minItems": 1},
        "replications": _POS_INT,
        "seed": {"type": "integer", "minimum": 0},
        "lambda0_grid": _POS_GRID,
        "lambda1_num": _POS_INT,
        "lambda2_grid": _GRID,
        "fisher_alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "adjacency_k": _POS_NUM,
        "mse": {"enum": ["prediction", "estimation"]},
        "tol": _POS_NUM,
    }, ["scenario", "n_list", "methods", "replications"]),
    "fit": _schema({
        "data": {"type": "string"},
        "y_column": {"type": "string"},
        "lambda1": _NONNEG_NUM,
        "lambda2": _NONNEG_NUM,
        "penalty": {"enum": ["l1", "mcp"]},
        "mcp_gamma": {"type": "number", "exclusiveMinimum": 1},
        "graph": _GRAPH,
        "standardize": {"type": "boolean"},
        "tol": _POS_NUM,
        "max_passes": _POS_INT,
    }, ["data", "lambda1"]),
    "tune": _schema({
        "data": {"type": "string"},
        "y_column": {"type": "string"},
        "lambda0_grid": _POS_GRID,
        "lambda1_grid": _GRID,
        "lambda2_grid": _GRID,
        "standardize": {"type": "boolean"},
        "tol": _POS_NUM,
        "max_passes": _POS_INT,
    }, ["data"]),
    "backtest": _schema({
        "prices": {"type": "string"},
        "synthetic": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["exact", "factor"]},
                "n_assets": _POS_INT,
                "T": _POS_INT,
                "k": _POS_INT,
                "n_factors": _POS_INT,
                "noise_sd": _NONNEG_NUM,
                "seed": {"type": "integer", "minimum": 0},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "load": {
            "type": "object",
            "properties": {
                "sort_on_load": {"type": "boolean"},
                "missing": {"enum": ["reject", "ffill", "drop"]},
                "nonpositive": {"enum": ["reject", "drop"]},
            },
            "additionalProperties": False,
        },
        "subset_sizes": {"type": "array", "items": _POS_INT, "minItems": 1},
        "lambda2_grid": _GRID,
        "lambda0": _POS_NUM,
        "window": {
            "type": "object",
            "properties": {"train": _POS_INT, "test": _POS_INT, "step": _POS_INT},
            "additionalProperties": False,
        },
        "mode": {"enum": ["price", "returns"]},
        "large_error_threshold": _POS_NUM,
    }, ["subset_sizes"]),
}
# exactly one price source
SCHEMAS["backtest"]["oneOf"] = [{"required": ["prices"]}, {"required": ["synthetic"]}]


def _schema_path(err):
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def load_config(path, command):
    """Read and validate a config file; raises :class:`ConfigError`."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError("$", f"cannot read config {path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise ConfigError("$", f"invalid JSON at line {err.lineno}: {err.msg}") from None
    err = jsonschema.exceptions.best_match(
        jsonschema.Draft202012Validator(SCHEMAS[command]).iter_errors(cfg))
    if err is not None:
        raise ConfigError(_schema_path(err), err.message)
    return cfg


def _resolve(base, path):
    return path if os.path.isabs(path) else os.path.join(base, path)


def _read_data(path, y_column):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError("$.data", f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if y_column not in header:
        raise ConfigError("$.y_column", f"column {y_column!r} not in {path}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as err:
        raise ConfigError("$.data", f"non-numeric value in {path}: {err}") from None
    j = header.index(y_column)
    names = [h for i, h in enumerate(header) if i != j]
    return data[:, j], np.delete(data, j, axis=1), names


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_simulate(cfg, args):
    sc = dict(cfg["scenario"])
    spec = ScenarioSpec(**sc)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    study = StudyConfig(
        lambda0_grid=cfg.get("lambda0_grid"),
        lambda1_num=cfg.get("lambda1_num", 30),
        lambda2_grid=tuple(cfg.get("lambda2_grid", DEFAULT_LAMBDA2_GRID)),
        fisher_alpha=cfg.get("fisher_alpha", 0.05),
        adjacency_k=cfg.get("adjacency_k", 1.0),
        mse=cfg.get("mse", "prediction"),
        tol=cfg.get("tol", 1e-4),
    )
    results = run_study(spec, cfg["n_list"], cfg["methods"], cfg["replications"], seed,
                        study, threads=args.threads)
    _write(os.path.join(args.output_dir, "results.csv"), results_csv(results))
    _write(os.path.join(args.output_dir, "summary.csv"), summary_csv(summarize(results)))
    failed = [r for r in results if r.error]
    for r in failed:
        print(f"cell failed: {r.method} n={r.n} rep={r.replicate}: {r.error}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def _graph_laplacian(graph, X, base):
    n, p = X.shape
    kind = graph.get("type", "none")
    if kind == "none":
        return np.zeros((p, p)), None
    if kind == "identity":
        return np.eye(p), None
    if kind == "laplacian_csv":
        if "path" not in graph:
            raise ConfigError("$.graph.path", "laplacian_csv needs a path")
        return read_matrix_csv(_resolve(base, graph["path"])), None
    if kind == "glasso":
        Xs = standardize_columns(X)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pe = glasso_fit(sample_covariance(Xs), GlassoConfig(graph.get("lambda0", 0.1)))
        return laplacian_from_precision(pe.theta), pe
    measure = graph.get("measure", "N2")
    R = np.corrcoef(X, rowvar=False)
    r = fisher_threshold(n, graph.get("alpha", 0.05), p) if measure in ("N1", "N2") else None
    adj = adjacency_from_correlation(R, measure, r=r, k=graph.get("k", 1.0))
    return laplacian_from_adjacency(adj), None


def cmd_fit(cfg, args):
    base = os.path.dirname(os.path.abspath(args.config))
    y, X, names = _read_data(_resolve(base, cfg["data"]), cfg.get("y_column", "y"))
    gamma, _ = _graph_laplacian(cfg.get("graph", {"type": "none"}), X, base)
    standardize = cfg.get("standardize", False)
    if standardize:
        Xw, mean, scale = standardize_columns(X, return_params=True)
        yw = y - y.mean()
    else:
        Xw, yw = X, y
    prob = RegressionProblem(yw, Xw, gamma)
    pen = PenaltySpec(cfg.get("penalty", "l1"), cfg["lambda1"], cfg.get("mcp_gamma", 3.0))
    fit = coordinate_descent_fit(prob, pen, SolverConfig(cfg.get("lambda2", 0.0),
                                                         tol=cfg.get("tol", 1e-4),
                                                         max_passes=cfg.get("max_passes", 1000)))
    out = fit.to_dict()
    out["columns"] = names
    if standardize:
        coef = fit.beta / scale
        out["coef"] = [float(c) for c in coef]
        out["intercept"] = float(y.mean() - mean @ coef)
    _write(os.path.join(args.output_dir, "fit.json"), _dump(out))
    return EXIT_OK


def cmd_tune(cfg, args):
    base = os.path.dirname(os.path.abspath(args.config))
    y, X, names = _read_data(_resolve(base, cfg["data"]), cfg.get("y_column", "y"))
    grid = TuningGrid(cfg.get("lambda0_grid"), cfg.get("lambda1_grid"),
                      tuple(cfg.get("lambda2_grid", DEFAULT_LAMBDA2_GRID)))
    report = grid_search(y, X, grid, standardize=cfg.get("standardize", True),
                         tol=cfg.get("tol", 1e-4), max_passes=cfg.get("max_passes", 1000),
                         threads=args.threads)
    out = report.to_dict()
    coef, intercept = report.coef()
    out["columns"] = names
    out["coef"] = [float(c) for c in coef]
    out["intercept"] = float(intercept)
    _write(os.path.join(args.output_dir, "report.json"), _dump(out))
    report.write_bic_csv(os.path.join(args.output_dir, "bic_table.csv"))
    return EXIT_OK


def cmd_backtest(cfg, args):
    base = os.path.dirname(os.path.abspath(args.config))
    if "prices" in cfg:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            panel = load_prices(_resolve(base, cfg["prices"]), **cfg.get("load", {}))
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    else:
        syn = dict(cfg["synthetic"])
        kind = syn.pop("kind")
        if args.seed is not None:
            syn["seed"] = args.seed
        try:
            panel = (synthetic_exact_panel if kind == "exact" else synthetic_factor_panel)(**syn)
        except TypeError as err:
            raise ConfigError("$.synthetic", str(err)) from None
    window = WindowConfig(**cfg.get("window", {}))
    report = run_backtest(panel, cfg["subset_sizes"],
                          lambda2_grid=cfg.get("lambda2_grid", DEFAULT_LAMBDA2_GRID),
                          lambda0=cfg.get("lambda0", 0.1), window_cfg=window,
                          mode=cfg.get("mode", "price"),
                          large_error_threshold=cfg.get("large_error_threshold", 50.0),
                          threads=args.threads)
    _write(os.path.join(args.output_dir, "report.json"), _dump(report.to_dict()))
    _write(os.path.join(args.output_dir, "windows.csv"), report.window_csv())
    for w in report.failures:
        print(f"window failed: {w.window_start} m={w.m}: {w.error}", file=sys.stderr)
    return EXIT_PARTIAL if report.failures else EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "run a replicated simulation study"),
    "fit": (cmd_fit, "fit one penalized regression at fixed tuning values"),
    "tune": (cmd_tune, "select tuning values by BIC over a grid"),
    "backtest": (cmd_backtest, "rolling-window index tracking backtest"),
}


class _Parser(argparse.ArgumentParser):
    # usage errors are fatal (exit 1); exit 2 is reserved for partial results
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return v


def build_parser():
    parser = _Parser(prog="slsgle", description="Graph-regularized sparse regression tools.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, help="JSON config file (version 1)")
        p.add_argument("--output-dir", required=True, help="directory for output files")
        p.add_argument("--seed", type=_nonneg_int, default=None,
                       help="master seed; overrides the config's seed")
        p.add_argument("--threads", type=_positive_int, default=1,
                       help="worker threads (default 1)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config, args.command)
        os.makedirs(args.output_dir, exist_ok=True)
        if not os.access(args.output_dir, os.W_OK):
            raise ConfigError("--output-dir", f"{args.output_dir} is not writable")
        return func(cfg, args)
    except ConfigError as err:
        print(f"config error at {err}", file=sys.stderr)
        return EXIT_FATAL
    except (SlsGleError, ValueError, OSError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
