"""
A small Monte Carlo comparison
==============================

Compare the graph-based estimator with correlation-graph variants, the
elastic net and the lasso on a scaled-down version of the EX3 design.
"""

from slsgle import ScenarioSpec, run_study, summarize

methods = ["SLS-GLE", "SLS-N4", "ElasticNet", "Lasso"]
results = run_study(ScenarioSpec("EX3", p=30, q=5), [50, 100], methods, replications=4,
                    seed=2024, threads=2)

# %%
# Mean l2 estimation error, out-of-sample MSE and exact-support rate per
# method and sample size.
print(f"{'method':<11}{'n':>5}{'l2':>9}{'se':>8}{'mse':>9}{'support':>9}")
for row in summarize(results):
    print(f"{row.method:<11}{row.n:>5}{row.l2_mean:>9.3f}{row.l2_se:>8.3f}"
          f"{row.mse_mean:>9.3f}{row.support_rate:>9.2f}")
