"""
Tuning all three penalties by BIC
=================================

Search the default grid of graph, sparsity and smoothness penalties and
inspect the chosen model.
"""

import numpy as np

from slsgle import ScenarioSpec, TuningGrid, generate_dataset, grid_search

spec = ScenarioSpec("EX3", n=120, p=30, q=5, seed=8)
y, X, beta = generate_dataset(spec)

# %%
# A short lambda0 grid keeps the demo quick; ``TuningGrid()`` alone uses ten
# data-driven values.
report = grid_search(y, X, TuningGrid(lambda0_grid=[0.05, 0.1, 0.3]))
lam0, lam1, lam2 = report.best
print(f"best lambda0={lam0:.3f} lambda1={lam1:.3f} lambda2={lam2}")

coef, intercept = report.coef()
print("selected:", np.flatnonzero(coef).tolist())
print("true:    ", np.flatnonzero(beta).tolist())
print(f"l2 error {np.linalg.norm(coef - beta):.3f}, intercept {intercept:.3f}")

# %%
# The five lowest BIC values across the grid.
for r in sorted(report.bic_table, key=lambda r: r["bic"])[:5]:
    print({k: v if v is None else round(float(v), 4) for k, v in r.items()})
