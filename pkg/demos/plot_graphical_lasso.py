"""
Estimating a sparse precision matrix
====================================

Draw from a Gaussian whose precision matrix is tridiagonal, fit the
graphical lasso over a few penalty levels and compare the recovered edges
with the truth.
"""

import numpy as np

from slsgle import GlassoConfig, ScenarioSpec, generate_dataset, glasso_fit, sample_covariance
from slsgle import scenario_covariance, standardize_columns

# %%
# The EX3 design uses blocks of a tridiagonal precision matrix, so each
# predictor is conditionally linked to its two neighbours only.
spec = ScenarioSpec("EX3", n=200, p=20, seed=1)
_, theta_true = scenario_covariance(spec)
_, X, _ = generate_dataset(spec)
S = sample_covariance(standardize_columns(X))

iu = np.triu_indices(spec.p, k=1)
true_edges = {(int(i), int(j)) for i, j in zip(*iu) if theta_true[i, j] != 0}
print(f"{len(true_edges)} true edges among {len(iu[0])} pairs")

# %%
# Larger penalties give sparser graphs. Recall is the share of true edges
# found; the false-positive rate is measured over the true non-edges.
for lam0 in (0.02, 0.1, 0.3):
    pe = glasso_fit(S, GlassoConfig(lam0))
    found = pe.edge_set
    recall = len(found & true_edges) / len(true_edges)
    fpr = len(found - true_edges) / (len(iu[0]) - len(true_edges))
    print(f"lambda0={lam0:<5} edges={len(found):3d} recall={recall:.2f} fpr={fpr:.3f} "
          f"sweeps={pe.sweeps} kkt={pe.kkt_residual:.1e}")

# %%
# Past the largest off-diagonal covariance every edge is dropped and the
# estimate is the inverse of the diagonal.
big = glasso_fit(S, GlassoConfig(np.abs(S - np.diag(np.diag(S))).max()))
print("diagonal limit:", np.allclose(big.theta, np.diag(1 / np.diag(S))))
