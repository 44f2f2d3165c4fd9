"""Correlation families and space-filling initial designs."""
import numpy as np

from heibo.design import maximin_lhd, min_distance
from heibo.kernel import KernelSpec, corr_matrix, correlation_of_distance

# Correlation as a function of scaled distance for each family.
r = np.linspace(0.0, 3.0, 7)
for family in ("matern12", "matern32", "matern52", "sqexp"):
    print(f"{family:9s}", np.round(correlation_of_distance(family, r), 4))

# A maximin Latin hypercube: every column hits each cell midpoint once.
X = maximin_lhd(12, 2, seed=0)
print(np.sort(X, axis=0)[:, 0] * 12 + 0.5)

# More restarts never make the smallest pairwise distance worse.
for restarts in (1, 10, 50):
    print(restarts, round(min_distance(maximin_lhd(20, 3, seed=1, restarts=restarts)), 4))

# Longer length-scales give stronger correlation and a worse-conditioned matrix.
for theta in (0.05, 0.2, 1.0):
    K = corr_matrix(KernelSpec("matern52", (theta, theta)), X)
    print(theta, f"{np.linalg.cond(K):.3e}")
