"""Choosing the inverse-Gamma prior on the process variance."""
import numpy as np

from heibo import Dataset, HyperConfig, KernelSpec, TrendModel, estimate_prior, fit, hierarchical_posterior
from heibo.design import maximin_lhd
from heibo.hyper import log_marginal, profile_b

rng = np.random.default_rng(7)
X = maximin_lhd(20, 2, seed=7)
y = np.sin(5 * X[:, 0]) * np.cos(3 * X[:, 1]) + 0.5 * X[:, 1]
model = fit(Dataset(X, y), KernelSpec("matern52", (0.3, 0.3)), TrendModel(0, 2))
stats = model.stats()

# For fixed a the marginal likelihood peaks at b*(a), and the profile rises with a.
for a in (0.5, 2.0, 10.0, 50.0):
    b = profile_b(a, stats.w, stats.n, stats.q)
    print(f"a={a:5.1f}  b*={b:.4f}  log m={log_marginal(stats, a, b):.4f}")

# The three schemes.
for scheme in ("weak", "mmap", "dsd"):
    prior = estimate_prior(HyperConfig(scheme), model)
    print(scheme, prior)

# Heavier tails than the plug-in Gaussian: a Student-t predictive.
prior = estimate_prior(HyperConfig("dsd"), model)
print(hierarchical_posterior(model, prior, [0.5, 0.5]))
mean, s2 = model.predict(np.array([[0.5, 0.5]]))
print("plug-in sd", np.sqrt(model.sigma2_hat * s2[0]))
