"""Universal kriging on a one-dimensional test curve."""
import numpy as np

from heibo import Dataset, KernelSpec, TrendModel, fit, select_order_bic
from heibo.design import maximin_lhd
from heibo.driver import estimate_lengthscales


def f(x):
    return np.sin(6 * x[:, 0]) + 2 * x[:, 0] ** 2


X = maximin_lhd(8, 1, seed=3)
data = Dataset(X, f(X))

trend = TrendModel(1, 1)
theta, _ = estimate_lengthscales(data, "matern52", trend, rng=np.random.default_rng(0))
model = fit(data, KernelSpec("matern52", tuple(theta)), trend)
print("theta", theta, "beta", model.beta_hat, "sigma2", model.sigma2_hat)

# The predictor reproduces the data and has (almost) no variance there.
mean, s2 = model.predict(X)
print(np.max(np.abs(mean - data.y)), np.sqrt(s2.max()))

# Away from the data the standard deviation grows.
grid = np.linspace(0, 1, 11)[:, None]
mean, s2 = model.predict(grid)
for x, m, s, t in zip(grid[:, 0], mean, np.sqrt(s2), f(grid)):
    print(f"{x:4.1f}  {m: .4f} +- {s:.4f}   truth {t: .4f}")

# BIC picks among constant, linear and quadratic trends.
print("BIC order", select_order_bic(data, KernelSpec("matern52", tuple(theta))))
