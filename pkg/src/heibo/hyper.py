"""Inverse-Gamma hyperparameters: marginal likelihood, profile scale, MMAP and DSD."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .gp import FitStats, GPFit, HierPrior

_LOG2PI = math.log(2.0 * math.pi)

# Bernoulli-number coefficients B_2k / (2k) of the digamma asymptotic series.
_PSI_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


class DegenerateFitError(ValueError):
    """The fitted residual sum of squares is zero (e.g. constant responses)."""


def digamma(x: float) -> float:
    """Digamma for ``x > 0`` by upward recurrence and the asymptotic series."""
    x = float(x)
    if not x > 0:
        raise ValueError("digamma implemented for positive arguments only")
    acc = 0.0
    while x < 6.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    p = inv2
    for c in _PSI_SERIES:
        series += c * p
        p *= inv2
    return acc + math.log(x) - 0.5 / x - series


@dataclass(frozen=True)
class HyperConfig:
    """Scheme for choosing ``(a, b)``: ``weak``, ``mmap`` or ``dsd``.

    ``iota`` is the rate of the Gamma hyperprior on ``a``.
    """

    scheme: str = "dsd"
    eps: float = 0.1
    zeta: float = 2.0
    iota: float = 2.0
    a_lo: float = 1e-3
    a_hi: float = 1e3

    def __post_init__(self):
        if self.scheme not in ("weak", "mmap", "dsd"):
            raise ValueError(f"unknown hyperparameter scheme {self.scheme!r}")
        if not (self.eps > 0 and self.zeta > 0 and self.iota > 0):
            raise ValueError("eps, zeta and iota must be positive")
        if not (0 < self.a_lo < self.a_hi):
            raise ValueError("need 0 < a_lo < a_hi")


@dataclass(frozen=True)
class MMAPResult:
    a: float
    b: float
    at_upper_bound: bool = False
    at_lower_bound: bool = False


def _check_stats(stats: FitStats):
    if stats.n <= stats.q:
        raise ValueError(f"need n > q, got n={stats.n}, q={stats.q}")


def log_marginal(stats: FitStats, a: float, b: float) -> float:
    """Log marginal density of the responses with ``beta`` and ``sigma^2`` integrated out.

    Includes the ``(2 pi)^{-(n-q)/2}`` normalizing constant, so the value is a
    proper log density in ``y``.
    """
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    _check_stats(stats)
    m = 0.5 * (stats.n - stats.q)
    return float(
        -0.5 * (stats.logdet_G + stats.logdet_K)
        - m * _LOG2PI
        + a * math.log(b)
        - gammaln(a)
        + gammaln(a + m)
        - (a + m) * math.log(b + stats.w)
    )


def log_marginal_grad(stats: FitStats, a: float, b: float):
    """Partial derivatives ``(d/da, d/db)`` of :func:`log_marginal`."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    _check_stats(stats)
    m = 0.5 * (stats.n - stats.q)
    da = math.log(b) - digamma(a) + digamma(a + m) - math.log(b + stats.w)
    db = a / b - (a + m) / (b + stats.w)
    return da, db


def profile_b(a: float, w: float, n: int, q: int) -> float:
    """Maximizer in ``b`` of the marginal likelihood for fixed ``a``."""
    if not a > 0:
        raise ValueError("a must be positive")
    if n <= q:
        raise ValueError(f"need n > q, got n={n}, q={q}")
    if not w > 0:
        raise DegenerateFitError("residual sum of squares is zero; the marginal likelihood has no profile maximizer")
    return 2.0 * a * w / (n - q)


def mmap_objective(stats: FitStats, a: float, zeta: float, iota: float) -> float:
    """Profiled log marginal plus the Gamma(zeta, rate=iota) log hyperprior (up to a constant)."""
    b = profile_b(a, stats.w, stats.n, stats.q)
    return log_marginal(stats, a, b) + (zeta - 1.0) * math.log(a) - iota * a


def mmap_derivative(a: float, n: int, q: int, zeta: float, iota: float) -> float:
    m = 0.5 * (n - q)
    return digamma(a + m) - digamma(a) - math.log1p(m / a) + (zeta - 1.0) / a - iota


def _solve_a(n, q, zeta, iota, a_lo, a_hi):
    grid = np.geomspace(a_lo, a_hi, 32)
    g = [mmap_derivative(a, n, q, zeta, iota) for a in grid]
    if g[0] <= 0.0:
        return a_lo, False, True
    if g[-1] >= 0.0:
        return a_hi, True, False
    k = next(i for i in range(1, len(grid)) if g[i] < 0.0)
    lo, hi = math.log(grid[k - 1]), math.log(grid[k])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mmap_derivative(math.exp(mid), n, q, zeta, iota) > 0.0:
            lo = mid
        else:
            hi = mid
        if math.exp(hi) - math.exp(lo) <= 1e-10 * max(1.0, math.exp(lo)):
            break
    return math.exp(0.5 * (lo + hi)), False, False


def mmap_estimate(stats: FitStats, zeta: float = 2.0, iota: float = 2.0, bounds=(1e-3, 1e3)) -> MMAPResult:
    """Marginal MAP ``(a*, b*)`` under ``a ~ Gamma(zeta, rate iota)`` and a flat prior on ``b``.

    The derivative of the profiled objective in ``a`` is decreasing, so the
    root is bracketed on a log grid and refined by bisection.
    """
    _check_stats(stats)
    if not stats.w > 0:
        raise DegenerateFitError("residual sum of squares is zero")
    a_lo, a_hi = bounds
    a, upper, lower = _solve_a(stats.n, stats.q, zeta, iota, a_lo, a_hi)
    if upper:
        warnings.warn(f"MMAP shape estimate hit the upper bound {a_hi:g}", RuntimeWarning, stacklevel=2)
    return MMAPResult(a, profile_b(a, stats.w, stats.n, stats.q), upper, lower)


def dsd_estimate(stats: FitStats, n_ini: int, zeta: float = 2.0, iota: float = 2.0, bounds=(1e-3, 1e3)):
    """MMAP with ``b = kappa * n_ini``; returns ``(a*, kappa*)``."""
    res = mmap_estimate(stats, zeta, iota, bounds)
    return res.a, res.b / n_ini


def is_degenerate(fit: GPFit, rtol: float = 1e-12) -> bool:
    """True when the residual sum of squares is zero up to rounding in ``y``."""
    scale = float(np.mean(fit.y**2)) + 1e-300
    return not fit.sigma2_hat > rtol * scale


def estimate_prior(config: HyperConfig, fit: GPFit) -> HierPrior:
    """Build the inverse-Gamma prior for ``config`` from the initial-design fit.

    Constant initial responses leave MMAP/DSD undefined; those cases fall back to
    ``a = b = eps`` (for DSD, ``kappa = eps / n``) with a warning.
    """
    n = fit.n
    if config.scheme == "weak":
        return HierPrior(config.eps, config.eps, "weak")
    stats = fit.stats()
    bounds = (config.a_lo, config.a_hi)
    if is_degenerate(fit):
        warnings.warn("degenerate initial fit; using weak hyperparameters", RuntimeWarning, stacklevel=2)
        if config.scheme == "dsd":
            return HierPrior(config.eps, config.eps, "dsd", kappa=config.eps / n)
        return HierPrior(config.eps, config.eps, "mmap")
    if config.scheme == "mmap":
        res = mmap_estimate(stats, config.zeta, config.iota, bounds)
        return HierPrior(res.a, res.b, "mmap")
    a, kappa = dsd_estimate(stats, n, config.zeta, config.iota, bounds)
    return HierPrior(a, kappa * n, "dsd", kappa=kappa)
