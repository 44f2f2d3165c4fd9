"""Universal kriging fit, Gaussian posterior and hierarchical Student-t posterior.

Every solve goes through a triangular factor; no inverse is formed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.linalg.lapack import dpotrf as _potrf, dpotri as _potri, dpotrs as _potrs, dtrtrs as _trtrs

from .kernel import ConditioningError, KernelSpec, cross_corr, dcorr_dlogtheta, factorize
from .trend import TrendModel

S2_CLAMP = -1e-10
_LOG2PI = np.log(2.0 * np.pi)


class InsufficientDataError(ValueError):
    pass


class DegreesOfFreedomError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float)).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if y.shape[0] < 1:
            raise ValueError("dataset must contain at least one point")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def append(self, x, y) -> "Dataset":
        return Dataset(np.vstack([self.X, np.atleast_2d(x)]), np.append(self.y, y))


@dataclass(frozen=True)
class HierPrior:
    """Inverse-Gamma ``IG(a, b)`` prior on the process variance.

    For the data-size-dependent scheme ``kappa`` is set and ``b`` is the value
    in effect at the sample size it was built for; use :meth:`at` to rebuild it.
    """

    a: float
    b: float
    scheme: str = "weak"
    kappa: Optional[float] = None

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("inverse-Gamma hyperparameters must be positive")
        if self.scheme == "dsd" and not (self.kappa and self.kappa > 0):
            raise ValueError("data-size-dependent prior needs kappa > 0")

    def at(self, n: int) -> "HierPrior":
        if self.scheme != "dsd":
            return self
        return HierPrior(self.a, self.kappa * n, "dsd", self.kappa)


@dataclass(frozen=True)
class PredictiveT:
    df: float
    loc: float
    scale: float


@dataclass(frozen=True, eq=False)
class GPFit:
    kernel: KernelSpec
    trend: TrendModel
    nugget: float
    X: np.ndarray
    y: np.ndarray
    chol_K: np.ndarray
    P: np.ndarray
    A: np.ndarray  # L^{-1} P
    beta_hat: np.ndarray
    G: np.ndarray
    chol_G: np.ndarray
    sigma2_hat: float
    Kinv_resid: np.ndarray
    w: float  # (y'K^-1 y - beta' G beta) / 2

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def q(self) -> int:
        return self.trend.q

    @property
    def logdet_K(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol_K))))

    @property
    def logdet_G(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol_G))))

    @property
    def y_star(self) -> float:
        return float(np.min(self.y))

    def stats(self) -> "FitStats":
        return FitStats(self.w, self.logdet_K, self.logdet_G, self.n, self.q)

    def predict(self, Xnew):
        """Posterior mean ``f_hat`` and unit-variance ``s_n^2`` at each row of ``Xnew``."""
        Xnew = np.atleast_2d(np.asarray(Xnew, dtype=float))
        if Xnew.shape[1] != self.X.shape[1]:
            raise ValueError(f"dimension mismatch: points have {Xnew.shape[1]} coordinates, fit has {self.X.shape[1]}")
        k, prior_var, site = self._cross(Xnew)
        Pn = self.trend.design_matrix(Xnew)
        mean = Pn @ self.beta_hat + k @ self.Kinv_resid
        V = solve_triangular(self.chol_K, k.T, lower=True, check_finite=False)
        s2 = prior_var - np.einsum("ij,ij->j", V, V)
        H = Pn.T - self.A.T @ V  # (q, m)
        W = solve_triangular(self.chol_G, H, lower=True, check_finite=False)
        s2 = s2 + np.einsum("ij,ij->j", W, W)
        if np.any(s2 < S2_CLAMP):
            raise ConditioningError(f"negative predictive variance {s2.min():.3e}", nugget=self.nugget)
        s2 = np.maximum(s2, 0.0)
        at = site >= 0
        if at.any():
            # exact values there; the formulas only reproduce them up to rounding
            mean[at] = self.y[site[at]]
            s2[at] = 0.0
        return mean, s2

    def predict_s2_no_trend(self, Xnew) -> np.ndarray:
        Xnew = np.atleast_2d(np.asarray(Xnew, dtype=float))
        k, prior_var, site = self._cross(Xnew)
        V = solve_triangular(self.chol_K, k.T, lower=True, check_finite=False)
        return np.where(site >= 0, 0.0, prior_var - np.einsum("ij,ij->j", V, V))

    def _cross(self, Xnew):
        """Correlations with the data, prior variance and coincident design site.

        The nugget is a white-noise term of the fitted kernel, so it also
        appears where a new point coincides with a design point; the predictor
        then reproduces the data exactly whatever nugget was needed.  ``site``
        holds the index of that design point, or -1.
        """
        k = cross_corr(self.kernel, Xnew, self.X)
        prior_var = np.ones(k.shape[0])
        hit = k == 1.0
        # duplicated design rows are separate observations of one site
        hit &= (hit.sum(axis=1) == 1)[:, None]
        site = np.where(hit.any(axis=1), hit.argmax(axis=1), -1)
        if self.nugget > 0 and hit.any():
            k = k + self.nugget * hit
            prior_var = prior_var + self.nugget * (site >= 0)
        return k, prior_var, site


@dataclass(frozen=True)
class FitStats:
    """Summary of a fit needed by the marginal likelihood."""

    w: float
    logdet_K: float
    logdet_G: float
    n: int
    q: int


def _as_point(fit: GPFit, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != fit.X.shape[1]:
        raise ValueError(f"dimension mismatch: expected a point with {fit.X.shape[1]} coordinates")
    return x[None, :]


def fit(data: Dataset, kernel: KernelSpec, trend: TrendModel, nugget: float = 1e-8) -> GPFit:
    """Generalized least-squares universal kriging fit for fixed length-scales."""
    X, y = data.X, data.y
    n = y.shape[0]
    q = trend.q
    if n < q:
        raise InsufficientDataError(f"need n >= q, got n={n}, q={q}")
    _, L, used = factorize(kernel, X, nugget)
    P = trend.design_matrix(X)
    A = solve_triangular(L, P, lower=True, check_finite=False)
    c_y = solve_triangular(L, y, lower=True, check_finite=False)
    G = A.T @ A
    try:
        LG = cholesky(G, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise ConditioningError("trend Gram matrix G_n is singular", nugget=used) from exc
    beta = cho_solve((LG, True), A.T @ c_y, check_finite=False)
    c = c_y - A @ beta
    ss = float(c @ c)
    Kinv_resid = solve_triangular(L, c, lower=True, trans="T", check_finite=False)
    return GPFit(
        kernel=kernel,
        trend=trend,
        nugget=used,
        X=X,
        y=y,
        chol_K=L,
        P=P,
        A=A,
        beta_hat=beta,
        G=G,
        chol_G=LG,
        sigma2_hat=ss / n,
        Kinv_resid=Kinv_resid,
        w=0.5 * ss,
    )


def predict_mean(fit: GPFit, x) -> float:
    return float(fit.predict(_as_point(fit, x))[0][0])


def predict_s2(fit: GPFit, x) -> float:
    return float(fit.predict(_as_point(fit, x))[1][0])


def posterior_params(fit: GPFit, prior: HierPrior):
    """Degrees of freedom and ``sigma_tilde^2`` of the hierarchical posterior."""
    n, q = fit.n, fit.q
    a_n = prior.a + 0.5 * (n - q)
    b_n = prior.b + 0.5 * n * fit.sigma2_hat
    df = 2.0 * a_n
    if df <= 2.0:
        raise DegreesOfFreedomError(f"posterior degrees of freedom {df:g} must exceed 2")
    return df, b_n / a_n


def hierarchical_posterior(fit: GPFit, prior: HierPrior, x) -> PredictiveT:
    df, sig2 = posterior_params(fit, prior)
    mean, s2 = fit.predict(_as_point(fit, x))
    return PredictiveT(df=df, loc=float(mean[0]), scale=float(np.sqrt(sig2 * s2[0])))


def profile_loglik(data: Dataset, kernel: KernelSpec, trend: TrendModel, nugget: float = 1e-8) -> float:
    """Gaussian log-likelihood with ``beta`` and ``sigma^2`` concentrated out.

    Returns ``-inf`` when the fitted residual variance is exactly zero.
    """
    f = fit(data, kernel, trend, nugget)
    return _profile_from_fit(f)


def _profile_from_fit(f: GPFit) -> float:
    n = f.n
    if f.sigma2_hat <= 0.0:
        return -np.inf
    return -0.5 * n * np.log(f.sigma2_hat) - 0.5 * f.logdet_K - 0.5 * n * (1.0 + _LOG2PI)


def profile_loglik_grad(data: Dataset, kernel: KernelSpec, trend: TrendModel, nugget: float = 1e-8):
    """Profile log-likelihood and its gradient with respect to ``log theta``."""
    f = fit(data, kernel, trend, nugget)
    ll = _profile_from_fit(f)
    if not np.isfinite(ll):
        return ll, np.zeros(kernel.dim)
    dK = dcorr_dlogtheta(kernel, data.X)
    alpha = f.Kinv_resid
    Kinv = cho_solve((f.chol_K, True), np.eye(f.n), check_finite=False)
    quad = np.einsum("i,kij,j->k", alpha, dK, alpha)
    trace = np.einsum("ij,kji->k", Kinv, dK)
    grad = 0.5 * quad / f.sigma2_hat - 0.5 * trace
    return ll, grad


class ProfileLikelihood:
    """Profile log-likelihood in ``log theta`` with distances cached across evaluations.

    Used by the length-scale search, which evaluates the same data under many
    ``theta`` values.  Matches :func:`profile_loglik_grad`.
    """

    def __init__(self, data: Dataset, family: str, trend: TrendModel, nugget: float = 1e-8):
        X = data.X
        self.family = family
        self.y = data.y
        self.n = data.n
        self.nugget = nugget
        self.P = trend.design_matrix(X)
        self.D2 = np.moveaxis((X[:, None, :] - X[None, :, :]) ** 2, 2, 0)  # (d, n, n)

    def __call__(self, logtheta):
        from .kernel import NUGGET_MAX, _SQRT3, _SQRT5, correlation_of_distance

        inv2 = np.exp(-2.0 * np.asarray(logtheta, dtype=float))
        U2 = self.D2 * inv2[:, None, None]  # scaled squared differences
        r = np.sqrt(U2.sum(axis=0))
        R = correlation_of_distance(self.family, r)
        n = self.n
        idx = np.diag_indices(n)
        nug = self.nugget
        while True:
            K = R.copy()
            K[idx] = 1.0 + nug
            L, info = _potrf(K, lower=1, clean=1, overwrite_a=1)
            if info == 0:
                break
            nug *= 10.0
            if nug == 0.0 or nug > NUGGET_MAX * (1 + 1e-12):
                raise ConditioningError("correlation matrix not positive definite", nugget=nug)
        A, _ = _trtrs(L, self.P, lower=1)
        cy, _ = _trtrs(L, self.y, lower=1)
        LG, info = _potrf(A.T @ A, lower=1, clean=1)
        if info != 0:
            raise LinAlgError("trend Gram matrix is singular")
        beta, _ = _potrs(LG, A.T @ cy, lower=1)
        c = cy - A @ beta
        s2 = float(c @ c) / n
        if s2 <= 0.0:
            return -np.inf, np.zeros(inv2.shape[0])
        ll = -0.5 * n * np.log(s2) - np.sum(np.log(np.diag(L))) - 0.5 * n * (1.0 + _LOG2PI)
        alpha, _ = _trtrs(L, c, lower=1, trans=1)
        Kinv, _ = _potri(L, lower=1)
        Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
        fam = self.family
        if fam == "matern52":
            sr = _SQRT5 * r
            g = (5.0 / 3.0) * (1.0 + sr) * np.exp(-sr)
        elif fam == "matern32":
            g = 3.0 * np.exp(-_SQRT3 * r)
        elif fam == "sqexp":
            g = R
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(r > 0, np.exp(-r) / r, 0.0)
        M = (np.outer(alpha, alpha) / s2 - Kinv) * g
        grad = 0.5 * (self.D2.reshape(len(inv2), -1) @ M.ravel()) * inv2
        return ll, grad
