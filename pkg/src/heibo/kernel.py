"""Stationary anisotropic correlation functions and matrix assembly.

All correlations are functions of the scaled distance
``r = ||(x - z) / theta||_2``.  The squared-exponential member uses the
convention ``exp(-r**2 / 2)`` so that every family shares the same length-scale
meaning to first order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky
from scipy.spatial.distance import cdist

FAMILIES = ("matern12", "matern32", "matern52", "sqexp")

NUGGET_START = 1e-8
NUGGET_MAX = 1e-4

_SQRT3 = np.sqrt(3.0)
_SQRT5 = np.sqrt(5.0)


class ConditioningError(LinAlgError):
    """Raised when a correlation matrix cannot be factored.

    The attribute ``nugget`` holds the last diagonal inflation tried.
    """

    def __init__(self, message, nugget=None):
        super().__init__(message)
        self.nugget = nugget


@dataclass(frozen=True)
class KernelSpec:
    """Correlation family plus one positive length-scale per input."""

    family: str = "matern52"
    lengthscales: tuple = (1.0,)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        theta = tuple(float(t) for t in np.atleast_1d(self.lengthscales))
        if not theta or not all(np.isfinite(t) and t > 0 for t in theta):
            raise ValueError("length-scales must be finite and strictly positive")
        object.__setattr__(self, "lengthscales", theta)

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.lengthscales, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def with_lengthscales(self, theta) -> "KernelSpec":
        return KernelSpec(self.family, tuple(np.atleast_1d(theta)))


def correlation_of_distance(family: str, r):
    """Evaluate the correlation as a function of scaled distance ``r >= 0``."""
    r = np.asarray(r, dtype=float)
    if family == "matern52":
        sr = _SQRT5 * r
        return (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)
    if family == "matern32":
        sr = _SQRT3 * r
        return (1.0 + sr) * np.exp(-sr)
    if family == "matern12":
        return np.exp(-r)
    if family == "sqexp":
        return np.exp(-0.5 * r * r)
    raise ValueError(f"unknown kernel family {family!r}")


def _check_dim(spec: KernelSpec, d: int):
    if d != spec.dim:
        raise ValueError(f"dimension mismatch: points have {d} coordinates, kernel has {spec.dim}")


def correlate(spec: KernelSpec, x, z) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {z.shape}")
    _check_dim(spec, x.shape[0])
    r = np.sqrt(np.sum(((x - z) / spec.theta) ** 2))
    return float(correlation_of_distance(spec.family, r))


def cross_corr(spec: KernelSpec, A, B) -> np.ndarray:
    """Correlations between the rows of ``A`` (m x d) and ``B`` (n x d)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.size == 0 or B.size == 0:
        return np.zeros((A.shape[0] if A.size else 0, B.shape[0] if B.size else 0))
    _check_dim(spec, A.shape[1])
    _check_dim(spec, B.shape[1])
    theta = spec.theta
    r = cdist(A / theta, B / theta)
    return correlation_of_distance(spec.family, r)


def corr_vector(spec: KernelSpec, X, x) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.zeros(0)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return cross_corr(spec, x[None, :], X)[0]


def factorize(spec: KernelSpec, X, nugget: float = NUGGET_START, escalate: bool = True):
    """Build ``K_n`` and its lower Cholesky factor with nugget escalation.

    Starting from ``nugget`` the diagonal inflation is multiplied by ten on each
    failed factorization until it exceeds ``NUGGET_MAX``.

    Returns
    -------
    K : ndarray (n, n)
        Correlation matrix including the nugget actually used.
    L : ndarray (n, n)
        Lower-triangular factor, ``L @ L.T == K``.
    nugget : float
        The nugget that produced a successful factorization.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if nugget < 0:
        raise ValueError("nugget must be nonnegative")
    R = cross_corr(spec, X, X)
    n = R.shape[0]
    idx = np.diag_indices(n)
    current = float(nugget)
    while True:
        K = R.copy()
        K[idx] = 1.0 + current
        try:
            L = cholesky(K, lower=True, check_finite=False)
            if np.all(np.diag(L) > 0):
                return K, L, current
        except LinAlgError:
            pass
        next_nugget = current * 10.0
        if not escalate or current == 0.0 or next_nugget > NUGGET_MAX * (1 + 1e-12):
            raise ConditioningError(
                f"correlation matrix not positive definite (last nugget {current:g})", nugget=current
            )
        current = next_nugget


def corr_matrix(spec: KernelSpec, X, nugget: float = NUGGET_START) -> np.ndarray:
    """Correlation matrix with ``1 + nugget`` on the diagonal (after escalation)."""
    return factorize(spec, X, nugget)[0]


def dcorr_dlogtheta(spec: KernelSpec, X) -> np.ndarray:
    """Derivatives of the (nugget-free) correlation matrix w.r.t. ``log theta_j``.

    Returns an array of shape ``(d, n, n)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    theta = spec.theta
    U = X / theta
    diff2 = (U[:, None, :] - U[None, :, :]) ** 2  # (n, n, d)
    r = np.sqrt(diff2.sum(axis=2))
    fam = spec.family
    # dC/dlog(theta_j) = -C'(r) * u_j^2 / r ; written without the 1/r where possible
    if fam == "matern52":
        sr = _SQRT5 * r
        g = (5.0 / 3.0) * (1.0 + sr) * np.exp(-sr)
    elif fam == "matern32":
        g = 3.0 * np.exp(-_SQRT3 * r)
    elif fam == "sqexp":
        g = np.exp(-0.5 * r * r)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(r > 0, np.exp(-r) / r, 0.0)
    return np.moveaxis(g[:, :, None] * diff2, 2, 0)
