"""Closed-form acquisition criteria and the Student-t primitives behind them.

All criteria are written for minimization: the improvement is
``I(x) = y* - f_hat(x)`` and larger criterion values are better.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, ndtr

from .gp import GPFit, HierPrior, posterior_params

METHODS = ("EI_OK", "EI_UK", "HEI", "SEI", "UCB")

BETACF_MAXITER = 200
BETACF_EPS = 1e-14
_TINY = 1e-300
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta (modified Lentz), vectorized."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for m in range(1, BETACF_MAXITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = np.where(done, h, h * d * c)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(done, h, h * delta)
        done |= np.abs(delta - 1.0) < BETACF_EPS
        if done.all():
            break
    return h


def betainc_reg(a, b, x):
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0`` and ``0 <= x <= 1``."""
    a, b, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, x)))
    out = np.empty(x.shape)
    zero = x <= 0.0
    one = x >= 1.0
    mid = ~(zero | one)
    out[zero] = 0.0
    out[one] = 1.0
    if mid.any():
        am, bm, xm = a[mid], b[mid], x[mid]
        front = np.exp(gammaln(am + bm) - gammaln(am) - gammaln(bm) + am * np.log(xm) + bm * np.log1p(-xm))
        flip = xm > (am + 1.0) / (am + bm + 2.0)
        res = np.empty(xm.shape)
        nf = ~flip
        if nf.any():
            res[nf] = front[nf] * _betacf(am[nf], bm[nf], xm[nf]) / am[nf]
        if flip.any():
            res[flip] = 1.0 - front[flip] * _betacf(bm[flip], am[flip], 1.0 - xm[flip]) / bm[flip]
        out[mid] = res
    return out


def _check_df(df, minimum=0.0):
    df = np.asarray(df, dtype=float)
    if np.any(~(df > minimum)):
        raise ValueError(f"degrees of freedom must exceed {minimum:g}")
    return df


def t_pdf(df, x):
    """Standard Student-t density with ``df`` degrees of freedom."""
    df = _check_df(df)
    x = np.asarray(x, dtype=float)
    logc = gammaln(0.5 * (df + 1.0)) - gammaln(0.5 * df) - 0.5 * np.log(df * np.pi)
    out = np.exp(logc - 0.5 * (df + 1.0) * np.log1p(x * x / df))
    return out if out.ndim else float(out)


def t_cdf(df, x):
    """Standard Student-t distribution function via the incomplete beta."""
    df = _check_df(df)
    x = np.asarray(x, dtype=float)
    df, x = np.broadcast_arrays(df, x)
    x2 = x * x
    near = x2 < df  # near the centre use the complementary form to avoid cancellation
    with np.errstate(invalid="ignore"):
        tail = betainc_reg(0.5 * df, 0.5, df / (df + x2))
        centre = betainc_reg(0.5, 0.5 * df, x2 / (df + x2))
    half = np.where(near, 0.5 * centre, 0.5 - 0.5 * tail)  # P(0 < T < |x|)
    out = 0.5 + np.sign(x) * half
    out = np.where(np.isposinf(x), 1.0, np.where(np.isneginf(x), 0.0, out))
    return out if out.ndim else float(out)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _finish(out, ref):
    out = np.maximum(out, 0.0)
    return out if np.ndim(ref) else float(out)


def ei_value(I, sigma_s, tol: float = 1e-12):
    """Plug-in expected improvement ``I Phi(I/s) + s phi(I/s)``."""
    I = np.asarray(I, dtype=float)
    s = np.asarray(sigma_s, dtype=float)
    I, s = np.broadcast_arrays(I, s)
    small = s < tol
    safe = np.where(small, 1.0, s)
    z = I / safe
    val = I * ndtr(z) + safe * norm_pdf(z)
    return _finish(np.where(small, np.maximum(I, 0.0), val), I)


def hei_value(I, scale, df, tol: float = 1e-12):
    """Expected improvement under a non-standardized Student-t predictive."""
    df = _check_df(df, 2.0)
    I, scale, df = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (I, scale, df)))
    small = scale < tol
    safe = np.where(small, 1.0, scale)
    z = I / safe
    m = np.sqrt(df / (df - 2.0))
    val = I * t_cdf(df, z) + m * safe * t_pdf(df - 2.0, z / m)
    return _finish(np.where(small, np.maximum(I, 0.0), val), I)


def sei_value(I, scale, df, tol: float = 1e-12):
    """Student expected improvement written with the ``(nu + z^2)/(nu - 1)`` term."""
    df = _check_df(df, 1.0)
    I, scale, df = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (I, scale, df)))
    small = scale < tol
    safe = np.where(small, 1.0, scale)
    z = I / safe
    val = safe * (z * t_cdf(df, z) + (df + z * z) / (df - 1.0) * t_pdf(df, z))
    return _finish(np.where(small, np.maximum(I, 0.0), val), I)


def ucb_score(mean, sigma_s, mult):
    """Negated lower confidence bound, so that larger is better when minimizing."""
    if not mult > 0:
        raise ValueError("UCB multiplier must be positive")
    out = -(np.asarray(mean, dtype=float) - mult * np.asarray(sigma_s, dtype=float))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AcqSpec:
    """Acquisition method plus optional exploration wrappers.

    ``prior`` is required for ``HEI`` and ``SEI``; ``eps_greedy`` replaces a
    query by a uniform draw with that probability; ``stab_gamma`` restricts the
    search to points with ``s_n(x) >= gamma * max s_n``.
    """

    method: str = "HEI"
    prior: Optional[HierPrior] = None
    ucb_mult: float = 2.96
    eps_greedy: Optional[float] = None
    stab_gamma: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown acquisition method {self.method!r}; expected one of {METHODS}")
        if self.method == "SEI" and self.prior is None:
            raise ValueError("SEI needs fixed (a, b) hyperparameters")
        if self.eps_greedy is not None and not (0.0 < self.eps_greedy < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.stab_gamma is not None and not (0.0 < self.stab_gamma <= 1.0):
            raise ValueError("gamma must lie in (0, 1]")
        if not self.ucb_mult > 0:
            raise ValueError("UCB multiplier must be positive")


@dataclass(frozen=True, eq=False)
class AcqState:
    fit: GPFit
    prior: Optional[HierPrior] = None

    @property
    def y_star(self) -> float:
        return self.fit.y_star


def scale_factor(state: AcqState, spec: AcqSpec):
    """Degrees of freedom (``inf`` for Gaussian methods) and the variance multiplier."""
    if spec.method in ("HEI", "SEI"):
        prior = state.prior if state.prior is not None else spec.prior
        if prior is None:
            raise ValueError(f"{spec.method} needs an inverse-Gamma prior")
        return posterior_params(state.fit, prior)
    return np.inf, state.fit.sigma2_hat


def score(state: AcqState, spec: AcqSpec, X):
    """Criterion values and ``s_n`` at each row of ``X`` (unit-cube coordinates)."""
    mean, s2 = state.fit.predict(X)
    s = np.sqrt(s2)
    df, sig2 = scale_factor(state, spec)
    sig = np.sqrt(sig2)
    ystar = state.y_star
    tol = 1e-12 * (1.0 + abs(ystar))
    I = ystar - mean
    if spec.method in ("EI_OK", "EI_UK"):
        vals = ei_value(I, sig * s, tol)
    elif spec.method == "HEI":
        vals = hei_value(I, sig * s, df, tol)
    elif spec.method == "SEI":
        vals = sei_value(I, sig * s, df, tol)
    else:
        vals = ucb_score(mean, sig * s, spec.ucb_mult)
    return np.atleast_1d(vals), s


def evaluate(state: AcqState, spec: AcqSpec, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(score(state, spec, x[None, :])[0][0])
