"""Sequential Bayesian optimization loop.

Everything inside the loop works in unit-cube coordinates; the objective is
called on points mapped back into the user's domain.  A run draws all of its
randomness from a single ``numpy.random.Generator`` seeded from the config, so
a run is fully reproducible.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from . import gp
from .acquisition import AcqSpec, AcqState, scale_factor, score
from .design import Domain, maximin_lhd, scale
from .gp import Dataset, HierPrior
from .hyper import HyperConfig, estimate_prior
from .kernel import ConditioningError, KernelSpec
from .trend import TrendModel, basis_count, select_order_bic

log = logging.getLogger(__name__)

POOL_CAP = 200_000
SEI_PRIOR = (0.2, 12.0)


class ObjectiveError(RuntimeError):
    """The objective failed; ``trace`` holds everything recorded before the failure."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass
class RunConfig:
    domain: Domain
    objective: Callable
    acq: AcqSpec = field(default_factory=AcqSpec)
    hyper: Optional[HyperConfig] = None
    trend: object = "bic"  # polynomial order, or "bic"
    n_ini: Optional[int] = None
    n_tot: int = 120
    seed: int = 0
    family: str = "matern52"
    theta_bounds: tuple = (1e-2, 100.0)
    theta_starts: int = 10
    nugget: float = 1e-8
    bic_orders: tuple = (0, 1, 2)
    n_candidates: Optional[int] = None
    n_perturb: int = 10
    n_refine: int = 5
    refine_tol: float = 1e-6
    pool_size: Optional[int] = None
    lhd_restarts: int = 50
    method: str = ""

    def __post_init__(self):
        d = self.domain.d
        if self.n_ini is None:
            self.n_ini = 10 * d
        if self.n_candidates is None:
            self.n_candidates = 200 * d
        if self.pool_size is None:
            self.pool_size = min(10 ** (d + 2), POOL_CAP)
        if self.n_ini < 2:
            raise ValueError("n_ini must be at least 2")
        if self.n_tot < self.n_ini:
            raise ValueError("n_tot must be at least n_ini")
        lo, hi = self.theta_bounds
        if not (0 < lo <= hi):
            raise ValueError("need 0 < theta_lo <= theta_hi")
        if self.trend != "bic":
            order = int(self.trend)
            if basis_count(order, d) + 3 > self.n_ini:
                raise ValueError(f"n_ini={self.n_ini} too small for trend order {order}; need n_ini >= q + 3")
        if self.acq.method == "HEI" and self.hyper is None:
            raise ValueError("HEI needs a hyperparameter scheme")


@dataclass
class IterRecord:
    iteration: int
    x: np.ndarray
    y: float
    best_y: float
    acq_value: float = np.nan
    s_next: float = np.nan
    s_max_est: float = np.nan
    theta: Optional[np.ndarray] = None
    a: float = np.nan
    b: float = np.nan
    greedy: bool = False
    flags: tuple = ()


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    method: str = ""
    d: int = 0
    trend_order: Optional[int] = None
    prior: Optional[HierPrior] = None
    pool_size: int = 0

    def __len__(self):
        return len(self.records)

    @property
    def X(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    @property
    def y(self) -> np.ndarray:
        return np.array([r.y for r in self.records])

    @property
    def best_y(self) -> np.ndarray:
        return np.array([r.best_y for r in self.records])

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.y))

    @property
    def x_best(self) -> np.ndarray:
        return self.records[self.best_index].x

    @property
    def y_best(self) -> float:
        return self.records[self.best_index].y


# ---------------------------------------------------------------------------
# length-scale estimation


def estimate_lengthscales(
    data: Dataset,
    family: str,
    trend: TrendModel,
    bounds=(1e-2, 100.0),
    rng=None,
    starts: int = 10,
    previous=None,
    nugget: float = 1e-8,
):
    """Bounded maximum-likelihood length-scales (uniform prior on the box).

    Local L-BFGS-B searches in ``log theta`` start from ``starts`` log-uniform
    random points and from ``previous`` when given.  Returns ``(theta, ok)``
    where ``ok`` is False when no start produced a finite likelihood.
    """
    d = data.d
    lo, hi = float(bounds[0]), float(bounds[1])
    if lo == hi:
        return np.full(d, lo), True
    rng = np.random.default_rng(0) if rng is None else rng
    llo, lhi = np.log(lo), np.log(hi)
    inits = [rng.uniform(llo, lhi, size=d) for _ in range(starts)]
    if previous is not None:
        inits.append(np.clip(np.log(np.asarray(previous, dtype=float)), llo, lhi))

    prof = gp.ProfileLikelihood(data, family, trend, nugget)

    def negll(logt):
        try:
            ll, g = prof(logt)
        except (ConditioningError, np.linalg.LinAlgError, ValueError):
            return 1e300, np.zeros(d)
        if not np.isfinite(ll):
            return 1e300, np.zeros(d)
        return -ll, -g

    best_x, best_f = None, np.inf
    bnds = [(llo, lhi)] * d
    for x0 in inits:
        f0, _ = negll(x0)
        if f0 >= 1e300:
            continue
        res = minimize(negll, x0, jac=True, method="L-BFGS-B", bounds=bnds, options={"maxiter": 100})
        x, f = res.x, float(res.fun)
        if f > f0:
            x, f = x0, f0
        if f < best_f:
            best_x, best_f = x, f
    if best_x is None:
        fallback = previous if previous is not None else np.full(d, np.sqrt(lo * hi))
        return np.clip(np.asarray(fallback, dtype=float), lo, hi), False
    return np.clip(np.exp(best_x), lo, hi), True


# ---------------------------------------------------------------------------
# acquisition maximization


@dataclass
class AcqResult:
    x: np.ndarray
    value: float
    s: float
    s_max: float
    flags: tuple = ()


def _random_lhs(rng, m, d):
    return (np.argsort(rng.random((d, m)), axis=1).T + rng.random((m, d))) / m


def candidate_points(state: AcqState, rng, n_candidates: int, n_perturb: int, scale_perturb: float = 0.05):
    d = state.fit.X.shape[1]
    parts = []
    if n_candidates > 0:
        parts.append(_random_lhs(rng, n_candidates, d))
    if n_perturb > 0:
        best = state.fit.X[int(np.argmin(state.fit.y))]
        parts.append(np.clip(best + scale_perturb * rng.standard_normal((n_perturb, d)), 0.0, 1.0))
    return np.vstack(parts) if parts else np.zeros((0, d))


def _pattern_search(fun, starts, f0, tol, step=0.05, max_iter=500):
    """Compass search on ``[0, 1]^d`` run simultaneously from several starts."""
    X = starts.copy()
    F = f0.copy()
    k, d = X.shape
    h = np.full(k, step)
    dirs = np.vstack([np.eye(d), -np.eye(d)])  # (2d, d)
    for _ in range(max_iter):
        active = h >= tol
        if not active.any():
            break
        idx = np.flatnonzero(active)
        polls = np.clip(X[idx, None, :] + h[idx, None, None] * dirs[None, :, :], 0.0, 1.0)
        vals = fun(polls.reshape(-1, d)).reshape(len(idx), 2 * d)
        j = np.argmax(vals, axis=1)
        gain = vals[np.arange(len(idx)), j]
        better = gain > F[idx]
        moved = idx[better]
        X[moved] = polls[better, j[better]]
        F[moved] = gain[better]
        shrink = idx[~better]
        h[shrink] *= 0.5
    return X, F


def maximize_acquisition(
    state: AcqState,
    spec: AcqSpec,
    rng,
    n_candidates: int = 400,
    n_perturb: int = 10,
    n_refine: int = 5,
    tol: float = 1e-6,
    s_threshold: Optional[float] = None,
    candidates=None,
) -> AcqResult:
    """Multistart maximization of the acquisition over the unit cube.

    Candidates are scored, the best ``n_refine`` are polished by compass
    search, and the best point overall is returned (first index on ties).  With
    ``s_threshold`` set, points with ``s_n(x) < s_threshold`` are infeasible; if
    no candidate is feasible the candidate with the largest ``s_n`` is returned.
    When the criterion's variance factor is zero (flat data) the point of
    largest ``s_n`` is returned instead.
    """
    if candidates is None:
        candidates = candidate_points(state, rng, n_candidates, n_perturb)
    candidates = np.atleast_2d(candidates)
    vals, s = score(state, spec, candidates)
    s_max = float(s.max())
    flags = []
    _, sig2 = scale_factor(state, spec)
    # zero up to rounding relative to the response scale
    if not sig2 > 1e-20 * float(np.mean(state.fit.y**2)):
        i = int(np.argmax(s))
        return AcqResult(candidates[i], float(vals[i]), float(s[i]), s_max, ("degenerate",))

    if s_threshold is not None:
        # margin keeps the constraint valid when s_n is recomputed for a single point
        s_threshold = s_threshold * (1.0 + 1e-9)

    def objective(P):
        v, sp = score(state, spec, P)
        if s_threshold is not None:
            v = np.where(sp >= s_threshold, v, -np.inf)
        return v

    feas_vals = vals if s_threshold is None else np.where(s >= s_threshold, vals, -np.inf)
    if not np.isfinite(feas_vals).any():
        i = int(np.argmax(s))
        return AcqResult(candidates[i], float(vals[i]), float(s[i]), s_max, ("infeasible",))
    k = min(n_refine, int(np.isfinite(feas_vals).sum()))
    pool_x, pool_v = [candidates], [feas_vals]
    if k > 0 and tol > 0:
        top = np.argsort(-feas_vals, kind="stable")[:k]
        Xr, Fr = _pattern_search(objective, candidates[top], feas_vals[top], tol)
        pool_x.append(Xr)
        pool_v.append(Fr)
    allx = np.vstack(pool_x)
    allv = np.concatenate(pool_v)
    if s_threshold is None:
        x = allx[int(np.argmax(allv))]
        val, sx = score(state, spec, x[None, :])
        return AcqResult(x, float(val[0]), float(sx[0]), max(s_max, float(sx[0])), tuple(flags))
    # s_n of a single point can differ from its batched value in the last
    # digits, so the reported s_n is the one checked against the threshold
    for i in np.argsort(-allv, kind="stable"):
        if not np.isfinite(allv[i]):
            break
        val, sx = score(state, spec, allx[i][None, :])
        if sx[0] >= s_threshold:
            return AcqResult(allx[i], float(val[0]), float(sx[0]), max(s_max, float(sx[0])), tuple(flags))
    i = int(np.argmax(s))
    return AcqResult(candidates[i], float(vals[i]), float(s[i]), s_max, ("infeasible",))


def stab_threshold(state: AcqState, gamma: float, pool) -> float:
    """``gamma`` times the largest ``s_n`` over ``pool``."""
    pool = np.atleast_2d(pool)
    if pool.shape[0] == 0:
        raise ValueError("empty pool")
    _, s2 = state.fit.predict(pool)
    return float(gamma * np.sqrt(s2.max()))


# ---------------------------------------------------------------------------
# the loop


def _select_trend(cfg: RunConfig, data: Dataset, rng):
    d = data.d
    if cfg.trend != "bic":
        return int(cfg.trend)
    cands = [l for l in cfg.bic_orders if basis_count(l, d) <= cfg.n_ini / 2 and basis_count(l, d) + 3 <= cfg.n_ini]
    if not cands:
        return 0
    theta0, _ = estimate_lengthscales(
        data, cfg.family, TrendModel(0, d), cfg.theta_bounds, rng, cfg.theta_starts, None, cfg.nugget
    )
    if len(cands) == 1:
        return cands[0]
    return select_order_bic(data, KernelSpec(cfg.family, tuple(theta0)), cands, cfg.nugget)


def _evaluate(cfg, x_unit, trace):
    x = scale(x_unit, cfg.domain)
    try:
        y = float(cfg.objective(x))
    except Exception as exc:  # noqa: BLE001 - any objective failure aborts the run
        raise ObjectiveError(f"objective evaluation failed at {x.tolist()}: {exc}", trace) from exc
    if not np.isfinite(y):
        raise ObjectiveError(f"objective returned non-finite value {y!r} at {x.tolist()}", trace)
    return x, y


def run_bo(cfg: RunConfig) -> RunTrace:
    d = cfg.domain.d
    rng = np.random.default_rng(cfg.seed)
    trace = RunTrace(method=cfg.method or cfg.acq.method, d=d, pool_size=cfg.pool_size)

    U = maximin_lhd(cfg.n_ini, d, seed=int(rng.integers(2**63)), restarts=cfg.lhd_restarts)
    ys = []
    best = np.inf
    for i, u in enumerate(U):
        x, y = _evaluate(cfg, u, trace)
        ys.append(y)
        best = min(best, y)
        trace.records.append(IterRecord(i + 1, x, y, best))
    data = Dataset(U, np.array(ys))
    if cfg.n_tot == cfg.n_ini:
        return trace

    order = _select_trend(cfg, data, rng)
    trend = TrendModel(order, d)
    trace.trend_order = order
    theta, _ = estimate_lengthscales(data, cfg.family, trend, cfg.theta_bounds, rng, cfg.theta_starts, None, cfg.nugget)

    prior = None
    if cfg.acq.method == "HEI":
        fit0 = gp.fit(data, KernelSpec(cfg.family, tuple(theta)), trend, cfg.nugget)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            prior = estimate_prior(cfg.hyper, fit0)
    elif cfg.acq.method == "SEI":
        prior = cfg.acq.prior
    trace.prior = prior

    gamma = cfg.acq.stab_gamma
    for n in range(cfg.n_ini, cfg.n_tot):
        theta, ok = estimate_lengthscales(
            data, cfg.family, trend, cfg.theta_bounds, rng, cfg.theta_starts, theta, cfg.nugget
        )
        flags = () if ok else ("theta_fallback",)
        fit = gp.fit(data, KernelSpec(cfg.family, tuple(theta)), trend, cfg.nugget)
        prior_n = prior.at(n) if prior is not None else None
        state = AcqState(fit, prior_n)

        pool = rng.random((cfg.pool_size, d))
        _, pool_s2 = fit.predict(pool)
        pool_smax = float(np.sqrt(pool_s2.max()))

        greedy = cfg.acq.eps_greedy is not None and rng.random() < cfg.acq.eps_greedy
        if greedy:
            u = rng.random(d)
            val, s_u = score(state, cfg.acq, u[None, :])
            res = AcqResult(u, float(val[0]), float(s_u[0]), float(s_u[0]), ("greedy",))
        else:
            cands = candidate_points(state, rng, cfg.n_candidates, cfg.n_perturb)
            threshold = None
            if gamma is not None:
                _, cs2 = fit.predict(cands)
                threshold = gamma * max(pool_smax, float(np.sqrt(cs2.max())))
            res = maximize_acquisition(
                state, cfg.acq, rng, n_refine=cfg.n_refine, tol=cfg.refine_tol, s_threshold=threshold, candidates=cands
            )
        s_max = max(pool_smax, res.s_max)
        x, y = _evaluate(cfg, res.x, trace)
        best = min(best, y)
        trace.records.append(
            IterRecord(
                n + 1,
                x,
                y,
                best,
                acq_value=res.value,
                s_next=res.s,
                s_max_est=s_max,
                theta=np.asarray(theta, dtype=float),
                a=prior_n.a if prior_n is not None else np.nan,
                b=prior_n.b if prior_n is not None else np.nan,
                greedy=greedy,
                flags=flags + tuple(res.flags),
            )
        )
        data = data.append(res.x, y)
    return trace


# ---------------------------------------------------------------------------
# method presets used in the benchmark comparison

METHOD_NAMES = (
    "EI_OK",
    "EI_UK",
    "HEI_WEAK",
    "HEI_MMAP",
    "HEI_DSD",
    "SEI",
    "UCB_OK",
    "EPS_EI_OK",
    "EPS_EI_UK",
    "STAB_EI_UK",
    "STAB_HEI_DSD",
)


def stab_gamma_default(d: int) -> float:
    return min(0.1 * d, 0.8)


def method_settings(name: str, d: int) -> dict:
    """Acquisition, hyperparameter scheme and trend for a named method."""
    name = name.upper()
    if name == "EI_OK":
        return dict(acq=AcqSpec("EI_OK"), hyper=None, trend=0)
    if name == "EI_UK":
        return dict(acq=AcqSpec("EI_UK"), hyper=None, trend="bic")
    if name == "HEI_WEAK":
        return dict(acq=AcqSpec("HEI"), hyper=HyperConfig("weak"), trend="bic")
    if name == "HEI_MMAP":
        return dict(acq=AcqSpec("HEI"), hyper=HyperConfig("mmap"), trend="bic")
    if name == "HEI_DSD":
        return dict(acq=AcqSpec("HEI"), hyper=HyperConfig("dsd"), trend="bic")
    if name == "SEI":
        return dict(acq=AcqSpec("SEI", prior=HierPrior(*SEI_PRIOR, scheme="fixed")), hyper=None, trend=0)
    if name == "UCB_OK":
        return dict(acq=AcqSpec("UCB", ucb_mult=2.96), hyper=None, trend=0)
    if name == "EPS_EI_OK":
        return dict(acq=AcqSpec("EI_OK", eps_greedy=0.1), hyper=None, trend=0)
    if name == "EPS_EI_UK":
        return dict(acq=AcqSpec("EI_UK", eps_greedy=0.1), hyper=None, trend="bic")
    if name == "STAB_EI_UK":
        return dict(acq=AcqSpec("EI_UK", stab_gamma=stab_gamma_default(d)), hyper=None, trend="bic")
    if name == "STAB_HEI_DSD":
        return dict(acq=AcqSpec("HEI", stab_gamma=stab_gamma_default(d)), hyper=HyperConfig("dsd"), trend="bic")
    raise ValueError(f"unknown method {name!r}; expected one of {METHOD_NAMES}")


def make_config(method: str, domain: Domain, objective, **kwargs) -> RunConfig:
    settings = method_settings(method, domain.d)
    settings.update(kwargs)
    return RunConfig(domain=domain, objective=objective, method=method.upper(), **settings)


__all__ = [
    "AcqResult",
    "IterRecord",
    "METHOD_NAMES",
    "ObjectiveError",
    "RunConfig",
    "RunTrace",
    "candidate_points",
    "estimate_lengthscales",
    "make_config",
    "maximize_acquisition",
    "method_settings",
    "run_bo",
    "stab_threshold",
]
