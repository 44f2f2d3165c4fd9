"""Benchmark objectives, optimality gaps, replication suites and the stability diagnostic."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .design import Domain

_PI = np.pi


def _rows(x, d):
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    if X.shape[-1] != d:
        raise ValueError(f"expected points with {d} coordinates, got {X.shape[-1]}")
    return x, X


def _out(x, v):
    return float(v[0]) if x.ndim == 1 else v


def _branin(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (x2 - 5.1 / (4 * _PI**2) * x1**2 + 5 / _PI * x1 - 6) ** 2 + 10 * (1 - 1 / (8 * _PI)) * np.cos(x1) + 10


def _camel3(X):
    x1, x2 = X[:, 0], X[:, 1]
    return 2 * x1**2 - 1.05 * x1**4 + x1**6 / 6 + x1 * x2 + x2**2


def _camel6(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (4 - 2.1 * x1**2 + x1**4 / 3) * x1**2 + x1 * x2 + (-4 + 4 * x2**2) * x2**2


def _levy(X):
    w = 1 + (X - 1) / 4
    head = np.sin(_PI * w[:, 0]) ** 2
    mid = np.sum((w[:, :-1] - 1) ** 2 * (1 + 10 * np.sin(_PI * w[:, :-1] + 1) ** 2), axis=1)
    tail = (w[:, -1] - 1) ** 2 * (1 + np.sin(2 * _PI * w[:, -1]) ** 2)
    return head + mid + tail


def _ackley(X):
    d = X.shape[1]
    r = np.sqrt(np.sum(X**2, axis=1))
    return -20 * np.exp(-0.2 / np.sqrt(d) * r) - np.exp(np.mean(np.cos(2 * _PI * X), axis=1)) + 20 + np.e


@dataclass(frozen=True)
class TestFunction:
    name: str
    d: int
    domain: Domain
    evaluator: Callable = field(repr=False)
    f_min: float
    f_min_provenance: str
    minimizers: tuple = ()

    __test__ = False  # not a pytest class

    def __call__(self, x):
        x, X = _rows(x, self.d)
        tol = 1e-12 * (1 + np.abs(self.domain.hi - self.domain.lo))
        if np.any(X < self.domain.lo - tol) or np.any(X > self.domain.hi + tol):
            raise ValueError(f"{self.name}: point outside domain {self.domain.lower}..{self.domain.upper}")
        return _out(x, self.evaluator(X))

    def gap(self, y):
        return np.asarray(y, dtype=float) - self.f_min


# Minimum of the un-rescaled Branin formula on [0, 1]^2: the function is
# decreasing in both coordinates there, so the minimum sits at the corner (1, 1).
_BRANIN_FMIN = float(_branin(np.array([[1.0, 1.0]]))[0])
# Six-hump camel: 2001 x 2001 grid followed by local refinement.
_CAMEL6_FMIN = -1.0316284534898774

FUNCTIONS = {
    "branin": TestFunction(
        "branin", 2, Domain.cube(0.0, 1.0, 2), _branin, _BRANIN_FMIN, "derived: grid oracle on [0,1]^2", ((1.0, 1.0),)
    ),
    "camel3": TestFunction("camel3", 2, Domain.cube(-2.0, 2.0, 2), _camel3, 0.0, "exact: origin", ((0.0, 0.0),)),
    "camel6": TestFunction(
        "camel6",
        2,
        Domain.cube(-2.0, 2.0, 2),
        _camel6,
        _CAMEL6_FMIN,
        "derived: grid oracle plus local refinement",
        ((0.08984201368301331, -0.7126564032704135), (-0.08984201368301331, 0.7126564032704135)),
    ),
    "levy6": TestFunction("levy6", 6, Domain.cube(-10.0, 10.0, 6), _levy, 0.0, "exact: all ones", ((1.0,) * 6,)),
    "ackley10": TestFunction("ackley10", 10, Domain.cube(-5.0, 5.0, 10), _ackley, 0.0, "exact: origin", ((0.0,) * 10,)),
}


def get_function(name: str) -> TestFunction:
    try:
        return FUNCTIONS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown test function {name!r}; available: {sorted(FUNCTIONS)}") from None


def eval_branin(x):
    return FUNCTIONS["branin"](x)


def eval_camel3(x):
    return FUNCTIONS["camel3"](x)


def eval_camel6(x):
    return FUNCTIONS["camel6"](x)


def eval_levy6(x):
    return FUNCTIONS["levy6"](x)


def eval_ackley10(x):
    return FUNCTIONS["ackley10"](x)


def grid_minimum(tf: TestFunction, per_axis: int = 1001, n_qmc: int = 2**20, n_refine: int = 100, seed: int = 0):
    """Reference minimum by exhaustive grid (d = 2) or Sobol sampling plus local refinement.

    Returns ``(f_min, x_min)``.
    """
    lo, hi = tf.domain.lo, tf.domain.hi
    if tf.d == 2:
        g1 = np.linspace(lo[0], hi[0], per_axis)
        g2 = np.linspace(lo[1], hi[1], per_axis)
        G1, G2 = np.meshgrid(g1, g2, indexing="ij")
        P = np.column_stack([G1.ravel(), G2.ravel()])
    else:
        P = qmc.scale(qmc.Sobol(tf.d, scramble=True, seed=seed).random(n_qmc), lo, hi)
    vals = tf.evaluator(P)
    order = np.argsort(vals)[:n_refine]
    best_v, best_x = float(vals[order[0]]), P[order[0]]
    bounds = list(zip(lo, hi))
    for i in order:
        res = minimize(lambda z: float(tf.evaluator(z[None, :])[0]), P[i], method="L-BFGS-B", bounds=bounds)
        if res.fun < best_v:
            best_v, best_x = float(res.fun), res.x
    return best_v, best_x


# ---------------------------------------------------------------------------
# replication suites


@dataclass
class GapTable:
    """Per-method, per-iteration summary of the optimality gap across replications."""

    methods: list
    n_tot: int
    gaps: dict  # method -> (reps_ok, n_tot) array
    status: dict  # method -> list of per-replication status strings

    def mean(self, method):
        return self.gaps[method].mean(axis=0)

    def median(self, method):
        return np.median(self.gaps[method], axis=0)

    def log10(self, method):
        with np.errstate(divide="ignore"):
            return np.log10(self.gaps[method])

    def mean_log10(self, method):
        return self.log10(method).mean(axis=0)

    def median_log10(self, method):
        return np.median(self.log10(method), axis=0)

    def final_mean(self, method) -> float:
        return float(self.mean(method)[-1])

    def rows(self):
        """Yield one dict per (method, iteration)."""
        for m in self.methods:
            g = self.gaps[m]
            if g.shape[0] == 0:
                continue
            mean, med = self.mean(m), self.median(m)
            mlog, medlog = self.mean_log10(m), self.median_log10(m)
            for i in range(self.n_tot):
                yield dict(
                    method=m,
                    iteration=i + 1,
                    replications=g.shape[0],
                    mean_gap=mean[i],
                    median_gap=med[i],
                    mean_log10_gap=mlog[i],
                    median_log10_gap=medlog[i],
                )


def replication_seed(base: int, r: int) -> int:
    return int(np.random.SeedSequence([int(base), int(r)]).generate_state(1, dtype=np.uint64)[0] >> 1)


def _run_one(job):
    from .driver import run_bo

    method, cfg = job
    try:
        trace = run_bo(cfg)
        return method, "ok", trace.best_y
    except Exception as exc:  # noqa: BLE001 - failures are reported per replication
        return method, f"failed: {type(exc).__name__}: {exc}", None
    finally:
        # an external objective's child belongs to this replication only
        close = getattr(cfg.objective, "close", None)
        if close is not None:
            close()


def run_suite(configs, replications: int, f_min: float, base_seed: int = 0, workers: Optional[int] = 1) -> GapTable:
    """Run every config ``replications`` times and tabulate ``gap_n = y*_n - f_min``.

    ``configs`` maps method name to a :class:`~heibo.driver.RunConfig`; the seed
    of replication ``r`` is derived from ``(base_seed, r)``, and every method
    shares the same replication seeds.  Runs are independent and may be spread
    over ``workers`` processes; results are assembled in (method, replication)
    order regardless.
    """
    from dataclasses import replace

    if isinstance(configs, (list, tuple)):
        configs = {c.method or c.acq.method: c for c in configs}
    methods = list(configs)
    if not methods:
        raise ValueError("no methods given")
    n_tots = {c.n_tot for c in configs.values()}
    if len(n_tots) != 1:
        raise ValueError("all configs must share n_tot")
    n_tot = n_tots.pop()
    jobs = [
        (m, replace(configs[m], seed=replication_seed(base_seed, r))) for m in methods for r in range(replications)
    ]
    if workers is None or workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    gaps, status = {m: [] for m in methods}, {m: [] for m in methods}
    for method, st, best in results:
        status[method].append(st)
        if best is not None:
            gaps[method].append(np.maximum(best - f_min, 0.0))
    return GapTable(
        methods,
        n_tot,
        {m: np.array(v).reshape(len(v), n_tot) for m, v in gaps.items()},
        status,
    )


# ---------------------------------------------------------------------------
# stability diagnostic


def stability_trace(trace):
    """Per-iteration ``log(s_n(x_{n+1}) / max s_n)`` and a flag for uniform (epsilon-greedy) draws.

    Only iterations after the initial design are included.  Returns
    ``(iterations, log_ratio, greedy)`` arrays.
    """
    recs = [r for r in trace.records if np.isfinite(r.s_max_est)]
    if len(trace.records) and not recs and len(trace.records) > sum(1 for r in trace.records if r.theta is None):
        raise ValueError("trace carries no stability diagnostics")
    it = np.array([r.iteration for r in recs], dtype=int)
    s = np.array([r.s_next for r in recs])
    smax = np.array([r.s_max_est for r in recs])
    if np.any(~np.isfinite(s)):
        raise ValueError("trace is missing s_n(x_next) values")
    with np.errstate(divide="ignore"):
        ratio = np.log(s / smax)
    return it, ratio, np.array([r.greedy for r in recs], dtype=bool)
