import warnings

import numpy as np
import pytest

from heibo.acquisition import AcqSpec, AcqState, score
from heibo.bench import get_function
from heibo.design import Domain
from heibo.driver import (
    METHOD_NAMES,
    RunConfig,
    estimate_lengthscales,
    make_config,
    maximize_acquisition,
    run_bo,
    stab_threshold,
)
from heibo.gp import Dataset, HierPrior, fit
from heibo.hyper import HyperConfig
from heibo.kernel import KernelSpec, corr_matrix
from heibo.trend import TrendModel

FAST = dict(lhd_restarts=5, theta_starts=3)


def _matern_draw(theta, n, seed):
    rng = np.random.default_rng(seed)
    X = np.sort(rng.random(n))[:, None]
    K = corr_matrix(KernelSpec("matern52", (theta,)), X, nugget=1e-10)
    return Dataset(X, np.linalg.cholesky(K) @ rng.standard_normal(n))


def test_lengthscale_recovery():
    data = _matern_draw(0.3, 60, 4)
    theta, ok = estimate_lengthscales(data, "matern52", TrendModel(0, 1), rng=np.random.default_rng(0))
    assert ok and 0.15 <= theta[0] <= 0.6


def test_lengthscale_collapsed_bounds():
    data = _matern_draw(0.3, 20, 1)
    theta, ok = estimate_lengthscales(data, "matern52", TrendModel(0, 1), bounds=(0.7, 0.7))
    assert theta.tolist() == [0.7]


def test_lengthscale_permutation_invariant():
    rng = np.random.default_rng(2)
    X = rng.random((25, 2))
    y = np.sin(6 * X[:, 0]) + X[:, 1] ** 2
    perm = rng.permutation(25)
    a, _ = estimate_lengthscales(Dataset(X, y), "matern52", TrendModel(1, 2), rng=np.random.default_rng(0))
    b, _ = estimate_lengthscales(Dataset(X[perm], y[perm]), "matern52", TrendModel(1, 2), rng=np.random.default_rng(0))
    assert np.allclose(a, b, rtol=1e-4)


def _branin_state(n=10, seed=0):
    f = get_function("branin")
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    return AcqState(fit(Dataset(X, f(X)), KernelSpec("matern52", (0.3, 0.4)), TrendModel(0, 2)))


def test_single_candidate():
    state = _branin_state()
    c = np.array([[0.3, 0.6]])
    res = maximize_acquisition(state, AcqSpec("EI_OK"), np.random.default_rng(0), candidates=c, n_refine=0)
    assert np.array_equal(res.x, c[0])


def test_tie_goes_to_first_candidate():
    # constant responses make the criterion flat, so only the tie rule applies
    X = np.random.default_rng(0).random((8, 2))
    state = AcqState(fit(Dataset(X, np.full(8, 2.0)), KernelSpec("matern52", (0.3, 0.3)), TrendModel(0, 2)))
    cands = np.array([[0.1, 0.1], [0.9, 0.9], [0.5, 0.2]])
    res = maximize_acquisition(state, AcqSpec("EI_OK"), np.random.default_rng(0), candidates=cands)
    assert "degenerate" in res.flags


@pytest.mark.parametrize("method", ["EI_OK", "HEI", "UCB"])
def test_dense_sweep(method):
    state = _branin_state(10, 1)
    spec = AcqSpec(method, prior=HierPrior(1.0, 0.5) if method == "HEI" else None)
    res = maximize_acquisition(state, spec, np.random.default_rng(0), n_candidates=400)
    sweep, _ = score(state, spec, np.random.default_rng(1).random((10_000, 2)))
    assert res.value >= sweep.max() - 1e-6


def test_stab_constraint_respected():
    state = _branin_state(15, 2)
    spec = AcqSpec("EI_OK", stab_gamma=0.5)
    pool = np.random.default_rng(3).random((10_000, 2))
    thr = stab_threshold(state, 0.5, pool)
    res = maximize_acquisition(state, spec, np.random.default_rng(0), s_threshold=thr)
    assert res.s >= thr


def test_infeasible_constraint_falls_back():
    state = _branin_state(15, 2)
    res = maximize_acquisition(state, AcqSpec("EI_OK"), np.random.default_rng(0), s_threshold=1e6)
    assert "infeasible" in res.flags


def test_stab_threshold_examples():
    state = _branin_state(12, 4)
    assert stab_threshold(state, 1.0, state.fit.X) <= 1e-3
    p = np.array([[0.123, 0.987]])
    _, s2 = state.fit.predict(p)
    assert stab_threshold(state, 1.0, p) == pytest.approx(np.sqrt(s2[0]))
    small = stab_threshold(state, 0.2, np.random.default_rng(0).random((10**4, 2)))
    large = stab_threshold(state, 0.2, np.random.default_rng(1).random((200_000, 2)))
    assert abs(small - large) <= 0.05 * large


def test_config_validation():
    f = get_function("camel3")
    with pytest.raises(ValueError):
        make_config("HEI_DSD", f.domain, f, n_ini=5, n_tot=4)
    with pytest.raises(ValueError):
        RunConfig(domain=f.domain, objective=f, acq=AcqSpec("HEI"))
    with pytest.raises(ValueError):
        RunConfig(domain=f.domain, objective=f, acq=AcqSpec("EI_UK"), trend=2, n_ini=6)
    with pytest.raises(ValueError):
        make_config("NOPE", f.domain, f)
    assert make_config("EI_OK", f.domain, f).n_ini == 20


def test_initial_design_only():
    f = get_function("camel3")
    tr = run_bo(make_config("HEI_DSD", f.domain, f, n_ini=12, n_tot=12, **FAST))
    assert len(tr) == 12
    assert tr.best_y[-1] == tr.y.min()


@pytest.mark.parametrize("method", ["EI_OK", "HEI_DSD"])
def test_constant_objective(method):
    dom = Domain.cube(0.0, 1.0, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tr = run_bo(make_config(method, dom, lambda x: 3.0, n_ini=10, n_tot=16, **FAST))
    assert len(tr) == 16 and np.all(tr.y == 3.0)
    if method == "EI_OK":
        # zero plug-in variance: the search falls back to the largest s_n
        assert all("degenerate" in r.flags for r in tr.records[10:])
    else:
        # the prior keeps the scale positive, and with I = 0 HEI is increasing in s_n
        assert all(r.s_next >= 0.5 * r.s_max_est for r in tr.records[10:])


@pytest.mark.parametrize("method", METHOD_NAMES)
def test_every_method_runs(method):
    f = get_function("camel3")
    calls = []

    def obj(x):
        calls.append(x)
        return f(x)

    tr = run_bo(make_config(method, f.domain, obj, n_ini=12, n_tot=18, seed=3, **FAST))
    assert len(tr) == len(calls) == 18
    assert np.all(np.diff(tr.best_y) <= 0)
    assert all(f.domain.contains(r.x) for r in tr.records)
    ratios = [np.log(r.s_next / r.s_max_est) for r in tr.records[12:] if not r.greedy]
    assert np.all(np.isfinite(ratios)) and np.all(np.array(ratios) <= 1e-12)


def test_dsd_schedule():
    f = get_function("camel3")
    tr = run_bo(make_config("HEI_DSD", f.domain, f, n_ini=12, n_tot=18, seed=1, **FAST))
    kappa = tr.prior.kappa
    for r in tr.records[12:]:
        assert r.b == kappa * (r.iteration - 1)
        assert r.a == tr.prior.a


def test_stab_ratio_floor():
    f = get_function("branin")
    tr = run_bo(make_config("STAB_HEI_DSD", f.domain, f, n_ini=12, n_tot=22, seed=2, **FAST))
    gamma = min(0.1 * 2, 0.8)
    for r in tr.records[12:]:
        assert np.log(r.s_next / r.s_max_est) >= np.log(gamma)


def test_deterministic():
    f = get_function("branin")
    cfg = make_config("EPS_EI_UK", f.domain, f, n_ini=12, n_tot=20, seed=11, **FAST)
    a, b = run_bo(cfg), run_bo(cfg)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_branin_progress():
    f = get_function("branin")
    tr = run_bo(make_config("HEI_DSD", f.domain, f, n_ini=20, n_tot=60, seed=5))
    assert np.all(np.diff(tr.best_y) <= 0)
    assert tr.best_y[-1] - f.f_min < tr.best_y[19] - f.f_min


def test_objective_failure_keeps_partial_trace():
    from heibo.driver import ObjectiveError

    f = get_function("camel3")
    count = []

    def flaky(x):
        count.append(1)
        if len(count) == 15:
            raise RuntimeError("simulator crashed")
        return f(x)

    with pytest.raises(ObjectiveError) as info:
        run_bo(make_config("EI_OK", f.domain, flaky, n_ini=12, n_tot=20, **FAST))
    assert len(info.value.trace) == 14
