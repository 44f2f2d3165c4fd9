import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special, stats

from heibo.acquisition import (
    AcqSpec,
    AcqState,
    betainc_reg,
    ei_value,
    evaluate,
    hei_value,
    score,
    sei_value,
    t_cdf,
    t_pdf,
    ucb_score,
)
from heibo.gp import Dataset, HierPrior, fit
from heibo.kernel import KernelSpec
from heibo.trend import TrendModel

from oracles import expected_improvement_quad

HALF_T3_AT_ZERO = math.sqrt(5 / 3) * math.gamma(2) / (math.sqrt(3 * math.pi) * math.gamma(1.5))


def test_t_cdf_at_zero():
    for df in (0.5, 1, 3, 30, 1e5):
        assert t_cdf(df, 0.0) == 0.5


def test_cauchy_cdf():
    assert t_cdf(1.0, 1.0) == pytest.approx(0.75, abs=1e-14)


def test_normal_limit():
    x = np.arange(-3, 4, dtype=float)
    assert np.max(np.abs(t_cdf(1e6, x) - stats.norm.cdf(x))) <= 1e-5
    assert np.max(np.abs(t_pdf(1e6, x) - stats.norm.pdf(x))) <= 1e-5


@given(st.floats(0.3, 200.0), st.floats(-50, 50))
def test_t_primitives_match_reference(df, x):
    assert t_cdf(df, x) == pytest.approx(stats.t.cdf(x, df), rel=1e-10, abs=1e-14)
    assert t_pdf(df, x) == pytest.approx(stats.t.pdf(x, df), rel=1e-10, abs=1e-300)


@given(st.floats(0.05, 50), st.floats(0.05, 50), st.floats(0, 1))
def test_betainc_matches_reference(a, b, x):
    assert betainc_reg(a, b, x) == pytest.approx(special.betainc(a, b, x), rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("df", [1.5, 3.0, 12.0])
def test_t_pdf_integrates_to_one(df):
    from scipy.integrate import quad

    total, _ = quad(lambda x: t_pdf(df, x), -np.inf, np.inf, epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_t_cdf_monotone():
    x = np.linspace(-40, 40, 2001)
    c = t_cdf(2.5, x)
    assert np.all(np.diff(c) >= 0) and c[0] < 1e-3 and c[-1] > 1 - 1e-3


def test_df_must_be_positive():
    with pytest.raises(ValueError):
        t_cdf(0.0, 1.0)
    with pytest.raises(ValueError):
        hei_value(0.1, 1.0, 2.0)
    with pytest.raises(ValueError):
        sei_value(0.1, 1.0, 1.0)


def test_ei_examples():
    assert ei_value(0.0, 1.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-14)
    assert ei_value(-2.0, 0.0) == 0.0
    assert ei_value(1.5, 0.0) == 1.5


def test_hei_and_sei_at_zero():
    assert hei_value(0.0, 1.0, 5.0) == pytest.approx(HALF_T3_AT_ZERO, rel=1e-13)
    sei = sei_value(0.0, 1.0, 5.0)
    phi5 = math.gamma(3) / (math.sqrt(5 * math.pi) * math.gamma(2.5))
    assert sei == pytest.approx(1.25 * phi5, rel=1e-13)
    assert sei == pytest.approx(0.474508, abs=1e-6)


def test_hei_normal_limit():
    I = np.linspace(-2, 2, 21)[:, None]
    s = np.geomspace(0.01, 3, 15)[None, :]
    assert np.max(np.abs(hei_value(I, s, 1e6) - ei_value(I, s))) <= 1e-4
    assert np.max(np.abs(sei_value(I, s, 1e6) - ei_value(I, s))) <= 1e-4


def test_degenerate_scale_limit():
    assert hei_value(0.7, 0.0, 5.0) == 0.7
    assert sei_value(-0.7, 0.0, 5.0) == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_quadrature_equivalence(seed):
    rng = np.random.default_rng(seed)
    for _ in range(25):
        scale = float(np.exp(rng.uniform(-3, 1)))
        I = float(scale * rng.uniform(-5, 5))
        df = float(rng.uniform(3, 50))
        t_ref = expected_improvement_quad(I, scale, df)
        assert hei_value(I, scale, df) == pytest.approx(t_ref, rel=1e-6)
        assert sei_value(I, scale, df) == pytest.approx(t_ref, rel=1e-6)
        assert ei_value(I, scale) == pytest.approx(expected_improvement_quad(I, scale), rel=1e-8)


@given(st.floats(-10, 10), st.floats(1e-3, 10), st.floats(2.05, 100))
def test_hei_equals_sei(I, scale, df):
    assert hei_value(I, scale, df) == pytest.approx(sei_value(I, scale, df), rel=1e-9, abs=1e-300)


@given(st.floats(1e-3, 10), st.floats(2.5, 100))
def test_monotone_in_improvement(scale, df):
    I = np.linspace(-5, 5, 100)
    for vals in (ei_value(I, scale), hei_value(I, scale, df), sei_value(I, scale, df)):
        assert np.all(vals >= 0)
        assert np.all(np.diff(vals) >= -1e-15)


@given(st.floats(-5, 0), st.floats(2.5, 100))
def test_monotone_in_scale_without_improvement(I, df):
    s = np.geomspace(1e-3, 10, 100)
    for vals in (ei_value(I, s), hei_value(I, s, df), sei_value(I, s, df)):
        assert np.all(np.diff(vals) >= -1e-15)


def test_ucb():
    assert ucb_score(1.0, 0.5, 2.96) == pytest.approx(0.48)
    assert ucb_score(1.3, 0.0, 2.96) == -1.3
    assert ucb_score(0.0, 0.2, 2.0) > ucb_score(0.0, 0.1, 2.0)
    with pytest.raises(ValueError):
        ucb_score(0.0, 1.0, 0.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        AcqSpec("PI")
    with pytest.raises(ValueError):
        AcqSpec("SEI")
    with pytest.raises(ValueError):
        AcqSpec("EI_OK", eps_greedy=1.0)
    with pytest.raises(ValueError):
        AcqSpec("EI_OK", stab_gamma=0.0)


def _state(rng, shift=0.0, order=0, nugget=1e-8):
    X = rng.random((15, 2))
    y = np.cos(5 * X[:, 0]) * X[:, 1] + shift
    return fit(Dataset(X, y), KernelSpec("matern52", (0.3, 0.4)), TrendModel(order, 2), nugget)


SPECS = [
    AcqSpec("EI_OK"),
    AcqSpec("EI_UK"),
    AcqSpec("HEI", prior=HierPrior(1.0, 0.5)),
    AcqSpec("SEI", prior=HierPrior(0.2, 12.0)),
    AcqSpec("UCB"),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.method)
def test_zero_at_design_points(spec):
    # without a nugget s_n vanishes at the data up to rounding
    f = _state(np.random.default_rng(0), nugget=0.0)
    state = AcqState(f, spec.prior)
    if spec.method == "UCB":
        return
    for x in f.X:
        assert evaluate(state, spec, x) <= 1e-8


def test_ok_equals_uk_with_constant_trend(rng):
    f = _state(rng)
    P = rng.random((50, 2))
    a, _ = score(AcqState(f), AcqSpec("EI_OK"), P)
    b, _ = score(AcqState(f), AcqSpec("EI_UK"), P)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.method)
def test_ranking_shift_invariant(spec):
    P = np.random.default_rng(9).random((60, 2))
    f0 = _state(np.random.default_rng(1))
    f1 = _state(np.random.default_rng(1), shift=37.5)
    v0, _ = score(AcqState(f0, spec.prior), spec, P)
    v1, _ = score(AcqState(f1, spec.prior), spec, P)
    if spec.method in ("EI_OK", "EI_UK", "UCB"):
        assert np.array_equal(np.argsort(v0), np.argsort(v1)) or np.allclose(v0 - v0.mean(), v1 - v1.mean(), atol=1e-9)
    else:
        # b enters the posterior scale, so the shift changes nothing only through y - y*
        assert np.allclose(v0, v1, rtol=1e-6, atol=1e-10)
