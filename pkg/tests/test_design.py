import numpy as np
import pytest
from hypothesis import given, strategies as st

from heibo.bench import get_function
from heibo.design import Domain, maximin_lhd, min_distance, scale, unscale


def test_two_points_one_dim():
    X = maximin_lhd(2, 1, seed=0)
    assert sorted(X[:, 0].tolist()) == [0.25, 0.75]


@given(st.integers(2, 25), st.integers(1, 5), st.integers(0, 2**31))
def test_latin_property(n, d, seed):
    X = maximin_lhd(n, d, seed=seed, restarts=3, swaps=50)
    mids = (np.arange(n) + 0.5) / n
    for j in range(d):
        assert np.array_equal(np.sort(X[:, j]), mids)


def test_reproducible():
    assert np.array_equal(maximin_lhd(12, 3, seed=5), maximin_lhd(12, 3, seed=5))
    assert not np.array_equal(maximin_lhd(12, 3, seed=5), maximin_lhd(12, 3, seed=6))


def test_beats_random_median():
    rng = np.random.default_rng(0)
    mids = (np.arange(4) + 0.5) / 4
    baseline = [min_distance(np.column_stack([rng.permutation(mids), rng.permutation(mids)])) for _ in range(1000)]
    assert min_distance(maximin_lhd(4, 2, seed=1)) >= np.median(baseline)


def test_improves_over_random_in_higher_dims():
    rng = np.random.default_rng(0)
    mids = (np.arange(20) + 0.5) / 20
    baseline = [min_distance(np.column_stack([rng.permutation(mids) for _ in range(3)])) for _ in range(200)]
    assert min_distance(maximin_lhd(20, 3, seed=0)) > np.max(baseline)


def test_bad_sizes():
    with pytest.raises(ValueError):
        maximin_lhd(1, 2)
    with pytest.raises(ValueError):
        maximin_lhd(5, 0)


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain((0.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        Domain((0.0,), (1.0, 2.0))
    with pytest.raises(ValueError):
        Domain((0.0,), (np.inf,))


def test_scale_examples():
    dom = Domain((-2.0, 10.0), (2.0, 30.0))
    assert np.array_equal(scale([0.0, 0.0], dom), dom.lo)
    assert np.allclose(scale([0.5, 0.5], dom), [0.0, 20.0])
    branin = get_function("branin").domain
    assert np.array_equal(scale([1.0, 1.0], branin), [1.0, 1.0])


@given(st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_round_trip(u):
    dom = Domain((-5.0, 0.0, 1e3), (5.0, 1e-3, 2e3))
    back = unscale(scale(u, dom), dom)
    assert np.allclose(back, u, atol=1e-12, rtol=0)


def test_scale_mismatch():
    with pytest.raises(ValueError):
        scale(np.zeros((4, 3)), Domain.cube(0, 1, 2))
