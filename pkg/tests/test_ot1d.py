import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from slicematch.ot1d import ProjectedSample, quantile_map, sorted_match_displacement, w2sq_1d
from conftest import brute_force_w2sq

floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
sample_lists = st.lists(floats, min_size=1, max_size=40)


def ps(values):
    return ProjectedSample(np.asarray(values, dtype=float))


def test_sorted_match_pairs_order_statistics():
    delta = sorted_match_displacement(ps([3, 1, 2]), ps([10, 30, 20]))
    assert_array_equal(np.array([3, 1, 2]) + delta, [30, 10, 20])
    assert_array_equal(delta, [27, 9, 18])


def test_sorted_match_identity():
    src = ps([0.5, -1.0, 2.0, 2.0])
    assert_array_equal(sorted_match_displacement(src, src), np.zeros(4))


def test_sorted_match_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        sorted_match_displacement(ps([1, 2]), ps([1, 2, 3]))


def test_w2sq_matches_brute_force_example(perm_oracle):
    src, tgt = [3.0, 1.0, 2.0], [10.0, 30.0, 20.0]
    assert w2sq_1d(ps(src), ps(tgt)) == 378.0
    assert perm_oracle(src, tgt) == 378.0


@given(n=st.integers(1, 6), data=st.data())
@settings(max_examples=60, deadline=None)
def test_w2sq_is_exhaustive_minimum(n, data):
    src = data.draw(st.lists(floats, min_size=n, max_size=n))
    tgt = data.draw(st.lists(floats, min_size=n, max_size=n))
    assert_allclose(w2sq_1d(ps(src), ps(tgt)), brute_force_w2sq(src, tgt), rtol=1e-12, atol=1e-12)


def test_w2sq_trivial_cases():
    assert w2sq_1d(ps([1.0, 2.0]), ps([2.0, 1.0])) == 0.0
    assert w2sq_1d(ps([0.0]), ps([3.0])) == 9.0


@given(a=sample_lists, data=st.data())
@settings(max_examples=50, deadline=None)
def test_w2sq_symmetry_and_translation(a, data):
    b = data.draw(st.lists(floats, min_size=len(a), max_size=len(a)))
    c = data.draw(st.floats(min_value=-1e3, max_value=1e3))
    ab = w2sq_1d(ps(a), ps(b))
    assert ab == w2sq_1d(ps(b), ps(a))
    shifted = w2sq_1d(ps(np.asarray(a) + c), ps(np.asarray(b) + c))
    assert_allclose(shifted, ab, rtol=1e-10, atol=1e-12)


@given(n=st.integers(1, 20), data=st.data())
@settings(max_examples=50, deadline=None)
def test_w2sq_sqrt_triangle_inequality(n, data):
    a = data.draw(st.lists(floats, min_size=n, max_size=n))
    b = data.draw(st.lists(floats, min_size=n, max_size=n))
    c = data.draw(st.lists(floats, min_size=n, max_size=n))
    dab = np.sqrt(w2sq_1d(ps(a), ps(b)))
    dbc = np.sqrt(w2sq_1d(ps(b), ps(c)))
    dac = np.sqrt(w2sq_1d(ps(a), ps(c)))
    assert dac <= dab + dbc + 1e-9 * (1.0 + dab + dbc)


def test_full_step_matches_target():
    rng = np.random.default_rng(3)
    src, tgt = rng.normal(size=30), rng.normal(size=30)
    delta = sorted_match_displacement(ps(src), ps(tgt))
    # the implied assignment is the exact rank pairing ...
    order = np.argsort(src, kind="stable")
    mapped = np.empty_like(src)
    mapped[order] = np.sort(tgt)
    assert_array_equal(delta, mapped - src)
    # ... and recombining src + delta costs at most a rounding error
    assert_allclose(np.sort(src + delta), np.sort(tgt), rtol=1e-13)


def test_quantile_map_corners():
    src, tgt = ps([0.0, 1.0]), ps([10.0, 20.0])
    assert_array_equal(quantile_map(src, tgt, [0.0]), [10.0])
    assert_array_equal(quantile_map(src, tgt, [1.0]), [20.0])
    # below the support -> bottom quantile; above -> top
    assert_array_equal(quantile_map(src, tgt, [-5.0, 5.0]), [10.0, 20.0])


@given(data=st.data())
@settings(max_examples=60, deadline=None)
def test_quantile_map_equals_sorted_match_for_distinct_values(data):
    n = data.draw(st.integers(1, 25))
    src = data.draw(st.lists(floats, min_size=n, max_size=n, unique=True))
    tgt = data.draw(st.lists(floats, min_size=n, max_size=n))
    via_quantiles = quantile_map(ps(src), ps(tgt), src)
    order = np.argsort(src, kind="stable")
    via_sorting = np.empty(n)
    via_sorting[order] = np.sort(tgt)
    assert_array_equal(via_quantiles, via_sorting)


def test_quantile_map_unequal_sizes():
    src = ps([0.0, 1.0, 2.0, 3.0])
    tgt = ps([10.0, 20.0])
    assert_array_equal(quantile_map(src, tgt, [0.0, 1.0, 2.0, 3.0]), [10.0, 10.0, 20.0, 20.0])


def test_projected_sample_validation():
    with pytest.raises(ValueError):
        ProjectedSample(np.array([]))
    with pytest.raises(ValueError):
        ProjectedSample(np.array([2.0, 1.0]), sorted=True)
