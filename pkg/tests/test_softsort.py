import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from slicedot import NonPositiveTemperature, TiedInputs, hard_sort_permutation, soft_sort_jacobian, soft_sort_matrix
from slicedot.softsort import hard_sort_matrix


def fd_jacobian(x, tau, h=1e-5):
    cols = [(soft_sort_matrix(x + h * e, tau).matrix - soft_sort_matrix(x - h * e, tau).matrix) / (2 * h)
            for e in np.eye(x.size)]
    return np.stack(cols, axis=-1)


def test_two_element_example():
    s = soft_sort_matrix([3.0, 1.0], 1.0).matrix
    lo, hi = np.exp(-2) / (1 + np.exp(-2)), 1 / (1 + np.exp(-2))
    np.testing.assert_allclose(s, [[lo, hi], [hi, lo]], rtol=0, atol=1e-15)
    np.testing.assert_allclose(s, [[0.1192, 0.8808], [0.8808, 0.1192]], atol=5e-5)


def test_sorted_input_gives_near_identity():
    s = soft_sort_matrix([0.0, 10.0, 20.0, 30.0], 0.5).matrix
    np.testing.assert_array_equal(np.argmax(s, axis=1), np.arange(4))
    np.testing.assert_allclose(s, np.eye(4), atol=1e-8)


def test_constant_input_is_uniform():
    np.testing.assert_allclose(soft_sort_matrix(np.full(5, 2.5), 0.1).matrix, 0.2, rtol=0, atol=1e-15)


def test_soft_sort_approximates_sorted_vector(rng):
    x = rng.standard_normal(7) * 5
    np.testing.assert_allclose(soft_sort_matrix(x, 1e-3).matrix @ x, np.sort(x), atol=1e-9)


def test_rejects_nonpositive_temperature():
    with pytest.raises(NonPositiveTemperature):
        soft_sort_matrix([1.0, 2.0], 0.0)


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(1, 12), elements=st.floats(-1e3, 1e3)),
       st.sampled_from([1e-4, 1e-2, 0.5, 1.0, 100.0]))
def test_rows_stochastic(x, tau):
    s = soft_sort_matrix(x, tau).matrix
    assert np.all((s >= 0) & (s <= 1))
    np.testing.assert_allclose(s.sum(axis=1), 1.0, rtol=0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.integers(1, 10), elements=st.integers(-1000, 1000).map(lambda k: k / 64)),
       st.integers(-50, 50))
def test_shift_invariance_exact(x, c):
    # dyadic inputs and integer shifts keep every difference exact
    np.testing.assert_array_equal(soft_sort_matrix(x + c, 0.3).matrix, soft_sort_matrix(x, 0.3).matrix)


def test_hard_limit(rng):
    for _ in range(20):
        x = rng.standard_normal(6)
        gap = np.diff(np.sort(x)).min()
        hard = hard_sort_matrix(x)
        dists = []
        for tau in (1.0, 0.1, 0.01, 0.001):
            s = soft_sort_matrix(x, tau).matrix
            if tau < gap:
                np.testing.assert_array_equal(np.argmax(s, axis=1), hard_sort_permutation(x))
            dists.append(np.linalg.norm(s - hard))
        assert all(a >= b for a, b in zip(dists, dists[1:]))


def test_hard_sort_permutation():
    np.testing.assert_array_equal(hard_sort_permutation([3, 1, 2]), [1, 2, 0])
    np.testing.assert_array_equal(hard_sort_permutation([5, 5]), [0, 1])


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.integers(1, 15), elements=st.floats(-1e6, 1e6)))
def test_hard_sort_nondecreasing(x):
    assert np.all(np.diff(x[hard_sort_permutation(x)]) >= 0)


def test_jacobian_matches_finite_differences(rng):
    for _ in range(50):
        m = int(rng.integers(2, 11))
        tau = float(rng.choice([0.1, 0.5, 1.0]))
        x = rng.standard_normal(m)
        jac, fd = soft_sort_jacobian(x, tau), fd_jacobian(x, tau)
        assert np.abs(jac - fd).max() / np.abs(fd).max() <= 1e-5


def test_jacobian_kills_constant_shift(rng):
    x = rng.standard_normal(5)
    np.testing.assert_allclose(soft_sort_jacobian(x, 0.5).sum(axis=-1), 0.0, atol=1e-12)


def test_jacobian_vanishes_at_high_temperature(rng):
    x = rng.standard_normal(5)
    assert np.abs(soft_sort_jacobian(x, 1e8)).max() < 1e-8


def test_jacobian_rejects_ties():
    with pytest.raises(TiedInputs):
        soft_sort_jacobian([1.0, 2.0, 1.0], 0.5)
