import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slicedot import (DimensionMismatch, ReferenceSet, SizeTooSmall, interpolation_matrix, make_measure,
                      make_slices, sample_slices, sliced_w2, swe_embed, swe_embed_soft)


def literal_interp(mi, m):
    """1-based construction of the interpolation map, written independently of the library."""
    out = np.zeros((mi, m))
    for j in range(1, mi + 1):
        mj = math.floor((j - 1) * (m - 1) / (mi - 1)) + 1
        chi = (j - 1) * (m - 1) / (mi - 1) + 1 - mj
        out[j - 1, mj - 1] += 1 - chi
        if mj < m:
            out[j - 1, mj] += chi
    return out


def test_interp_identity():
    np.testing.assert_array_equal(interpolation_matrix(4, 4).matrix, np.eye(4))


def test_interp_worked_examples():
    np.testing.assert_array_equal(interpolation_matrix(3, 5).matrix, np.eye(5)[[0, 2, 4]])
    np.testing.assert_array_equal(interpolation_matrix(2, 3).matrix, [[1, 0, 0], [0, 0, 1]])


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 120), st.integers(2, 120))
def test_interp_matches_formula(mi, m):
    mat = interpolation_matrix(mi, m).matrix
    np.testing.assert_allclose(mat, literal_interp(mi, m), rtol=0, atol=1e-12)
    np.testing.assert_array_equal(mat.sum(axis=1), np.ones(mi))
    assert np.all(mat >= 0)
    assert np.count_nonzero(mat) <= 2 * mi
    for j, row in enumerate(mat):
        nz = np.flatnonzero(row)
        assert nz.max() - nz.min() <= 1


def test_interp_too_small():
    with pytest.raises(SizeTooSmall):
        interpolation_matrix(1, 4)


def test_embedding_of_references_is_zero(rng):
    u = rng.standard_normal((3, 6))
    slices = sample_slices(4, 3, 0)
    emb = swe_embed(u, ReferenceSet(u), slices)
    assert emb.values.shape == (24,)
    np.testing.assert_array_equal(emb.values, 0.0)
    np.testing.assert_array_equal(swe_embed(u[:, rng.permutation(6)], ReferenceSet(u), slices).values, 0.0)


def test_one_dimensional_example():
    emb = swe_embed([[2.0, 3.0]], ReferenceSet(np.array([[0.0, 1.0]])), make_slices([[1.0]]))
    np.testing.assert_array_equal(emb.values, [2.0, 2.0])


def test_permutation_invariance_bitwise(rng):
    for _ in range(50):
        d, mi, m = 3, int(rng.integers(1, 30)), int(rng.integers(2, 20))
        v = rng.standard_normal((d, mi))
        refs, slices = ReferenceSet(rng.standard_normal((d, m))), sample_slices(3, d, int(rng.integers(1000)))
        a = swe_embed(v, refs, slices).values
        b = swe_embed(v[:, rng.permutation(mi)], refs, slices).values
        np.testing.assert_array_equal(a, b)


def test_permutation_invariance_with_ties(rng):
    v = np.round(rng.standard_normal((2, 12)), 0)
    refs, slices = ReferenceSet(rng.standard_normal((2, 12))), make_slices([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(swe_embed(v, refs, slices).values,
                               swe_embed(v[:, rng.permutation(12)], refs, slices).values, atol=1e-12)


@pytest.mark.parametrize("mi", [1, 7, 20, 50, 64])
def test_output_length_independent_of_token_count(rng, mi):
    refs = ReferenceSet(rng.standard_normal((4, 20)))
    emb = swe_embed(rng.standard_normal((4, mi)), refs, sample_slices(3, 4, 1))
    assert emb.values.shape == (60,)
    assert emb.per_slice().shape == (3, 20)


def test_single_token_broadcasts(rng):
    refs = ReferenceSet(rng.standard_normal((2, 5)))
    slices = sample_slices(2, 2, 0)
    v = rng.standard_normal((2, 1))
    expected = (slices.directions @ v) - slices.directions @ refs.points
    np.testing.assert_allclose(swe_embed(v, refs, slices).per_slice(), expected, atol=1e-15)


def test_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        swe_embed(rng.standard_normal((3, 4)), ReferenceSet(rng.standard_normal((2, 4))), sample_slices(1, 2, 0))


def test_distance_to_reference_embedding_is_sliced_w2(rng):
    for _ in range(20):
        d, m, n_sl = 3, int(rng.integers(2, 12)), int(rng.integers(1, 6))
        u, v = rng.standard_normal((d, m)), rng.standard_normal((d, m))
        refs, slices = ReferenceSet(u), sample_slices(n_sl, d, int(rng.integers(1000)))
        dist = np.linalg.norm(swe_embed(v, refs, slices).values - swe_embed(u, refs, slices).values)
        assert dist / np.sqrt(n_sl * m) == pytest.approx(
            sliced_w2(make_measure(v), make_measure(u), slices), abs=1e-9)


def test_soft_converges_to_hard(rng):
    for _ in range(20):
        mi = int(rng.choice([6, 9, 13]))
        v = rng.standard_normal((3, mi))
        refs, slices = ReferenceSet(rng.standard_normal((3, 9))), sample_slices(3, 3, 5)
        np.testing.assert_allclose(swe_embed_soft(v, refs, slices, 1e-6).values,
                                   swe_embed(v, refs, slices).values, rtol=0, atol=1e-5)


def test_soft_fixed_point_tends_to_zero(rng):
    u = rng.standard_normal((2, 6))
    refs, slices = ReferenceSet(u), sample_slices(2, 2, 0)
    norms = [np.abs(swe_embed_soft(u, refs, slices, t).values).max() for t in (1.0, 1e-2, 1e-6)]
    assert norms[0] > norms[1] > norms[2]
    assert norms[2] <= 1e-12


def test_shift_along_slice(rng):
    theta = np.array([0.6, 0.8])
    slices = make_slices([theta])
    # well-separated references keep the soft matching sharp
    refs = ReferenceSet(np.outer(theta, np.arange(6.0) * 3) + rng.standard_normal((2, 6)) * 0.01)
    v = rng.standard_normal((2, 6)) * 4
    c = 1.7
    hard0, hard1 = swe_embed(v, refs, slices).values, swe_embed(v + c * theta[:, None], refs, slices).values
    np.testing.assert_allclose(hard1 - hard0, c, atol=1e-12)
    soft0 = swe_embed_soft(v, refs, slices, 0.05).values
    soft1 = swe_embed_soft(v + c * theta[:, None], refs, slices, 0.05).values
    np.testing.assert_allclose(soft1 - soft0, c, atol=1e-9)
