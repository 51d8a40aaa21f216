import numpy as np
import pytest
from hypothesis import given, strategies as st

from equinet.tensor import (
    Permutation,
    flat_index,
    kron_perm_matrix,
    materialize_perm_matrix,
    mean_along,
    neighbor_sum,
    permute_along,
    vec_permutation,
)


def perms(n):
    return st.permutations(list(range(n)))


def test_flat_index_row_major():
    assert flat_index((2, 3), (1, 2)) == 5
    assert flat_index((2, 3, 4), (1, 0, 3)) == 15
    with pytest.raises(IndexError):
        flat_index((2, 3), (2, 0))
    with pytest.raises(IndexError):
        flat_index((2, 3), (0,))


def test_permute_along_matches_matrix():
    t = np.arange(12.0).reshape(3, 4)
    pi = [2, 0, 1]
    out = permute_along(t, 0, pi)
    np.testing.assert_array_equal(out, materialize_perm_matrix(pi).T @ t)
    np.testing.assert_array_equal(out[0], t[2])


def test_permute_along_errors():
    t = np.zeros((2, 3))
    with pytest.raises(IndexError):
        permute_along(t, 2, [0, 1])
    with pytest.raises(ValueError):
        permute_along(t, 1, [0, 1])
    with pytest.raises(ValueError):
        Permutation([0, 0, 1])


def test_neighbor_sum_small():
    np.testing.assert_array_equal(neighbor_sum(np.array([1.0, 2.0, 3.0]), 0), [5, 4, 3])
    np.testing.assert_array_equal(mean_along(np.array([[1.0, 3.0]]), 1), [2.0])


@given(perms(4), perms(3))
def test_vec_permutation_matches_kron(p, q):
    rng = np.random.default_rng(0)
    t = rng.standard_normal((4, 3))
    s = vec_permutation((4, 3), [p, q])
    permuted = permute_along(permute_along(t, 0, p), 1, q)
    np.testing.assert_array_equal(permuted.ravel(), t.ravel()[s])
    np.testing.assert_array_equal(kron_perm_matrix([p, q]) @ t.ravel(), permuted.ravel())


@given(perms(5))
def test_inverse_roundtrip(p):
    pi = Permutation(p)
    x = np.arange(5)
    np.testing.assert_array_equal(permute_along(permute_along(x, 0, pi), 0, pi.inverse()), x)
    assert pi.inverse().inverse() == pi


@given(perms(4))
def test_neighbor_sum_commutes_with_permutation(p):
    t = np.random.default_rng(1).standard_normal((4, 2))
    np.testing.assert_allclose(neighbor_sum(permute_along(t, 0, p), 0), permute_along(neighbor_sum(t, 0), 0, p))
