import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from equinet.equivariance import (
    SetSignature,
    SetSpec,
    adjacency_mask,
    check_commutation,
    commutation_error,
    enumerate_orbits,
    materialize_operator,
)


def _counts(sig, out_space=None, in_space=None):
    names = [s.name for s in sig.sets]
    b = enumerate_orbits(sig, out_space or names, in_space or names)
    masked = adjacency_mask(b).n_retained if b.out_space == b.in_space else None
    return b.n_orbits, masked


def joint(K):
    return SetSignature((SetSpec("rx", K), SetSpec("tx", K)), ((0, 1),))


def nested():
    return SetSignature((SetSpec("users", 3), SetSpec("antennas", 6, (3, 3))))


@pytest.mark.parametrize(
    "sig, expected",
    [
        (SetSignature.independent(antennas=4), (2, 2)),
        (SetSignature.independent(users=3, antennas=4), (4, 3)),
        (SetSignature.independent(users=2, antennas=3, rf=2), (8, 4)),
        (SetSignature.independent(sub=2, users=2, antennas=3, rf=2), (16, 5)),
        (joint(4), (15, 8)),
        (joint(3), (14, None)),
        (nested(), (6, 4)),
    ],
)
def test_orbit_counts(sig, expected):
    n, masked = _counts(sig)
    assert n == expected[0]
    if expected[1] is not None:
        assert masked == expected[1]


def test_joint_output_map_has_five_orbits():
    assert enumerate_orbits(joint(4), ["tx"], ["rx", "tx"]).n_orbits == 5


def test_vacuous_orbits_not_counted_at_size_one():
    # with a single antenna "different antenna" pairs do not exist
    assert enumerate_orbits(SetSignature.independent(users=3, antennas=1), [0, 1], [0, 1]).n_orbits == 2


def test_canonical_ids_ordered_by_first_member():
    b = enumerate_orbits(SetSignature.independent(users=3, antennas=2), [0, 1], [0, 1])
    flat = b.labels.ravel()
    firsts = [int(np.flatnonzero(flat == o)[0]) for o in range(b.n_orbits)]
    assert firsts == sorted(firsts)
    assert b.labels[0, 0] == 0


def test_signature_validation():
    with pytest.raises(ValueError):
        SetSignature((SetSpec("a", 2), SetSpec("a", 2)))
    with pytest.raises(ValueError):
        SetSignature((SetSpec("a", 2), SetSpec("b", 3)), ((0, 1),))
    with pytest.raises(ValueError):
        SetSpec("n", 4, (3, 2))
    with pytest.raises(ValueError):
        enumerate_orbits(SetSignature.independent(a=2), [], [0])
    with pytest.raises(ValueError):
        adjacency_mask(enumerate_orbits(joint(3), ["tx"], ["rx", "tx"]))


def test_signature_roundtrip():
    for sig in (joint(3), nested(), SetSignature.independent(a=2, b=3)):
        assert SetSignature.from_dict(json.loads(json.dumps(sig.to_dict()))) == sig


def test_mask_idempotent_and_subset():
    b = enumerate_orbits(SetSignature.independent(a=2, b=3, c=2), [0, 1, 2], [0, 1, 2])
    m = adjacency_mask(b)
    assert np.array_equal(adjacency_mask(m).retained, m.retained)
    assert np.all(b.retained >= m.retained)


def test_materialize_errors():
    b = enumerate_orbits(SetSignature.independent(a=3), [0], [0])
    with pytest.raises(ValueError):
        materialize_operator(b, [1.0])
    P = materialize_operator(b, [2.0, -1.0])
    np.testing.assert_array_equal(P, 3 * np.eye(3) - 1)


@pytest.mark.parametrize(
    "sig, out_space, in_space",
    [
        (SetSignature.independent(a=4), [0], [0]),
        (SetSignature.independent(u=2, n=3), [0, 1], [0, 1]),
        (SetSignature.independent(u=2, n=3, s=2), [0, 1, 2], [0, 1, 2]),
        (SetSignature.independent(m=2, u=2, n=2, s=2), [0, 1, 2, 3], [0, 1, 2, 3]),
        (joint(3), [0, 1], [0, 1]),
        (joint(3), [1], [0, 1]),
        (nested(), [0, 1], [0, 1]),
    ],
)
def test_random_orbit_operator_commutes(sig, out_space, in_space):
    rng = np.random.default_rng(5)
    b = enumerate_orbits(sig, out_space, in_space)
    P = materialize_operator(b, rng.standard_normal(b.n_retained))
    assert commutation_error(P, sig, out_space, in_space, trials=50, rng=rng) == 0.0


def test_generic_matrix_does_not_commute():
    sig = SetSignature.independent(u=2, n=3)
    P = np.random.default_rng(0).standard_normal((6, 6))
    assert not check_commutation(P, sig, [0, 1], [0, 1], trials=10)


def test_nested_random_elements_preserve_blocks():
    s = SetSpec("n", 7, (2, 3, 2))
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = s.random_element(rng)
        assert sorted(p) == list(range(7))
        # the size-3 block stays in place as a set
        assert set(p[2:5]) == {2, 3, 4}


@given(st.integers(1, 4), st.integers(1, 4))
def test_2d_orbit_count_property(K, N):
    n, masked = _counts(SetSignature.independent(u=K, n=N))
    expect = (1 + (K > 1)) * (1 + (N > 1))
    assert n == expect
    assert masked == expect - (K > 1 and N > 1)


def test_to_json_lists_orbits():
    b = adjacency_mask(enumerate_orbits(SetSignature.independent(u=2, n=2), [0, 1], [0, 1]))
    d = json.loads(b.to_json())
    assert d["n_orbits"] == 4 and d["n_retained"] == 3
    assert sum(o["size"] for o in d["orbits"]) == 16
