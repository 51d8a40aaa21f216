import numpy as np
import pytest
from hypothesis import given, strategies as st

from equinet import autodiff as ad
from equinet.autodiff import Var
from equinet.equivariance import SetSignature, SetSpec, enumerate_orbits
from equinet.nn import GNN, EquivariantLinear, EquivariantNorm, hyperedge_basis
from equinet.tensor import permute_along

SIGS = {
    "1d": SetSignature.independent(n=4),
    "2d": SetSignature.independent(u=2, n=3),
    "3d": SetSignature.independent(u=2, n=3, s=2),
    "4d": SetSignature.independent(m=2, u=2, n=2, s=2),
    "joint": SetSignature((SetSpec("rx", 3), SetSpec("tx", 3)), ((0, 1),)),
    "nested": SetSignature((SetSpec("u", 2), SetSpec("n", 4, (2, 2)))),
}


def _layer(kind, c_in=2, c_out=3, seed=0):
    rng = np.random.default_rng(seed)
    layer = EquivariantLinear(hyperedge_basis(SIGS[kind]), c_in, c_out, rng)
    layer.bias.data = rng.standard_normal(c_out)
    return layer


@pytest.mark.parametrize("kind", list(SIGS))
def test_forward_matches_dense_operator(kind):
    layer = _layer(kind)
    dims = layer.basis.in_dims
    x = np.random.default_rng(1).standard_normal((5, 2) + dims)
    out = layer(Var(x)).data
    dense = layer.dense() @ x.reshape(5, -1).T
    expect = dense.T.reshape((5, 3) + dims) + layer.bias.data.reshape((1, 3) + (1,) * len(dims))
    np.testing.assert_allclose(out, expect, atol=1e-12)


@pytest.mark.parametrize("kind,expect", [("1d", 2), ("2d", 3), ("3d", 4), ("4d", 5), ("joint", 8), ("nested", 4)])
def test_weight_counts(kind, expect):
    layer = _layer(kind, 3, 5)
    assert layer.n_weights == expect * 3 * 5


def test_fast_path_used_for_independent_sets():
    assert _layer("3d")._axes is not None
    assert _layer("joint")._axes is None
    assert _layer("nested")._axes is None


def test_identity_and_1d_examples():
    basis = hyperedge_basis(SIGS["1d"].__class__.independent(n=3))
    layer = EquivariantLinear(basis, 1, 1)
    self_id = [i for i, a in enumerate(layer._axes) if a is None][0]
    w = np.zeros((2, 1, 1))
    w[self_id] = 1.0
    layer.weight.data = w
    x = np.array([[[1.0, 2.0, 3.0]]])
    np.testing.assert_array_equal(layer(Var(x)).data, x)
    layer.weight.data = np.ones((2, 1, 1))
    np.testing.assert_array_equal(layer(Var(x)).data, [[[6.0, 6.0, 6.0]]])


@pytest.mark.parametrize("kind", ["2d", "3d", "4d", "joint", "nested"])
def test_layer_equivariance_property(kind):
    layer = _layer(kind)
    sig = SIGS[kind]
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 2) + layer.basis.in_dims)
    out = layer(Var(x)).data
    for _ in range(10):
        g = sig.random_element(rng)
        xp, op = x, out
        for ax in range(len(sig.sets)):
            xp = permute_along(xp, 2 + ax, g[ax])
            op = permute_along(op, 2 + ax, g[ax])
        np.testing.assert_allclose(layer(Var(xp)).data, op, atol=1e-12)


def test_norm_pooled_statistics():
    norm = EquivariantNorm(2)
    x = np.random.default_rng(0).standard_normal((4, 2, 3, 5)) * 3 + 1
    y = norm(Var(x)).data
    np.testing.assert_allclose(y.mean(axis=(0, 2, 3)), 0, atol=1e-12)
    np.testing.assert_allclose(y.var(axis=(0, 2, 3)), 1, atol=1e-4)
    const = norm(Var(np.ones((2, 2, 3)))).data
    np.testing.assert_array_equal(const, 0)


@given(st.permutations(list(range(5))))
def test_norm_commutes_with_set_permutation(p):
    x = np.random.default_rng(3).standard_normal((3, 2, 5))
    norm = EquivariantNorm(2)
    np.testing.assert_allclose(norm(Var(permute_along(x, 2, p))).data, permute_along(norm(Var(x)).data, 2, p),
                               atol=1e-12)


def test_norm_inference_uses_running_stats():
    norm = EquivariantNorm(1, momentum=1.0)
    x = np.random.default_rng(0).standard_normal((8, 1, 4))
    norm(Var(x))
    norm.training = False
    y = norm(Var(x)).data
    np.testing.assert_allclose(y, (x - x.mean()) / np.sqrt(x.var() + 1e-5))


def test_gnn_stack_shapes_and_buffers():
    model = GNN(SIGS["3d"], [4, 6, 4], norm=True, rng=np.random.default_rng(0))
    x = Var(np.random.default_rng(1).standard_normal((2, 4, 2, 3, 2)))
    assert model(x).shape == (2, 4, 2, 3, 2)
    assert len(model.buffers()) == 2
    assert len(model.parameters()) == 4
    with pytest.raises(ValueError):
        GNN(SIGS["1d"], [3])


def test_layer_maps_between_spaces():
    sig = SIGS["joint"]
    layer = EquivariantLinear(enumerate_orbits(sig, ["tx"], ["rx", "tx"]), 2, 1, np.random.default_rng(0))
    out = layer(Var(np.ones((1, 2, 3, 3))))
    assert out.shape == (1, 1, 3)
    assert ad.as_var(out).data.std() < 1e-12  # constant input -> constant output
