import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from equinet.autodiff import Var
from equinet.nn import EquivariantLinear, hyperedge_basis
from equinet.equivariance import SetSignature
from equinet.toolkit import cli, config, container
from equinet.toolkit.complexity import (
    ComplexityQuery,
    counted_forward,
    flops,
    flops_nd,
    weight_count,
    weight_count_nd,
)


# --- complexity --------------------------------------------------------------


def test_flops_examples():
    assert flops(ComplexityQuery("1d", 2, 3, N_t=4)) == 51
    assert flops(ComplexityQuery("2d", 1, 1, K=2, N_t=2)) == 12
    assert weight_count(ComplexityQuery("3d", 8, 8, 3, 16, 6)) == 256
    assert weight_count(ComplexityQuery("1d", 1, 1)) == 2
    with pytest.raises(ValueError):
        ComplexityQuery("5d", 1, 1)
    with pytest.raises(ValueError):
        ComplexityQuery("2d", 0, 1)


def test_order_of_magnitude_ratio():
    ratios = [flops(ComplexityQuery("3d", 8, 8, 3, 16, ns)) / flops(ComplexityQuery("2d", 8, 8, 3, 16))
              for ns in (8, 16, 32, 64)]
    per_ns = np.array(ratios) / np.array([8, 16, 32, 64])
    assert np.ptp(per_ns) < 0.1 * per_ns[-1]  # ratio grows linearly in N_s


def _layer_for(dims, c_in, c_out, seed):
    names = {f"s{i}": d for i, d in enumerate(dims)}
    return EquivariantLinear(hyperedge_basis(SetSignature.independent(**names)), c_in, c_out,
                             np.random.default_rng(seed), bias=False)


def _effective_weights(layer):
    w = layer.weight.data
    self_id = layer._axes.index(None)
    w_axes = [w[layer._axes.index(d)] for d in range(len(layer.basis.in_dims))]
    return w[self_id] - sum(w_axes), w_axes


# set extents start at 2: a set of size one has no "other element" orbit, so its layer has fewer weights
@given(st.sampled_from(["1d", "2d", "3d"]), st.integers(1, 3), st.integers(1, 3),
       st.integers(2, 3), st.integers(2, 3), st.integers(2, 3), st.integers(0, 10**6))
def test_flops_match_brute_force_count(kind, c_l, c_l1, K, N_t, N_s, seed):
    q = ComplexityQuery(kind, c_l, c_l1, K, N_t, N_s)
    layer = _layer_for(q.dims, c_l, c_l1, seed)
    x = np.random.default_rng(seed).standard_normal((c_l,) + q.dims)
    w_self, w_axes = _effective_weights(layer)
    out, count = counted_forward(x, w_self, w_axes)
    assert count == flops(q) == flops_nd(q.dims, c_l, c_l1)
    assert layer.n_weights == weight_count(q)
    np.testing.assert_allclose(out, layer(Var(x[None])).data[0], atol=1e-12)


def test_4d_counts():
    dims = (2, 2, 3, 2)
    layer = _layer_for(dims, 2, 3, 0)
    x = np.random.default_rng(0).standard_normal((2,) + dims)
    _, count = counted_forward(x, *_effective_weights(layer))
    assert count == flops_nd(dims, 2, 3)
    assert layer.n_weights == weight_count_nd(4, 2, 3) == 5 * 2 * 3


# --- container ---------------------------------------------------------------


@given(st.sampled_from([np.float32, np.float64, np.complex64, np.complex128]),
       st.lists(st.integers(0, 4), min_size=0, max_size=4), st.integers(0, 2**32 - 1))
def test_container_roundtrip_bit_identical(dtype, shape, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(shape).astype(dtype)
    if np.iscomplexobj(a):
        a = a + 1j * rng.standard_normal(shape).astype(a.real.dtype)
    side = np.iscomplexobj(a)
    b = container.decode(container.encode(a), side)
    assert b.dtype == a.dtype and b.shape == a.shape
    assert b.tobytes() == a.tobytes()


def test_container_header_layout(tmp_path):
    a = np.arange(6, dtype="<f4").reshape(2, 3)
    buf = container.encode(a)
    assert buf[:4] == b"WT1\x00" and buf[4] == 0 and buf[5] == 2
    assert int.from_bytes(buf[6:14], "little") == 2 and int.from_bytes(buf[14:22], "little") == 3
    assert buf[22:] == a.tobytes()
    container.write_tensor(tmp_path / "x.wt", a + 1j, {"note": "c"})
    side = json.loads((tmp_path / "x.wt.json").read_text())
    assert side["complex"] and side["meta"] == {"note": "c"}
    b, meta = container.read_tensor(tmp_path / "x.wt")
    np.testing.assert_array_equal(b, a + 1j)


def test_container_rejects_bad_input():
    with pytest.raises(container.ContainerError):
        container.decode(b"XXXX\x00\x00")
    with pytest.raises(container.ContainerError):
        container.decode(container.encode(np.ones(3))[:-1])
    with pytest.raises(container.ContainerError):
        container.encode(np.ones(3, dtype=np.int64))


# --- config ------------------------------------------------------------------


def _raw(**over):
    raw = {"version": 1, "problem": "miso2d", "system": {"K": 2, "N_t": 4}, "train": {"epochs": 1}}
    raw.update(over)
    return raw


def test_config_defaults_and_roundtrip(tmp_path):
    cfg = config.from_dict(_raw())
    assert cfg.system.sigma2 == 0.1 and cfg.train.batch_size == 500
    cfg.save(tmp_path / "c.json")
    assert config.load(tmp_path / "c.json") == cfg


@pytest.mark.parametrize(
    "over, field",
    [
        ({"version": 2}, "version"),
        ({"problem": "p7"}, "problem"),
        ({"system": {"K": 0}}, "system.K"),
        ({"system": {"sigma2": -1}}, "system.sigma2"),
        ({"train": {"batch_size": 2.5}}, "train.batch_size"),
        ({"train": {"lr": -1}}, "train.lr"),
        ({"model": {"hidden": []}}, "model.hidden"),
        ({"channel": {"kind": "wideband"}}, "channel.kind"),
        ({"system": {"Kx": 1}}, "system.Kx"),
        ({"extra": 1}, "extra"),
    ],
)
def test_config_errors_name_field(over, field):
    with pytest.raises(config.ConfigError) as info:
        config.from_dict(_raw(**over))
    assert info.value.field == field
    assert field in str(info.value)


# --- cli ---------------------------------------------------------------------


def test_cli_complexity(capsys):
    assert cli.main(["complexity", "--kind", "1d", "--cl", "2", "--cl1", "3", "--nt", "4"]) == 0
    assert json.loads(capsys.readouterr().out) == {"kind": "1d", "flops": 51, "weights": 12}
    assert cli.main(["complexity", "--kind", "2D", "--cl", "1", "--cl1", "1", "--k", "2", "--nt", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["flops"] == 12
    assert cli.main(["complexity", "--kind", "3d", "--cl", "0", "--cl1", "1"]) == 2


def test_cli_usage_errors(tmp_path, monkeypatch):
    assert cli.main(["nope"]) == 2
    assert cli.main(["train", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    (tmp_path / "bad.json").write_text(json.dumps(_raw(train={"epochs": 0})))
    assert cli.main(["train", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("EQUINET_THREADS", "zero")
    assert cli.main(["complexity", "--kind", "1d", "--cl", "1", "--cl1", "1"]) == 2


def test_cli_orbits(tmp_path, capsys):
    sig = SetSignature.independent(users=2, antennas=3, rf=2).to_dict()
    (tmp_path / "s.json").write_text(json.dumps({"signature": sig, "expected": {"orbits": 8, "masked": 4}}))
    assert cli.main(["orbits", "--signature", str(tmp_path / "s.json")]) == 0
    assert json.loads(capsys.readouterr().out) == {"orbits": 8, "masked": 4}
    (tmp_path / "w.json").write_text(json.dumps({"signature": sig, "expected": {"orbits": 9}}))
    assert cli.main(["orbits", "--signature", str(tmp_path / "w.json")]) == 1
    joint = {"sets": [{"name": "rx", "size": 4}, {"name": "tx", "size": 4}], "joint_groups": [[0, 1]],
             "out_space": ["tx"], "in_space": ["rx", "tx"], "expected": {"orbits": 5}}
    (tmp_path / "j.json").write_text(json.dumps(joint))
    assert cli.main(["orbits", "--signature", str(tmp_path / "j.json")]) == 0


def test_cli_gradcheck(capsys):
    assert cli.main(["gradcheck", "--problem", "p1", "--seed", "0"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert cli.main(["gradcheck", "--problem", "zz"]) == 2


@pytest.mark.parametrize("problem, channel, baselines", [
    ("hybrid3d", "sv", "mrt,zf,wmmse,pem"),
    ("power", "pc_gains", "wmmse_power,full_power"),
    ("wideband4d", "wideband", "mrt,wmmse"),
])
def test_cli_pipeline(tmp_path, capsys, problem, channel, baselines):
    raw = {"version": 1, "problem": problem, "system": {"K": 2, "N_t": 4, "N_s": 2, "M": 2},
           "model": {"hidden": [4, 4], "norm": True}, "channel": {"kind": channel, "D": 2},
           "train": {"epochs": 1, "batch_size": 20, "n_train": 40, "n_val": 10}, "data": {"n_samples": 16, "seed": 3}}
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(raw))
    data, ckpt, out = tmp_path / "d.wt", tmp_path / "ckpt", tmp_path / "r.csv"
    assert cli.main(["gen-channels", "--config", str(cfg), "--out", str(data)]) == 0
    assert cli.main(["train", "--config", str(cfg), "--out", str(ckpt)]) == 0
    manifest = json.loads((ckpt / "manifest.json").read_text())
    assert manifest["seed"] == 0 and manifest["orbits"]["n_retained"] >= 3
    assert (ckpt / "history.csv").read_text().startswith("epoch,")
    assert cli.main(["eval", "--ckpt", str(ckpt), "--data", str(data), "--baselines", baselines,
                     "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["algorithm", "mean_sum_rate_bpshz", "relative_pct", "samples", "seed"]
    assert [r[0] for r in rows[1:]] == baselines.split(",") + ["gnn"]
    assert max(float(r[2]) for r in rows[1:-1]) == pytest.approx(100.0)
    assert all(r[3] == "16" and r[4] == "3" for r in rows[1:])
    assert cli.main(["audit", "--ckpt", str(ckpt), "--trials", "5"]) == 0
    capsys.readouterr()
    assert cli.main(["eval", "--ckpt", str(ckpt), "--data", str(data), "--baselines", "magic"]) == 2
