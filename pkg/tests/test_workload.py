import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pimsim.workload import (
    LayerSpec,
    NetworkSpec,
    build_vgg,
    cycles_wait,
    get_network,
    layer_macs,
    network_ops,
    network_to_dict,
    output_dims,
    values_wait,
)


def test_cycles_wait_first_layer():
    # two full rows of 224 plus three values
    assert cycles_wait(224, 3) == 451
    assert values_wait(224, 3, 64) == 451 * 64


def test_cycles_wait_pointwise():
    assert cycles_wait(28, 1) == 1


@pytest.mark.parametrize("w,l", [(2, 3), (5, 0)])
def test_cycles_wait_rejects(w, l):
    with pytest.raises(ValueError):
        cycles_wait(w, l)


def test_values_wait_rejects_zero_channels():
    with pytest.raises(ValueError):
        values_wait(10, 3, 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 512), st.integers(1, 11), st.integers(1, 1024))
def test_wait_matches_row_count(w, l, n):
    if l > w:
        return
    # l-1 complete rows of w values, then l more values of the next row
    rows = [[1] * w for _ in range(l - 1)]
    expected = sum(len(r) for r in rows) + l
    assert cycles_wait(w, l) == expected
    assert values_wait(w, l, n) == expected * n


@pytest.mark.parametrize("variant,conv,fc", [("A", 8, 3), ("B", 10, 3), ("C", 13, 3), ("D", 13, 3), ("E", 16, 3)])
def test_vgg_depths(variant, conv, fc):
    net = build_vgg(variant)
    kinds = [layer.kind for layer in net.layers]
    assert kinds.count("conv") == conv and kinds.count("fc") == fc


def test_vgg_e_first_layer():
    first = build_vgg("E").layers[0]
    assert (first.c, first.h, first.w, first.n, first.l) == (3, 224, 224, 64, 3)


def test_vgg_c_pointwise_layers():
    assert sum(1 for layer in build_vgg("C").layers if layer.kind == "conv" and layer.l == 1) == 3


def test_spatial_ladder():
    sizes = sorted({layer.h for layer in build_vgg("E").layers if layer.kind == "conv"}, reverse=True)
    assert sizes == [224, 112, 56, 28, 14]
    last = [layer for layer in build_vgg("E").layers if layer.kind == "conv"][-1]
    assert output_dims(last) == (512, 7, 7)


def test_vgg16_ops():
    # 15.47 GMAC for VGG-16 is the widely quoted figure
    assert 2 * sum(layer_macs(layer) for layer in build_vgg("D").layers) == pytest.approx(30.94e9, rel=0.01)


def test_vgg_e_ops_near_throughput_ratio():
    assert network_ops(build_vgg("E")) == pytest.approx(39.26e9, rel=0.05)


def test_chain_break_detected():
    a = LayerSpec("conv", 3, 8, 8, 4, 3, name="a")
    b = LayerSpec("conv", 5, 8, 8, 4, 3, name="b")
    with pytest.raises(ValueError, match="chain"):
        NetworkSpec("bad", (a, b))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="pool", c=1, h=1, w=1, n=1, l=1),
        dict(kind="fc", c=10, h=2, w=1, n=1, l=1),
        dict(kind="conv", c=1, h=4, w=4, n=1, l=3, stride=2),
        dict(kind="conv", c=1, h=2, w=2, n=1, l=3),
    ],
)
def test_bad_layers(kwargs):
    with pytest.raises(ValueError):
        LayerSpec(**kwargs)


def test_json_round_trip(tmp_path):
    net = build_vgg("A")
    path = tmp_path / "net.json"
    path.write_text(json.dumps(network_to_dict(net)))
    assert get_network(str(path)) == net


def test_unknown_variant():
    with pytest.raises(ValueError):
        build_vgg("Z")
