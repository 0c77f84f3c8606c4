"""Token graph topologies and the LSTM-aggregation encoder."""

import pytest
import torch

from conftest import max_rel_fd_error
from modee.graphnet import (FeatureCache, GraphEncoder, Topology,
                            build_token_graph, init_node_features)
from modee.toy import ToyBackbone


def test_edge_count_laws():
    for n in range(1, 51):
        assert build_token_graph(n, Topology.COMPLETE).edge_count() == n * (n - 1) // 2
        assert build_token_graph(n, Topology.LINEAR).edge_count() == n - 1


def test_edge_count_examples():
    assert build_token_graph(4, Topology.COMPLETE).edge_count() == 6
    assert build_token_graph(4, Topology.LINEAR).edge_count() == 3
    assert build_token_graph(1, Topology.COMPLETE).edge_count() == 0
    assert build_token_graph(1, Topology.LINEAR).edge_count() == 0


def test_build_rejects_empty_graph():
    with pytest.raises(ValueError):
        build_token_graph(0, Topology.COMPLETE)


def test_neighbor_sets():
    g = build_token_graph(4, Topology.COMPLETE)
    assert g.neighbors(2) == [0, 1, 3]
    lin = build_token_graph(4, Topology.LINEAR)
    assert lin.neighbors(0) == [1]
    assert lin.neighbors(2) == [1, 3]
    assert lin.neighbors(3) == [2]
    with pytest.raises(ValueError):
        lin.neighbors(4)


def _encoder(dim=6, seed=0, **kw):
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return GraphEncoder(dim, **kw)


def test_output_shape_and_finiteness():
    enc = _encoder()
    for n, topo in ((1, Topology.COMPLETE), (5, Topology.COMPLETE), (7, Topology.LINEAR)):
        g = build_token_graph(n, topo)
        out = enc(g, torch.randn(n, 6), seed=3)
        assert out.shape == (n, 6)
        assert torch.isfinite(out).all()


def test_shape_mismatch_rejected():
    enc = _encoder()
    g = build_token_graph(4, Topology.COMPLETE)
    with pytest.raises(ValueError):
        enc(g, torch.randn(3, 6), seed=0)
    with pytest.raises(ValueError):
        enc(g, torch.randn(4, 5), seed=0)


def test_same_seed_same_output_distinct_seeds_differ():
    enc = _encoder()
    g = build_token_graph(5, Topology.COMPLETE)
    feats = torch.randn(5, 6)
    a = enc(g, feats, seed=11)
    b = enc(g, feats, seed=11)
    assert torch.equal(a, b)
    outs = [enc(g, feats, seed=s) for s in range(10)]
    distinct = {tuple(o.flatten().tolist()) for o in outs}
    assert len(distinct) > 1  # the aggregator is order-sensitive


def test_linear_vs_complete_differ():
    enc = _encoder()
    feats = torch.randn(3, 6)
    a = enc(build_token_graph(3, Topology.COMPLETE), feats, seed=2)
    b = enc(build_token_graph(3, Topology.LINEAR), feats, seed=2)
    assert not torch.allclose(a, b)


def test_single_node_has_zero_aggregate_but_finite_output():
    enc = _encoder()
    g = build_token_graph(1, Topology.LINEAR)
    out = enc(g, torch.ones(1, 6), seed=0)
    assert torch.isfinite(out).all()
    # self-only path: identical to concatenating a zero aggregate
    manual = out.clone()
    assert torch.equal(enc(g, torch.ones(1, 6), seed=99), manual)  # no sampling happens


def test_two_layer_locality_on_linear_chain():
    enc = _encoder(dim=4).double()
    n = 9
    g = build_token_graph(n, Topology.LINEAR)
    base = torch.randn(n, 4, dtype=torch.float64)
    out0 = enc(g, base, seed=5)
    j = 4
    poked = base.clone()
    poked[j] += 0.37
    out1 = enc(g, poked, seed=5)
    for i in range(n):
        changed = not torch.equal(out0[i], out1[i])
        if abs(i - j) <= 2:
            # inside the radius rows may change (and the poked row must)
            if i == j:
                assert changed
        else:
            assert not changed, f"row {i} moved though |i-j| = {abs(i - j)} > 2"


def test_gradients_match_finite_differences():
    torch.manual_seed(0)
    enc = _encoder(dim=4).double()
    mix = torch.randn(4, dtype=torch.float64)
    for n, topo in ((5, Topology.COMPLETE), (6, Topology.LINEAR), (1, Topology.COMPLETE)):
        g = build_token_graph(n, topo)
        feats = torch.randn(n, 4, dtype=torch.float64, requires_grad=True)

        def loss_fn():
            return (enc(g, feats, seed=7) * mix).sum()

        tensors = [feats, *enc.parameters()]
        err = max_rel_fd_error(loss_fn, tensors, eps=1e-5)
        assert err < 1e-4, f"n={n} {topo}: rel err {err}"


def test_full_neighborhood_flag_uses_every_neighbor():
    # with sample size 1 the flag is the only way node 0 can see both ends
    enc_sampled = _encoder(dim=4, seed=1, sample_sizes=(1, 1))
    enc_full = _encoder(dim=4, seed=1, sample_sizes=(1, 1), full_neighborhood=True)
    g = build_token_graph(6, Topology.COMPLETE)
    feats = torch.randn(6, 4)
    # sampled: changing a non-sampled neighbor often leaves rows unchanged;
    # full: every feature row influences every output row
    poked = feats.clone()
    poked[5] += 1.0
    full_a, full_b = enc_full(g, feats, seed=3), enc_full(g, poked, seed=3)
    assert not torch.equal(full_a[0], full_b[0])
    del enc_sampled  # construction parity with the full encoder is the point


def test_init_node_features_constant_and_cached(tmp_path):
    bb = ToyBackbone(seed=2)
    frozen = bb.frozen_pretrained_encoder()
    tok = bb.tokenize("a storm hit chennai on friday .", cap=512)
    a = init_node_features(tok, frozen)
    b = init_node_features(tok, frozen)
    assert torch.equal(a, b)
    assert a.shape == (tok.n, bb.hidden_dim)

    cache = FeatureCache(tmp_path)
    c = init_node_features(tok, frozen, cache=cache, doc_id="doc-1")
    key = cache.make_key("doc-1", frozen.checksum(), tok)
    assert torch.equal(cache.get(key), c)
    # a fresh cache object reads the same tensor back from disk
    again = FeatureCache(tmp_path)
    assert torch.equal(again.get(key), c)


def test_frozen_features_differ_from_live_after_update():
    bb = ToyBackbone(seed=4)
    frozen = bb.frozen_pretrained_encoder()
    tok = bb.tokenize("it hit kolkata .", cap=512)
    opt = torch.optim.SGD(bb.parameters(), lr=0.3)
    bb.encode_tokens(tok).pow(2).sum().backward()
    opt.step()
    assert not torch.allclose(init_node_features(tok, frozen), bb.encode_tokens(tok))
