import numpy as np
import pytest

from linkgcn.dataset import FeatureSet, normalize_rows
from linkgcn.ips import (InstancePivotSubgraph, IpsConfig, add_edges, build_ips,
                         clamp_config, discover_nodes, normalize_node_features)
from linkgcn.knn import build_knn


def sorted_neighbor_oracle(feats):
    """Exhaustive-sort neighbor lists in float64, ties by id."""
    X = feats.astype(np.float64)
    X = X / np.linalg.norm(X, axis=1, keepdims=True)
    n = X.shape[0]
    out = []
    for i in range(n):
        out.append([j for _, j in sorted(((-float(X[i] @ X[j]), j)
                                          for j in range(n) if j != i))])
    return out


def test_config_validation():
    with pytest.raises(ValueError, match="k_per_hop"):
        IpsConfig(h=2, k_per_hop=(3,), u=1)
    with pytest.raises(ValueError, match="h must"):
        IpsConfig(h=0, k_per_hop=(), u=1)
    with pytest.raises(ValueError):
        IpsConfig(h=1, k_per_hop=(0,), u=1)


def test_clamp_config_warns():
    cfg = IpsConfig(h=2, k_per_hop=(200, 10), u=10)
    with pytest.warns(UserWarning, match="clamped"):
        out = clamp_config(cfg, 150)
    assert out.k_per_hop == (149, 10) and out.u == 10


def test_discover_single_hop(small_random_set):
    nbrs = build_knn(small_random_set, 10)
    nodes, hops = discover_nodes(3, nbrs, IpsConfig(h=1, k_per_hop=(3,), u=1))
    np.testing.assert_array_equal(nodes, nbrs.indices[3, :3])
    np.testing.assert_array_equal(hops, [1, 1, 1])


def test_discover_dedup_absorbs_second_hop():
    # 5 points on a line of decreasing similarity to point 0; pivot's 2
    # neighbors share their own top-2 with the hop-1 set, so hop 2 adds some
    # nodes but never re-adds hop-1 members, and hop_of keeps the minimum.
    feats = np.array([[1, 0], [0.95, 0.31], [0.9, 0.44], [0.0, 1.0], [-1, 0.0]],
                     dtype=np.float32)
    fs = normalize_rows(FeatureSet(features=feats))
    nbrs = build_knn(fs, 4)
    oracle = sorted_neighbor_oracle(fs.features)
    cfg = IpsConfig(h=2, k_per_hop=(2, 2), u=2)
    nodes, hops = discover_nodes(0, nbrs, cfg)
    # hand-run expansion with the oracle
    hop1 = oracle[0][:2]
    seen = {0, *hop1}
    expect_nodes = list(hop1)
    expect_hops = [1, 1]
    for q in hop1:
        for r in oracle[q][:2]:
            if r not in seen:
                seen.add(r)
                expect_nodes.append(r)
                expect_hops.append(2)
    assert list(nodes) == expect_nodes
    assert list(hops) == expect_hops
    assert 0 not in nodes


def test_discover_node_count_bound():
    rng = np.random.default_rng(21)
    fs = normalize_rows(FeatureSet(features=rng.standard_normal((100, 6)).astype(np.float32)))
    nbrs = build_knn(fs, 10)
    cfg = IpsConfig(h=2, k_per_hop=(10, 2), u=3)
    for pivot in range(0, 100, 7):
        nodes, hops = discover_nodes(pivot, nbrs, cfg)
        assert 10 <= len(nodes) <= 10 + 10 * 2
        assert int(np.sum(hops == 1)) == 10


def test_discover_k_exceeds_table(small_random_set):
    nbrs = build_knn(small_random_set, 5)
    with pytest.raises(ValueError, match="exceeds"):
        discover_nodes(0, nbrs, IpsConfig(h=1, k_per_hop=(6,), u=1))


def test_normalize_node_features_subtracts_pivot():
    feats = np.array([[1, 1], [3, 2], [1, 1]], dtype=np.float32)
    fs = FeatureSet(features=feats)
    out = normalize_node_features(fs, 0, np.array([1, 2]))
    np.testing.assert_array_equal(out, [[2, 1], [0, 0]])


def test_normalize_node_features_mean_oracle():
    rng = np.random.default_rng(3)
    fs = FeatureSet(features=rng.standard_normal((30, 5)).astype(np.float32))
    nodes = np.arange(1, 20)
    out = normalize_node_features(fs, 0, nodes)
    lhs = out.astype(np.float64).mean(axis=0)
    rhs = fs.features[nodes].astype(np.float64).mean(axis=0) - fs.features[0]
    np.testing.assert_allclose(lhs, rhs, atol=1e-6)


def test_add_edges_symmetrizes_one_direction():
    # a's global 1-NN is b, b's global 1-NN is outside the node set
    feats = np.array([[1.0, 0.0], [0.9, 0.436], [0.85, 0.527]], dtype=np.float32)
    fs = normalize_rows(FeatureSet(features=feats))
    nbrs = build_knn(fs, 2)
    # nodes {0, 2}: 0's 1-NN is 1 (outside), 2's 1-NN is 1 (outside)
    adj = add_edges(np.array([0, 2]), nbrs, 1)
    np.testing.assert_array_equal(adj, np.zeros((2, 2)))
    # nodes {1, 2}: 2's 1-NN is 1 -> symmetric edge even though 1's 1-NN is 0
    adj = add_edges(np.array([1, 2]), nbrs, 1)
    np.testing.assert_array_equal(adj, [[0, 1], [1, 0]])


def test_add_edges_rank_oracle():
    rng = np.random.default_rng(8)
    fs = normalize_rows(FeatureSet(features=rng.standard_normal((30, 4)).astype(np.float32)))
    nbrs = build_knn(fs, 5)
    oracle_lists = sorted_neighbor_oracle(fs.features)
    nodes = np.array(sorted(rng.choice(30, size=12, replace=False)))
    u = 3
    adj = add_edges(nodes, nbrs, u)
    node_set = set(int(v) for v in nodes)
    expect = np.zeros((len(nodes), len(nodes)))
    pos = {int(v): i for i, v in enumerate(nodes)}
    for q in nodes:
        for r in oracle_lists[q][:u]:
            if r in node_set:
                expect[pos[int(q)], pos[r]] = 1
                expect[pos[r], pos[int(q)]] = 1
    np.testing.assert_array_equal(adj, expect)


def test_add_edges_u_exceeds_table(small_random_set):
    nbrs = build_knn(small_random_set, 4)
    with pytest.raises(ValueError, match="u="):
        add_edges(np.array([0, 1]), nbrs, 5)


def test_build_ips_smallest_case(small_random_set):
    nbrs = build_knn(small_random_set, 3)
    ips = build_ips(0, small_random_set, nbrs, IpsConfig(h=1, k_per_hop=(1,), u=1))
    assert ips.size == 1
    assert ips.adjacency.shape == (1, 1) and ips.adjacency[0, 0] == 0


def test_build_ips_invariants(synth_1k_set, synth_1k_nbrs):
    cfg = IpsConfig(h=2, k_per_hop=(80, 5), u=5)
    rng = np.random.default_rng(0)
    for pivot in rng.choice(synth_1k_set.n, size=40, replace=False):
        ips = build_ips(int(pivot), synth_1k_set, synth_1k_nbrs, cfg)
        assert ips.pivot not in ips.nodes
        assert len(np.unique(ips.nodes)) == ips.size
        assert ips.hop1_count == min(80, synth_1k_set.n - 1)
        np.testing.assert_array_equal(ips.adjacency, ips.adjacency.T)
        assert np.all(np.diag(ips.adjacency) == 0)
        assert ips.features.shape == (ips.size, synth_1k_set.dim)
        # every hop-2 node is within the top-k2 lists of some hop-1 node
        hop1 = set(int(v) for v in ips.nodes[ips.hop_of == 1])
        for node in ips.nodes[ips.hop_of == 2]:
            parents = [q for q in hop1
                       if int(node) in synth_1k_nbrs.indices[q, :5]]
            assert parents


def test_build_ips_deterministic(synth_1k_set, synth_1k_nbrs):
    cfg = IpsConfig(h=2, k_per_hop=(10, 3), u=4)
    a = build_ips(17, synth_1k_set, synth_1k_nbrs, cfg)
    b = build_ips(17, synth_1k_set, synth_1k_nbrs, cfg)
    np.testing.assert_array_equal(a.nodes, b.nodes)
    assert a.features.tobytes() == b.features.tobytes()
    assert a.adjacency.tobytes() == b.adjacency.tobytes()


def test_build_ips_min_hop_recorded(synth_1k_set, synth_1k_nbrs):
    cfg = IpsConfig(h=2, k_per_hop=(20, 5), u=5)
    ips = build_ips(5, synth_1k_set, synth_1k_nbrs, cfg)
    hop1_nodes = ips.nodes[ips.hop_of == 1]
    np.testing.assert_array_equal(hop1_nodes, synth_1k_nbrs.indices[5, :20])
    # nothing tagged hop 2 may sit in the pivot's top-k1 list
    assert not set(ips.nodes[ips.hop_of == 2]) & set(synth_1k_nbrs.indices[5, :20].tolist())
