from collections import deque

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfroute.graph import (
    Network,
    all_pairs_bfs,
    build_ba,
    canonical_path,
    degree_histogram,
    read_edgelist,
    write_edgelist,
)

from .conftest import complete_graph, cycle_graph, path_graph, star_graph


def bfs_oracle(net: Network, src: int) -> list[int]:
    dist = [-1] * net.n
    dist[src] = 0
    q = deque([src])
    while q:
        u = q.popleft()
        for w in net.adjacency[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def as_nx(net: Network) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(net.n))
    g.add_edges_from(net.edges.tolist())
    return g


@pytest.mark.parametrize("m,m0", [(3, 3), (2, 5), (1, 1), (1, 4)])
def test_ba_edge_count(m, m0):
    n = 300
    net = build_ba(n, m, m0, 7)
    assert net.edge_count == m0 * (m0 - 1) // 2 + m * (n - m0)
    assert net.degree.sum() == 2 * net.edge_count
    assert nx.is_connected(as_nx(net))


def test_ba_thousand_node_counts():
    net = build_ba(1000, 3, 3, 0)
    # clique of 3 contributes 3 edges, 997 later nodes 3 each
    assert net.edge_count == 2994
    assert net.mean_degree == pytest.approx(5.988, abs=0)


def test_ba_small_is_k4():
    net = build_ba(4, 3, 3, 1)
    assert degree_histogram(net) == {3: 4}
    d = net.dist
    assert (d[~np.eye(4, dtype=bool)] == 1).all()


def test_ba_simple_graph():
    net = build_ba(500, 3, 4, 3)
    e = net.edges
    assert (e[:, 0] < e[:, 1]).all()
    assert len({tuple(x) for x in e.tolist()}) == len(e)


@pytest.mark.parametrize("n,m,m0", [(10, 4, 3), (3, 3, 3), (2, 3, 3), (10, 0, 3)])
def test_ba_rejects_bad_params(n, m, m0):
    with pytest.raises(ValueError):
        build_ba(n, m, m0, 0)


def test_ba_seed_reproducible():
    a = build_ba(400, 3, 3, 11)
    b = build_ba(400, 3, 3, 11)
    c = build_ba(400, 3, 3, 12)
    assert np.array_equal(a.edges, b.edges)
    assert not np.array_equal(a.edges, c.edges)


def test_bfs_path_and_star():
    p = path_graph(4)
    assert p.dist[0, 3] == 3
    assert p.next_hop[0, 3] == 1
    s = star_graph(2)
    assert s.dist[1, 2] == 2
    assert s.next_hop[1, 2] == 0


def test_bfs_diagonal():
    net = build_ba(100, 2, 2, 5)
    assert (np.diag(net.dist) == 0).all()
    assert (np.diag(net.next_hop) == -1).all()


def test_bfs_rejects_disconnected():
    net = Network(4, [(0, 1), (2, 3)])
    with pytest.raises(ValueError, match="not connected"):
        all_pairs_bfs(net)


def test_network_rejects_non_simple():
    with pytest.raises(ValueError):
        Network(3, [(0, 0)])
    with pytest.raises(ValueError):
        Network(3, [(0, 1), (1, 0)])


def test_dist_matches_independent_bfs():
    net = build_ba(600, 3, 3, 2)
    rng = np.random.default_rng(0)
    for src in rng.choice(net.n, 50, replace=False):
        assert net.dist[src].tolist() == bfs_oracle(net, int(src))


def test_dist_symmetric_and_edge_triangle():
    net = build_ba(200, 3, 3, 4)
    d = net.dist.astype(int)
    assert (d == d.T).all()
    for u, v in net.edges.tolist():
        assert (np.abs(d[u] - d[v]) <= 1).all()


def test_next_hop_walk_full():
    net = build_ba(200, 3, 3, 9)
    nxt, d = net.next_hop, net.dist
    for src in range(net.n):
        for dst in range(net.n):
            if src == dst:
                continue
            s, hops = src, 0
            while s != dst:
                t = nxt[s, dst]
                assert net.has_edge(s, t)
                s = t
                hops += 1
            assert hops == d[src, dst]


def test_next_hop_lowest_index_tiebreak():
    net = build_ba(150, 3, 3, 21)
    d = net.dist
    for src in range(0, net.n, 7):
        for dst in range(net.n):
            if src == dst:
                continue
            cands = [w for w in net.adjacency[src] if d[w, dst] == d[src, dst] - 1]
            assert net.next_hop[src, dst] == min(cands)


def test_canonical_path_examples(path4, square):
    assert canonical_path(path4, 1, 3) == [1, 2, 3]
    assert canonical_path(path4, 2, 3) == [2, 3]
    # both 0-1-2 and 0-3-2 are shortest; lexicographic minimum wins
    all_sp = sorted(nx.all_shortest_paths(as_nx(square), 0, 2))
    assert all_sp == [[0, 1, 2], [0, 3, 2]]
    assert canonical_path(square, 0, 2) == all_sp[0]


def test_canonical_path_is_lexicographic_minimum():
    net = build_ba(60, 2, 2, 13)
    g = as_nx(net)
    rng = np.random.default_rng(1)
    for _ in range(100):
        a, b = rng.choice(net.n, 2, replace=False)
        assert canonical_path(net, int(a), int(b)) == min(nx.all_shortest_paths(g, int(a), int(b)))


def test_canonical_path_rejects_same_node(path4):
    with pytest.raises(ValueError):
        canonical_path(path4, 2, 2)


def test_degree_histogram_small():
    assert degree_histogram(complete_graph(4)) == {3: 4}
    assert degree_histogram(star_graph(4)) == {4: 1, 1: 4}
    assert sum(degree_histogram(build_ba(300, 3, 3, 0)).values()) == 300


def test_degree_tail_exponent():
    # CCDF of P(k) ~ k^-3 falls as k^-2
    degs = np.concatenate([build_ba(10_000, 3, 3, s).degree for s in range(5)])
    ks = np.unique(degs)
    ccdf = np.array([(degs >= k).mean() for k in ks])
    sel = (ks >= 6) & (ccdf * len(degs) >= 50)
    slope = np.polyfit(np.log(ks[sel]), np.log(ccdf[sel]), 1)[0]
    assert -2.3 <= slope <= -1.7


def test_diameter_avg_is_mean_pair_distance():
    net = cycle_graph(5)
    # each node sees two at distance 1, two at distance 2
    assert net.diameter_avg == pytest.approx(1.5)
    assert path_graph(3).diameter_avg == pytest.approx(8 / 6)


def test_edgelist_roundtrip(tmp_path):
    net = build_ba(50, 2, 3, 17)
    path = tmp_path / "g.txt"
    write_edgelist(net, path)
    text = path.read_text().splitlines()
    assert text[0] == "# ba n=50 m=2 m0=3 seed=17"
    assert all(int(u) < int(v) for u, v in (line.split() for line in text[1:]))
    back = read_edgelist(path)
    assert back.n == 50
    assert np.array_equal(back.edges, net.edges)
    assert back.meta["seed"] == 17


@settings(max_examples=30, deadline=None)
@given(n=st.integers(5, 80), m=st.integers(1, 4), extra=st.integers(0, 3), seed=st.integers(0, 2**32))
def test_ba_invariants_property(n, m, extra, seed):
    m0 = m + extra
    if n <= m0:
        return
    net = build_ba(n, m, m0, seed)
    assert net.degree.sum() == 2 * (m0 * (m0 - 1) // 2 + m * (n - m0))
    d = net.dist
    assert (d >= 0).all()
    assert (d == d.T).all()
    for src in range(0, n, max(1, n // 10)):
        for dst in range(n):
            if dst != src:
                assert len(canonical_path(net, src, dst)) == d[src, dst] + 1
