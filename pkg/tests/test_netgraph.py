from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from treecast import netgraph as ng


def scipy_hops(net: ng.Network) -> np.ndarray:
    """Independent all-pairs hop counts via scipy's shortest_path."""
    n = net.num_nodes
    rows = [e.u for e in net.edges]
    cols = [e.v for e in net.edges]
    m = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return shortest_path(m, method="D", unweighted=True).astype(np.int32)


def test_single_link_distance():
    net = ng.Network(2, [(0, 1, 1.0)])
    d = ng.hop_distances(net)
    assert d[0, 1] == 1 and d[1, 0] == 1
    assert d[0, 0] == 0 and d[1, 1] == 0


def test_path_graph_distances():
    net = ng.Network(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)])
    d = ng.hop_distances(net)
    assert d[0, 3] == 3
    assert d[3, 0] == 3
    assert d[1, 3] == 2


def test_gscale_counts():
    net = ng.load_topology("gscale")
    assert net.num_nodes == 12
    assert len(net.links) == 19
    assert net.num_edges == 38
    degrees = [net.degree(u) for u in range(12)]
    assert min(degrees) >= 2


def test_every_edge_has_reverse():
    net = ng.gscale()
    for i, e in enumerate(net.edges):
        j = net.reverse_id(i)
        assert net.edges[j].u == e.v and net.edges[j].v == e.u
        assert net.edges[j].capacity == e.capacity
        assert net.edge_id(e.v, e.u) == j


@pytest.mark.parametrize("seed", range(100))
def test_random_topology_properties(seed):
    net = ng.generate_random_topology(20, 35, seed=seed)
    assert len(net.links) == 35
    assert net.num_edges == 70
    assert min(net.degree(u) for u in range(20)) >= 2
    # connectivity is validated at construction; reaching here implies it
    d = ng.hop_distances(net)
    assert (d >= 0).all()


def test_random_topology_deterministic():
    a = ng.generate_random_topology(30, 60, seed=7)
    b = ng.generate_random_topology(30, 60, seed=7)
    assert a.links == b.links
    c = ng.generate_random_topology(30, 60, seed=8)
    assert a.links != c.links


def test_random_topology_rejects_bad_params():
    with pytest.raises(ng.TopologyError):
        ng.generate_random_topology(10, 9, seed=0)  # fewer links than cycle
    with pytest.raises(ng.TopologyError):
        ng.generate_random_topology(5, 11, seed=0)  # more than complete graph


def test_hop_distances_match_scipy():
    for seed in range(20):
        net = ng.generate_random_topology(25, 50, seed=seed)
        mine = ng.hop_distances(net)
        theirs = scipy_hops(net)
        assert (mine == theirs).all()
    assert (ng.hop_distances(ng.gscale()) == scipy_hops(ng.gscale())).all()


def test_roundtrip_serialization(tmp_path):
    net = ng.generate_random_topology(15, 30, seed=42)
    path = tmp_path / "topo.txt"
    ng.save_topology(net, str(path))
    back = ng.load_topology(str(path))
    assert back.num_nodes == net.num_nodes
    assert back.links == net.links


def test_loader_accepts_comments_and_default_capacity(tmp_path):
    path = tmp_path / "t.topo"
    path.write_text("# comment\n0 1 2.5\n1 2   # trailing comment\n\n")
    net = ng.load_topology(str(path))
    assert net.num_nodes == 3
    assert net.edges[net.edge_id(0, 1)].capacity == 2.5
    assert net.edges[net.edge_id(1, 2)].capacity == 1.0


@pytest.mark.parametrize(
    "text",
    [
        "0 0 1.0",          # self-loop
        "0 1 1.0\n1 0 2.0",  # duplicate link
        "0 1 0.0",          # zero capacity
        "0 1 -1.0",         # negative capacity
        "0 1 1.0\n2 3 1.0",  # disconnected
        "0 1 x",            # unparseable
        "0 1 1.0 9 9",      # wrong field count
        "",                  # empty
    ],
)
def test_loader_rejects_malformed(tmp_path, text):
    path = tmp_path / "bad.topo"
    path.write_text(text)
    with pytest.raises(ng.TopologyError):
        ng.load_topology(str(path))


def test_missing_file_raises():
    with pytest.raises(ng.TopologyError):
        ng.load_topology("/nonexistent/nowhere.topo")
