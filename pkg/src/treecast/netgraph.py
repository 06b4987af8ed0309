"""Directed network topologies with bidirectional link pairs.

A topology is a set of integer nodes ``0..V-1`` and directed edges with
positive capacity.  Links are physically bidirectional: every directed edge
has an antiparallel twin, and the two directions are independent capacity
resources.  Edge ids are assigned canonically -- undirected pairs are sorted,
each pair occupies two consecutive ids, so ``eid ^ 1`` is always the reverse
edge.
"""

from __future__ import annotations

import importlib.resources
from collections import deque
from dataclasses import dataclass

import numpy as np


class TopologyError(ValueError):
    """Raised for malformed topology files or invalid graph parameters."""


@dataclass(frozen=True)
class Edge:
    """One directed edge: ``u -> v`` with a positive capacity (volume/slot)."""

    u: int
    v: int
    capacity: float


class Network:
    """Immutable directed graph over nodes ``0..num_nodes-1``.

    Construction validates the structural invariants: no self-loops, no
    duplicate directed edges, every edge has its antiparallel twin, all
    capacities positive, and the graph is strongly connected (which, given
    the twin invariant, equals connectivity of the undirected view).
    """

    def __init__(self, num_nodes: int, links):
        """``links`` is an iterable of ``(u, v, capacity)`` undirected links."""
        if num_nodes < 2:
            raise TopologyError("a network needs at least 2 nodes")
        self.num_nodes = int(num_nodes)

        seen: dict[tuple[int, int], float] = {}
        for u, v, cap in links:
            u, v, cap = int(u), int(v), float(cap)
            if u == v:
                raise TopologyError(f"self-loop on node {u}")
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise TopologyError(f"link ({u},{v}) outside node range 0..{num_nodes - 1}")
            if cap <= 0:
                raise TopologyError(f"link ({u},{v}) has non-positive capacity {cap}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise TopologyError(f"duplicate link ({u},{v})")
            seen[key] = cap

        self.links = tuple(sorted(seen.items()))  # ((u,v), cap) with u < v
        edges = []
        for (u, v), cap in self.links:
            edges.append(Edge(u, v, cap))
            edges.append(Edge(v, u, cap))
        self.edges: tuple[Edge, ...] = tuple(edges)
        self.num_edges = len(edges)
        self._eid = {(e.u, e.v): i for i, e in enumerate(self.edges)}
        self.capacities = np.array([e.capacity for e in self.edges], dtype=np.float64)

        # CSR adjacency (neighbors ascending) for the search kernels.
        nbrs: list[list[tuple[int, int]]] = [[] for _ in range(num_nodes)]
        for i, e in enumerate(self.edges):
            nbrs[e.u].append((e.v, i))
        indptr = [0]
        adj_node: list[int] = []
        adj_eid: list[int] = []
        for u in range(num_nodes):
            for v, eid in sorted(nbrs[u]):
                adj_node.append(v)
                adj_eid.append(eid)
            indptr.append(len(adj_node))
        self.adj_indptr = np.array(indptr, dtype=np.int32)
        self.adj_node = np.array(adj_node, dtype=np.int32)
        self.adj_eid = np.array(adj_eid, dtype=np.int32)

        if not self._connected():
            raise TopologyError("topology is not connected")

    def _connected(self) -> bool:
        seen = np.zeros(self.num_nodes, dtype=bool)
        q = deque([0])
        seen[0] = True
        while q:
            u = q.popleft()
            for k in range(self.adj_indptr[u], self.adj_indptr[u + 1]):
                v = int(self.adj_node[k])
                if not seen[v]:
                    seen[v] = True
                    q.append(v)
        return bool(seen.all())

    def edge_id(self, u: int, v: int) -> int:
        """Id of the directed edge ``u -> v``; KeyError if absent."""
        return self._eid[(u, v)]

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._eid

    def reverse_id(self, eid: int) -> int:
        return eid ^ 1

    def degree(self, u: int) -> int:
        """Number of undirected links incident to ``u``."""
        return int(self.adj_indptr[u + 1] - self.adj_indptr[u])

    def neighbors(self, u: int):
        return [int(v) for v in self.adj_node[self.adj_indptr[u]:self.adj_indptr[u + 1]]]

    def __repr__(self) -> str:
        return f"Network(nodes={self.num_nodes}, links={len(self.links)})"


def load_topology(source) -> Network:
    """Load a topology from an edge-list file or a builtin name.

    The file format is one undirected link per line, ``<u> <v> <capacity>``
    (capacity may be omitted and defaults to 1.0); ``#`` starts a comment.
    ``source`` may also be the name of a builtin topology
    (``"gscale"``, ``"weakest_link"``).
    """
    name = str(source)
    if name in _BUILTINS:
        return _BUILTINS[name]()
    lines = _read_lines(name)
    links = []
    max_node = -1
    for ln, raw in lines:
        parts = raw.split()
        if len(parts) not in (2, 3):
            raise TopologyError(f"line {ln}: expected '<u> <v> [capacity]', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
            cap = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise TopologyError(f"line {ln}: {exc}") from exc
        links.append((u, v, cap))
        max_node = max(max_node, u, v)
    if not links:
        raise TopologyError("no links in topology file")
    return Network(max_node + 1, links)


def _read_lines(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise TopologyError(f"cannot read topology {path!r}: {exc}") from exc
    out = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            out.append((ln, stripped))
    return out


def save_topology(net: Network, path: str) -> None:
    """Write the edge-list form (sorted undirected links, one per line)."""
    with open(path, "w") as fh:
        fh.write(f"# {net.num_nodes} nodes, {len(net.links)} links\n")
        for (u, v), cap in net.links:
            fh.write(f"{u} {v} {cap:g}\n")


def generate_random_topology(num_nodes: int, num_links: int, seed: int) -> Network:
    """Random connected topology: a Hamiltonian cycle plus extra random links.

    The cycle guarantees connectivity and minimum degree 2; the remaining
    ``num_links - num_nodes`` links are drawn uniformly over the non-edges.
    All capacities are 1.0.  Deterministic for a given seed.
    """
    if num_links < num_nodes:
        raise TopologyError(f"need at least {num_nodes} links for a cycle on {num_nodes} nodes")
    max_links = num_nodes * (num_nodes - 1) // 2
    if num_links > max_links:
        raise TopologyError(f"{num_links} links exceed the {max_links} possible on {num_nodes} nodes")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(num_nodes)
    links = set()
    for i in range(num_nodes):
        u, v = int(perm[i]), int(perm[(i + 1) % num_nodes])
        links.add((min(u, v), max(u, v)))
    while len(links) < num_links:
        u = int(rng.integers(num_nodes))
        v = int(rng.integers(num_nodes))
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key in links:
            continue
        links.add(key)
    return Network(num_nodes, [(u, v, 1.0) for u, v in sorted(links)])


def hop_distances(net: Network) -> np.ndarray:
    """All-pairs hop counts on the undirected view (BFS from every node).

    Returns an int32 matrix ``D`` with ``D[u, v]`` = minimum number of links
    between ``u`` and ``v``; symmetric, zero diagonal.
    """
    n = net.num_nodes
    dist = np.full((n, n), -1, dtype=np.int32)
    indptr, nbr = net.adj_indptr, net.adj_node
    for s in range(n):
        row = dist[s]
        row[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            du = row[u]
            for k in range(indptr[u], indptr[u + 1]):
                v = int(nbr[k])
                if row[v] < 0:
                    row[v] = du + 1
                    q.append(v)
    return dist


def gscale() -> Network:
    """The bundled 12-node / 19-link inter-datacenter site graph."""
    return _bundled("gscale.topo")


def weakest_link() -> Network:
    """Nine-node two-sender demo whose natural trees contend on one trunk link."""
    return _bundled("weakest_link.topo")


def _bundled(fname: str) -> Network:
    ref = importlib.resources.files("treecast.data").joinpath(fname)
    with importlib.resources.as_file(ref) as path:
        return load_topology(str(path))


_BUILTINS = {"gscale": gscale, "weakest_link": weakest_link}
