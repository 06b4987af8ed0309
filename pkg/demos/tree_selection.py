#!/usr/bin/env python3
"""How load-aware weights steer forwarding trees.

Walks the nine-node weakest-link scenario: the first transfer books load on
the 2-3 trunk, which pushes the second transfer's tree search toward a
split that serves the private-spoke receivers directly.
"""

from treecast import cohort as ch
from treecast import netgraph as ng
from treecast import steiner as st


def show_tree(tag, tree, weights):
    edges = " ".join(f"{u}->{v}" for u, v in tree.edges)
    print(f"  {tag}: {edges}  (weight {st.tree_weight(tree, weights):g})")


def main():
    net = ng.weakest_link()
    dist = ng.hop_distances(net)
    loads = st.new_load_map(net)

    # Transfer A: source 0 -> {4, 5}, volume 5.  Nothing is loaded yet, so
    # the weight of every edge is just the volume itself.
    a = ch.TransferRequest(rid=0, arrival=0, source=0, receivers=(4, 5), volume=5.0)
    w = st.compute_weights(loads, 5.0)  # weights as A's search saw them
    jobs_a = ch.submit(a, n=1, p_f=1.0, net=net, loads=loads, dist=dist)
    print("after admitting A (0 -> {4,5}):")
    for job in jobs_a:
        show_tree(f"A cohort {job.index} {job.receivers}", job.tree, w)
    print(f"  trunk 2->3 load is now {loads[net.edge_id(2, 3)]:g}")
    print()

    # Transfer B: source 1 -> {6, 7, 8}.  Unsplit it must cross the loaded
    # trunk; with a partition budget it peels {7, 8} onto the free spokes.
    b = ch.TransferRequest(rid=1, arrival=0, source=1, receivers=(6, 7, 8), volume=5.0)
    for n, p_f, tag in ((1, 1.0, "single tree"), (2, float("inf"), "allowed to split")):
        trial = loads.copy()
        jobs = ch.submit(b, n=n, p_f=p_f, net=net, loads=trial, dist=dist)
        w = st.compute_weights(loads, 5.0)
        print(f"B (1 -> {{6,7,8}}), {tag}:")
        for job in jobs:
            show_tree(f"cohort {job.index} {job.receivers}", job.tree, w)
        print()


if __name__ == "__main__":
    main()
