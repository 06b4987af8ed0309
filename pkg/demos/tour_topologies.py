#!/usr/bin/env python3
"""Quick tour of the bundled and generated topologies."""

import numpy as np

from treecast import netgraph as ng


def describe(name, net):
    dist = ng.hop_distances(net)
    degrees = [net.degree(u) for u in range(net.num_nodes)]
    print(f"{name}:")
    print(f"  {net.num_nodes} nodes, {len(net.links)} links "
          f"({net.num_edges} directed edges)")
    print(f"  degree min/mean/max: {min(degrees)}/{np.mean(degrees):.1f}/{max(degrees)}")
    print(f"  hop diameter: {int(dist.max())}")
    caps = net.capacities
    print(f"  capacity per edge: {caps.min():g}..{caps.max():g}")
    print()


if __name__ == "__main__":
    describe("gscale (bundled wide-area site graph)", ng.gscale())
    describe("weakest_link (two senders, one contested trunk)", ng.weakest_link())
    for seed in (0, 1):
        describe(f"random 50 nodes / 150 links, seed {seed}",
                 ng.generate_random_topology(50, 150, seed=seed))
