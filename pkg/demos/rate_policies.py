#!/usr/bin/env python3
"""FCFS vs SRPT vs MMF on one bottleneck link, slot by slot."""

import numpy as np

from treecast import cohort as ch
from treecast import netgraph as ng
from treecast import rates as rt
from treecast import steiner as st


def job(net, rid, volume, arrival):
    # every job wants the single 0->1 link
    eids = np.array([net.edge_id(0, 1)], dtype=np.int32)
    req = ch.TransferRequest(rid=rid, arrival=arrival, source=0,
                             receivers=(1,), volume=volume)
    tree = st.ForwardingTree(root=0, terminals=frozenset({1}),
                             edges=((0, 1),), eids=eids)
    return ch.PartitionJob(request=req, index=1, receivers=(1,),
                           tree=tree, residual=volume)


def drain(policy):
    net = ng.Network(2, [(0, 1, 1.0)])
    jobs = [job(net, 0, 6.0, arrival=0),
            job(net, 1, 2.0, arrival=1),
            job(net, 2, 2.0, arrival=1)]
    print(f"{policy}: three transfers of volume 6/2/2, arrivals 0/1/1")
    done = {}
    for slot in range(20):
        active = [j for j in jobs if j.arrival <= slot and j.residual > 1e-9]
        if not active and slot > 0:
            break
        vec = rt.dispatch(active, net, policy=policy)
        cells = []
        for j in jobs:
            r = vec.get(j.key, 0.0)
            cells.append(f"job{j.rid}={r:.2f}" if j.arrival <= slot else f"job{j.rid}=  - ")
            j.residual -= r
            if j.residual <= 1e-9 and j.rid not in done:
                done[j.rid] = slot + 1
        print(f"  slot {slot}: " + "  ".join(cells))
    finish = ", ".join(f"job{r} at {t}" for r, t in sorted(done.items()))
    print(f"  completions: {finish}")
    print(f"  mean completion: {np.mean(list(done.values())):.2f}")
    print()


if __name__ == "__main__":
    for policy in rt.POLICIES:
        drain(policy)
