"""treecast: slotted-time simulator for bulk multicast over inter-DC WANs.

The package is organized around the life of a transfer request:

- :mod:`treecast.netgraph` -- topologies (loading, random generation, hops)
- :mod:`treecast.steiner` -- load-aware forwarding-tree search
- :mod:`treecast.cohort` -- receiver partitioning and admission
- :mod:`treecast.rates` -- per-slot rate allocation policies
- :mod:`treecast.engine` -- workload generation and the simulation loop
- :mod:`treecast.metrics` -- summary statistics and report emission
- :mod:`treecast.cli` -- `treecast run` / `treecast sweep` entry points
"""

__version__ = "0.1.0"
