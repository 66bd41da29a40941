"""
Slicing a virtual hypercube
===========================

Nodes of a hypercube map to PEs with dimension 0 fastest.  A mask selects
the dimensions that communicate; every combination of the unselected
coordinates gives one independent group.
"""
import numpy as np

from pimcoll import new_hypercube, new_topology, parse_mask, slice_groups
from pimcoll.collectives import layout_for

hc = new_hypercube([4, 2, 8], new_topology(1, 1))
print(hc, "has", hc.num_nodes, "nodes, strides", hc.strides())

for text in ("100", "011", "101", "111"):
    mask = parse_mask(text, hc)
    groups = slice_groups(hc, mask)
    lay = layout_for(hc, mask)
    print(f"mask {text}: {len(groups):2d} groups of {lay.group_size:2d}, "
          f"{lay.w} lanes per entangled group, spanning {lay.k} entangled groups")
    print("   group 0 =", groups[0].members)

# %%
# Groups always partition the cube.
for text in ("100", "010", "001", "110", "011", "101", "111"):
    members = np.sort(np.concatenate([g.members for g in slice_groups(hc, parse_mask(text, hc))]))
    assert np.array_equal(members, np.arange(hc.num_nodes))
print("every mask partitions the 64 nodes")

# %%
# Mask "100" gives groups of 4 that share their entangled groups with other
# groups.  That works, but strict mode rejects it, since such a group never
# owns a whole burst.
