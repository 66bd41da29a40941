"""
Entangled groups and the byte transpose
=======================================

A rank has 8 chips.  One 64-bit bus beat carries one byte to each chip, so a
64-byte burst lands as 8 bytes in each of the 8 banks that share a bank id.
Those 8 banks form an entangled group.  The host sees the same burst as 8
contiguous 64-bit words.  Converting between the two views is an 8x8 byte
transpose.
"""
import numpy as np

from pimcoll import new_topology
from pimcoll.codec import block_to_hex, domain_transfer, rot_lane, rot_word
from pimcoll.topology import decompose, entangled_group_of

topo = new_topology(channels=2, ranks=2)
print(topo, "->", topo.total_pes, "PEs in", topo.num_entangled_groups, "entangled groups")

# PE ids count chips fastest, then banks, ranks and channels.
for pe in (0, 7, 8, 70, 200):
    group, lane = entangled_group_of(topo, pe)
    print(f"PE {pe:3d} = (channel, rank, bank, chip) {decompose(topo, pe)}  group {group.id} lane {lane}")

# %%
# A burst in the PIM view: byte ``beat*8 + lane`` belongs to PE ``lane``.
# Label every byte with ``10*lane + beat`` and transpose.
pim = np.array([10 * lane + beat for beat in range(8) for lane in range(8)], dtype=np.uint8)
host = domain_transfer(pim)
print("PIM  view, beat 0:", pim[:8])
print("host view, word 0:", host[:8], "(all of lane 0's bytes)")
assert np.array_equal(domain_transfer(host), pim)

# %%
# Moving whole words between PEs of the group is a rotation.  On the host
# side that is ``rot_word``; done in the PIM view it is ``rot_lane``.  The
# two agree through the transpose, which is what lets cross-domain
# modulation skip the transpose entirely.
rng = np.random.default_rng(0)
blocks = rng.integers(0, 256, (1000, 64), dtype=np.uint8)
for width in (8, 4, 2):
    for k in range(width):
        assert np.array_equal(domain_transfer(rot_word(domain_transfer(blocks), k, width)),
                              rot_lane(blocks, k, width))
print("rotation fused through the transpose for every width and shift")
print("rot_word(arange, 3):", block_to_hex(rot_word(np.arange(64, dtype=np.uint8), 3))[:32], "...")
