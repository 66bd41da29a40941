"""
Where AlltoAll spends host work
===============================

Run one AlltoAll on a 32x32 cube under each technique preset and compare
the counters.  Every run is checked against the oracle first.
"""
import warnings

from pimcoll import PimMachine, SplitGroupWarning, make_request, new_hypercube, new_topology, parse_mask
from pimcoll.collectives import PRESET_ORDER, run_request
from pimcoll.harness import member_states, mismatches, seeded_inputs

warnings.simplefilter("ignore", SplitGroupWarning)
topo = new_topology(channels=4, ranks=4)
hc = new_hypercube([32, 32], topo)
cols = ("bus_bytes", "dt_blocks", "host_rot_ops", "host_staged_bytes", "pe_moved_bytes")

for mask in ("10", "01"):
    print(f"\nmask {mask}")
    print(f"{'preset':9s}" + "".join(f"{c:>18s}" for c in cols) + f"{'host_work':>12s}")
    for preset in PRESET_ORDER:
        m = PimMachine(topo)
        req = make_request("alltoall", parse_mask(mask, hc), 2048, "U64", "sum", preset)
        roots = seeded_inputs(m, hc, req, seed=1)
        before = member_states(m, hc, req.mask, 0, req.bytes_per_pe)
        rep = run_request(m, hc, req, roots)
        assert not mismatches(m, hc, req, before, roots, rep.host_outputs)
        d = rep.counters.to_dict()
        print(f"{preset:9s}" + "".join(f"{d[c]:>18d}" for c in cols) + f"{rep.counters.host_work:>12d}")

# %%
# The baseline rotates every source word on the host.  PE-assisted
# reordering turns that into one translation per burst.  In-register
# modulation drops the staging copies, and cross-domain modulation does the
# rotation in the PIM view, so no transposes remain.
