"""Move data between MRAM and plain per-member buffers, and check runs against the oracle.

Everything here uses the machine's uncounted direct access, so loading inputs
and inspecting results never shows up in the cost counters.
"""
from __future__ import annotations

import numpy as np

from .collectives.report import layout_for
from .collectives.request import CommRequest, Primitive
from .oracle import oracle_run
from .rng import random_bytes


def member_states(m, hc, mask, offset: int, nbytes: int) -> np.ndarray:
    """``(groups, G, nbytes)`` bytes of every member, in group and member order."""
    table = layout_for(hc, mask).table
    region = m.load_region(np.arange(hc.num_nodes), offset, nbytes)
    return region[table]


def load_states(m, hc, mask, offset: int, states) -> None:
    table = layout_for(hc, mask).table
    states = np.asarray(states, dtype=np.uint8)
    data = np.empty((hc.num_nodes, states.shape[-1]), dtype=np.uint8)
    data[table] = states
    m.store_region(np.arange(hc.num_nodes), offset, data)


def output_bytes(req: CommRequest, group_size: int) -> int:
    """Length of each member's result region at ``base_offset``."""
    B = req.bytes_per_pe
    if req.primitive in (Primitive.REDUCE_SCATTER, Primitive.SCATTER):
        return B // group_size
    if req.primitive is Primitive.ALL_GATHER:
        return B * group_size
    return B


def seeded_inputs(m, hc, req: CommRequest, seed: int):
    """Fill every cube PE's input region from the seed; return root buffers if the primitive needs them."""
    lay = layout_for(hc, req.mask)
    B = req.bytes_per_pe
    data = random_bytes(seed, hc.num_nodes * B).reshape(hc.num_nodes, B)
    m.store_region(np.arange(hc.num_nodes), req.base_offset, data)
    if req.primitive in (Primitive.SCATTER, Primitive.BROADCAST):
        roots = random_bytes(seed, lay.num_groups * B, stream=1).reshape(lay.num_groups, B)
        return list(roots)
    return None


def expected(hc, req: CommRequest, before, host_buffers=None):
    """Oracle results: ``(members_after (groups, G, n), host outputs or None)``."""
    members, hosts = [], []
    for g, state in enumerate(before):
        root = None if host_buffers is None else host_buffers[g]
        after, host = oracle_run(req.primitive.value, list(state), req.dtype, req.op, root)
        members.append(np.stack(after))
        hosts.append(host)
    return np.stack(members), (hosts if hosts[0] is not None else None)


def mismatches(m, hc, req: CommRequest, before, host_buffers=None, host_out=None):
    """Describe every group whose machine result differs from the oracle; empty when all agree."""
    lay = layout_for(hc, req.mask)
    want_members, want_host = expected(hc, req, before, host_buffers)
    got = member_states(m, hc, req.mask, req.base_offset, output_bytes(req, lay.group_size))
    problems = []
    for g in range(lay.num_groups):
        bad = np.nonzero(np.any(got[g] != want_members[g], axis=1))[0]
        if bad.size:
            problems.append(f"group {g}: members {bad.tolist()} differ from the oracle")
        if want_host is not None and not np.array_equal(np.asarray(host_out[g]), want_host[g]):
            problems.append(f"group {g}: host output differs from the oracle")
    return problems
