"""Reference semantics of the eight primitives on plain per-member buffers.

Deliberately naive and independent of the machine, the codec and the
pipelines: members are plain byte arrays in group order.
"""
from __future__ import annotations

import numpy as np

from .errors import SizeMismatch

ROOTED = {"scatter", "gather", "reduce", "broadcast"}


def _as_members(state):
    members = [np.asarray(m, dtype=np.uint8).reshape(-1) for m in state]
    if not members:
        raise SizeMismatch("a group needs at least one member")
    n = members[0].size
    if any(m.size != n for m in members):
        raise SizeMismatch("all members must hold the same number of bytes")
    if n % 8:
        raise SizeMismatch(f"member length {n} is not a multiple of 8")
    return members


def _slots(buf, count):
    if buf.size % (8 * count):
        raise SizeMismatch(f"{buf.size} bytes cannot be cut into {count} slots of whole words")
    return np.split(buf, count)


_OPS = {"sum": np.add, "min": np.minimum, "max": np.maximum, "bitor": np.bitwise_or}


def _fold(buffers, dtype, op):
    np_dtype = np.dtype(f"<u{dtype.width_bytes}")
    fn = _OPS[op.value]
    acc = buffers[0].view(np_dtype).copy()
    for b in buffers[1:]:
        acc = fn(acc, b.view(np_dtype))
    return acc.view(np.uint8)


def oracle_run(primitive: str, state, dtype=None, op=None, root_buffer=None):
    """Return ``(members_after, host_output)``.

    ``primitive`` is one of alltoall, reduce_scatter, all_gather, all_reduce,
    scatter, gather, reduce, broadcast.  ``host_output`` is ``None`` except for
    gather and reduce.  Scatter and broadcast take the root data from
    ``root_buffer``; their ``state`` only supplies the member count.
    """
    G = len(state)
    if primitive in ("scatter", "broadcast"):
        if root_buffer is None:
            raise SizeMismatch(f"{primitive} needs a root buffer")
        root = np.asarray(root_buffer, dtype=np.uint8).reshape(-1)
        if root.size % 8:
            raise SizeMismatch("root buffer length must be a multiple of 8")
        if primitive == "scatter":
            return [s.copy() for s in _slots(root, G)], None
        return [root.copy() for _ in range(G)], None

    members = _as_members(state)
    if primitive == "alltoall":
        slots = [_slots(m, G) for m in members]
        return [np.concatenate([slots[s][p] for s in range(G)]) for p in range(G)], None
    if primitive == "reduce_scatter":
        slots = [_slots(m, G) for m in members]
        return [_fold([slots[q][p] for q in range(G)], dtype, op) for p in range(G)], None
    if primitive == "all_gather":
        whole = np.concatenate(members)
        return [whole.copy() for _ in range(G)], None
    if primitive == "all_reduce":
        total = _fold(members, dtype, op)
        return [total.copy() for _ in range(G)], None
    if primitive == "gather":
        return [m.copy() for m in members], np.concatenate(members)
    if primitive == "reduce":
        return [m.copy() for m in members], _fold(members, dtype, op)
    raise ValueError(f"unknown primitive {primitive!r}")
