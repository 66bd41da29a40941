"""How communication groups sit on entangled groups.

Every group produced by one mask meets each entangled group it touches in the
same lane pattern: ``w`` members on the lanes whose index bits belong to
selected dimensions.  A group therefore spans ``k = G / w`` entangled groups,
and member ``p`` of a group splits into a lane part ``p % w`` and an
entangled-group part ``p // w``.  The ``8 / w`` groups that share an
entangled group also share all their other entangled groups; such a set of
entangled groups is called a family here, and the host can treat every burst
of a family uniformly.

Moving a word between members of the same lane pattern is a translation of
the lane part.  Selected lane bits form one or two contiguous runs; a
translation applies one ``rot_lane``/``rot_word`` per run, with the shift
scaled to the run's low bit and the width set to its high bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hypercube import DimMask, HypercubeConfig, group_assignment, group_table
from ..topology import CHIPS_PER_RANK

LANE_BITS = 3


def _lane_bit_owners(hc: HypercubeConfig):
    strides = hc.strides() + [float("inf")]
    owners = []
    for bit in range(LANE_BITS):
        v = 1 << bit
        owners.append(next(i for i in range(hc.ndims) if strides[i] <= v < strides[i + 1]))
    return owners


def _runs(bits):
    runs = []
    for b in bits:
        if runs and runs[-1][1] == b:
            runs[-1][1] = b + 1
        else:
            runs.append([b, b + 1])
    return tuple((lo, hi) for lo, hi in runs)


@dataclass(frozen=True)
class GroupLayout:
    hc: HypercubeConfig
    mask: DimMask
    table: np.ndarray         # (ngroups, G) PE of each member
    pe_group: np.ndarray      # (P,) group of every cube PE
    pe_member: np.ndarray     # (P,) member index of every cube PE
    w: int
    runs: tuple               # (lo, hi) lane-bit runs of the selected lane bits
    lane_member: np.ndarray   # (8,) lane part of the member index for each lane
    add: np.ndarray           # (w, w) translation table on lane parts
    sub: np.ndarray           # (w, w) sub[x, y] = x - y
    neg: np.ndarray           # (w,)
    family_egs: np.ndarray    # (F, k) entangled groups of a family, by member part
    eg_family: np.ndarray     # (E,)
    eg_pos: np.ndarray        # (E,)

    @property
    def group_size(self) -> int:
        return self.table.shape[1]

    @property
    def num_groups(self) -> int:
        return self.table.shape[0]

    @property
    def k(self) -> int:
        return self.group_size // self.w

    @property
    def num_pes(self) -> int:
        return self.pe_group.size

    @property
    def num_egs(self) -> int:
        return self.num_pes // CHIPS_PER_RANK

    @property
    def pes(self) -> np.ndarray:
        return np.arange(self.num_pes)

    def translation_calls(self, u):
        """Yield ``(shift, width)`` per run for lane-part offsets ``u``."""
        off = 0
        for lo, hi in self.runs:
            size = 1 << (hi - lo)
            digit = (np.asarray(u) >> off) & (size - 1)
            yield digit << lo, 1 << hi
            off += hi - lo


def build_layout(hc: HypercubeConfig, mask: DimMask) -> GroupLayout:
    table = group_table(hc, mask)
    pe_group, pe_member = group_assignment(hc, mask)
    G = table.shape[1]

    owners = _lane_bit_owners(hc)
    sel_bits = [b for b in range(LANE_BITS) if mask.bits[owners[b]]]
    runs = _runs(sel_bits)
    w = 1 << len(sel_bits)

    lanes = np.arange(CHIPS_PER_RANK)
    lane_member = np.zeros(CHIPS_PER_RANK, dtype=np.int64)
    for i, b in enumerate(sel_bits):
        lane_member |= ((lanes >> b) & 1) << i
    pes = np.arange(hc.num_nodes)
    if np.any(pe_member % w != lane_member[pes % CHIPS_PER_RANK]):
        raise AssertionError("member index does not split into lane and entangled-group parts")

    # Digit-wise addition over the runs.
    x = np.arange(w)
    add = np.zeros((w, w), dtype=np.int64)
    off = 0
    for lo, hi in runs:
        size = 1 << (hi - lo)
        dx = (x[:, None] >> off) & (size - 1)
        dy = (x[None, :] >> off) & (size - 1)
        add |= ((dx + dy) % size) << off
        off += hi - lo
    neg = np.array([int(np.nonzero(add[v] == 0)[0][0]) for v in range(w)], dtype=np.int64)
    sub = add[:, neg]

    k = G // w
    group_egs = table[:, ::w] // CHIPS_PER_RANK
    if np.any(table.reshape(-1, k, w) // CHIPS_PER_RANK != group_egs[:, :, None]):
        raise AssertionError("a group's lane part crosses entangled groups")
    family_egs, _ = np.unique(group_egs, axis=0, return_inverse=True)
    E = hc.num_nodes // CHIPS_PER_RANK
    eg_family = np.full(E, -1, dtype=np.int64)
    eg_pos = np.full(E, -1, dtype=np.int64)
    F = family_egs.shape[0]
    eg_family[family_egs.reshape(-1)] = np.repeat(np.arange(F), k)
    eg_pos[family_egs.reshape(-1)] = np.tile(np.arange(k), F)
    if family_egs.size != E or np.any(eg_family < 0):
        raise AssertionError("families do not partition the entangled groups")

    return GroupLayout(hc, mask, table, pe_group, pe_member, w, runs, lane_member,
                       add, sub, neg, family_egs, eg_family, eg_pos)
