"""Physical DIMM hierarchy: channels, ranks, chips and banks.

PEs are numbered with the chip index varying fastest, then bank, rank and
channel.  Eight consecutive PE ids therefore always share one
(channel, rank, bank) triple and form an entangled group: the eight banks
that a single 64-bit bus transaction touches together.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import OutOfRange, ZeroDimension

CHIPS_PER_RANK = 8
BANKS_PER_CHIP = 8
PES_PER_RANK = CHIPS_PER_RANK * BANKS_PER_CHIP


@dataclass(frozen=True)
class Topology:
    channels: int
    ranks_per_channel: int
    chips_per_rank: int = CHIPS_PER_RANK
    banks_per_chip: int = BANKS_PER_CHIP

    def __post_init__(self):
        if self.channels < 1 or self.ranks_per_channel < 1:
            raise ZeroDimension(
                f"channels and ranks must be >= 1, got {self.channels}x{self.ranks_per_channel}",
                rule="topology needs at least one channel and one rank",
            )
        if self.chips_per_rank != CHIPS_PER_RANK or self.banks_per_chip != BANKS_PER_CHIP:
            raise ValueError("chips_per_rank and banks_per_chip are fixed at 8")

    @property
    def total_pes(self) -> int:
        return self.channels * self.ranks_per_channel * PES_PER_RANK

    @property
    def num_entangled_groups(self) -> int:
        return self.total_pes // CHIPS_PER_RANK

    def check_pe(self, pe: int) -> int:
        pe = int(pe)
        if not 0 <= pe < self.total_pes:
            raise OutOfRange(f"PE {pe} outside [0, {self.total_pes})")
        return pe


@dataclass(frozen=True)
class EntangledGroup:
    id: int
    members: tuple

    def lane_of(self, pe: int) -> int:
        try:
            return self.members.index(pe)
        except ValueError:
            raise OutOfRange(f"PE {pe} is not a member of entangled group {self.id}") from None


def new_topology(channels: int, ranks: int) -> Topology:
    return Topology(channels, ranks)


def decompose(topology: Topology, pe: int):
    """Return ``(channel, rank, bank, chip)`` for a linear PE id."""
    pe = topology.check_pe(pe)
    chip = pe % CHIPS_PER_RANK
    bank = (pe // CHIPS_PER_RANK) % BANKS_PER_CHIP
    rank = (pe // PES_PER_RANK) % topology.ranks_per_channel
    channel = pe // (PES_PER_RANK * topology.ranks_per_channel)
    return channel, rank, bank, chip


def compose(topology: Topology, channel: int, rank: int, bank: int, chip: int) -> int:
    if not (0 <= channel < topology.channels and 0 <= rank < topology.ranks_per_channel
            and 0 <= bank < BANKS_PER_CHIP and 0 <= chip < CHIPS_PER_RANK):
        raise OutOfRange(f"coordinates {(channel, rank, bank, chip)} outside {topology}")
    return ((channel * topology.ranks_per_channel + rank) * BANKS_PER_CHIP + bank) * CHIPS_PER_RANK + chip


def entangled_group(topology: Topology, group_id: int) -> EntangledGroup:
    if not 0 <= group_id < topology.num_entangled_groups:
        raise OutOfRange(f"entangled group {group_id} outside [0, {topology.num_entangled_groups})")
    first = group_id * CHIPS_PER_RANK
    return EntangledGroup(group_id, tuple(range(first, first + CHIPS_PER_RANK)))


def entangled_group_of(topology: Topology, pe: int):
    """Return ``(group, lane)``; the lane is the PE's chip index."""
    pe = topology.check_pe(pe)
    group = entangled_group(topology, pe // CHIPS_PER_RANK)
    return group, pe % CHIPS_PER_RANK


def entangled_groups(topology: Topology):
    return [entangled_group(topology, g) for g in range(topology.num_entangled_groups)]
