"""Simulated PIM-enabled DIMM machine with cost counters.

The counters replace wall-clock time.  Every host<->PIM transfer is a 64-byte
burst over one entangled group, every codec call the pipelines make goes
through the counting facade on :class:`PimMachine`, and PE-side reorder
kernels charge the bytes they move.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import codec
from .errors import (Misaligned, NotAPermutation, OutOfRegion, ShortMram,
                     UnknownHandle)
from .topology import CHIPS_PER_RANK, EntangledGroup, Topology

_LANES = np.arange(CHIPS_PER_RANK)
_BEATS = np.arange(8)


@dataclass
class CostCounters:
    bus_bytes: int = 0
    dt_blocks: int = 0
    host_rot_ops: int = 0
    host_reduce_ops: int = 0
    host_staged_bytes: int = 0
    pe_moved_bytes: int = 0
    kernel_launches: int = 0

    def copy(self) -> "CostCounters":
        return CostCounters(**asdict(self))

    def __add__(self, other: "CostCounters") -> "CostCounters":
        return CostCounters(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def __sub__(self, other: "CostCounters") -> "CostCounters":
        return CostCounters(**{f.name: getattr(self, f.name) - getattr(other, f.name) for f in fields(self)})

    @property
    def host_work(self) -> int:
        """Modeled host-side work: rotations, reductions, staged bursts and domain transfers."""
        return self.host_rot_ops + self.host_reduce_ops + self.host_staged_bytes // 64 + self.dt_blocks

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _eg_id(group) -> int:
    return group.id if isinstance(group, EntangledGroup) else int(group)


class PimMachine:
    """Per-PE MRAM byte stores plus the host-side staging model.

    MRAM is one ``(total_pes, capacity)`` array; ``sizes[pe]`` is the number
    of valid bytes of PE ``pe``.  Reads beyond that length fail, writes grow it
    zero-filled.
    """

    def __init__(self, topology: Topology, initial_capacity: int = 0):
        self.topology = topology
        self.counters = CostCounters()
        self._mram = np.zeros((topology.total_pes, max(initial_capacity, 0)), dtype=np.uint8)
        self.sizes = np.zeros(topology.total_pes, dtype=np.int64)
        self._staged = {}
        self._handles = itertools.count(1)

    # ------------------------------------------------------------------ MRAM
    def _ensure(self, pes, end) -> None:
        end = np.broadcast_to(np.asarray(end, dtype=np.int64), np.shape(pes))
        if end.size == 0:
            return
        need = int(end.max())
        if need > self._mram.shape[1]:
            cap = max(need, 2 * self._mram.shape[1], 64)
            grown = np.zeros((self._mram.shape[0], cap), dtype=np.uint8)
            grown[:, : self._mram.shape[1]] = self._mram
            self._mram = grown
        np.maximum.at(self.sizes, pes, end)

    def write_mram(self, pe: int, offset: int, data) -> None:
        """Direct, uncounted store used to set up inputs."""
        data = np.asarray(data, dtype=np.uint8).reshape(-1)
        pe = self.topology.check_pe(pe)
        self._ensure(np.array([pe]), offset + data.size)
        self._mram[pe, offset: offset + data.size] = data

    def read_mram(self, pe: int, offset: int, nbytes: int) -> np.ndarray:
        """Direct, uncounted load used to inspect results."""
        pe = self.topology.check_pe(pe)
        if offset + nbytes > self.sizes[pe]:
            raise ShortMram(f"PE {pe} holds {self.sizes[pe]} bytes, asked for [{offset}, {offset + nbytes})")
        return self._mram[pe, offset: offset + nbytes].copy()

    def load_region(self, pes, offset: int, nbytes: int) -> np.ndarray:
        """Uncounted ``(len(pes), nbytes)`` view of the same region on many PEs."""
        pes = np.asarray(pes, dtype=np.int64)
        if pes.size and int(self.sizes[pes].min()) < offset + nbytes:
            raise ShortMram(f"region [{offset}, {offset + nbytes}) exceeds some PE's MRAM")
        return self._mram[pes, offset: offset + nbytes].copy()

    def store_region(self, pes, offset: int, data) -> None:
        pes = np.asarray(pes, dtype=np.int64)
        data = np.asarray(data, dtype=np.uint8)
        self._ensure(pes, offset + data.shape[1])
        self._mram[pes, offset: offset + data.shape[1]] = data

    # ---------------------------------------------------------------- bursts
    def _burst_index(self, egs, offsets):
        egs = np.asarray(egs, dtype=np.int64).reshape(-1)
        offsets = np.broadcast_to(np.asarray(offsets, dtype=np.int64), egs.shape)
        if np.any(offsets % 8) or np.any(offsets < 0):
            raise Misaligned("burst offsets must be non-negative multiples of 8", rule="8-byte aligned offsets")
        if egs.size and (egs.min() < 0 or egs.max() >= self.topology.num_entangled_groups):
            raise OutOfRegion("entangled group id out of range")
        pes = egs[:, None] * CHIPS_PER_RANK + _LANES[None, :]
        return egs, offsets, pes

    def read_bursts(self, egs, offsets) -> np.ndarray:
        """Batched read: returns ``(n, 64)`` PIM-domain blocks."""
        egs, offsets, pes = self._burst_index(egs, offsets)
        if pes.size and np.any(self.sizes[pes] < (offsets + 8)[:, None]):
            raise ShortMram("burst reads beyond the end of a member's MRAM")
        cols = offsets[:, None] + _BEATS[None, :]
        # (n, beat, lane)
        blocks = self._mram[pes[:, None, :], cols[:, :, None]]
        self.counters.bus_bytes += 64 * egs.size
        return blocks.reshape(egs.size, 64)

    def write_bursts(self, egs, offsets, blocks) -> None:
        egs, offsets, pes = self._burst_index(egs, offsets)
        blocks = codec.as_blocks(blocks).reshape(egs.size, 8, 8)
        self._ensure(pes.reshape(-1), np.repeat(offsets + 8, CHIPS_PER_RANK))
        cols = offsets[:, None] + _BEATS[None, :]
        self._mram[pes[:, None, :], cols[:, :, None]] = blocks
        self.counters.bus_bytes += 64 * egs.size

    def read_burst(self, group, offset: int) -> np.ndarray:
        return self.read_bursts([_eg_id(group)], [offset])[0]

    def write_burst(self, group, offset: int, block) -> None:
        self.write_bursts([_eg_id(group)], [offset], codec.as_blocks(block)[None, :])

    # ------------------------------------------------------------ PE kernels
    def _region(self, pes, base, block_size, num_blocks):
        pes = np.atleast_1d(np.asarray(pes, dtype=np.int64))
        if block_size < 8 or block_size % 8 or base % 8:
            raise Misaligned(f"block_size {block_size} / base {base} must be multiples of 8",
                             rule="8-byte aligned PE blocks")
        end = base + block_size * num_blocks
        if pes.size and int(self.sizes[pes].min()) < end:
            raise OutOfRegion(f"region [{base}, {end}) exceeds some PE's MRAM")
        return pes, end

    def pe_kernel_permute(self, pes, base: int, block_size: int, perm, dst_base=None) -> None:
        """New slot ``s`` receives old block ``perm[s]``.

        ``perm`` is one permutation or one row per PE.  With ``dst_base`` the
        result goes to a separate region instead of overwriting the source.
        """
        perm = np.asarray(perm, dtype=np.int64)
        num_blocks = perm.shape[-1]
        pes, end = self._region(pes, base, block_size, num_blocks)
        perm = np.broadcast_to(perm, (pes.size, num_blocks))
        if np.any(np.sort(perm, axis=1) != np.arange(num_blocks)):
            raise NotAPermutation("perm is not a permutation of its slots")
        region = self._mram[pes, base:end].reshape(pes.size, num_blocks, block_size)
        moved = np.take_along_axis(region, perm[:, :, None], axis=1).reshape(pes.size, -1)
        self.store_region(pes, base if dst_base is None else dst_base, moved)
        self.counters.pe_moved_bytes += block_size * num_blocks * pes.size
        self.counters.kernel_launches += 1

    def pe_kernel_block_rotate(self, pes, base: int, block_size: int, num_blocks: int, rotate_by) -> None:
        """Rotate ``num_blocks`` blocks left: slot ``s`` moves to ``(s - rotate_by) mod num_blocks``."""
        pes = np.atleast_1d(np.asarray(pes, dtype=np.int64))
        rotate_by = np.broadcast_to(np.asarray(rotate_by, dtype=np.int64), pes.shape)
        if np.any(rotate_by < 0) or np.any(rotate_by >= num_blocks):
            raise OutOfRegion(f"rotate_by must lie in [0, {num_blocks})")
        perm = (np.arange(num_blocks)[None, :] + rotate_by[:, None]) % num_blocks
        self.pe_kernel_permute(pes, base, block_size, perm)

    def pe_compute(self, pes, offset: int, nbytes: int, fn, out_nbytes=None) -> None:
        """Run an application kernel: ``fn`` maps ``(n_pes, nbytes)`` to new bytes."""
        pes = np.atleast_1d(np.asarray(pes, dtype=np.int64))
        out = np.asarray(fn(self.load_region(pes, offset, nbytes)), dtype=np.uint8)
        if out_nbytes is not None and out.shape[1] != out_nbytes:
            raise ValueError("kernel produced an unexpected number of bytes")
        self.store_region(pes, offset, out)
        self.counters.kernel_launches += 1

    # --------------------------------------------------------- host staging
    def host_stage(self, data) -> int:
        data = np.array(data, dtype=np.uint8, copy=True)
        handle = next(self._handles)
        self._staged[handle] = data
        self.counters.host_staged_bytes += data.size
        return handle

    def host_unstage(self, handle: int) -> np.ndarray:
        try:
            return self._staged.pop(handle)
        except KeyError:
            raise UnknownHandle(f"no staged buffer with handle {handle}") from None

    # ------------------------------------------------------- codec facade
    def domain_transfer(self, blocks) -> np.ndarray:
        out = codec.domain_transfer(blocks)
        self.counters.dt_blocks += out.size // 64
        return out

    def rot_word(self, blocks, k, width: int = 8) -> np.ndarray:
        out = codec.rot_word(blocks, k, width)
        self.counters.host_rot_ops += out.size // 64
        return out

    def rot_lane(self, blocks, k, width: int = 8) -> np.ndarray:
        out = codec.rot_lane(blocks, k, width)
        self.counters.host_rot_ops += out.size // 64
        return out

    def reduce(self, acc, blocks, dtype, op) -> np.ndarray:
        out = codec.reduce_host_words(acc, blocks, dtype, op)
        self.counters.host_reduce_ops += out.size // 64
        return out

    # ------------------------------------------------------------ counters
    def snapshot_counters(self) -> CostCounters:
        return self.counters.copy()

    def reset_counters(self) -> None:
        self.counters = CostCounters()
