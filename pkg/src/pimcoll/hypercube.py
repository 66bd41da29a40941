"""Virtual hypercube: user dims, dimension bitmaps and group slicing.

Hypercube node ``L = c0 + d0*(c1 + d1*(c2 + ...))`` lives on PE ``L``.  With
the topology's chip-fastest numbering, the low dimensions fill entangled
groups first.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

from .errors import (BadChar, BadLength, ConstraintViolation, CoordOutOfRange,
                     EmptyDims, EmptyMask, NotPowerOfTwo, TooManyNodes)
from .topology import CHIPS_PER_RANK, Topology


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class HypercubeConfig:
    dims: tuple
    topology: Topology

    @property
    def ndims(self) -> int:
        return len(self.dims)

    @property
    def num_nodes(self) -> int:
        return prod(self.dims)

    def strides(self):
        out, acc = [], 1
        for d in self.dims:
            out.append(acc)
            acc *= d
        return out


@dataclass(frozen=True)
class DimMask:
    bits: tuple

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @property
    def selected(self):
        return [i for i, b in enumerate(self.bits) if b]


@dataclass(frozen=True)
class CommGroup:
    index: int
    members: tuple

    @property
    def size(self) -> int:
        return len(self.members)


def new_hypercube(dims, topology: Topology) -> HypercubeConfig:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise EmptyDims("hypercube needs at least one dimension")
    for i, d in enumerate(dims):
        if d < 1:
            raise NotPowerOfTwo(f"dimension {i} has length {d}", rule="dimension lengths must be >= 1")
        if i < len(dims) - 1 and not _is_pow2(d):
            raise NotPowerOfTwo(
                f"dimension {i} has length {d}",
                rule="every dimension except the last must be a power of two",
            )
    nodes = prod(dims)
    if nodes > topology.total_pes:
        raise TooManyNodes(
            f"{nodes} nodes exceed {topology.total_pes} PEs",
            rule="hypercube must not have more nodes than PEs",
        )
    if nodes % CHIPS_PER_RANK:
        # The host always moves whole entangled groups; a partial one would
        # have it overwrite PEs outside the cube.
        raise ConstraintViolation(
            f"{nodes} nodes do not fill whole entangled groups",
            rule="number of hypercube nodes must be a multiple of 8",
        )
    return HypercubeConfig(dims, topology)


def map_node(hc: HypercubeConfig, coords) -> int:
    coords = tuple(int(c) for c in coords)
    if len(coords) != hc.ndims:
        raise CoordOutOfRange(f"expected {hc.ndims} coordinates, got {len(coords)}")
    linear = 0
    for c, d, st in zip(coords, hc.dims, hc.strides()):
        if not 0 <= c < d:
            raise CoordOutOfRange(f"coordinate {c} outside [0, {d})")
        linear += c * st
    return linear


def node_coords(hc: HypercubeConfig, pe: int):
    if not 0 <= pe < hc.num_nodes:
        raise CoordOutOfRange(f"PE {pe} is not a hypercube node")
    return tuple(int(c) for c in np.unravel_index(pe, hc.dims, order="F"))


def parse_mask(s: str, hc: HypercubeConfig) -> DimMask:
    if len(s) != hc.ndims:
        raise BadLength(f"mask {s!r} has {len(s)} characters for {hc.ndims} dimensions")
    bad = set(s) - {"0", "1"}
    if bad:
        raise BadChar(f"mask {s!r} contains {sorted(bad)}")
    if "1" not in s:
        raise EmptyMask(f"mask {s!r} selects no dimension")
    return DimMask(tuple(ch == "1" for ch in s))


def group_assignment(hc: HypercubeConfig, mask: DimMask):
    """Return ``(group_of, member_of)`` arrays indexed by node id.

    Groups are numbered by linearising the unselected coordinates and members
    by linearising the selected ones, first dimension fastest in both cases.
    """
    coords = np.unravel_index(np.arange(hc.num_nodes), hc.dims, order="F")
    group = np.zeros(hc.num_nodes, dtype=np.int64)
    member = np.zeros(hc.num_nodes, dtype=np.int64)
    gs = ms = 1
    for c, d, sel in zip(coords, hc.dims, mask.bits):
        if sel:
            member += c * ms
            ms *= d
        else:
            group += c * gs
            gs *= d
    return group, member


def group_table(hc: HypercubeConfig, mask: DimMask) -> np.ndarray:
    """``table[g, p]`` is the PE of member ``p`` of group ``g``."""
    group, member = group_assignment(hc, mask)
    size = prod(d for d, s in zip(hc.dims, mask.bits) if s)
    table = np.empty((hc.num_nodes // size, size), dtype=np.int64)
    table[group, member] = np.arange(hc.num_nodes)
    return table


def slice_groups(hc: HypercubeConfig, mask: DimMask):
    if len(mask.bits) != hc.ndims:
        raise BadLength(f"mask has {len(mask.bits)} bits for {hc.ndims} dimensions")
    return [CommGroup(g, tuple(int(p) for p in row)) for g, row in enumerate(group_table(hc, mask))]
