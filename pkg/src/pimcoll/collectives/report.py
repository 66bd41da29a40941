"""Dispatch a request and summarise what it cost."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..hypercube import DimMask, HypercubeConfig
from ..machine import CostCounters
from .layout import GroupLayout, build_layout
from .pipelines import DISPATCH, ROOT_INPUT
from .request import CommRequest, validate

CSV_FIELDS = ("primitive", "dtype", "op", "dims", "mask", "group_size", "bytes_per_pe", "flags",
              "bus_bytes", "dt_blocks", "host_rot_ops", "host_reduce_ops", "host_staged_bytes",
              "pe_moved_bytes", "kernel_launches")

# breakdown category -> counter
CATEGORIES = {
    "pe_modulation": "pe_moved_bytes",
    "bus_transfer": "bus_bytes",
    "domain_transfer": "dt_blocks",
    "host_rotation": "host_rot_ops",
    "host_reduction": "host_reduce_ops",
    "host_staging": "host_staged_bytes",
}


@lru_cache(maxsize=64)
def layout_for(hc: HypercubeConfig, mask: DimMask) -> GroupLayout:
    return build_layout(hc, mask)


@dataclass
class Report:
    request: CommRequest
    dims: tuple
    group_size: int
    groups: int
    counters: CostCounters
    host_outputs: list = field(default=None, repr=False)

    @property
    def breakdown(self) -> dict:
        return {cat: getattr(self.counters, name) for cat, name in CATEGORIES.items()}

    def to_dict(self) -> dict:
        req = self.request
        return {
            "primitive": req.primitive.value,
            "dtype": req.dtype.name,
            "op": req.op.value,
            "dims": list(self.dims),
            "mask": str(req.mask),
            "group_size": self.group_size,
            "groups": self.groups,
            "bytes_per_pe": req.bytes_per_pe,
            "flags": req.flags.to_dict(),
            "counters": self.counters.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    def csv_row(self) -> dict:
        d = self.to_dict()
        row = {k: d[k] for k in CSV_FIELDS[:8]}
        row["dims"] = "x".join(str(x) for x in self.dims)
        row["flags"] = self.request.flags.label()
        row.update(self.counters.to_dict())
        return row


def execute(m, hc: HypercubeConfig, req: CommRequest, host_buffers=None, strict: bool = False):
    """Validate and run one request; returns the primitive's host output (or ``None``)."""
    lay = layout_for(hc, req.mask)
    validate(hc, req, lay.group_size, strict)
    if req.primitive in ROOT_INPUT:
        return ROOT_INPUT[req.primitive](m, lay, req, host_buffers)
    return DISPATCH[req.primitive](m, lay, req)


def run_request(m, hc: HypercubeConfig, req: CommRequest, host_buffers=None, strict: bool = False) -> Report:
    before = m.snapshot_counters()
    out = execute(m, hc, req, host_buffers, strict)
    lay = layout_for(hc, req.mask)
    return Report(req, hc.dims, lay.group_size, lay.num_groups, m.snapshot_counters() - before,
                  None if out is None else [np.asarray(o) for o in out])
