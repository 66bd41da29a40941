"""Collective primitives over hypercube group slices."""
from __future__ import annotations

from .layout import GroupLayout, build_layout
from .report import CATEGORIES, CSV_FIELDS, Report, execute, layout_for, run_request
from .request import (PRESET_ORDER, PRESETS, CommRequest, Primitive, TechniqueFlags,
                      applicable, check_flags, make_request, resolve_preset, validate)


def _expect(req, primitive):
    if req.primitive is not primitive:
        raise ValueError(f"request is for {req.primitive.value}, not {primitive.value}")


def alltoall(m, hc, req, strict=False):
    _expect(req, Primitive.ALLTOALL)
    execute(m, hc, req, strict=strict)


def reduce_scatter(m, hc, req, strict=False):
    _expect(req, Primitive.REDUCE_SCATTER)
    execute(m, hc, req, strict=strict)


def all_gather(m, hc, req, strict=False):
    _expect(req, Primitive.ALL_GATHER)
    execute(m, hc, req, strict=strict)


def all_reduce(m, hc, req, strict=False):
    _expect(req, Primitive.ALL_REDUCE)
    execute(m, hc, req, strict=strict)


def scatter(m, hc, req, host_buffers, strict=False):
    _expect(req, Primitive.SCATTER)
    execute(m, hc, req, host_buffers, strict=strict)


def gather(m, hc, req, host_buffers=None, strict=False):
    """Return one host buffer per group: the members' data in member order."""
    _expect(req, Primitive.GATHER)
    return execute(m, hc, req, strict=strict)


def reduce(m, hc, req, host_buffers=None, strict=False):
    """Return one host buffer per group: the fold of all members."""
    _expect(req, Primitive.REDUCE)
    return execute(m, hc, req, strict=strict)


def broadcast(m, hc, req, host_buffers, strict=False):
    _expect(req, Primitive.BROADCAST)
    execute(m, hc, req, host_buffers, strict=strict)


__all__ = [
    "CATEGORIES", "CSV_FIELDS", "CommRequest", "GroupLayout", "PRESETS", "PRESET_ORDER", "Primitive",
    "Report", "TechniqueFlags", "all_gather", "all_reduce", "alltoall", "applicable", "broadcast",
    "build_layout", "check_flags", "execute", "gather", "layout_for", "make_request", "reduce",
    "reduce_scatter", "resolve_preset", "run_request", "scatter", "validate",
]
