"""Simulated PIM-enabled DIMM machine and collective communication on virtual hypercubes."""
from .codec import ElementType, ReduceOp
from .collectives import (CommRequest, Primitive, Report, TechniqueFlags, make_request,
                          run_request)
from .errors import ConstraintViolation, PimCollError, SplitGroupWarning
from .hypercube import new_hypercube, parse_mask, slice_groups
from .machine import CostCounters, PimMachine
from .oracle import oracle_run
from .topology import Topology, new_topology

__version__ = "0.1.0"

__all__ = [
    "CommRequest", "ConstraintViolation", "CostCounters", "ElementType", "PimCollError", "PimMachine",
    "Primitive", "ReduceOp", "Report", "SplitGroupWarning", "TechniqueFlags", "Topology",
    "make_request", "new_hypercube", "new_topology", "oracle_run", "parse_mask", "run_request",
    "slice_groups",
]
