"""Toy two-layer-per-step GNN loop over a 2-D hypercube.

The feature matrix is scattered one row per PE, then every layer multiplies
by a per-PE weight, reduce-scatters along one dimension, expands the partial
rows back with per-PE weights, all-reduces along the same dimension and
switches to the other dimension.  A final reduce sums every row on the host.
The kernels are elementwise stand-ins; the point is the alternating
communication pattern.

Elements are 32-bit unsigned integers with wrap-around arithmetic, so the
dense reference must agree bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collectives import PRESETS, make_request, run_request
from .errors import ConstraintViolation
from .hypercube import new_hypercube, parse_mask
from .machine import CostCounters, PimMachine
from .rng import random_bytes
from .topology import PES_PER_RANK, new_topology

DTYPE = np.dtype("<u4")


@dataclass
class DemoConfig:
    dims: tuple = (8, 8)
    layers: int = 3
    features: int = 128
    seed: int = 7
    flags: str = "full"
    channels: int = 1
    ranks: int = 0              # 0: just enough ranks for the cube
    identity_weights: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "DemoConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown demo keys {sorted(unknown)}")
        cfg = cls(**known)
        cfg.dims = tuple(int(x) for x in cfg.dims)
        if len(cfg.dims) != 2:
            raise ValueError("the demo needs a 2-D hypercube")
        if cfg.layers < 1 or cfg.features < 1:
            raise ValueError("layers and features must be positive")
        if cfg.flags not in PRESETS:
            raise ValueError(f"unknown flag preset {cfg.flags!r}")
        return cfg


@dataclass
class DemoResult:
    passed: bool
    output: np.ndarray
    reference: np.ndarray
    phases: list = field(default_factory=list)    # (name, CostCounters)

    def total(self) -> CostCounters:
        return sum((c for _, c in self.phases), CostCounters())


def layer_masks(layers: int):
    return ["10" if i % 2 == 0 else "01" for i in range(layers)]


def make_inputs(cfg: DemoConfig):
    """Feature rows ``(P, F)`` and per-layer weights ``[(w1 (P,), w2 (P, G))]``."""
    P = cfg.dims[0] * cfg.dims[1]
    x = random_bytes(cfg.seed, P * cfg.features * 4).view(DTYPE).reshape(P, cfg.features)
    weights = []
    for layer, mask in enumerate(layer_masks(cfg.layers)):
        G = cfg.dims[mask.index("1")]
        if cfg.identity_weights:
            w1 = np.ones(P, dtype=DTYPE)
            w2 = np.ones((P, G), dtype=DTYPE)
        else:
            w1 = random_bytes(cfg.seed, P * 4, stream=2 + 2 * layer).view(DTYPE)
            w2 = random_bytes(cfg.seed, P * G * 4, stream=3 + 2 * layer).view(DTYPE).reshape(P, G)
        weights.append((w1, w2))
    return x, weights


def dense_reference(cfg: DemoConfig, x, weights) -> np.ndarray:
    """Single-buffer computation on the host: rows indexed by ``(i, j)`` coordinates."""
    a, b = cfg.dims
    F = cfg.features
    # grid[i, j] is the row of node i + a*j
    grid = x.reshape(b, a, F).transpose(1, 0, 2).astype(np.uint64)
    for (w1, w2), mask in zip(weights, layer_masks(cfg.layers)):
        w1g = w1.reshape(b, a).T.astype(np.uint64)
        grid = (grid * w1g[:, :, None]) & 0xFFFFFFFF
        axis = mask.index("1")
        G = cfg.dims[axis]
        total = grid.sum(axis=axis, keepdims=True) & 0xFFFFFFFF
        member = np.arange(G).reshape((G, 1) if axis == 0 else (1, G))
        parts = np.broadcast_to(total, grid.shape).reshape(a, b, G, F // G)
        own = np.take_along_axis(parts, np.broadcast_to(member, (a, b))[:, :, None, None], axis=2)[:, :, 0]
        w2g = w2.reshape(b, a, G).transpose(1, 0, 2).astype(np.uint64)
        grid = np.concatenate([(own * w2g[:, :, t: t + 1]) & 0xFFFFFFFF for t in range(G)], axis=2)
        grid = np.broadcast_to(grid.sum(axis=axis, keepdims=True) & 0xFFFFFFFF, grid.shape).copy()
    out = grid.sum(axis=(0, 1)) & 0xFFFFFFFF
    return out.astype(DTYPE)


def run_demo(cfg: DemoConfig, strict: bool = False) -> DemoResult:
    a, b = cfg.dims
    P = a * b
    F = cfg.features
    nbytes = 4 * F
    ranks = cfg.ranks or -(-P // (PES_PER_RANK * cfg.channels))
    topo = new_topology(cfg.channels, ranks)
    hc = new_hypercube(cfg.dims, topo)
    m = PimMachine(topo)
    pes = np.arange(P)
    x, weights = make_inputs(cfg)
    for mask in ("10", "01"):
        G = cfg.dims[mask.index("1")]
        if F % (2 * G):
            raise ConstraintViolation(
                f"{nbytes} bytes per PE with group size {G}",
                rule="total data size must be a multiple of group size x 8 bytes")

    phases = []

    def step(name, primitive, mask, nb, host_buffers=None):
        req = make_request(primitive, parse_mask(mask, hc), nb, "U32", "sum", cfg.flags)
        rep = run_request(m, hc, req, host_buffers, strict)
        phases.append((name, rep.counters))
        return rep

    def compute(name, fn, nb_in):
        before = m.snapshot_counters()
        m.pe_compute(pes, 0, nb_in, fn)
        phases.append((name, m.snapshot_counters() - before))

    step("scatter", "scatter", "11", P * nbytes, [x.reshape(-1).view(np.uint8)])
    for layer, ((w1, w2), mask) in enumerate(zip(weights, layer_masks(cfg.layers)), start=1):
        G = cfg.dims[mask.index("1")]

        def scale(region, w=w1):
            return (region.view(DTYPE) * w[:, None]).view(np.uint8)

        def expand(region, w=w2):
            part = region.view(DTYPE)
            return np.concatenate([part * w[:, t: t + 1] for t in range(w.shape[1])], axis=1).view(np.uint8)

        compute(f"layer{layer}.scale", scale, nbytes)
        step(f"layer{layer}.reduce_scatter", "reduce_scatter", mask, nbytes)
        compute(f"layer{layer}.expand", expand, nbytes // G)
        step(f"layer{layer}.all_reduce", "all_reduce", mask, nbytes)
    rep = step("reduce", "reduce", "11", nbytes)
    out = rep.host_outputs[0].view(DTYPE)
    ref = dense_reference(cfg, x, weights)
    return DemoResult(bool(np.array_equal(out, ref)), out, ref, phases)


def format_breakdown(result: DemoResult) -> str:
    cols = list(CostCounters().to_dict())
    width = max(len(n) for n, _ in result.phases) + 2
    lines = ["phase".ljust(width) + " ".join(c.rjust(17) for c in cols)]
    for name, c in result.phases:
        d = c.to_dict()
        lines.append(name.ljust(width) + " ".join(str(d[k]).rjust(17) for k in cols))
    t = result.total().to_dict()
    lines.append("total".ljust(width) + " ".join(str(t[k]).rjust(17) for k in cols))
    return "\n".join(lines)
