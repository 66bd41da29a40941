"""Command line runner: ``pimcoll run|ablation|demo-gnn <config.json>``.

Exit codes: 0 success, 2 unreadable or malformed config, 3 a hardware usage
rule is violated, 4 the machine disagrees with the oracle (or the demo with
its dense reference).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from .collectives import (PRESET_ORDER, PRESETS, CSV_FIELDS, CommRequest, TechniqueFlags,
                          layout_for, make_request, resolve_preset, run_request, validate)
from .collectives.request import Primitive
from .codec import ElementType, ReduceOp
from .demo import DemoConfig, format_breakdown, run_demo
from .errors import ConstraintViolation, SplitGroupWarning
from .harness import member_states, mismatches, seeded_inputs
from .hypercube import new_hypercube, parse_mask
from .machine import PimMachine
from .topology import PES_PER_RANK, new_topology

EXIT_PARSE, EXIT_CONSTRAINT, EXIT_MISMATCH = 2, 3, 4
ABLATION_FIELDS = CSV_FIELDS + ("host_work",)

_RUN_KEYS = {"channels", "ranks", "dims", "mask", "primitive", "dtype", "op", "bytes_per_pe",
             "flags", "seed", "strict_groups", "repeat", "base_offset"}


class ConfigError(ValueError):
    pass


class OracleMismatch(RuntimeError):
    pass


@dataclass
class Planned:
    """A validated run: everything needed before any machine exists."""
    hc: object
    req: CommRequest
    seed: int
    strict: bool
    repeat: int


def load_config(path: str):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    entries = data if isinstance(data, list) else [data]
    if not entries or not all(isinstance(e, dict) for e in entries):
        raise ConfigError("config must be a JSON object or a non-empty array of objects")
    return entries


def _flags(value, primitive: Primitive, dtype: ElementType) -> TechniqueFlags:
    if isinstance(value, str):
        if value not in PRESETS:
            raise ConfigError(f"unknown flag preset {value!r}")
        return resolve_preset(value, primitive, dtype)
    if isinstance(value, dict) and set(value) <= {"pr", "im", "cm"}:
        return TechniqueFlags(**{k: bool(v) for k, v in value.items()})
    raise ConfigError(f"flags must be a preset name or an object of pr/im/cm booleans, got {value!r}")


def plan(entry: dict, strict_override: bool = False, flags=None) -> Planned:
    """Parse and validate one config entry.

    ``ConfigError`` for malformed fields, ``ConstraintViolation`` for rule
    violations.
    """
    unknown = set(entry) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    try:
        dims = [int(d) for d in entry["dims"]]
        primitive = Primitive.parse(entry["primitive"])
        dtype = ElementType.parse(entry.get("dtype", "U64"))
        op = ReduceOp.parse(entry.get("op", "sum"))
        nbytes = int(entry["bytes_per_pe"])
        seed = int(entry.get("seed", 0))
        repeat = int(entry.get("repeat", 1))
        channels = int(entry.get("channels", 1))
        mask_text = str(entry["mask"])
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if repeat < 1:
        raise ConfigError("repeat must be at least 1")
    nodes = int(np.prod(dims)) if dims else 0
    ranks = int(entry.get("ranks", max(1, -(-nodes // (PES_PER_RANK * max(channels, 1))))))

    topo = new_topology(channels, ranks)
    hc = new_hypercube(dims, topo)
    try:
        mask = parse_mask(mask_text, hc)
    except ConstraintViolation:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    chosen = _flags(entry.get("flags", "full") if flags is None else flags, primitive, dtype)
    req = make_request(primitive, mask, nbytes, dtype, op, chosen, int(entry.get("base_offset", 0)))
    strict = strict_override or bool(entry.get("strict_groups", False))
    validate(hc, req, layout_for(hc, mask).group_size, strict)
    return Planned(hc, req, seed, strict, repeat)


def execute(p: Planned, self_check: bool = True):
    """Run one planned request per repetition; yields reports."""
    for r in range(p.repeat):
        m = PimMachine(p.hc.topology)
        roots = seeded_inputs(m, p.hc, p.req, p.seed + r)
        before = member_states(m, p.hc, p.req.mask, p.req.base_offset, p.req.bytes_per_pe)
        with warnings.catch_warnings():
            # already reported once while planning
            warnings.simplefilter("ignore", SplitGroupWarning)
            report = run_request(m, p.hc, p.req, roots, p.strict)
        if self_check:
            problems = mismatches(m, p.hc, p.req, before, roots, report.host_outputs)
            if problems:
                raise OracleMismatch("; ".join(problems[:5]))
        yield report


def _write(text: str, out) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_run(args) -> int:
    plans = [plan(e, args.strict_groups) for e in load_config(args.config)]
    reports = [rep for p in plans for rep in execute(p, not args.no_self_check)]
    if args.csv:
        _write(_csv([r.csv_row() for r in reports], CSV_FIELDS), args.out)
    else:
        _write("".join(r.to_json() + "\n" for r in reports), args.out)
    return 0


def cmd_ablation(args) -> int:
    rows = []
    for entry in load_config(args.config):
        plans = [plan(entry, args.strict_groups, flags=name) for name in PRESET_ORDER]
        for name, p in zip(PRESET_ORDER, plans):
            p.repeat = 1
            rep = next(execute(p, not args.no_self_check))
            row = rep.csv_row()
            row["flags"] = name
            row["host_work"] = rep.counters.host_work
            rows.append(row)
    _write(_csv(rows, ABLATION_FIELDS), args.out)
    return 0


def cmd_demo_gnn(args) -> int:
    entries = load_config(args.config)
    status = 0
    chunks = []
    for entry in entries:
        try:
            cfg = DemoConfig.from_dict(entry)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        result = run_demo(cfg, strict=args.strict_groups)
        verdict = "PASS" if result.passed else "FAIL"
        chunks.append(f"demo-gnn dims={list(cfg.dims)} layers={cfg.layers} seed={cfg.seed} "
                      f"flags={cfg.flags}: {verdict}\n{format_breakdown(result)}\n")
        if not result.passed:
            status = EXIT_MISMATCH
    _write("".join(chunks), args.out)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pimcoll", description="Collective communication on a simulated PIM DIMM.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="JSON config: one object, or an array of objects")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--no-self-check", action="store_true", help="skip the oracle comparison")
    common.add_argument("--strict-groups", action="store_true",
                        help="reject groups smaller than one entangled group")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run configured collectives, one JSON report per run")
    run.add_argument("--csv", action="store_true", help="emit CSV rows instead of JSON lines")
    run.set_defaults(func=cmd_run)
    abl = sub.add_parser("ablation", parents=[common], help="CSV over the baseline, pr, pr+im and full presets")
    abl.add_argument("--csv", action="store_true", help="accepted for symmetry; ablation output is always CSV")
    abl.set_defaults(func=cmd_ablation)
    demo = sub.add_parser("demo-gnn", parents=[common], help="alternating-dimension GNN toy loop")
    demo.add_argument("--csv", action="store_true", help=argparse.SUPPRESS)
    demo.set_defaults(func=cmd_demo_gnn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConstraintViolation as exc:
        print(f"constraint violated: {exc.rule} ({exc})", file=sys.stderr)
        return EXIT_CONSTRAINT
    except OracleMismatch as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
