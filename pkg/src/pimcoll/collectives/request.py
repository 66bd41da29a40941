"""Primitive kinds, technique flags and request validation."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

from ..codec import ElementType, ReduceOp
from ..errors import ConstraintViolation, IllegalFlags, SplitGroupWarning
from ..hypercube import DimMask, HypercubeConfig

DATA_SIZE_RULE = "data size must be a multiple of 8 bytes"
GROUP_DATA_RULE = "total data size must be a multiple of group size x 8 bytes"
GROUP_SIZE_RULE = "each communication group must span at least 8 PEs (strict mode)"


class Primitive(enum.Enum):
    ALLTOALL = "alltoall"
    REDUCE_SCATTER = "reduce_scatter"
    ALL_GATHER = "all_gather"
    ALL_REDUCE = "all_reduce"
    SCATTER = "scatter"
    GATHER = "gather"
    REDUCE = "reduce"
    BROADCAST = "broadcast"

    @property
    def short(self) -> str:
        return _SHORT[self]

    @property
    def rooted(self) -> bool:
        return self in (Primitive.SCATTER, Primitive.GATHER, Primitive.REDUCE, Primitive.BROADCAST)

    @property
    def reduces(self) -> bool:
        return self in (Primitive.REDUCE_SCATTER, Primitive.ALL_REDUCE, Primitive.REDUCE)

    @classmethod
    def parse(cls, name) -> "Primitive":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("_", "").replace("-", "")
        for p in cls:
            if key in (p.value.replace("_", ""), p.short.lower()):
                return p
        raise ValueError(f"unknown primitive {name!r}")


_SHORT = {
    Primitive.ALLTOALL: "AA",
    Primitive.REDUCE_SCATTER: "RS",
    Primitive.ALL_GATHER: "AG",
    Primitive.ALL_REDUCE: "AR",
    Primitive.SCATTER: "Sc",
    Primitive.GATHER: "Ga",
    Primitive.REDUCE: "Re",
    Primitive.BROADCAST: "Br",
}

# Which techniques each primitive can use at all.
_PR = {Primitive.ALLTOALL, Primitive.REDUCE_SCATTER, Primitive.ALL_REDUCE, Primitive.ALL_GATHER, Primitive.REDUCE}
_IM = _PR | {Primitive.SCATTER, Primitive.GATHER}


def applicable(primitive: Primitive, dtype: ElementType):
    """Return ``(pr, im, cm)`` applicability for a primitive at a dtype."""
    cm = primitive in (Primitive.ALLTOALL, Primitive.ALL_GATHER) or (
        primitive.reduces and dtype is ElementType.U8)
    return primitive in _PR, primitive in _IM, cm


@dataclass(frozen=True)
class TechniqueFlags:
    pr: bool = False
    im: bool = False
    cm: bool = False

    def label(self) -> str:
        names = [n for n, on in (("pr", self.pr), ("im", self.im), ("cm", self.cm)) if on]
        return "+".join(names) if names else "baseline"

    def to_dict(self) -> dict:
        return {"pr": self.pr, "im": self.im, "cm": self.cm}


PRESETS = {
    "baseline": TechniqueFlags(),
    "pr": TechniqueFlags(pr=True),
    "pr+im": TechniqueFlags(pr=True, im=True),
    "full": TechniqueFlags(pr=True, im=True, cm=True),
}
PRESET_ORDER = ("baseline", "pr", "pr+im", "full")


def resolve_preset(name: str, primitive: Primitive, dtype: ElementType) -> TechniqueFlags:
    """Preset flags restricted to the techniques the primitive can use."""
    try:
        want = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown flag preset {name!r}; expected one of {list(PRESETS)}") from None
    pr, im, cm = applicable(primitive, dtype)
    return TechniqueFlags(want.pr and pr, want.im and im, want.cm and cm)


def check_flags(flags: TechniqueFlags, primitive: Primitive, dtype: ElementType) -> None:
    pr, im, cm = applicable(primitive, dtype)
    for name, wanted, ok in (("pr", flags.pr, pr), ("im", flags.im, im), ("cm", flags.cm, cm)):
        if wanted and not ok:
            raise IllegalFlags(f"{name} does not apply to {primitive.short} at {dtype.name}",
                               rule=f"technique {name} is not applicable to {primitive.short}")
    if flags.im and pr and not flags.pr:
        raise IllegalFlags("in-register modulation requires PE-assisted reordering",
                           rule="im requires pr")
    if flags.cm and not flags.im:
        raise IllegalFlags("cross-domain modulation requires in-register modulation",
                           rule="cm requires im")


@dataclass(frozen=True)
class CommRequest:
    primitive: Primitive
    mask: DimMask
    bytes_per_pe: int
    dtype: ElementType = ElementType.U64
    op: ReduceOp = ReduceOp.SUM
    flags: TechniqueFlags = TechniqueFlags()
    base_offset: int = 0


def make_request(primitive, mask: DimMask, bytes_per_pe: int, dtype="U64", op="sum",
                 flags=TechniqueFlags(), base_offset: int = 0) -> CommRequest:
    primitive = Primitive.parse(primitive)
    dtype = ElementType.parse(dtype)
    if isinstance(flags, str):
        flags = resolve_preset(flags, primitive, dtype)
    return CommRequest(primitive, mask, int(bytes_per_pe), dtype, ReduceOp.parse(op), flags, int(base_offset))


def validate(hc: HypercubeConfig, req: CommRequest, group_size: int, strict: bool = False) -> None:
    """Raise on any violation of the size, alignment, group and flag rules."""
    check_flags(req.flags, req.primitive, req.dtype)
    if req.bytes_per_pe <= 0 or req.bytes_per_pe % 8:
        raise ConstraintViolation(f"bytes_per_pe={req.bytes_per_pe}", rule=DATA_SIZE_RULE)
    if req.base_offset < 0 or req.base_offset % 8:
        raise ConstraintViolation(f"base_offset={req.base_offset}", rule="base offset must be 8-byte aligned")
    if req.primitive in (Primitive.ALLTOALL, Primitive.REDUCE_SCATTER, Primitive.SCATTER,
                         Primitive.ALL_REDUCE, Primitive.REDUCE):
        if req.bytes_per_pe % (8 * group_size):
            raise ConstraintViolation(
                f"bytes_per_pe={req.bytes_per_pe} with group size {group_size}", rule=GROUP_DATA_RULE)
    if group_size < 8:
        if strict:
            raise ConstraintViolation(f"group size {group_size}", rule=GROUP_SIZE_RULE)
        warnings.warn(f"group size {group_size} splits entangled groups", SplitGroupWarning, stacklevel=3)
