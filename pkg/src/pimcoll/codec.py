"""Byte-exact transforms on 64-byte bursts.

A block is a ``uint8`` array whose last axis has length 64; any leading axes
form a batch and every function here maps over them.  Two layouts exist:

* PIM domain: ``b[beat * 8 + lane]`` is byte ``beat`` of the 8-byte word held
  by lane (chip) ``lane``.
* host domain: ``b[word * 8 + byte]``, each lane's word stored contiguously.

``domain_transfer`` converts between the two; it is an 8x8 byte transpose and
therefore its own inverse.
"""
from __future__ import annotations

import enum

import numpy as np

from .errors import BadLength, BadShift

BLOCK_BYTES = 64
LANES = 8


class ElementType(enum.Enum):
    U8 = 1
    U16 = 2
    U32 = 4
    U64 = 8

    @property
    def width_bytes(self) -> int:
        return self.value

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(f"<u{self.value}")

    @classmethod
    def parse(cls, name) -> "ElementType":
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).upper()]
        except KeyError:
            raise ValueError(f"unknown element type {name!r}") from None


class ReduceOp(enum.Enum):
    SUM = "sum"
    MIN = "min"
    MAX = "max"
    BITOR = "bitor"

    @property
    def ufunc(self):
        return _UFUNCS[self]

    @classmethod
    def parse(cls, name) -> "ReduceOp":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("_", "").replace("-", "")
        if key == "or":
            key = "bitor"
        for op in cls:
            if op.value == key:
                return op
        raise ValueError(f"unknown reduction op {name!r}")


# Unsigned numpy addition wraps, which is the Sum contract.
_UFUNCS = {
    ReduceOp.SUM: np.add,
    ReduceOp.MIN: np.minimum,
    ReduceOp.MAX: np.maximum,
    ReduceOp.BITOR: np.bitwise_or,
}


def as_blocks(b) -> np.ndarray:
    arr = np.asarray(b, dtype=np.uint8)
    if arr.shape[-1:] != (BLOCK_BYTES,):
        raise BadLength(f"block must have 64 bytes on its last axis, got shape {arr.shape}")
    return arr


def block_from_hex(text: str) -> np.ndarray:
    if len(text) != 2 * BLOCK_BYTES:
        raise BadLength(f"block hex dump must be 128 characters, got {len(text)}")
    return np.frombuffer(bytes.fromhex(text), dtype=np.uint8).copy()


def block_to_hex(b) -> str:
    return as_blocks(b).tobytes().hex()


def domain_transfer(b) -> np.ndarray:
    """8x8 byte transpose: ``out[lane*8 + beat] = in[beat*8 + lane]``."""
    arr = as_blocks(b)
    lead = arr.shape[:-1]
    return np.ascontiguousarray(arr.reshape(lead + (8, 8)).swapaxes(-1, -2)).reshape(lead + (64,))


def _rotation_index(k, width: int) -> np.ndarray:
    if width not in (1, 2, 4, 8):
        raise BadShift(f"rotation width must be 1, 2, 4 or 8, got {width}")
    k = np.asarray(k)
    if not np.issubdtype(k.dtype, np.integer):
        raise BadShift(f"shift must be an integer, got {k.dtype}")
    if k.size and (k.min() < 0 or k.max() >= width):
        raise BadShift(f"shift must lie in [0, {width}), got {k.min()}..{k.max()}")
    i = np.arange(LANES)
    base = i - i % width
    return base + (i % width + k[..., None]) % width


def rot_word(b, k, width: int = 8) -> np.ndarray:
    """Rotate whole 8-byte words of a host-domain block.

    Word ``i`` of the output is word ``(i + k) mod width`` of the input,
    counted inside each aligned run of ``width`` words.  ``k`` may be an
    integer or an array matching the batch shape.
    """
    arr = as_blocks(b)
    lead = arr.shape[:-1]
    idx = np.broadcast_to(_rotation_index(k, width), lead + (LANES,))
    words = arr.reshape(lead + (8, 8))
    return np.take_along_axis(words, idx[..., :, None], axis=-2).reshape(lead + (64,))


def rot_lane(b, k, width: int = 8) -> np.ndarray:
    """Rotate lanes of a PIM-domain block: for every beat ``j``,
    ``out[j*8 + i] = in[j*8 + (i + k) mod width]`` inside aligned lane runs."""
    arr = as_blocks(b)
    lead = arr.shape[:-1]
    idx = np.broadcast_to(_rotation_index(k, width), lead + (LANES,))
    beats = arr.reshape(lead + (8, 8))
    return np.take_along_axis(beats, idx[..., None, :], axis=-1).reshape(lead + (64,))


def reduce_host_words(acc, b, dtype: ElementType, op: ReduceOp) -> np.ndarray:
    """Element-wise ``op`` of two blocks viewed as little-endian ``dtype``."""
    x = np.ascontiguousarray(as_blocks(acc)).view(dtype.np_dtype)
    y = np.ascontiguousarray(as_blocks(b)).view(dtype.np_dtype)
    return op.ufunc(x, y).view(np.uint8)


def pack_chunks(values, dtype: ElementType) -> np.ndarray:
    """Lay out ``values`` little-endian, consecutively inside 64-bit chunks."""
    arr = np.asarray(values)
    if arr.size and (arr.min() < 0 or int(arr.max()) >> (8 * dtype.width_bytes)):
        raise ValueError(f"values do not fit in {dtype.name}")
    out = arr.astype(dtype.np_dtype).reshape(-1).view(np.uint8)
    if out.size % 8:
        raise BadLength(f"{out.size} bytes is not a multiple of 8")
    return out


def unpack_chunks(data, dtype: ElementType) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(data, dtype=np.uint8).reshape(-1))
    if arr.size % 8:
        raise BadLength(f"{arr.size} bytes is not a multiple of 8")
    return arr.view(dtype.np_dtype).copy()
