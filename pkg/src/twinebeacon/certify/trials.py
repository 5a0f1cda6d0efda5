"""Bell-trial records and the packed TrialBlock file format.

Cell index convention used throughout certification: ``abxy``, i.e.
``index = a<<3 | b<<2 | x<<1 | y``, so ``index >> 2`` is the outcome pair
``c = ab`` and ``index & 3`` is the setting pair ``z = xy``.  Files store
one trial per nibble in the order ``x, y, a, b`` (high to low), first trial
in the high nibble.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import DecodeError
from ..twine.cbor import canonical_parse, canonical_serialize

MAGIC = b"TWBT1\n"


def cell(a: int, b: int, x: int, y: int) -> int:
    return a << 3 | b << 2 | x << 1 | y


# nibble (x y a b) -> cell (a b x y) and back; the map is its own inverse
NIBBLE_TO_CELL = np.array([((n & 3) << 2) | (n >> 2) for n in range(16)], dtype=np.uint8)
CELL_TO_NIBBLE = NIBBLE_TO_CELL


@dataclass(frozen=True)
class TrialRecord:
    x: int
    y: int
    a: int
    b: int

    def __post_init__(self):
        if any(v not in (0, 1) for v in (self.x, self.y, self.a, self.b)):
            raise ValueError("trial fields must be bits")

    @property
    def cell(self) -> int:
        return cell(self.a, self.b, self.x, self.y)


@dataclass
class TrialBlock:
    n: int
    packed: bytes
    counts: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_cells(cls, cells: np.ndarray, meta: dict | None = None) -> "TrialBlock":
        cells = np.asarray(cells, dtype=np.uint8)
        n = int(cells.size)
        nib = CELL_TO_NIBBLE[cells]
        if n % 2:
            nib = np.append(nib, np.uint8(0))
        packed = ((nib[0::2] << 4) | nib[1::2]).astype(np.uint8).tobytes()
        counts = np.bincount(cells, minlength=16).astype(np.int64)
        return cls(n=n, packed=packed, counts=counts, meta=dict(meta or {}))

    @classmethod
    def from_records(cls, records, meta: dict | None = None) -> "TrialBlock":
        return cls.from_cells(np.array([r.cell for r in records], dtype=np.uint8), meta)

    def cells(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Per-trial cell indices for trials ``[start, stop)``."""
        stop = self.n if stop is None else min(stop, self.n)
        lo, hi = start // 2, (stop + 1) // 2
        raw = np.frombuffer(self.packed, dtype=np.uint8, count=hi - lo, offset=lo)
        nib = np.empty(2 * raw.size, dtype=np.uint8)
        nib[0::2] = raw >> 4
        nib[1::2] = raw & 0x0F
        off = start - 2 * lo
        return NIBBLE_TO_CELL[nib[off : off + (stop - start)]]

    def iter_cells(self, chunk: int = 1 << 22):
        for start in range(0, self.n, chunk):
            yield start, self.cells(start, start + chunk)

    def recount(self) -> np.ndarray:
        counts = np.zeros(16, dtype=np.int64)
        for _, c in self.iter_cells():
            counts += np.bincount(c, minlength=16)
        return counts

    def truncate(self, n: int) -> "TrialBlock":
        if n >= self.n:
            return self
        return TrialBlock.from_cells(self.cells(0, n), self.meta)

    def output_bits(self) -> np.ndarray:
        """Outcome bits ``a1 b1 a2 b2 ...`` (length ``2n``) for the extractor."""
        out = np.empty(2 * self.n, dtype=np.uint8)
        for start, c in self.iter_cells():
            out[2 * start : 2 * (start + c.size) : 2] = c >> 3
            out[2 * start + 1 : 2 * (start + c.size) : 2] = (c >> 2) & 1
        return out

    def to_bytes(self) -> bytes:
        return MAGIC + struct.pack("<Q", self.n) + self.packed + canonical_serialize(self.meta)

    @classmethod
    def from_bytes(cls, data: bytes) -> "TrialBlock":
        if not data.startswith(MAGIC):
            raise DecodeError("not a TrialBlock file")
        (n,) = struct.unpack_from("<Q", data, len(MAGIC))
        start = len(MAGIC) + 8
        size = (n + 1) // 2
        packed = data[start : start + size]
        if len(packed) != size:
            raise DecodeError("truncated TrialBlock")
        meta = canonical_parse(data[start + size :])
        block = cls(n=n, packed=bytes(packed), counts=np.zeros(16, dtype=np.int64), meta=meta)
        block.counts = block.recount()
        return block

    def digest(self) -> bytes:
        return hashlib.sha3_512(self.to_bytes()).digest()

    def write(self, path) -> bytes:
        data = self.to_bytes()
        with open(path, "wb") as fh:
            fh.write(data)
        return hashlib.sha3_512(data).digest()

    @classmethod
    def read(cls, path) -> "TrialBlock":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def file_digest(path) -> bytes:
    h = hashlib.sha3_512()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.digest()
