"""Pulse and chain-metadata records and their construction."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Protocol, runtime_checkable

from .cbor import canonical_parse, canonical_serialize
from .cid import Cid, compute_cid
from .keys import SigningKey, signing_digest
from ..errors import DecodeError, HeadMismatch, InvalidRadix, ResolverMiss

SPEC_VERSION = "twine/2.0"


@runtime_checkable
class Resolver(Protocol):
    """Read access to stored records. Implementations must be safe for concurrent reads."""

    def get(self, cid: Cid) -> bytes: ...

    def get_at(self, chain: Cid, index: int) -> bytes: ...


@dataclass(frozen=True, eq=True)
class ChainMetadata:
    key: dict
    links_radix: int
    meta: dict
    source: str
    specification: str = SPEC_VERSION
    signature: bytes = b""

    def unsigned_record(self) -> dict:
        return {
            "key": self.key,
            "links_radix": self.links_radix,
            "meta": self.meta,
            "source": self.source,
            "specification": self.specification,
        }

    def record(self) -> dict:
        return {**self.unsigned_record(), "signature": self.signature}

    def to_bytes(self) -> bytes:
        return canonical_serialize(self.record())

    @cached_property
    def cid(self) -> Cid:
        return compute_cid(self.to_bytes())

    @classmethod
    def from_record(cls, rec: dict) -> "ChainMetadata":
        try:
            return cls(
                key=rec["key"],
                links_radix=rec["links_radix"],
                meta=rec["meta"],
                source=rec["source"],
                specification=rec["specification"],
                signature=rec["signature"],
            )
        except KeyError as exc:
            raise DecodeError(f"chain metadata missing field {exc}") from None


@dataclass(frozen=True, eq=True)
class Pulse:
    chain: Cid
    index: int
    links: tuple
    mixins: tuple
    payload: dict
    specification: str = SPEC_VERSION
    signature: bytes = b""

    def unsigned_record(self) -> dict:
        return {
            "chain": self.chain,
            "index": self.index,
            "links": list(self.links),
            "mixins": [list(m) for m in self.mixins],
            "payload": self.payload,
            "specification": self.specification,
        }

    def record(self) -> dict:
        return {**self.unsigned_record(), "signature": self.signature}

    def to_bytes(self) -> bytes:
        return canonical_serialize(self.record())

    @cached_property
    def cid(self) -> Cid:
        return compute_cid(self.to_bytes())

    @property
    def prev(self) -> Cid | None:
        return self.links[0] if self.links else None

    def mixin_pulses(self) -> list[Cid]:
        return [p for _, p in self.mixins]

    @classmethod
    def from_record(cls, rec: dict) -> "Pulse":
        try:
            mixins = tuple(tuple(m) for m in rec["mixins"])
            if any(len(m) != 2 for m in mixins):
                raise DecodeError("mixins must be (chain, pulse) pairs")
            return cls(
                chain=rec["chain"],
                index=rec["index"],
                links=tuple(rec["links"]),
                mixins=mixins,
                payload=rec["payload"],
                specification=rec["specification"],
                signature=rec["signature"],
            )
        except KeyError as exc:
            raise DecodeError(f"pulse missing field {exc}") from None


def parse_record(data: bytes) -> Pulse | ChainMetadata:
    rec = canonical_parse(data)
    if not isinstance(rec, dict):
        raise DecodeError("record must be a map")
    if "chain" in rec:
        return Pulse.from_record(rec)
    if "key" in rec:
        return ChainMetadata.from_record(rec)
    raise DecodeError("record is neither a pulse nor chain metadata")


def parse_pulse(data: bytes) -> Pulse:
    rec = parse_record(data)
    if not isinstance(rec, Pulse):
        raise DecodeError("expected a pulse record")
    return rec


def parse_chain(data: bytes) -> ChainMetadata:
    rec = parse_record(data)
    if not isinstance(rec, ChainMetadata):
        raise DecodeError("expected chain metadata")
    return rec


def skip_link_indices(index: int, radix: int) -> list[int]:
    """Indices referenced by ``links`` for a pulse at ``index``.

    The previous pulse first, then ``index - radix**j`` for every ``j >= 1``
    with ``radix**j <= index`` and ``index % radix**j == 0``.
    """
    if index <= 0:
        return []
    out = [index - 1]
    step = radix
    while step <= index:
        if index % step == 0:
            out.append(index - step)
        step *= radix
    return out


def build_chain(
    signing_key: SigningKey,
    source: str,
    meta: dict | None = None,
    links_radix: int = 10,
    specification: str = SPEC_VERSION,
) -> tuple[ChainMetadata, Cid]:
    if not isinstance(links_radix, int) or links_radix < 2:
        raise InvalidRadix(f"links_radix must be an integer >= 2, got {links_radix!r}")
    unsigned = ChainMetadata(
        key=signing_key.public_jwk(),
        links_radix=links_radix,
        meta=dict(meta or {}),
        source=source,
        specification=specification,
    )
    sig = signing_key.sign_detached(signing_digest(canonical_serialize(unsigned.unsigned_record())))
    chain = replace(unsigned, signature=sig)
    return chain, chain.cid


def build_pulse(
    chain_meta: ChainMetadata,
    prev: Pulse | None,
    resolver: Resolver | None,
    mixins=(),
    payload: dict | None = None,
    specification: str = SPEC_VERSION,
    signing_key: SigningKey | None = None,
) -> tuple[Pulse, Cid]:
    """Sign the next pulse on ``chain_meta``'s chain after ``prev``."""
    if signing_key is None:
        raise ValueError("a signing key is required")
    chain_cid = chain_meta.cid
    head = getattr(resolver, "head", None)
    current = head(chain_cid) if callable(head) else None
    if prev is None:
        if current is not None:
            raise HeadMismatch("chain already has pulses; prev must be the head")
        index, links = 0, []
    else:
        if prev.chain != chain_cid:
            raise HeadMismatch("prev belongs to a different chain")
        if current is not None and current != prev.cid:
            raise HeadMismatch("prev is not the current chain head")
        index = prev.index + 1
        links = [prev.cid]
        for j in skip_link_indices(index, chain_meta.links_radix)[1:]:
            if resolver is None:
                raise ResolverMiss(f"no resolver for skip link to index {j}")
            links.append(compute_cid(resolver.get_at(chain_cid, j)))
    unsigned = Pulse(
        chain=chain_cid,
        index=index,
        links=tuple(links),
        mixins=tuple((c, p) for c, p in mixins),
        payload=dict(payload or {}),
        specification=specification,
    )
    sig = signing_key.sign_detached(signing_digest(canonical_serialize(unsigned.unsigned_record())))
    pulse = replace(unsigned, signature=sig)
    return pulse, pulse.cid


class MemoryResolver:
    """In-memory record map; also usable as a tiny unverified store."""

    def __init__(self):
        self._bytes: dict[Cid, bytes] = {}
        self._at: dict[tuple[Cid, int], Cid] = {}
        self._heads: dict[Cid, Cid] = {}

    def add(self, record: Pulse | ChainMetadata | bytes) -> Cid:
        data = record if isinstance(record, bytes) else record.to_bytes()
        cid = compute_cid(data)
        self._bytes[cid] = data
        rec = record if not isinstance(record, bytes) else parse_record(data)
        if isinstance(rec, Pulse):
            self._at[(rec.chain, rec.index)] = cid
            head = self._heads.get(rec.chain)
            if head is None or parse_pulse(self._bytes[head]).index < rec.index:
                self._heads[rec.chain] = cid
        return cid

    def put_raw(self, cid: Cid, data: bytes) -> None:
        """Store bytes under an arbitrary key (used to simulate corruption)."""
        self._bytes[cid] = data

    def get(self, cid: Cid) -> bytes:
        try:
            return self._bytes[cid]
        except KeyError:
            raise ResolverMiss(str(cid)) from None

    def get_at(self, chain: Cid, index: int) -> bytes:
        try:
            return self._bytes[self._at[(chain, index)]]
        except KeyError:
            raise ResolverMiss(f"{chain} @ {index}") from None

    def head(self, chain: Cid) -> Cid | None:
        return self._heads.get(chain)

    def __contains__(self, cid: Cid) -> bool:
        return cid in self._bytes

    def __len__(self) -> int:
        return len(self._bytes)
