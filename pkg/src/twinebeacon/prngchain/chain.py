"""Pre/salt commitment chain and its verification."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

from ..errors import CommitmentMismatch, GenesisInvalid
from ..twine.records import ChainMetadata, Pulse, build_pulse
from .journal import CommitmentJournal
from .sources import read_all

ZERO_SALT = bytes(64)
COMMITMENT_BREAK = "commitment-break"


def sha3(data: bytes) -> bytes:
    return hashlib.sha3_512(data).digest()


def xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b, strict=True))


@dataclass(frozen=True)
class PrngPayload:
    pre: bytes
    salt: bytes
    sources_meta: dict
    status: str | None = None

    def __post_init__(self):
        if len(self.pre) != 64 or len(self.salt) != 64:
            raise ValueError("pre and salt are 64 bytes")

    def record(self) -> dict:
        rec = {"pre": self.pre, "salt": self.salt, "sources": self.sources_meta}
        if self.status is not None:
            rec["status"] = self.status
        return rec

    @classmethod
    def from_pulse(cls, pulse: Pulse) -> "PrngPayload":
        p = pulse.payload
        return cls(p["pre"], p["salt"], p.get("sources", {}), p.get("status"))


def output_value(pulse: Pulse) -> bytes:
    """The public randomness: the digest inside the pulse's Cid."""
    if pulse.index == 0 or pulse.payload.get("status") == COMMITMENT_BREAK:
        raise GenesisInvalid("a chain (re)start pulse carries no usable output")
    return pulse.cid.digest


def build_prng_pulse(
    chain_meta: ChainMetadata,
    prev_pulse: Pulse | None,
    prev_local_rand: bytes | None,
    local_rand: bytes,
    signing_key,
    mixins=(),
    resolver=None,
    sources_meta: dict | None = None,
    status: str | None = None,
) -> tuple[Pulse, bytes]:
    """Next pulse revealing ``prev_local_rand`` through the salt and committing to ``local_rand``."""
    if prev_pulse is None or status == COMMITMENT_BREAK:
        salt = ZERO_SALT
    else:
        if prev_local_rand is None or sha3(prev_local_rand) != PrngPayload.from_pulse(prev_pulse).pre:
            raise CommitmentMismatch(f"retained randomness does not open pulse {prev_pulse.index}")
        salt = xor(prev_local_rand, prev_pulse.cid.digest)
    payload = PrngPayload(sha3(local_rand), salt, sources_meta or {}, status)
    pulse, _ = build_pulse(chain_meta, prev_pulse, resolver, mixins=mixins, payload=payload.record(), signing_key=signing_key)
    return pulse, local_rand


def verify_prng_pair(pulse_i: Pulse, pulse_next: Pulse) -> bool:
    """H(salt_{i+1} XOR out_i) == pre_i for consecutive pulses of one chain."""
    try:
        if pulse_next.chain != pulse_i.chain or pulse_next.index != pulse_i.index + 1:
            return False
        pre_i = PrngPayload.from_pulse(pulse_i).pre
        salt = PrngPayload.from_pulse(pulse_next).salt
        return sha3(xor(salt, pulse_i.cid.digest)) == pre_i
    except (KeyError, ValueError, TypeError):
        return False


class PrngChainWriter:
    """Single writer for one PRNG chain, backed by a store and a journal.

    The fresh local randomness is journaled before the pulse is handed to
    the store, so a crash after publication can still open the commitment.
    """

    def __init__(self, chain_meta: ChainMetadata, signing_key, store, sources, journal: CommitmentJournal):
        self.chain_meta = chain_meta
        self.key = signing_key
        self.store = store
        self.sources = list(sources)
        self.journal = journal

    @property
    def chain(self):
        return self.chain_meta.cid

    def _head(self) -> Pulse | None:
        from ..twine.records import parse_pulse

        head = self.store.head(self.chain)
        return None if head is None else parse_pulse(self.store.get(head))

    def step(self, mixins=()) -> Pulse:
        prev = self._head()
        fresh, meta = read_all(self.sources)
        status = None
        prev_rand = None
        if prev is not None:
            prev_rand = self.journal.get(prev.index)
            if prev_rand is None or sha3(prev_rand) != PrngPayload.from_pulse(prev).pre:
                status = COMMITMENT_BREAK
        pulse, _ = build_prng_pulse(
            self.chain_meta, prev, prev_rand, fresh, self.key, mixins, self.store, meta, status
        )
        self.journal.put(pulse.index, fresh)
        self.store.put_pulse(pulse.to_bytes())
        if prev is not None:
            self.journal.forget(prev.index)
        return pulse
