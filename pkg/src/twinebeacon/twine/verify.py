"""Signature, link and ordering checks over the hash graph."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .cbor import canonical_serialize
from .cid import Cid, compute_cid
from .keys import signing_digest, verify_detached
from .records import ChainMetadata, Pulse, Resolver, parse_pulse, skip_link_indices
from ..errors import DecodeError, ResolverMiss


@dataclass
class VerificationReport:
    cid_ok: bool = True
    signature_ok: bool = True
    link_ok: bool = True
    index_ok: bool = True
    details: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.cid_ok and self.signature_ok and self.link_ok and self.index_ok

    def __bool__(self) -> bool:
        return self.ok

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "cid_ok": self.cid_ok,
            "signature_ok": self.signature_ok,
            "link_ok": self.link_ok,
            "index_ok": self.index_ok,
            "details": list(self.details),
        }


def fetch_pulse(resolver: Resolver, cid: Cid) -> Pulse:
    """Fetch and hash-check a pulse; raises ResolverMiss or DecodeError."""
    data = resolver.get(cid)
    if not cid.matches(data):
        raise DecodeError(f"stored bytes do not hash to {cid}")
    return parse_pulse(data)


def verify_chain_metadata(chain: ChainMetadata, cid: Cid | None = None) -> VerificationReport:
    report = VerificationReport()
    if cid is not None and compute_cid(chain.to_bytes()) != cid:
        report.cid_ok = False
        report.details.append("chain metadata does not hash to claimed CID")
    payload = signing_digest(canonical_serialize(chain.unsigned_record()))
    if not verify_detached(chain.key, payload, chain.signature):
        report.signature_ok = False
        report.details.append("chain signature invalid under embedded key")
    if not isinstance(chain.links_radix, int) or chain.links_radix < 2:
        report.link_ok = False
        report.details.append("links_radix must be >= 2")
    return report


def verify_pulse(
    pulse: Pulse,
    chain_meta: ChainMetadata,
    resolver: Resolver,
    cid: Cid | None = None,
) -> VerificationReport:
    """Check one pulse. Content failures are reported, not raised."""
    report = VerificationReport()
    try:
        data = pulse.to_bytes()
    except Exception as exc:
        report.cid_ok = report.signature_ok = False
        report.details.append(f"pulse does not serialize: {exc}")
        return report
    if cid is not None and compute_cid(data) != cid:
        report.cid_ok = False
        report.details.append("pulse bytes do not hash to claimed CID")

    unsigned = signing_digest(canonical_serialize(pulse.unsigned_record()))
    if not verify_detached(chain_meta.key, unsigned, pulse.signature):
        report.signature_ok = False
        report.details.append("signature invalid under chain key")

    if pulse.chain != chain_meta.cid:
        report.link_ok = False
        report.details.append("pulse.chain does not reference the supplied chain metadata")

    if not isinstance(pulse.index, int) or isinstance(pulse.index, bool) or pulse.index < 0:
        report.index_ok = False
        report.details.append("index must be a nonnegative integer")
        return report

    expected = skip_link_indices(pulse.index, chain_meta.links_radix)
    if pulse.index == 0:
        if pulse.links:
            report.index_ok = False
            report.details.append("genesis pulse must have no links")
    elif len(pulse.links) != len(expected):
        report.link_ok = False
        report.details.append(f"expected {len(expected)} links, found {len(pulse.links)}")

    for k, (link, want) in enumerate(zip(pulse.links, expected)):
        try:
            target = fetch_pulse(resolver, link)
        except (ResolverMiss, DecodeError) as exc:
            report.link_ok = False
            report.details.append(f"link {k} unresolvable: {exc}")
            if k == 0:
                report.index_ok = False
            continue
        if target.chain != pulse.chain:
            report.link_ok = False
            report.details.append(f"link {k} points to another chain")
        if target.index != want:
            report.link_ok = False
            report.details.append(f"link {k} points to index {target.index}, expected {want}")
            if k == 0:
                report.index_ok = False

    for k, (mchain, mpulse) in enumerate(pulse.mixins):
        try:
            target = fetch_pulse(resolver, mpulse)
        except (ResolverMiss, DecodeError) as exc:
            report.link_ok = False
            report.details.append(f"mixin {k} unresolvable: {exc}")
            continue
        if target.chain != mchain:
            report.link_ok = False
            report.details.append(f"mixin {k} chain CID does not match the pulse it names")
    return report


@dataclass(frozen=True)
class OrderProof:
    """``path[0] == later`` and each element hash-links to the next; ``path[-1] == earlier``."""

    earlier: Cid
    later: Cid
    path: tuple

    def as_dict(self) -> dict:
        return {
            "earlier": str(self.earlier),
            "later": str(self.later),
            "path": [str(c) for c in self.path],
        }


def _neighbours(p: Pulse) -> list[Cid]:
    return list(p.links) + p.mixin_pulses()


def _search(start: Cid, goal: Cid, resolver: Resolver, max_visits: int | None) -> list[Cid] | None:
    if start == goal:
        return [start]
    parent: dict[Cid, Cid | None] = {start: None}
    queue = deque([start])
    visits = 0
    while queue:
        node = queue.popleft()
        visits += 1
        if max_visits is not None and visits > max_visits:
            return None
        try:
            pulse = fetch_pulse(resolver, node)
        except (ResolverMiss, DecodeError):
            continue
        for nxt in _neighbours(pulse):
            if nxt in parent:
                continue
            parent[nxt] = node
            if nxt == goal:
                path = [nxt]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                return path[::-1]
            queue.append(nxt)
    return None


def prove_order(a: Cid, b: Cid, resolver: Resolver, max_visits: int | None = None) -> OrderProof | None:
    """Shortest hash-link path between two pulses, or ``None`` when none exists.

    The direction of the returned proof says which pulse is earlier.
    """
    fetch_pulse(resolver, a)
    fetch_pulse(resolver, b)
    path = _search(b, a, resolver, max_visits)
    if path is not None:
        return OrderProof(earlier=a, later=b, path=tuple(path))
    path = _search(a, b, resolver, max_visits)
    if path is not None:
        return OrderProof(earlier=b, later=a, path=tuple(path))
    return None


def verify_order_proof(proof: OrderProof, resolver: Resolver) -> bool:
    """Re-check every hop of ``proof`` from raw stored bytes."""
    path = proof.path
    if not path or path[0] != proof.later or path[-1] != proof.earlier:
        return False
    try:
        for here, there in zip(path, path[1:]):
            pulse = fetch_pulse(resolver, here)
            if there not in _neighbours(pulse):
                return False
        fetch_pulse(resolver, path[-1])
    except (ResolverMiss, DecodeError):
        return False
    return True
