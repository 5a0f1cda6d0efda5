"""Independent audit of published rounds and of the whole store."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from ..certify.entropy import certify
from ..certify.trials import TrialBlock
from ..errors import BeaconError, ResolverMiss
from ..twine.cid import Cid
from ..twine.records import Pulse, parse_pulse
from ..twine.verify import prove_order, verify_order_proof, verify_pulse
from .protocol import RequestPayload, certificate_from_record, output_bits


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class AuditReport:
    subject: str
    checks: list = field(default_factory=list)

    def add(self, name: str, ok: bool, detail: str = "") -> bool:
        self.checks.append(Check(name, bool(ok), detail))
        return bool(ok)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def as_dict(self) -> dict:
        return {
            "subject": self.subject,
            "ok": self.ok,
            "checks": [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in self.checks],
        }


def _load(store, cid: Cid) -> Pulse:
    return parse_pulse(store.get(cid))


def iter_chain(store, chain: Cid):
    """``(cid, pulse)`` in index order, through the resolver interface only."""
    head = store.head(chain)
    if head is None:
        return
    last = _load(store, head).index
    for i in range(last + 1):
        p = parse_pulse(store.get_at(chain, i))
        yield p.cid, p


def _kind(p: Pulse) -> str | None:
    return p.payload.get("kind") if isinstance(p.payload, dict) else None


def audit_order(store, a: Cid, b: Cid) -> AuditReport:
    report = AuditReport(f"order {a} {b}")
    proof = prove_order(a, b, store)
    if proof is None:
        report.add("path", False, "no hash-link path between the pulses")
        return report
    report.add("path", True, f"{proof.earlier} is earlier ({len(proof.path) - 1} hops)")
    report.add("path re-verified", verify_order_proof(proof, store))
    return report


def seed_candidates(store, drand_chain: Cid, y: Cid, seed_round: int) -> list[Pulse]:
    """Every S pulse answering commitment ``y`` or naming its round."""
    out = []
    for _, p in iter_chain(store, drand_chain):
        if _kind(p) == "seed" and (p.payload.get("commitment") == y or p.payload.get("round") == seed_round):
            out.append(p)
    return out


def audit_round(store, z_cid: Cid, trials: bytes | None = None) -> AuditReport:
    """Verify a published output pulse and everything it rests on.

    With ``trials`` (the disclosed trial file) the certificate and the
    output bits are recomputed from scratch.
    """
    report = AuditReport(f"round {z_cid}")
    try:
        z = _load(store, z_cid)
    except ResolverMiss:
        report.add("Z present", False, "output pulse not in store")
        return report
    if not report.add("Z is an output pulse", _kind(z) == "output"):
        return report
    refs = z.payload["refs"]
    pulses = {"Z": z}
    try:
        for k in ("X", "C", "Y", "S"):
            pulses[k] = _load(store, refs[k])
        pulses["B"] = _load(store, pulses["C"].payload["queued"])
    except (ResolverMiss, KeyError) as exc:
        report.add("referenced pulses present", False, str(exc))
        return report
    report.add("referenced pulses present", True)

    for k in ("X", "B", "C", "Y", "S", "Z"):
        p = pulses[k]
        meta = store.chain(p.chain)
        rep = verify_pulse(p, meta, store)
        report.add(f"{k} verifies", rep.ok, "" if rep.ok else "; ".join(rep.details))

    order = ["X", "B", "C", "Y", "S", "Z"]
    for early, late in zip(order, order[1:]):
        proof = prove_order(pulses[early].cid, pulses[late].cid, store)
        ok = proof is not None and proof.earlier == pulses[early].cid and verify_order_proof(proof, store)
        report.add(f"{early} before {late}", ok)

    x, c, y, s = pulses["X"], pulses["C"], pulses["Y"], pulses["S"]
    req = RequestPayload.from_record(x.payload)
    problems = req.problems()
    report.add("request consistent", not problems, "; ".join(problems))
    report.add("data hash carried into precommit", y.payload.get("data_hash") == c.payload.get("data_hash"))
    report.add("timing audit passed", bool(c.payload.get("valid")))
    report.add("round belongs to request", y.payload.get("request") == x.cid and c.payload.get("request") == x.cid)
    cert = certificate_from_record(y.payload["certificate"])
    report.add("certificate passed", cert.passed and cert.certified_bits >= req.sigma_h, f"{cert.certified_bits:.1f} bits")
    report.add("certificate uses committed beta", cert.beta == req.pef.beta)

    r = y.payload.get("seed_round")
    report.add("seed round is the committed one", s.payload.get("round") == r)
    report.add("seed round unpublished at commitment", r is not None and r > y.payload.get("latest_at_commit", r))
    report.add("seed answers this commitment", s.payload.get("commitment") == y.cid)
    drand_chain = s.chain
    cands = seed_candidates(store, drand_chain, y.cid, r)
    report.add(
        "single seed candidate",
        len(cands) == 1,
        "" if len(cands) == 1 else f"{len(cands)} seed pulses compete for this commitment: order ambiguity",
    )

    if trials is not None:
        digest = hashlib.sha3_512(trials).digest()
        if report.add("trial file matches posted hash", digest == c.payload["data_hash"]):
            block = TrialBlock.from_bytes(trials)
            again = certify(block, req.pef, req.eps_h, req.sigma_h)
            same = abs(again.log2_T - cert.log2_T) <= 1e-9 * max(1.0, abs(cert.log2_T)) and again.beta == cert.beta
            report.add("certificate recomputes", same, f"recomputed {again.certified_bits:.3f} bits")
            try:
                bits = output_bits(block, s.payload["randomness"], req, again)
                report.add("output bits recompute", bits == z.payload["bits"])
            except BeaconError as exc:
                report.add("output bits recompute", False, str(exc))
    return report


def audit_store(store, curby_chain: Cid) -> AuditReport:
    """Fail-closed and one-outcome scans over a CURBy-Q chain.

    Every Z must rest on a passing precommit; every request gets exactly one
    certification outcome (Y or an E raised before any Y); no E and Z
    coexist for a request.
    """
    report = AuditReport(f"store {curby_chain}")
    by_request: dict = {}
    pulses = {}
    for cid, p in iter_chain(store, curby_chain):
        pulses[cid] = p
        kind = _kind(p)
        if kind == "request":
            by_request.setdefault(cid, {"Y": [], "E": [], "Z": [], "E_cert": []})
        elif kind in ("precommit", "error"):
            slot = by_request.setdefault(p.payload["request"], {"Y": [], "E": [], "Z": [], "E_cert": []})
            if kind == "precommit":
                slot["Y"].append(p)
            else:
                slot["E"].append(p)
                if p.payload.get("stage", "certify") == "certify":
                    slot["E_cert"].append(p)
        elif kind == "output":
            x = p.payload["refs"]["X"]
            by_request.setdefault(x, {"Y": [], "E": [], "Z": [], "E_cert": []})["Z"].append(p)
    bad_z, bad_outcome, bad_both = [], [], []
    for x, slot in by_request.items():
        for z in slot["Z"]:
            y = pulses.get(z.payload["refs"]["Y"])
            if y is None or not certificate_from_record(y.payload["certificate"]).passed:
                bad_z.append(str(z.cid))
        if len(slot["Y"]) + len(slot["E_cert"]) != 1:
            bad_outcome.append(str(x))
        if slot["Z"] and slot["E"]:
            bad_both.append(str(x))
    report.add("every output rests on a passing certificate", not bad_z, ", ".join(bad_z))
    report.add("one certification outcome per request", not bad_outcome, ", ".join(bad_outcome))
    report.add("no request has both output and error", not bad_both, ", ".join(bad_both))
    report.add("requests scanned", True, f"{len(by_request)} requests, {sum(len(s['Z']) for s in by_request.values())} outputs")
    return report
