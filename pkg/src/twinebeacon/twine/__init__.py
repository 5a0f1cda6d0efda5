"""Twine hash-graph ledger: canonical records, content IDs, signatures, ordering."""
from .cbor import canonical_parse, canonical_serialize, decode_real, encode_real
from .cid import Cid, compute_cid
from .keys import SigningKey, verify_detached
from .records import (
    ChainMetadata,
    MemoryResolver,
    Pulse,
    Resolver,
    build_chain,
    build_pulse,
    parse_chain,
    parse_pulse,
    parse_record,
    skip_link_indices,
)
from .verify import (
    OrderProof,
    VerificationReport,
    fetch_pulse,
    prove_order,
    verify_chain_metadata,
    verify_order_proof,
    verify_pulse,
)

__all__ = [
    "Cid",
    "ChainMetadata",
    "MemoryResolver",
    "OrderProof",
    "Pulse",
    "Resolver",
    "SigningKey",
    "VerificationReport",
    "build_chain",
    "build_pulse",
    "canonical_parse",
    "canonical_serialize",
    "compute_cid",
    "decode_real",
    "encode_real",
    "fetch_pulse",
    "parse_chain",
    "parse_pulse",
    "parse_record",
    "prove_order",
    "skip_link_indices",
    "verify_chain_metadata",
    "verify_detached",
    "verify_order_proof",
    "verify_pulse",
]
