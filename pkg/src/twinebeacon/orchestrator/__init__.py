"""CURBy-Q round orchestration, audits and the ``beacon`` command line."""
from .audit import AuditReport, Check, audit_order, audit_round, audit_store, iter_chain
from .profile import PRODUCTION, PROFILES, TOY, Profile, profile_from_config
from .protocol import (
    CHAINS,
    Beacon,
    FakeClock,
    RequestPayload,
    RoundFaults,
    RoundState,
    certificate_from_record,
    output_bits,
)
from .upstream import HttpUpstream, MockUpstream, RetryPolicy, UpstreamRound, check_fresh, commit_round, mock_value, with_retry

__all__ = [
    "AuditReport", "Check", "audit_order", "audit_round", "audit_store", "iter_chain",
    "PRODUCTION", "PROFILES", "TOY", "Profile", "profile_from_config",
    "CHAINS", "Beacon", "FakeClock", "RequestPayload", "RoundFaults", "RoundState",
    "certificate_from_record", "output_bits",
    "HttpUpstream", "MockUpstream", "RetryPolicy", "UpstreamRound", "check_fresh", "commit_round",
    "mock_value", "with_retry",
]
