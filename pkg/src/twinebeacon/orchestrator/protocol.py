"""The CURBy-Q round: request, Bell data, certification, seed, output.

Pulse kinds by chain:

    curby  A status, X request, Y precommit, E error, Z output
    bell   K calibration, B queued, C complete
    drand  S external seed

Cross-chain mixins give the order X < B < C < Y < S < Z.
"""
from __future__ import annotations

import hashlib
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ..bellsim.source import SourceParams, sample_trials
from ..bellsim.timing import TimingScenario, audit_taus, worst_case_scenario
from ..certify.entropy import EntropyCertificate, certify
from ..certify.mle import mle_conditional
from ..certify.pef import Pef, optimize_beta, validate_pef
from ..certify.polytope import TrialModel
from ..certify.trials import TrialBlock
from ..errors import (
    BeaconError,
    DataHashMismatch,
    DegenerateCounts,
    FreshnessViolation,
    NoPositiveRate,
    UpstreamUnavailable,
)
from ..extract.extractor import bits_to_bytes, extract_with
from ..extract.params import ExtractorParams, find_prime, seed_length
from ..extract.seed import expand_seed
from ..twine.cbor import decode_real, encode_real
from ..twine.cid import Cid
from ..twine.records import ChainMetadata, Pulse, build_chain, build_pulse, parse_pulse
from .profile import Profile
from .upstream import RetryPolicy, UpstreamRound, check_fresh, commit_round, with_retry

log = logging.getLogger(__name__)

CHAINS = ("curby", "bell", "drand")
PHASES = ("Requested", "DataReady", "Certified", "SeedCommitted", "Published", "Failed")


# -- request payload ----------------------------------------------------------

@dataclass(frozen=True)
class RequestPayload:
    pef: Pef
    sigma: int
    n_stop: int
    eps: float
    eps_h: float
    eps_x: float
    eps_b: float
    model: str
    w: int
    r: int
    l: int
    sigma_h: int
    calibration_ref: Cid
    n_exp: float

    @classmethod
    def build(cls, pef: Pef, profile: Profile, calibration_ref: Cid, n_exp: float) -> "RequestPayload":
        params = ExtractorParams.derive(2 * profile.n_stop, profile.sigma, profile.eps_x)
        return cls(
            pef=pef, sigma=profile.sigma, n_stop=profile.n_stop, eps=profile.eps, eps_h=profile.eps_h,
            eps_x=profile.eps_x, eps_b=profile.eps_b, model=profile.model, w=params.w, r=params.r,
            l=params.l, sigma_h=profile.sigma_h, calibration_ref=calibration_ref, n_exp=n_exp,
        )

    def record(self) -> dict:
        return {
            "kind": "request",
            "pef": self.pef.record(),
            "sigma": self.sigma,
            "n_stop": self.n_stop,
            "eps": encode_real(self.eps),
            "eps_h": encode_real(self.eps_h),
            "eps_x": encode_real(self.eps_x),
            "eps_b": encode_real(self.eps_b),
            "model": self.model,
            "extractor": {"w": self.w, "r": self.r, "l": self.l},
            "sigma_h": self.sigma_h,
            "calibration_ref": self.calibration_ref,
            "n_exp": encode_real(self.n_exp),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "RequestPayload":
        ex = rec["extractor"]
        return cls(
            pef=Pef.from_record(rec["pef"]), sigma=rec["sigma"], n_stop=rec["n_stop"],
            eps=decode_real(rec["eps"]), eps_h=decode_real(rec["eps_h"]), eps_x=decode_real(rec["eps_x"]),
            eps_b=decode_real(rec["eps_b"]), model=rec["model"], w=ex["w"], r=ex["r"], l=ex["l"],
            sigma_h=rec["sigma_h"], calibration_ref=rec["calibration_ref"], n_exp=decode_real(rec["n_exp"]),
        )

    @property
    def extractor_params(self) -> ExtractorParams:
        return ExtractorParams(2 * self.n_stop, self.sigma_h, self.sigma, self.eps_x, self.w, self.r, self.l)

    def problems(self) -> list[str]:
        """Internal consistency of the request; empty when sound."""
        from ..certify.entropy import entropy_threshold

        out = []
        if entropy_threshold(self.sigma, self.eps_x) != self.sigma_h:
            out.append("sigma_h does not match sigma and eps_x")
        if find_prime(2 * self.n_stop, self.sigma, self.eps_x) != self.w:
            out.append("w is not the prime the request parameters call for")
        if seed_length(self.w, self.sigma) != (self.r, self.l):
            out.append("seed length does not match w and sigma")
        if not math.isclose(self.eps_h + self.eps_x, self.eps, rel_tol=1e-12):
            out.append("error budget does not add up")
        check = validate_pef(self.pef.f, self.pef.beta, TrialModel.build(self.model, self.eps_b))
        if not check.valid:
            out.append(f"PEF fails validation (worst lhs {check.lhs:.12g})")
        return out


def certificate_from_record(rec: dict) -> EntropyCertificate:
    return EntropyCertificate(
        log2_T=decode_real(rec["log2_T"]), beta=decode_real(rec["beta"]), eps_h=decode_real(rec["eps_h"]),
        certified_bits=decode_real(rec["certified_bits"]), threshold=decode_real(rec["threshold"]),
        passed=rec["passed"], n_used=rec["n_used"], crossing=rec.get("crossing"),
    )


# -- round bookkeeping ----------------------------------------------------------

@dataclass
class RoundFaults:
    """Injected failures for testing the fail-closed paths."""

    detect_delay_ns: float = 0.0  # push detections past the light cone
    pef_override: Pef | None = None  # certify with a different PEF than committed
    tamper_data: bool = False  # flip one byte of the delivered trial file
    stale_seed: bool = False  # commit to an already published upstream round
    upstream_outages: int = 0  # failed upstream requests before success
    white_noise: bool = False  # trials carry no Bell violation


@dataclass
class RoundState:
    phase: str = "Requested"
    refs: dict = field(default_factory=dict)  # pulse kind letter -> Cid
    certificate: EntropyCertificate | None = None
    output: bytes | None = None
    error: str | None = None
    trials_path: str | None = None

    def advance(self, phase: str) -> None:
        allowed = {
            "Requested": {"DataReady", "Failed"},
            "DataReady": {"Certified", "Failed"},
            "Certified": {"SeedCommitted", "Failed"},
            "SeedCommitted": {"Published", "Failed"},
        }
        if phase not in allowed.get(self.phase, set()):
            raise BeaconError(f"illegal transition {self.phase} -> {phase}")
        self.phase = phase

    def summary(self) -> dict:
        return {
            "phase": self.phase,
            "refs": {k: str(v) for k, v in self.refs.items()},
            "certified_bits": None if self.certificate is None else self.certificate.certified_bits,
            "passed": None if self.certificate is None else self.certificate.passed,
            "output": None if self.output is None else self.output.hex(),
            "error": self.error,
        }


class FakeClock:
    """Deterministic clock whose sleep advances time."""

    def __init__(self, start: float = 1_700_000_000.0):
        self.now = start

    def time(self) -> float:
        return self.now

    def sleep(self, dt: float) -> None:
        self.now += max(dt, 0.0)


def _seed_for(base: int, *parts) -> int:
    h = hashlib.sha3_256(repr((base,) + parts).encode()).digest()
    return int.from_bytes(h[:8], "big")


# -- the service ------------------------------------------------------------------

class Beacon:
    """One CURBy-Q deployment: three chains over a shared store."""

    def __init__(
        self,
        store,
        keys: dict,
        chains: dict,
        profile: Profile,
        upstream,
        source: SourceParams | None = None,
        timing: TimingScenario | None = None,
        timing_samples: int = 1000,
        rng_seed: int = 0,
        private_dir: str | None = None,
        retry: RetryPolicy = RetryPolicy(),
        clock=time.time,
        sleep=time.sleep,
        prng=None,
    ):
        self.store = store
        self.keys = keys
        self.chains = chains
        self.profile = profile
        self.upstream = upstream
        self.source = source or SourceParams()
        self.timing = timing or worst_case_scenario()
        self.timing_samples = timing_samples
        self.rng_seed = rng_seed
        self.private_dir = private_dir
        self.retry = retry
        self.clock = clock
        self.sleep = sleep
        self.prng = prng
        self.model = TrialModel.build(profile.model, profile.eps_b)
        self._private: dict[str, bytes] = {}
        if private_dir:
            os.makedirs(private_dir, exist_ok=True)

    # setup ---------------------------------------------------------------

    @staticmethod
    def create_chains(store, keys: dict, names=CHAINS, meta: dict | None = None) -> dict:
        chains = {}
        for name in names:
            chain, cid = build_chain(keys[name], source=name, meta=dict(meta or {}))
            store.put_chain(chain.to_bytes())
            chains[name] = chain
        return chains

    # pulse plumbing ------------------------------------------------------

    def chain_cid(self, name: str) -> Cid:
        return self.chains[name].cid

    def head(self, name: str) -> Pulse | None:
        cid = self.store.head(self.chain_cid(name))
        return None if cid is None else parse_pulse(self.store.get(cid))

    def append(self, name: str, payload: dict, mixins=()) -> Pulse:
        chain: ChainMetadata = self.chains[name]
        pulse, _ = build_pulse(
            chain, self.head(name), self.store, mixins=mixins, payload=payload, signing_key=self.keys[name]
        )
        self.store.put_pulse(pulse.to_bytes())
        return pulse

    def mixin(self, name: str, pulse: Pulse) -> tuple:
        return (self.chain_cid(name), pulse.cid)

    def status(self, state: str, detail: str = "") -> Pulse:
        return self.append("curby", {"kind": "status", "state": state, "detail": detail, "at": encode_real(self.clock())})

    # private data --------------------------------------------------------

    def store_trials(self, block: TrialBlock) -> tuple[bytes, str]:
        data = block.to_bytes()
        digest = hashlib.sha3_512(data).digest()
        name = digest.hex()
        if self.private_dir:
            path = os.path.join(self.private_dir, name + ".twbt")
            with open(path, "wb") as fh:
                fh.write(data)
            return digest, path
        self._private[name] = data
        return digest, name

    def load_trials(self, ref: str) -> bytes:
        if ref in self._private:
            return self._private[ref]
        with open(ref, "rb") as fh:
            return fh.read()

    # protocol steps ------------------------------------------------------

    def calibrate(self, round_no: int, faults: RoundFaults | None = None) -> tuple[TrialBlock, Pulse]:
        """Calibration block from the Bell responder, its hash posted as K.

        The simulator stands in for the previous day's data, so each round
        draws a fresh block.
        """
        block = self._simulate(self.profile.calibration_trials, round_no, "calibration", faults)
        digest, _ = self.store_trials(block)
        pulse = self.append("bell", {"kind": "calibration", "data_hash": digest, "n": block.n})
        return block, pulse

    def make_request(self, calibration: TrialBlock, calibration_ref: Pulse) -> Pulse:
        """Precommit a PEF fitted to calibration data: pulse X.

        Raises NoPositiveRate (after posting a degraded status) when the
        calibration shows no certifiable entropy.
        """
        try:
            nu = mle_conditional(calibration.counts, self.model)
            grid = np.logspace(-3, 0, self.profile.beta_points)
            choice = optimize_beta(nu.p, self.model, self.profile.sigma_h, self.profile.eps_h, beta_grid=grid)
        except (NoPositiveRate, DegenerateCounts) as exc:
            self.status("degraded", f"calibration rejected: {exc}")
            raise
        req = RequestPayload.build(choice.pef, self.profile, calibration_ref.cid, choice.n_exp)
        return self.append("curby", req.record())

    def _simulate(self, n: int, round_no: int, purpose: str, faults: RoundFaults | None) -> TrialBlock:
        params = self.source
        if faults and faults.white_noise:
            params = SourceParams(amp_hh=1.0, amp_vv=0.0, p_pair=0.0, dark=0.5)
        return sample_trials(params, n, eps_b=0.0, rng_seed=_seed_for(self.rng_seed, round_no, purpose), meta={"purpose": purpose})

    def serve_request(self, x: Pulse, round_no: int, faults: RoundFaults | None = None) -> tuple[Pulse, Pulse, TrialBlock, str]:
        """Bell responder: queue (B), run n_stop trials, post the data hash (C)."""
        req = RequestPayload.from_record(x.payload)
        b = self.append("bell", {"kind": "queued", "request": x.cid}, mixins=[self.mixin("curby", x)])
        block = self._simulate(req.n_stop, round_no, "trials", faults)
        scenario = self.timing.delayed(faults.detect_delay_ns) if faults and faults.detect_delay_ns else self.timing
        t1, t2 = scenario.sample(self.timing_samples, _seed_for(self.rng_seed, round_no, "timing") % (1 << 32))
        timing = audit_taus(t1, t2)
        block.meta["timing"] = timing.record()
        digest, ref = self.store_trials(block)
        c = self.append(
            "bell",
            {
                "kind": "complete",
                "request": x.cid,
                "queued": b.cid,
                "data_hash": digest,
                "n": block.n,
                "timing": timing.record(),
                "valid": timing.ok,
            },
        )
        return b, c, block, ref

    def error(self, x: Pulse, cause: str, mixins=(), certificate: EntropyCertificate | None = None, stage: str = "certify") -> Pulse:
        payload = {"kind": "error", "request": x.cid, "cause": cause, "stage": stage}
        if certificate is not None:
            payload["certificate"] = certificate.record()
        return self.append("curby", payload, mixins=mixins)

    def process_response(self, x: Pulse, c: Pulse, data: bytes, faults: RoundFaults | None = None):
        """Certify the delivered data against the committed PEF; Y on success, else E."""
        req = RequestPayload.from_record(x.payload)
        mix = [self.mixin("bell", c)]
        if not c.payload.get("valid", False):
            return None, self.error(x, "timing audit failed: a trial was not spacelike separated", mix)
        if hashlib.sha3_512(data).digest() != c.payload["data_hash"]:
            return None, self.error(x, str(DataHashMismatch("trial file does not match the posted hash")), mix)
        block = TrialBlock.from_bytes(data)
        pef = faults.pef_override if faults and faults.pef_override is not None else req.pef
        cert = certify(block, pef, req.eps_h, req.sigma_h)
        if not cert.passed:
            return None, self.error(x, "certificate below threshold", mix, cert)
        latest = self.upstream.latest_round()
        seed_round = latest if faults and faults.stale_seed else latest + 1
        y = self.append(
            "curby",
            {
                "kind": "precommit",
                "request": x.cid,
                "data_hash": c.payload["data_hash"],
                "certificate": cert.record(),
                "seed_round": seed_round,
                "latest_at_commit": latest,
                "at": encode_real(self.clock()),
            },
            mixins=mix,
        )
        return y, None

    def wait_for_round(self, r: int, poll: float = 1.0, timeout: float = 3600.0) -> UpstreamRound:
        start = self.clock()
        while with_retry(self.upstream.latest_round, self.retry, self.sleep) < r:
            if self.clock() - start > timeout:
                raise UpstreamUnavailable(f"round {r} did not appear within {timeout} s")
            self.sleep(poll)
        return with_retry(lambda: self.upstream.get(r), self.retry, self.sleep)

    def fetch_seed(self, y: Pulse) -> Pulse:
        """Wait for the committed upstream round and wrap it as S, linked after Y."""
        r = y.payload["seed_round"]
        check_fresh(self.upstream, r, decode_real(y.payload["at"]), y.payload["latest_at_commit"])
        up = self.wait_for_round(r)
        return self.append(
            "drand",
            {"kind": "seed", "round": up.round, "randomness": up.randomness, "upstream": up.meta, "commitment": y.cid},
            mixins=[self.mixin("curby", y)],
        )

    def publish_output(self, x: Pulse, c: Pulse, y: Pulse, s: Pulse, data: bytes) -> Pulse:
        req = RequestPayload.from_record(x.payload)
        cert = certificate_from_record(y.payload["certificate"])
        block = TrialBlock.from_bytes(data)
        bits = output_bits(block, s.payload["randomness"], req, cert)
        return self.append(
            "curby",
            {"kind": "output", "bits": bits, "refs": {"X": x.cid, "C": c.cid, "Y": y.cid, "S": s.cid}},
            mixins=[self.mixin("drand", s)],
        )

    # a full round --------------------------------------------------------

    def run_round(self, round_no: int | None = None, faults: RoundFaults | None = None) -> RoundState:
        faults = faults or RoundFaults()
        if round_no is None:
            head = self.head("curby")
            round_no = 0 if head is None else head.index + 1
        state = RoundState()
        cal, k = self.calibrate(round_no, faults)
        try:
            x = self.make_request(cal, k)
        except (NoPositiveRate, DegenerateCounts) as exc:
            state.phase, state.error = "Failed", str(exc)
            state.refs["A"] = self.head("curby").cid
            return state
        state.refs["X"] = x.cid
        b, c, block, ref = self.serve_request(x, round_no, faults)
        state.refs.update(B=b.cid, C=c.cid)
        state.trials_path = ref
        state.advance("DataReady")
        data = self.load_trials(ref)
        if faults.tamper_data:
            data = data[:-1] + bytes([data[-1] ^ 1]) if len(data) else data
        y, e = self.process_response(x, c, data, faults)
        if e is not None:
            state.refs["E"] = e.cid
            state.error = e.payload["cause"]
            if "certificate" in e.payload:
                state.certificate = certificate_from_record(e.payload["certificate"])
            state.advance("Failed")
            return state
        state.refs["Y"] = y.cid
        state.certificate = certificate_from_record(y.payload["certificate"])
        state.advance("Certified")
        if faults.upstream_outages:
            self.upstream.fail_next = faults.upstream_outages
        try:
            s = self.fetch_seed(y)
        except (FreshnessViolation, UpstreamUnavailable) as exc:
            e = self.error(x, f"seed unavailable: {exc}", stage="seed")
            state.refs["E"] = e.cid
            state.error = str(exc)
            state.advance("Failed")
            return state
        state.refs["S"] = s.cid
        state.advance("SeedCommitted")
        z = self.publish_output(x, c, y, s, data)
        state.refs["Z"] = z.cid
        state.output = z.payload["bits"]
        state.advance("Published")
        if self.prng is not None:
            self.prng.step(mixins=[self.mixin("curby", z), self.mixin("drand", s)])
        return state


def output_bits(block: TrialBlock, seed_value: bytes, req: RequestPayload, cert: EntropyCertificate) -> bytes:
    """Extractor output for a round, as bytes."""
    if not cert.passed or cert.certified_bits < req.sigma_h:
        raise BeaconError("refusing to extract without a passing certificate")
    if block.n != req.n_stop:
        raise BeaconError("trial count differs from the committed stopping criterion")
    params = ExtractorParams(2 * block.n, cert.certified_bits, req.sigma, req.eps_x, req.w, req.r, req.l)
    seed = expand_seed(seed_value, req.l)
    return bits_to_bytes(extract_with(block.output_bits(), seed, params))
