"""External seed beacon: HTTP client, deterministic mock and retry policy."""
from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field

from ..errors import FreshnessViolation, UpstreamUnavailable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UpstreamRound:
    round: int
    randomness: bytes  # 64 bytes
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.randomness) != 64:
            raise ValueError("upstream randomness must be 64 bytes")


def mock_value(round_number: int) -> bytes:
    return hashlib.sha3_512(round_number.to_bytes(8, "big")).digest()


class MockUpstream:
    """Deterministic upstream: round r publishes SHA3-512(r as 8-byte big-endian).

    Rounds advance on a fixed cadence from ``genesis`` on the supplied
    clock, or by explicit ``advance`` calls when ``period`` is None.
    ``fail_next`` makes the next that many requests fail, for retry tests.
    """

    name = "mock"

    def __init__(self, period: float | None = None, genesis: float | None = None, clock=time.time, start_round: int = 1):
        self.period = period
        self.clock = clock
        self.genesis = clock() if genesis is None else genesis
        self._round = start_round
        self.fail_next = 0
        self._lock = threading.Lock()

    def _check(self) -> None:
        with self._lock:
            if self.fail_next > 0:
                self.fail_next -= 1
                raise UpstreamUnavailable("mock upstream outage")

    def latest_round(self) -> int:
        if self.period is None:
            return self._round
        return 1 + int((self.clock() - self.genesis) // self.period)

    def round_time(self, r: int) -> float | None:
        """Publication time of round ``r``; None when rounds advance manually."""
        if self.period is None:
            return None
        return self.genesis + (r - 1) * self.period

    def advance(self, steps: int = 1) -> int:
        with self._lock:
            self._round += steps
            return self._round

    def latest(self) -> UpstreamRound:
        self._check()
        r = self.latest_round()
        return UpstreamRound(r, mock_value(r), {"upstream": self.name})

    def get(self, r: int) -> UpstreamRound:
        self._check()
        if r > self.latest_round():
            raise UpstreamUnavailable(f"round {r} not yet published")
        return UpstreamRound(r, mock_value(r), {"upstream": self.name})


class HttpUpstream:
    """drand-style HTTP API: GET {base}/public/latest and {base}/public/{round}."""

    name = "http"

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _get(self, path: str) -> UpstreamRound:
        url = f"{self.base_url}/public/{path}"
        try:
            with urllib.request.urlopen(url, timeout=self.timeout) as resp:
                doc = json.loads(resp.read())
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise UpstreamUnavailable(f"{url}: {exc}") from None
        try:
            value = bytes.fromhex(doc["randomness"])
            meta = {k: v for k, v in doc.items() if k in ("signature", "previous_signature") and isinstance(v, str)}
            meta["upstream"] = self.base_url
            return UpstreamRound(int(doc["round"]), value, meta)
        except (KeyError, ValueError, TypeError) as exc:
            raise UpstreamUnavailable(f"{url}: malformed response ({exc})") from None

    def latest(self) -> UpstreamRound:
        return self._get("latest")

    def latest_round(self) -> int:
        return self.latest().round

    def get(self, r: int) -> UpstreamRound:
        return self._get(str(r))

    def round_time(self, r: int) -> float | None:
        return None


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 5
    initial_delay: float = 1.0
    factor: float = 2.0

    def delays(self):
        d = self.initial_delay
        for _ in range(self.attempts - 1):
            yield d
            d *= self.factor


def with_retry(fn, policy: RetryPolicy = RetryPolicy(), sleep=time.sleep):
    """Call ``fn`` until it succeeds, sleeping between UpstreamUnavailable failures."""
    delays = list(policy.delays())
    for attempt in range(policy.attempts):
        try:
            return fn()
        except UpstreamUnavailable as exc:
            if attempt == policy.attempts - 1:
                raise
            log.warning("upstream attempt %d failed: %s", attempt + 1, exc)
            sleep(delays[attempt])
    raise UpstreamUnavailable("no attempts configured")


def commit_round(upstream) -> int:
    """The round a fresh commitment may name: the next one not yet published."""
    return upstream.latest_round() + 1


def check_fresh(upstream, committed_round: int, committed_at: float | None, latest_at_commit: int | None = None) -> None:
    """Raise FreshnessViolation if the named round existed when it was committed to."""
    if latest_at_commit is not None and committed_round <= latest_at_commit:
        raise FreshnessViolation(f"round {committed_round} was already published (latest {latest_at_commit})")
    published = upstream.round_time(committed_round)
    if published is not None and committed_at is not None and published <= committed_at:
        raise FreshnessViolation(f"round {committed_round} predates its commitment")
