"""Spacelike-separation timing audit and distance uncertainty."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import TimingViolation
from ..twine.cbor import encode_real

C_M_PER_NS = 299_792_458.0 * 1e-9


@dataclass(frozen=True)
class TimingGeometry:
    """Station geometry on a common time base (ns, m).

    ``d_ab`` runs from Alice's RNG to Bob's timetagger and ``d_ba`` from
    Bob's RNG to Alice's. ``sync_offset`` is added to remote marker times.
    """

    d_ab: float
    d_ba: float
    rng_latency_a: float = 31.0
    rng_latency_b: float = 24.6
    sync_offset: float = 0.0
    sigma_d: float = 1.0
    sigma_latency_a: float = 0.8
    sigma_latency_b: float = 0.3
    sigma_sync: float = 1.0

    def __post_init__(self):
        if self.d_ab <= 0 or self.d_ba <= 0:
            raise ValueError("distances must be positive")

    def record(self) -> dict:
        return {k: encode_real(float(v)) for k, v in self.__dict__.items()}


def light_time(d: float) -> float:
    """Vacuum light travel time over ``d`` metres, in ns."""
    return d / C_M_PER_NS


def _remote_terms(geom: TimingGeometry, station: str) -> tuple[float, float]:
    if station == "A":  # local Alice, light cone from Bob's RNG
        return geom.rng_latency_b, geom.d_ba
    if station == "B":
        return geom.rng_latency_a, geom.d_ab
    raise ValueError("station must be 'A' or 'B'")


def tau_bounds(marker_time_remote: float, last_detect_local: float, geom: TimingGeometry, station: str) -> float:
    """Margin by which the local detection beats the remote setting's light cone.

    A trial is spacelike separated iff the result is positive.
    """
    latency, d = _remote_terms(geom, station)
    return marker_time_remote + geom.sync_offset + latency + light_time(d) - last_detect_local


def tau_samples(geom: TimingGeometry, station: str, marker_time_remote: float, last_detect_local: float, trials: int = 100_000, rng_seed: int = 0) -> np.ndarray:
    """Monte Carlo over the uncertain geometry terms for one detection pair."""
    rng = np.random.default_rng(rng_seed)
    latency, d = _remote_terms(geom, station)
    sig_lat = geom.sigma_latency_b if station == "A" else geom.sigma_latency_a
    lat = latency + sig_lat * rng.standard_normal(trials)
    dist = d + geom.sigma_d * rng.standard_normal(trials)
    sync = geom.sync_offset + geom.sigma_sync * rng.standard_normal(trials)
    return marker_time_remote + sync + lat + dist / C_M_PER_NS - last_detect_local


@dataclass(frozen=True)
class TimingScenario:
    """Worst-case detection times per station for a round."""

    geometry: TimingGeometry
    detect_a: float  # latest Alice detection relative to Bob's marker
    detect_b: float  # latest Bob detection relative to Alice's marker

    def taus(self) -> tuple[float, float]:
        """(tau at Bob, tau at Alice): the pair reported as t1, t2."""
        return (
            tau_bounds(0.0, self.detect_b, self.geometry, "B"),
            tau_bounds(0.0, self.detect_a, self.geometry, "A"),
        )

    def delayed(self, extra_ns: float) -> "TimingScenario":
        """Same scenario with both detections pushed later, for fault injection."""
        return replace(self, detect_a=self.detect_a + extra_ns, detect_b=self.detect_b + extra_ns)

    def sample(self, trials: int = 100_000, rng_seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        return (
            tau_samples(self.geometry, "B", 0.0, self.detect_b, trials, rng_seed),
            tau_samples(self.geometry, "A", 0.0, self.detect_a, trials, rng_seed + 1),
        )


def worst_case_scenario(distance: float = 120.0, t1: float = 49.0, t2: float = 31.3) -> TimingScenario:
    """Geometry whose nominal margins equal (t1, t2) at the configured latencies.

    Both stations sit ``distance`` metres apart; the last detection times are
    solved from the target margins.
    """
    geom = TimingGeometry(d_ab=distance, d_ba=distance)
    lc = light_time(distance)
    return TimingScenario(
        geometry=geom,
        detect_a=geom.rng_latency_b + lc - t2,
        detect_b=geom.rng_latency_a + lc - t1,
    )


@dataclass(frozen=True)
class TimingCertificate:
    tau_1: float
    tau_2: float
    trials: int
    ok: bool

    def record(self) -> dict:
        return {"tau_1": encode_real(self.tau_1), "tau_2": encode_real(self.tau_2), "trials": self.trials, "ok": self.ok}


def audit_taus(tau_1, tau_2) -> TimingCertificate:
    """Minimum margins over a round; any nonpositive margin fails the round."""
    t1 = np.atleast_1d(np.asarray(tau_1, dtype=float))
    t2 = np.atleast_1d(np.asarray(tau_2, dtype=float))
    m1, m2 = float(t1.min()), float(t2.min())
    return TimingCertificate(m1, m2, int(max(t1.size, t2.size)), m1 > 0 and m2 > 0)


def require_spacelike(cert: TimingCertificate) -> None:
    if not cert.ok:
        raise TimingViolation(f"nonpositive timing margin: tau_1={cert.tau_1:.3f} ns, tau_2={cert.tau_2:.3f} ns")


def distance_mc(spans, sigma_len: float, sigma_ang: float, trials: int = 1_000_000, rng_seed: int = 0) -> tuple[float, float]:
    """Length of a path of nominally orthogonal spans under survey error.

    Span ``i`` nominally runs along axis ``i``. Each span length gets
    N(0, sigma_len) noise. Each joint's angle gets N(0, sigma_ang) noise
    (degrees) about 90 degrees, realized by tilting the next span toward the
    previous one. Returns mean and standard deviation of the end-to-end
    distance.
    """
    spans = np.asarray(spans, dtype=float)
    k = spans.size
    if k < 1:
        raise ValueError("need at least one span")
    if trials < 10_000:
        raise ValueError("need at least 10^4 trials")
    rng = np.random.default_rng(rng_seed)
    lengths = spans + sigma_len * rng.standard_normal((trials, k))
    total = np.zeros((trials, k))
    prev = np.zeros((trials, k))
    for i in range(k):
        axis = np.zeros(k)
        axis[i] = 1.0
        if i == 0:
            d = np.broadcast_to(axis, (trials, k)).copy()
        else:
            delta = math.radians(sigma_ang) * rng.standard_normal(trials)
            d = np.cos(delta)[:, None] * axis - np.sin(delta)[:, None] * prev
        total += lengths[:, i : i + 1] * d
        prev = d
    dist = np.linalg.norm(total, axis=1)
    return float(dist.mean()), float(dist.std(ddof=1))
