"""PEF product accumulation and the smooth min-entropy certificate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ZeroPefValue
from ..twine.cbor import encode_real
from .pef import Pef
from .trials import TrialBlock


def entropy_threshold(sigma: int, eps_x: float) -> int:
    """Bits the Bell outputs must carry for a ``sigma``-bit extraction at error ``eps_x``."""
    if sigma < 1 or not 0 < eps_x < 1:
        raise ValueError("need sigma >= 1 and 0 < eps_x < 1")
    return math.ceil(sigma + 4 * math.log2(sigma) + 6 - 4 * math.log2(eps_x))


def success_target(beta: float, sigma_h: float, eps_h: float) -> float:
    """log2 T needed to pass: beta * sigma_h - log2 eps_h."""
    return beta * sigma_h - math.log2(eps_h)


def min_entropy_bound(p: float, kappa: float, beta: float) -> float:
    """-log2(p / kappa^(1 + 1/beta)) in bits."""
    if not (0 < p <= 1 and 0 < kappa <= 1 and beta > 0):
        raise ValueError("need 0 < p <= 1, 0 < kappa <= 1, beta > 0")
    return -math.log2(p) + (1.0 + 1.0 / beta) * math.log2(kappa)


@dataclass
class Accumulation:
    log2_T: float
    n: int
    stride: int
    running: np.ndarray = field(repr=False)  # log2 T_i at i = stride, 2 stride, ...
    crossing: int | None = None  # first i with log2 T_i >= target, 1-based


def _log2_table(pef: Pef, counts: np.ndarray) -> np.ndarray:
    f = np.asarray(pef.f, dtype=float)
    bad = (f <= 0) & (np.asarray(counts) > 0)
    if bad.any():
        raise ZeroPefValue(f"trials landed on cells {np.flatnonzero(bad).tolist()} where F = 0")
    with np.errstate(divide="ignore"):
        return np.log2(f)


def accumulate(trials: TrialBlock, pef: Pef, stride: int = 10_000, target: float | None = None) -> Accumulation:
    """Running log2 of the PEF product over a trial block.

    The final value is computed from the cell tallies, so it does not
    depend on the chunking. ``target`` enables crossing detection.
    """
    if stride < 1:
        raise ValueError("stride must be positive")
    table = _log2_table(pef, trials.counts)
    total = math.fsum(float(c) * float(v) for c, v in zip(trials.counts, table) if c)
    running = []
    crossing = None
    acc = 0.0
    for start, cells in trials.iter_cells():
        cum = acc + np.cumsum(table[cells])
        if target is not None and crossing is None:
            hit = np.flatnonzero(cum >= target)
            if hit.size:
                crossing = start + int(hit[0]) + 1
        first = (-(start + 1)) % stride  # offset of the next multiple of stride
        running.append(cum[first::stride])
        acc = float(cum[-1]) if cum.size else acc
    run = np.concatenate(running) if running else np.zeros(0)
    return Accumulation(total, trials.n, stride, run, crossing)


@dataclass(frozen=True)
class EntropyCertificate:
    log2_T: float
    beta: float
    eps_h: float
    certified_bits: float
    threshold: float
    passed: bool
    n_used: int
    crossing: int | None = None

    def record(self) -> dict:
        return {
            "log2_T": encode_real(self.log2_T),
            "beta": encode_real(self.beta),
            "eps_h": encode_real(self.eps_h),
            "certified_bits": encode_real(self.certified_bits),
            "threshold": encode_real(float(self.threshold)),
            "passed": self.passed,
            "n_used": self.n_used,
            "crossing": self.crossing,
        }


def certified_bits(log2_T: float, beta: float, eps_h: float) -> float:
    return (log2_T + math.log2(eps_h)) / beta


def certify(trials: TrialBlock, pef: Pef, eps_h: float, sigma_h: float, stride: int = 10_000) -> EntropyCertificate:
    """Accumulate the PEF product over ``trials`` and test it against ``sigma_h``."""
    if not 0 < eps_h < 1:
        raise ValueError("eps_h must lie in (0, 1)")
    try:
        acc = accumulate(trials, pef, stride=stride, target=success_target(pef.beta, sigma_h, eps_h))
    except ZeroPefValue:
        return EntropyCertificate(-math.inf, pef.beta, eps_h, -math.inf, sigma_h, False, trials.n)
    bits = certified_bits(acc.log2_T, pef.beta, eps_h)
    return EntropyCertificate(acc.log2_T, pef.beta, eps_h, bits, sigma_h, bits >= sigma_h, trials.n, acc.crossing)
