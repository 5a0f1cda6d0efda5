"""Photon-pair source model and trial sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..certify.polytope import ConditionalDistribution
from ..certify.trials import TrialBlock, cell
from ..twine.cbor import encode_real

PULSE_PAIR_PROB = 1.0 / 363.0
PULSES_PER_TRIAL = 14
CHUNK = 1 << 20


def aggregated_pair_probability(p_pulse: float = PULSE_PAIR_PROB, pulses: int = PULSES_PER_TRIAL) -> float:
    """Chance that at least one of the aggregated pulses carries a pair."""
    return 1.0 - (1.0 - p_pulse) ** pulses


@dataclass(frozen=True)
class SourceParams:
    amp_hh: float = 0.383
    amp_vv: float = 0.924
    p_pair: float = field(default_factory=aggregated_pair_probability)
    eta_a: float = 0.81
    eta_b: float = 0.81
    dark: float = 1e-6
    angles: tuple = (6.7, -29.26, -6.7, 29.26)  # a, a', b, b' in degrees

    def __post_init__(self):
        # the default amplitudes are rounded to three digits, so allow for that
        if abs(self.amp_hh**2 + self.amp_vv**2 - 1.0) > 1e-3:
            raise ValueError("state amplitudes must be normalized")
        for name in ("p_pair", "eta_a", "eta_b", "dark"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if len(self.angles) != 4:
            raise ValueError("need four analyzer angles")

    @property
    def norm(self) -> float:
        return math.hypot(self.amp_hh, self.amp_vv)

    def record(self) -> dict:
        return {
            "amp_hh": encode_real(self.amp_hh),
            "amp_vv": encode_real(self.amp_vv),
            "p_pair": encode_real(self.p_pair),
            "eta_a": encode_real(self.eta_a),
            "eta_b": encode_real(self.eta_b),
            "dark": encode_real(self.dark),
            "angles": [encode_real(a) for a in self.angles],
        }


def joint_distribution(p: SourceParams) -> ConditionalDistribution:
    """p(ab|xy) with outcome 1 meaning a detector click.

    A pair is present with probability ``p_pair``; given a pair, both
    photons pass their analyzers with probability amp^2 and each click is
    thinned by its detector efficiency. Dark clicks are OR-ed in
    independently per side. The amplitudes are used as given; since the
    two-photon pass probability never exceeds a single-side one, the result
    is a valid no-signaling behaviour even when they are slightly off norm.
    """
    hh, vv = p.amp_hh, p.amp_vv
    a_ang = [math.radians(v) for v in p.angles[:2]]
    b_ang = [math.radians(v) for v in p.angles[2:]]
    out = np.zeros(16)
    for x in (0, 1):
        for y in (0, 1):
            al, be = a_ang[x], b_ang[y]
            amp = hh * math.cos(al) * math.cos(be) + vv * math.sin(al) * math.sin(be)
            pass_a = hh**2 * math.cos(al) ** 2 + vv**2 * math.sin(al) ** 2
            pass_b = hh**2 * math.cos(be) ** 2 + vv**2 * math.sin(be) ** 2
            q11 = p.p_pair * p.eta_a * p.eta_b * amp**2
            qa = p.p_pair * p.eta_a * pass_a
            qb = p.p_pair * p.eta_b * pass_b
            q00 = 1.0 - qa - qb + q11
            # no click on a side requires no dark count there either
            none_a = (1.0 - qa) * (1.0 - p.dark)
            none_b = (1.0 - qb) * (1.0 - p.dark)
            r00 = q00 * (1.0 - p.dark) ** 2
            r01 = none_a - r00
            r10 = none_b - r00
            r11 = 1.0 - r00 - r01 - r10
            out[cell(0, 0, x, y)] = r00
            out[cell(0, 1, x, y)] = r01
            out[cell(1, 0, x, y)] = r10
            out[cell(1, 1, x, y)] = r11
    return ConditionalDistribution(out)


def ch_value(dist) -> float:
    """Clauser-Horne expression; positive values violate local realism.

    Settings 0 are the unprimed angles a, b; settings 1 are a', b'.
    """
    p = dist.p if isinstance(dist, ConditionalDistribution) else np.asarray(dist, dtype=float)

    def p11(x, y):
        return p[cell(1, 1, x, y)]

    pa = p[cell(1, 0, 0, 0)] + p[cell(1, 1, 0, 0)]  # P(a=1 | x=0)
    pb = p[cell(0, 1, 0, 0)] + p[cell(1, 1, 0, 0)]  # P(b=1 | y=0)
    return float(p11(0, 0) + p11(0, 1) + p11(1, 0) - p11(1, 1) - pa - pb)


def settings_probabilities(eps_b: float = 0.0) -> np.ndarray:
    """mu(xy) for independent parties each choosing 1 with probability (1 + eps_b)/2."""
    q = np.array([(1.0 - eps_b) / 2.0, (1.0 + eps_b) / 2.0])
    return np.outer(q, q).reshape(4)


def _sample_chunk(rng: np.random.Generator, n: int, cum: np.ndarray, p1: float) -> np.ndarray:
    x = (rng.random(n) < p1).astype(np.uint8)
    y = (rng.random(n) < p1).astype(np.uint8)
    z = (x << 1) | y
    u = rng.random(n)
    c = (u > cum[0][z]).astype(np.uint8) + (u > cum[1][z]) + (u > cum[2][z])
    return (c.astype(np.uint8) << 2) | z


def sample_trials(p: SourceParams, n: int, eps_b: float = 0.0, rng_seed: int = 0, meta: dict | None = None) -> TrialBlock:
    """Draw ``n`` i.i.d. trials.

    Chunk ``j`` uses the generator seeded by ``(rng_seed, j)`` and chunks
    have a fixed size, so the block is the same however chunks are scheduled.
    """
    if n < 1:
        raise ValueError("need at least one trial")
    table = joint_distribution(p).table  # [c, z]
    cum = np.cumsum(table, axis=0)
    p1 = (1.0 + eps_b) / 2.0
    cells = np.empty(n, dtype=np.uint8)
    for j, start in enumerate(range(0, n, CHUNK)):
        size = min(CHUNK, n - start)
        rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed), j]))
        cells[start : start + size] = _sample_chunk(rng, size, cum, p1)
    info = {"source": p.record(), "eps_b": encode_real(eps_b), "rng_seed": int(rng_seed)}
    info.update(meta or {})
    return TrialBlock.from_cells(cells, info)
