"""Output-feedback RSA iteration: x_k = x_{k-1}^e mod n, emitting x_k mod 2."""
from __future__ import annotations

import math
import secrets
import threading
from dataclasses import dataclass, replace

import gmpy2
import numpy as np

from ..errors import DecodeError
from ..twine.cbor import canonical_parse, canonical_serialize
from .chain import PrimeChainSpec, gen_chain_prime
from .numtheory import factorize, is_probable_prime, multiplicative_order, powmod, carmichael

E_MIN = 65537
PRODUCTION_BITS = 1536
TOY_BITS = 32


@dataclass(frozen=True)
class RsaPrngState:
    n: int
    e: int
    x: int
    bits_emitted: int = 0

    def __post_init__(self):
        if not 1 < self.x < self.n:
            raise ValueError("state must satisfy 1 < x < n")
        if math.gcd(self.x, self.n) != 1:
            raise ValueError("state must be coprime to the modulus")

    def record(self) -> dict:
        def b(v: int) -> bytes:
            return v.to_bytes(max(1, (v.bit_length() + 7) // 8), "big")

        return {"n": b(self.n), "e": b(self.e), "x": b(self.x), "bits_emitted": self.bits_emitted}

    @classmethod
    def from_record(cls, rec: dict) -> "RsaPrngState":
        try:
            return cls(
                n=int.from_bytes(rec["n"], "big"),
                e=int.from_bytes(rec["e"], "big"),
                x=int.from_bytes(rec["x"], "big"),
                bits_emitted=int(rec["bits_emitted"]),
            )
        except (KeyError, TypeError) as exc:
            raise DecodeError(f"malformed generator record: {exc}") from None


def choose_exponent(phi: int, start: int = E_MIN) -> int:
    """Smallest prime e >= ``start`` with gcd(e, phi) = 1."""
    e = start
    while not (is_probable_prime(e) and math.gcd(e, phi) == 1):
        e += 1
    return e


def random_unit(n: int, rng=None) -> int:
    """x with 1 < x < n and gcd(x, n) = 1, drawn from ``rng`` (system entropy by default)."""
    rng = rng or secrets.SystemRandom()
    while True:
        x = rng.randrange(2, n)
        if math.gcd(x, n) == 1:
            return x


@dataclass(frozen=True)
class RsaKeyMaterial:
    """Generator state plus the factor chains, kept private to the operator."""

    state: RsaPrngState
    p_chain: tuple
    q_chain: tuple

    @property
    def factors(self) -> list[tuple[int, int]]:
        return sorted([(self.p_chain[0], 1), (self.q_chain[0], 1)])


def generate(bits: int = PRODUCTION_BITS, rng=None) -> RsaKeyMaterial:
    """Fresh modulus from two chain primes of ``bits`` bits each, exponent and seed."""
    rng = rng or secrets.SystemRandom()
    spec = PrimeChainSpec(bits)
    pc = gen_chain_prime(spec, rng)
    while True:
        qc = gen_chain_prime(spec, rng)
        if qc[0] != pc[0]:
            break
    p, q = pc[0], qc[0]
    n = p * q
    e = choose_exponent((p - 1) * (q - 1))
    return RsaKeyMaterial(RsaPrngState(n, e, random_unit(n, rng)), pc, qc)


def next_state(state: RsaPrngState) -> RsaPrngState:
    return replace(state, x=powmod(state.x, state.e, state.n), bits_emitted=state.bits_emitted + 1)


def next_bits(state: RsaPrngState, count: int) -> tuple[RsaPrngState, np.ndarray]:
    """Advance ``count`` steps; bit j is the parity of the j-th new state."""
    out = np.empty(count, dtype=np.uint8)
    x, e, n = gmpy2.mpz(state.x), gmpy2.mpz(state.e), gmpy2.mpz(state.n)
    for j in range(count):
        x = gmpy2.powmod(x, e, n)
        out[j] = x & 1
    return replace(state, x=int(x), bits_emitted=state.bits_emitted + count), out


class RsaPrng:
    """Single-writer wrapper handing out 512-bit blocks."""

    def __init__(self, state: RsaPrngState):
        self._state = state
        self._lock = threading.Lock()

    @property
    def state(self) -> RsaPrngState:
        return self._state

    def bits(self, count: int) -> np.ndarray:
        with self._lock:
            self._state, out = next_bits(self._state, count)
        return out

    def block(self, nbytes: int = 64) -> bytes:
        return np.packbits(self.bits(8 * nbytes)).tobytes()


@dataclass(frozen=True)
class PeriodReport:
    order: int  # ord_n(x0)
    period: int  # length of the state cycle through x0
    carmichael: int  # lambda(n)
    carmichael2: int  # lambda(lambda(n))


def period_diagnostics(factored_n, e: int, x0: int) -> PeriodReport:
    """Order of the seed and the state-sequence period, toy moduli only.

    x_k = x0^(e^k), so the sequence returns to x0 once e^k = 1 mod ord_n(x0).
    """
    factored_n = list(factored_n)
    n = 1
    for p, a in factored_n:
        n *= p**a
    lam = carmichael(factored_n)
    t = multiplicative_order(x0, n, factorize(lam))
    if lam % t:
        raise ArithmeticError("element order does not divide lambda(n)")
    lam2 = carmichael(factorize(lam))
    if math.gcd(e, t) != 1:
        raise ValueError("exponent shares a factor with the seed's order; no pure cycle")
    period = multiplicative_order(e % t, t, factorize(carmichael(factorize(t)))) if t > 1 else 1
    return PeriodReport(t, period, lam, lam2)


# -- encrypted persistence ----------------------------------------------------

def seal_state(state: RsaPrngState, key: bytes) -> bytes:
    """AES-GCM encryption of the canonical state record; nonce prepended."""
    from cryptography.hazmat.primitives.ciphers.aead import AESGCM

    nonce = secrets.token_bytes(12)
    return nonce + AESGCM(key).encrypt(nonce, canonical_serialize(state.record()), b"rsaprng-state")


def open_state(blob: bytes, key: bytes) -> RsaPrngState:
    from cryptography.exceptions import InvalidTag
    from cryptography.hazmat.primitives.ciphers.aead import AESGCM

    try:
        raw = AESGCM(key).decrypt(blob[:12], blob[12:], b"rsaprng-state")
    except InvalidTag:
        raise DecodeError("state blob failed authentication") from None
    return RsaPrngState.from_record(canonical_parse(raw))
