"""Primality, factoring at toy sizes, Carmichael function and orders."""
from __future__ import annotations

import math
import secrets

from ..errors import InvalidFactorization, TooLarge

try:  # optional acceleration for production-size exponentiation
    import gmpy2

    def powmod(b: int, e: int, m: int) -> int:
        return int(gmpy2.powmod(b, e, m))

except ImportError:  # pragma: no cover
    gmpy2 = None

    def powmod(b: int, e: int, m: int) -> int:
        return pow(b, e, m)


SMALL_PRIMES = [p for p in range(3, 2000) if all(p % q for q in range(2, int(p**0.5) + 1))]
# witnesses that make Miller-Rabin exact below 3.3e24, which covers 2^64
_DETERMINISTIC_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
TOY_LIMIT = 1 << 64


def _mr_round(n: int, d: int, r: int, a: int) -> bool:
    x = powmod(a, d, n)
    if x in (1, n - 1):
        return True
    for _ in range(r - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_probable_prime(n: int, rounds: int = 128, rng=None) -> bool:
    """Miller-Rabin: exact below 2^64, else ``rounds`` random bases."""
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for p in SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    if n < TOY_LIMIT:
        return all(_mr_round(n, d, r, a) for a in _DETERMINISTIC_BASES if a < n)
    rng = rng or secrets.SystemRandom()
    return all(_mr_round(n, d, r, rng.randrange(2, n - 1)) for _ in range(rounds))


def sieve_passes(n: int) -> bool:
    return all(n % p for p in SMALL_PRIMES if p < n)


def factorize(n: int, limit: int = TOY_LIMIT) -> list[tuple[int, int]]:
    """Prime factorization by trial division then Pollard rho, toy sizes only."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > limit:
        raise TooLarge(f"refusing to factor a {n.bit_length()}-bit integer")
    out: dict[int, int] = {}
    for p in [2] + SMALL_PRIMES:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if is_probable_prime(m):
            out[m] = out.get(m, 0) + 1
            continue
        f = _pollard_rho(m)
        stack += [f, m // f]
    return sorted(out.items())


def _pollard_rho(n: int) -> int:
    if n % 2 == 0:
        return 2
    c = 1
    while True:
        x = y = 2
        d = 1
        while d == 1:
            x = (x * x + c) % n
            y = (y * y + c) % n
            y = (y * y + c) % n
            d = math.gcd(abs(x - y), n)
        if d != n:
            return d
        c += 1


def _check_factorization(factored) -> None:
    for p, a in factored:
        if a < 1 or not is_probable_prime(p):
            raise InvalidFactorization(f"({p}, {a}) is not a prime power term")
    primes = [p for p, _ in factored]
    if len(set(primes)) != len(primes):
        raise InvalidFactorization("repeated prime in factorization")


def carmichael(factored) -> int:
    """lambda(n) from the factorization [(p, alpha), ...]."""
    factored = list(factored)
    _check_factorization(factored)
    lam = 1
    for p, a in factored:
        if p == 2:
            term = 1 if a == 1 else 2 if a == 2 else 1 << (a - 2)
        else:
            term = p ** (a - 1) * (p - 1)
        lam = lam * term // math.gcd(lam, term)
    return lam


def euler_phi(factored) -> int:
    out = 1
    for p, a in factored:
        out *= p ** (a - 1) * (p - 1)
    return out


def multiplicative_order(x: int, n: int, lam_factored=None) -> int:
    """ord_n(x), by stripping prime factors from a known multiple."""
    if math.gcd(x, n) != 1:
        raise ValueError("x must be a unit mod n")
    if n == 1:
        return 1
    if lam_factored is None:
        lam_factored = factorize(carmichael(factorize(n)))
    t = 1
    for p, a in lam_factored:
        t *= p**a
    for p, _ in lam_factored:
        while t % p == 0 and pow(x, t // p, n) == 1:
            t //= p
    return t
