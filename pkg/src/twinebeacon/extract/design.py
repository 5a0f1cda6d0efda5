"""Block weak design from polynomial (Nisan-Wigderson) designs over GF(w)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CapacityExceeded


def degree_cap(count: int, w: int) -> int:
    """Smallest c with w^(c+1) >= count."""
    c, cap = 0, w
    while cap < count:
        c += 1
        cap *= w
    return c


def base_w_digits(i: int, w: int, ndigits: int) -> list[int]:
    out = []
    for _ in range(ndigits):
        i, d = divmod(i, w)
        out.append(d)
    return out


def design_set(coeffs, w: int, offset: int = 0) -> np.ndarray:
    """{x w + p(x) + offset : x in GF(w)} for p with little-endian ``coeffs``."""
    xs = np.arange(w, dtype=np.int64)
    vals = np.zeros(w, dtype=np.int64)
    for a in reversed(coeffs):
        vals = (vals * xs + a) % w
    return xs * w + vals + offset


@dataclass(frozen=True)
class WeakDesign:
    w: int
    r: int
    sets: np.ndarray  # (sigma, w) seed indices
    block_of: np.ndarray  # (sigma,) block index per output
    degree: tuple  # degree cap per block

    @property
    def sigma(self) -> int:
        return self.sets.shape[0]

    @property
    def l(self) -> int:
        return self.r * self.w * self.w


def weak_design(sigma: int, w: int, r: int, max_degree: int | None = None) -> WeakDesign:
    """Assign output ``i`` to a block and a polynomial, and list its seed indices.

    Outputs are split evenly across the ``r`` blocks in order, earlier blocks
    taking the remainder. Within a block the local index written in base
    ``w`` gives the polynomial's coefficients, low degree first.
    """
    if sigma < 1 or r < 1:
        raise ValueError("need sigma >= 1 and r >= 1")
    limit = w - 1 if max_degree is None else min(max_degree, w - 1)
    sizes = [len(a) for a in np.array_split(np.arange(sigma), r)]
    sets = np.empty((sigma, w), dtype=np.int64)
    block_of = np.empty(sigma, dtype=np.int64)
    degrees = []
    i = 0
    for j, size in enumerate(sizes):
        c = degree_cap(max(size, 1), w)
        if c > limit:
            raise CapacityExceeded(f"{size} outputs per block exceed w^(c+1) with degree cap {limit}")
        degrees.append(c)
        for local in range(size):
            sets[i] = design_set(base_w_digits(local, w, c + 1), w, j * w * w)
            block_of[i] = j
            i += 1
    return WeakDesign(w, r, sets, block_of, tuple(degrees))
