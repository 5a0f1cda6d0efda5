"""Seeded extraction: weak design plus one-bit extractor per output bit."""
from __future__ import annotations

import numpy as np

from ..errors import EntropyTooLow, SeedLengthMismatch
from .design import weak_design
from .params import ExtractorParams
from .rsh import coefficient_words, rsh_bits_bulk


def extract(x, seed, k: float, sigma: int, eps_x: float) -> np.ndarray:
    """``sigma`` nearly uniform bits from ``x`` given ``k`` bits of certified entropy."""
    x = np.asarray(x, dtype=np.uint8)
    seed = np.asarray(seed, dtype=np.uint8)
    params = ExtractorParams.derive(int(x.size), sigma, eps_x, k)
    if k < params.threshold:
        raise EntropyTooLow(f"{k} certified bits below the {params.threshold}-bit threshold")
    if seed.size != params.l:
        raise SeedLengthMismatch(f"seed has {seed.size} bits, need {params.l}")
    return extract_with(x, seed, params)


def extract_with(x: np.ndarray, seed: np.ndarray, params: ExtractorParams) -> np.ndarray:
    """Extraction without the entropy check, for parameters already validated."""
    design = weak_design(params.sigma, params.w, params.r)
    s = params.field_bits
    coef = coefficient_words(x, s)
    return rsh_bits_bulk(coef, s, np.asarray(seed, dtype=np.uint8)[design.sets])


def bits_to_bytes(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
