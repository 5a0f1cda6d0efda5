"""Frequency (monobit) test."""
from __future__ import annotations

import math

import numpy as np


def monobit_pvalue(bits) -> float:
    bits = np.asarray(bits, dtype=np.int64)
    n = bits.size
    s = int(2 * bits.sum() - n)
    return math.erfc(abs(s) / math.sqrt(2.0 * n))
