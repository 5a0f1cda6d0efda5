"""Plot-data export."""
from __future__ import annotations

import csv

from ..certify.entropy import Accumulation


def write_running_entropy_csv(path, acc: Accumulation, pulse_index: int | None = None) -> int:
    """Write (pulse_index, trial, log2_T) rows sampled at the accumulation stride.

    Returns the number of data rows written.
    """
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["pulse_index", "trial", "log2_T"])
        for j, v in enumerate(acc.running):
            out.writerow(["" if pulse_index is None else pulse_index, (j + 1) * acc.stride, repr(float(v))])
    return len(acc.running)
