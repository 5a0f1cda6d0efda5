"""Round profiles: the full-scale standing request and a fast toy variant."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from ..certify.entropy import entropy_threshold


@dataclass(frozen=True)
class Profile:
    name: str
    sigma: int
    n_stop: int
    eps: float  # total soundness error, split 0.8 / 0.2 between certification and extraction
    eps_b: float = 1e-3
    model: str = "ns+tsirelson"
    calibration_trials: int = 2_000_000
    beta_points: int = 60

    @property
    def eps_h(self) -> float:
        return 0.8 * self.eps

    @property
    def eps_x(self) -> float:
        return 0.2 * self.eps

    @property
    def sigma_h(self) -> int:
        return entropy_threshold(self.sigma, self.eps_x)

    def with_overrides(self, values: dict) -> "Profile":
        known = {f.name for f in fields(self)}
        upd = {k: v for k, v in values.items() if k in known}
        if "eps_log2" in values:
            upd["eps"] = math.ldexp(1.0, int(values["eps_log2"]))
        return replace(self, **upd)


PRODUCTION = Profile("production", sigma=512, n_stop=15_000_000, eps=2.0**-64)
TOY = Profile("toy", sigma=8, n_stop=400_000, eps=2.0**-4, calibration_trials=200_000, beta_points=12)
PROFILES = {p.name: p for p in (PRODUCTION, TOY)}


def profile_from_config(section: dict | None) -> Profile:
    section = dict(section or {})
    base = PROFILES[section.pop("name", "production")]
    return base.with_overrides(section)
