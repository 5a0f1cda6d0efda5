"""Maximum-likelihood estimate of the trial behaviour within the model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..errors import DegenerateCounts, NumericalDegeneracy
from ._barrier import maximize_log_barrier
from .polytope import ConditionalDistribution, TrialModel, ns_affine

MIN_CALIBRATION_TRIALS = 10_000
# local marginals 1/2, P(11|z) = 1/4: the uniform box, interior to every model
_CENTER = np.array([0.5, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25])


@dataclass(frozen=True)
class MleResult:
    distribution: ConditionalDistribution
    weights: np.ndarray  # convex weights over model.vertices
    objective: float  # sum_cz n_cz log p(c|z), natural log

    @property
    def p(self) -> np.ndarray:
        return self.distribution.p


def log_likelihood(counts, p) -> float:
    """sum_cz n_cz log p(c|z), with 0 log 0 = 0."""
    counts = np.asarray(counts, dtype=float).reshape(16)
    p = np.asarray(p, dtype=float).reshape(16)
    used = counts > 0
    with np.errstate(divide="ignore"):
        return float(counts[used] @ np.log(p[used]))


def convex_weights(p, vertices) -> np.ndarray:
    """Convex weights ``lam`` with ``lam @ vertices`` closest to ``p`` in L1."""
    V = np.asarray(vertices, dtype=float)
    k = V.shape[0]
    # variables: lam (k), e+ (16), e- (16); minimize sum(e+ + e-)
    c = np.concatenate([np.zeros(k), np.ones(32)])
    A_eq = np.hstack([V.T, -np.eye(16), np.eye(16)])
    A_eq = np.vstack([A_eq, np.concatenate([np.ones(k), np.zeros(32)])])
    b_eq = np.concatenate([np.asarray(p, dtype=float).reshape(16), [1.0]])
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericalDegeneracy(f"convex decomposition failed: {res.message}")
    lam = np.clip(res.x[:k], 0.0, None)
    return lam / lam.sum()


def mle_conditional(counts, model: TrialModel, min_total: int = MIN_CALIBRATION_TRIALS) -> MleResult:
    """Maximize sum_cz n_cz log mu(c|z) over the model polytope.

    The search runs in the 8-parameter no-signaling chart, where the model
    is cut out by positivity and, for the Tsirelson model, the CHSH bounds.
    """
    counts = np.asarray(counts, dtype=float).reshape(16)
    if (counts < 0).any():
        raise ValueError("counts must be nonnegative")
    per_setting = counts.reshape(4, 4).sum(axis=0)
    if (per_setting == 0).any():
        raise DegenerateCounts("every setting pair needs at least one trial")
    total = float(counts.sum())
    if total < min_total:
        raise DegenerateCounts(f"{total:.0f} calibration trials, need at least {min_total}")

    p0, B = ns_affine()
    G, h = model.halfspaces()
    res = maximize_log_barrier(w=counts / total, c=p0, D=B, G=G, h=h, x0=_CENTER, gap_tol=1e-13)
    p = np.clip(p0 + B @ res.x, 0.0, None)
    lam = convex_weights(p, model.vertices)
    p = lam @ np.asarray(model.vertices, dtype=float)
    dist = ConditionalDistribution(p)
    return MleResult(dist, lam, log_likelihood(counts, p))
