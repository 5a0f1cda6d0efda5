"""Probability estimation factors: validity, optimization, choice of power."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NoPositiveRate
from ..twine.cbor import decode_real, encode_real
from ._barrier import maximize_log_barrier
from .polytope import ConditionalDistribution, TrialModel

UNIFORM_SETTINGS = np.full(4, 0.25)
VALID_SLACK = 1e-12


@dataclass(frozen=True)
class Pef:
    f: np.ndarray
    beta: float

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float).reshape(16)
        if (f < 0).any():
            raise ValueError("PEF values must be nonnegative")
        if not self.beta > 0:
            raise ValueError("PEF power must be positive")
        object.__setattr__(self, "f", f)

    def record(self) -> dict:
        return {"f": [encode_real(v) for v in self.f], "beta": encode_real(self.beta)}

    @classmethod
    def from_record(cls, rec: dict) -> "Pef":
        return cls(np.array([decode_real(v) for v in rec["f"]]), decode_real(rec["beta"]))


@dataclass(frozen=True)
class PefCheck:
    valid: bool
    lhs: float
    vertex: int
    settings: int


def _cond(p) -> np.ndarray:
    if isinstance(p, ConditionalDistribution):
        return p.p
    return np.asarray(p, dtype=float).reshape(16)


def pef_lhs(f, beta: float, cond, settings=UNIFORM_SETTINGS) -> float:
    """sum_{abxy} mu(xy) p(ab|xy) f(abxy) p(ab|xy)^beta."""
    p = _cond(cond)
    mu = np.asarray(settings, dtype=float)[np.arange(16) & 3]
    return float(np.sum(mu * np.asarray(f, dtype=float) * p ** (1.0 + beta)))


def constraint_matrix(beta: float, model: TrialModel) -> np.ndarray:
    """One row per (conditional vertex, settings vertex) pair."""
    V = np.clip(np.asarray(model.vertices, dtype=float), 0.0, None) ** (1.0 + beta)
    S = np.asarray(model.settings_vertices, dtype=float)[:, np.arange(16) & 3]
    return (V[:, None, :] * S[None, :, :]).reshape(-1, 16)


def validate_pef(f, beta: float, model: TrialModel, slack: float = VALID_SLACK) -> PefCheck:
    """Check the PEF inequality at every vertex pair.

    The left side is convex in the conditional distribution and linear in
    the settings distribution, so its maximum over the model is attained at
    a vertex pair.
    """
    A = constraint_matrix(beta, model)
    lhs = A @ np.asarray(f, dtype=float).reshape(16)
    k = int(np.argmax(lhs))
    ns = len(model.settings_vertices)
    return PefCheck(bool(lhs[k] <= 1.0 + slack), float(lhs[k]), k // ns, k % ns)


def reference_weights(nu, settings=UNIFORM_SETTINGS, floor: float = 1e-12) -> np.ndarray:
    """nu(cz) = settings(z) nu(c|z), with zero conditionals clipped to ``floor``."""
    p = np.clip(_cond(nu), floor, None).reshape(4, 4)
    p = p / p.sum(axis=0, keepdims=True)
    w = p.reshape(16) * np.asarray(settings, dtype=float)[np.arange(16) & 3]
    return w / w.sum()


@dataclass(frozen=True)
class PefSolution:
    pef: Pef
    rate: float  # E_nu[log2 F], bits per trial
    dual_bound: float  # certified upper bound on the optimal rate
    lhs: float


def _dual_value(w: np.ndarray, A: np.ndarray, lam: np.ndarray) -> float:
    """Lagrange dual of max sum w log F s.t. A F <= 1, in nats."""
    q = A.T @ lam
    if (q <= 0).any():
        return math.inf
    return float(w @ np.log(w / q) - w.sum() + lam.sum())


def optimize_pef_solution(nu, beta: float, model: TrialModel, settings=UNIFORM_SETTINGS, gap_tol: float = 1e-13) -> PefSolution:
    w = reference_weights(nu, settings)
    A = constraint_matrix(beta, model)
    start = np.full(16, 0.5 / max(1.0, float(A.sum(axis=1).max())))
    res = maximize_log_barrier(
        w=w, c=np.zeros(16), D=np.eye(16), G=A, h=np.ones(A.shape[0]), x0=start, gap_tol=gap_tol
    )
    # two primal candidates: the iterate and the point the multipliers imply
    q = A.T @ res.dual
    cands = [np.clip(res.x, 0.0, None)]
    if (q > 0).all():
        cands.append(w / q)
    best = None
    for f in cands:
        lhs = float((A @ f).max())
        if lhs > 1.0:
            f = f / lhs
            lhs = float((A @ f).max())
        rate = float(w @ np.log2(np.clip(f, 1e-300, None)))
        if best is None or rate > best[1]:
            best = (f, rate, lhs)
    f, rate, lhs = best
    bound = _dual_value(w, A, res.dual) / math.log(2)
    return PefSolution(Pef(f, beta), rate, max(bound, rate), lhs)


def optimize_pef(nu, beta: float, model: TrialModel, settings=UNIFORM_SETTINGS) -> Pef:
    """Maximize E_nu[log2 F] over valid PEFs with power ``beta``."""
    return optimize_pef_solution(nu, beta, model, settings).pef


def expected_rate(f, nu, settings=UNIFORM_SETTINGS) -> float:
    """E_nu[log2 F] with zero-probability cells excluded."""
    w = reference_weights(nu, settings, floor=0.0)
    f = np.asarray(f, dtype=float)
    used = w > 0
    if (f[used] <= 0).any():
        return -math.inf
    return float(w[used] @ np.log2(f[used]))


def n_expected(beta: float, sigma_h: float, eps_h: float, rate: float) -> float:
    """Expected trials to certify ``sigma_h`` bits: (beta sigma_h - log2 eps_h) / rate."""
    if rate <= 0:
        return math.inf
    return (beta * sigma_h - math.log2(eps_h)) / rate


def default_beta_grid() -> np.ndarray:
    return np.logspace(-3, 0, 60)


@dataclass(frozen=True)
class BetaChoice:
    beta: float
    pef: Pef
    n_exp: float
    rate: float


def optimize_beta(nu, model: TrialModel, sigma_h: float, eps_h: float, beta_grid=None, settings=UNIFORM_SETTINGS, refine: int = 12) -> BetaChoice:
    """Grid search for the power minimizing n_exp, refined once around the best point."""
    grid = np.sort(np.asarray(default_beta_grid() if beta_grid is None else beta_grid, dtype=float))

    def evaluate(betas):
        out = []
        for b in betas:
            sol = optimize_pef_solution(nu, float(b), model, settings)
            # a rate inside the solver's own gap cannot be told apart from zero
            gap = sol.dual_bound - sol.rate
            rate = sol.rate if sol.rate > max(gap, 1e-13) else 0.0
            out.append((n_expected(float(b), sigma_h, eps_h, rate), float(b), sol.pef, rate))
        return out

    results = evaluate(grid)
    best = min(results, key=lambda r: r[0])
    if not math.isfinite(best[0]):
        raise NoPositiveRate("no power in the grid yields a positive entropy rate")
    if refine and len(grid) > 1:
        k = int(np.where(grid == best[1])[0][0])
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        fine = np.geomspace(lo, hi, refine + 2)[1:-1]
        results = evaluate(fine) + [best]
        best = min(results, key=lambda r: r[0])
    return BetaChoice(beta=best[1], pef=best[2], n_exp=best[0], rate=best[3])
