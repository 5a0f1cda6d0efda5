"""Primal-dual interior point method for sum-of-logs objectives.

Solves  max_x  sum_i w_i log(c_i + D_i x)   s.t.  G x <= h
from a strictly feasible start. Both the PEF program and the maximum
likelihood program have this shape. Slacks and multipliers are carried as
variables, which keeps nearly active constraints well resolved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceFailure


@dataclass
class BarrierResult:
    x: np.ndarray
    objective: float
    dual: np.ndarray  # multipliers for G x <= h
    gap: float  # complementarity lambda . s at exit
    iterations: int


def _solve_spd(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    scale = np.sqrt(np.abs(np.diag(H)))
    scale[scale == 0] = 1.0
    Hs = H / scale[:, None] / scale[None, :]
    gs = g / scale
    try:
        L = np.linalg.cholesky(Hs)
        y = np.linalg.solve(L, gs)
        return np.linalg.solve(L.T, y) / scale
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(Hs, gs, rcond=None)[0] / scale


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not neg.any():
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def maximize_log_barrier(
    w: np.ndarray,
    c: np.ndarray,
    D: np.ndarray,
    G: np.ndarray,
    h: np.ndarray,
    x0: np.ndarray,
    gap_tol: float = 1e-13,
    max_iter: int = 200,
) -> BarrierResult:
    w = np.asarray(w, float)
    c = np.asarray(c, float)
    D = np.asarray(D, float)
    G = np.asarray(G, float)
    h = np.asarray(h, float)
    x = np.array(x0, dtype=float)
    m = G.shape[0]

    u = c + D @ x
    s = h - G @ x
    if (u <= 0).any() or (s <= 0).any():
        raise ValueError("starting point is not strictly feasible")
    lam = np.full(m, max(float(w.sum()), 1e-3) / m) / s

    mu_floor = 0.1 * gap_tol / m
    for it in range(1, max_iter + 1):
        u = c + D @ x
        r_d = D.T @ (w / u) - G.T @ lam
        r_p = G @ x + s - h
        mu = float(lam @ s) / m
        scale_d = 1.0 + float(np.abs(D.T @ (w / u)).max())
        if m * mu < gap_tol and np.abs(r_p).max() < 1e-13 and np.abs(r_d).max() < 1e-9 * scale_d:
            break
        H = (D.T * (w / u**2)) @ D + (G.T * (lam / s)) @ G

        def direction(rc):
            rhs = r_d - G.T @ ((lam * r_p + rc) / s)
            dx = _solve_spd(H, rhs)
            dlam = (lam * (G @ dx + r_p) + rc) / s
            ds = (rc - s * dlam) / lam
            return dx, ds, dlam

        def step(dx, ds, dlam):
            a = min(_max_step(s, ds), _max_step(lam, dlam), _max_step(u, D @ dx))
            return min(1.0, 0.99 * a)

        # Mehrotra predictor-corrector
        dx, ds, dlam = direction(-lam * s)
        a = step(dx, ds, dlam)
        mu_aff = float((lam + a * dlam) @ (s + a * ds)) / m
        sigma = min(1.0, (mu_aff / mu) ** 3)
        # never aim below the target complementarity; overshooting it only
        # degrades the conditioning of the Newton system
        target = max(sigma * mu, mu_floor)
        dx, ds, dlam = direction(target - lam * s - ds * dlam)
        a = step(dx, ds, dlam)
        x = x + a * dx
        s = s + a * ds
        lam = lam + a * dlam
    else:
        raise ConvergenceFailure("interior point iteration cap reached")
    u = c + D @ x
    return BarrierResult(x=x, objective=float(w @ np.log(u)), dual=lam, gap=float(lam @ s), iterations=it)
