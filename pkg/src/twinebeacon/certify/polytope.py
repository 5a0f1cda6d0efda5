"""Trial models: the (2,2,2) no-signaling polytope, Tsirelson cuts, settings bias."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import NumericalDegeneracy
from .trials import cell

TSIRELSON = 2.0 * math.sqrt(2.0)
_CELLS = [(a, b, x, y) for a in (0, 1) for b in (0, 1) for x in (0, 1) for y in (0, 1)]


@dataclass(frozen=True)
class ConditionalDistribution:
    """p(ab|xy) as a flat 16-vector in ``abxy`` cell order."""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(16))

    @property
    def table(self) -> np.ndarray:
        """4x4 view indexed ``[c, z]``."""
        return self.p.reshape(4, 4)

    def check(self, norm_tol: float = 1e-12, ns_tol: float = 1e-9) -> None:
        check_conditional(self.p, norm_tol, ns_tol)


def check_conditional(p, norm_tol: float = 1e-12, ns_tol: float = 1e-9) -> None:
    p = np.asarray(p, dtype=float).reshape(4, 4)
    if (p < -norm_tol).any():
        raise ValueError("negative probability")
    if not np.allclose(p.sum(axis=0), 1.0, atol=norm_tol, rtol=0):
        raise ValueError("conditionals do not sum to one")
    alice, bob = marginals(p.reshape(16))
    if abs(alice[0, 0] - alice[0, 1]) > ns_tol or abs(alice[1, 0] - alice[1, 1]) > ns_tol:
        raise ValueError("Alice's marginal depends on Bob's setting")
    if abs(bob[0, 0] - bob[1, 0]) > ns_tol or abs(bob[0, 1] - bob[1, 1]) > ns_tol:
        raise ValueError("Bob's marginal depends on Alice's setting")


def marginals(p) -> tuple[np.ndarray, np.ndarray]:
    """P(a=1|x,y) indexed [x,y] and P(b=1|x,y) indexed [x,y]."""
    p = np.asarray(p, dtype=float)
    alice = np.zeros((2, 2))
    bob = np.zeros((2, 2))
    for x in (0, 1):
        for y in (0, 1):
            alice[x, y] = p[cell(1, 0, x, y)] + p[cell(1, 1, x, y)]
            bob[x, y] = p[cell(0, 1, x, y)] + p[cell(1, 1, x, y)]
    return alice, bob


def correlators(p) -> np.ndarray:
    """E_xy = sum_ab (-1)^(a+b) p(ab|xy), indexed [x, y]."""
    p = np.asarray(p, dtype=float)
    e = np.zeros((2, 2))
    for a, b, x, y in _CELLS:
        e[x, y] += (-1) ** (a + b) * p[cell(a, b, x, y)]
    return e


@lru_cache(maxsize=None)
def chsh_forms() -> np.ndarray:
    """The 8 CHSH functionals as rows over cells: sum_xy (-1)^(xy^ax^by^g) E_xy."""
    rows = []
    for al, be, ga in itertools.product((0, 1), repeat=3):
        row = np.zeros(16)
        for a, b, x, y in _CELLS:
            sign = (-1) ** ((x & y) ^ (al & x) ^ (be & y) ^ ga)
            row[cell(a, b, x, y)] = sign * (-1) ** (a + b)
        rows.append(row)
    out = np.array(rows)
    out.setflags(write=False)
    return out


def ns_vertices() -> list[ConditionalDistribution]:
    """16 local deterministic boxes followed by 8 PR boxes."""
    return [ConditionalDistribution(v) for v in _ns_vertex_array()]


@lru_cache(maxsize=None)
def _ns_vertex_array() -> np.ndarray:
    verts = []
    for fa in itertools.product((0, 1), repeat=2):
        for gb in itertools.product((0, 1), repeat=2):
            v = np.zeros(16)
            for x in (0, 1):
                for y in (0, 1):
                    v[cell(fa[x], gb[y], x, y)] = 1.0
            verts.append(v)
    for al, be, ga in itertools.product((0, 1), repeat=3):
        v = np.zeros(16)
        for x in (0, 1):
            for y in (0, 1):
                parity = (x & y) ^ (al & x) ^ (be & y) ^ ga
                for a in (0, 1):
                    v[cell(a, a ^ parity, x, y)] = 0.5
        verts.append(v)
    out = np.array(verts)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def ns_affine() -> tuple[np.ndarray, np.ndarray]:
    """Affine chart ``p = p0 + B @ theta`` of the no-signaling subspace.

    ``theta = (P(a=1|x=0), P(a=1|x=1), P(b=1|y=0), P(b=1|y=1), P(11|z) for z=0..3)``.
    """
    B = np.zeros((16, 8))
    p0 = np.zeros(16)
    for x in (0, 1):
        for y in (0, 1):
            z = 2 * x + y
            B[cell(1, 1, x, y), 4 + z] = 1
            B[cell(1, 0, x, y), x] = 1
            B[cell(1, 0, x, y), 4 + z] = -1
            B[cell(0, 1, x, y), 2 + y] = 1
            B[cell(0, 1, x, y), 4 + z] = -1
            p0[cell(0, 0, x, y)] = 1
            B[cell(0, 0, x, y), x] = -1
            B[cell(0, 0, x, y), 2 + y] = -1
            B[cell(0, 0, x, y), 4 + z] = 1
    return p0, B


def halfspaces(bound: float | None = TSIRELSON) -> tuple[np.ndarray, np.ndarray]:
    """``G theta <= h`` describing the model in the affine chart.

    Rows 0..15 are positivity; with ``bound`` set, rows 16..23 are the
    CHSH cuts ``S_k <= bound``.
    """
    p0, B = ns_affine()
    G = [-B]
    h = [p0]
    if bound is not None:
        S = chsh_forms()
        G.append(S @ B)
        h.append(bound - S @ p0)
    return np.vstack(G), np.concatenate(h)


def _enumerate(G: np.ndarray, h: np.ndarray, tol: float = 1e-9, chunk: int = 40000) -> np.ndarray:
    """Brute-force vertex enumeration: every nonsingular choice of d active rows."""
    m, d = G.shape
    found = []
    combos = itertools.combinations(range(m), d)
    while True:
        batch = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64)
        if batch.size == 0:
            break
        A = G[batch]
        b = h[batch]
        det = np.linalg.det(A)
        ok = np.abs(det) > 1e-9
        if not ok.any():
            continue
        theta = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
        feasible = np.all(theta @ G.T <= h + tol, axis=1)
        found.append(theta[feasible])
    pts = np.concatenate(found)
    # cluster duplicates; a near-collision that is not an exact duplicate is degenerate
    keys = np.round(pts, 7)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    out = np.zeros_like(uniq)
    for k in range(len(uniq)):
        members = pts[inverse == k]
        if np.ptp(members, axis=0).max() > 1e-8:
            raise NumericalDegeneracy("vertex candidates do not close within tolerance")
        out[k] = members.mean(axis=0)
    return out


@lru_cache(maxsize=None)
def _cut_vertex_array(bound: float) -> np.ndarray:
    G, h = halfspaces(bound)
    thetas = _enumerate(G, h)
    p0, B = ns_affine()
    verts = thetas @ B.T + p0
    verts[np.abs(verts) < 1e-13] = 0.0
    # order: deterministic first (as in ns_vertices), then the rest lexicographically
    det = _ns_vertex_array()[:16]
    ordered = []
    rest = []
    for v in verts:
        (ordered if any(np.allclose(v, d, atol=1e-9) for d in det) else rest).append(v)
    ordered.sort(key=lambda v: [int(np.argmax(np.all(np.isclose(det, v, atol=1e-9), axis=1)))])
    rest.sort(key=lambda v: tuple(np.round(v, 9)))
    out = np.array(ordered + rest)
    S = chsh_forms()
    if (out @ S.T > bound + 1e-9).any():
        raise NumericalDegeneracy("enumerated vertex violates a CHSH cut")
    out.setflags(write=False)
    return out


def tsirelson_cut(vertices=None, bound: float = TSIRELSON) -> list[ConditionalDistribution]:
    """Extreme points of the no-signaling polytope cut by ``|S_k| <= bound``.

    ``vertices`` is accepted for interface symmetry with :func:`ns_vertices`;
    the cut polytope is recomputed from its half-space description.
    """
    return [ConditionalDistribution(v) for v in _cut_vertex_array(float(bound))]


def settings_vertices(eps_b: float) -> np.ndarray:
    """Extreme joint settings distributions mu(xy) for a per-party bias box.

    Each party's P(setting=0) ranges over [(1-eps)/2, (1+eps)/2]; the joint
    distribution is the product, so the four corner products are extreme.
    """
    if not 0 <= eps_b < 1:
        raise ValueError("settings bias must lie in [0, 1)")
    out = []
    for sa in (1, -1):
        for sb in (1, -1):
            pa = np.array([(1 + sa * eps_b) / 2, (1 - sa * eps_b) / 2])
            pb = np.array([(1 + sb * eps_b) / 2, (1 - sb * eps_b) / 2])
            mu = np.outer(pa, pb).reshape(4)
            out.append(mu / mu.sum())
    arr = np.unique(np.round(np.array(out), 15), axis=0)
    return arr


@dataclass(frozen=True)
class TrialModel:
    """Adversary's per-trial behaviours: conditional vertices times settings vertices."""

    vertices: np.ndarray
    settings_bias: float
    settings_vertices: np.ndarray
    kind: str = "ns+tsirelson"

    @classmethod
    def build(cls, kind: str = "ns+tsirelson", eps_b: float = 1e-3) -> "TrialModel":
        if kind == "ns":
            verts = _ns_vertex_array()
        elif kind == "ns+tsirelson":
            verts = _cut_vertex_array(TSIRELSON)
        else:
            raise ValueError(f"unknown trial model {kind!r}")
        return cls(np.array(verts), float(eps_b), settings_vertices(eps_b), kind)

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        return halfspaces(TSIRELSON if self.kind == "ns+tsirelson" else None)

    def record(self) -> dict:
        from ..twine.cbor import encode_real

        return {"kind": self.kind, "eps_b": encode_real(self.settings_bias)}

    @classmethod
    def from_record(cls, rec: dict) -> "TrialModel":
        from ..twine.cbor import decode_real

        return cls.build(rec["kind"], decode_real(rec["eps_b"]))

    def permuted(self, order) -> "TrialModel":
        return TrialModel(self.vertices[list(order)], self.settings_bias, self.settings_vertices, self.kind)
