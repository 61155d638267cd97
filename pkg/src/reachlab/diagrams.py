"""Finite persistence diagrams, matching distances and the shifted Kuratowski embedding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from reachlab.errors import DomainError
from reachlab.spaces import SAME_POINT_TOL, MetricSpace, Point

CANDIDATE_DEDUP_TOL = 1e-12


@dataclass(frozen=True)
class PersistenceDiagram:
    """Multiset of (birth, death) pairs with birth < death."""

    points: tuple = ()

    def __post_init__(self):
        pts = []
        for q in self.points:
            try:
                b, d = (float(v) for v in q)
            except (TypeError, ValueError) as exc:
                raise DomainError(f"diagram point {q!r} is not a (birth, death) pair") from exc
            if not (math.isfinite(b) and math.isfinite(d)):
                raise DomainError(f"diagram point {q!r} is not finite")
            if not b < d:
                raise DomainError(f"diagram point {q!r} is not above the diagonal")
            pts.append((b, d))
        object.__setattr__(self, "points", tuple(pts))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.points, dtype=float).reshape(-1, 2)

    @property
    def gaps(self) -> np.ndarray:
        """Infinity-distance of every point to the diagonal."""
        a = self.array
        return (a[:, 1] - a[:, 0]) / 2

    def to_json(self) -> dict:
        return {"points": [list(q) for q in self.points]}

    @classmethod
    def from_json(cls, obj: dict) -> "PersistenceDiagram":
        if not isinstance(obj, dict) or "points" not in obj:
            raise DomainError('diagram JSON needs a "points" list')
        return cls(tuple(tuple(q) for q in obj["points"]))


@dataclass(frozen=True)
class PartialMatching:
    pairs: tuple = ()  # (index in D1, index in D2)
    unmatched1: tuple = ()
    unmatched2: tuple = ()

    def validate(self, n1: int, n2: int) -> None:
        left = [i for i, _ in self.pairs] + list(self.unmatched1)
        right = [j for _, j in self.pairs] + list(self.unmatched2)
        if sorted(left) != list(range(n1)) or sorted(right) != list(range(n2)):
            raise DomainError("invalid matching: every index must appear exactly once")

    @classmethod
    def from_pairs(cls, pairs, n1: int, n2: int) -> "PartialMatching":
        pairs = tuple(sorted((int(i), int(j)) for i, j in pairs))
        used1 = {i for i, _ in pairs}
        used2 = {j for _, j in pairs}
        m = cls(
            pairs,
            tuple(i for i in range(n1) if i not in used1),
            tuple(j for j in range(n2) if j not in used2),
        )
        m.validate(n1, n2)
        return m

    def to_json(self) -> dict:
        return {
            "pairs": [list(p) for p in self.pairs],
            "unmatched1": list(self.unmatched1),
            "unmatched2": list(self.unmatched2),
        }


def _dinf(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.maximum(np.abs(A[:, None, 0] - B[None, :, 0]), np.abs(A[:, None, 1] - B[None, :, 1]))


def matching_cost(D1: PersistenceDiagram, D2: PersistenceDiagram, m: PartialMatching, p: float = math.inf) -> float:
    """l^p aggregate of matched infinity-distances and unmatched diagonal gaps."""
    m.validate(len(D1), len(D2))
    if not p >= 1:
        raise DomainError(f"p must be >= 1 or inf, got {p}")
    A, B = D1.array, D2.array
    terms = [max(abs(A[i, 0] - B[j, 0]), abs(A[i, 1] - B[j, 1])) for i, j in m.pairs]
    g1, g2 = D1.gaps, D2.gaps
    terms += [g1[i] for i in m.unmatched1] + [g2[j] for j in m.unmatched2]
    if not terms:
        return 0.0
    t = np.array(terms, dtype=float)
    if math.isinf(p):
        return float(t.max())
    return float(np.sum(t**p) ** (1 / p))


def _augmented_costs(D1: PersistenceDiagram, D2: PersistenceDiagram) -> np.ndarray:
    """(n1 + n2) square cost matrix; rows are D1 then D2-diagonal copies, columns D2 then D1-diagonal copies.

    A D1 point may only use its own diagonal copy, and likewise for D2;
    diagonal-to-diagonal cells are free.  Forbidden cells hold inf.
    """
    n1, n2 = len(D1), len(D2)
    n = n1 + n2
    C = np.full((n, n), np.inf)
    if n1 and n2:
        C[:n1, :n2] = _dinf(D1.array, D2.array)
    C[np.arange(n1), n2 + np.arange(n1)] = D1.gaps
    C[n1 + np.arange(n2), np.arange(n2)] = D2.gaps
    C[n1:, n2:] = 0.0
    return C


def _matching_from_assignment(rows, cols, n1: int, n2: int) -> PartialMatching:
    pairs = [(int(r), int(c)) for r, c in zip(rows, cols) if r < n1 and c < n2]
    return PartialMatching.from_pairs(pairs, n1, n2)


def bottleneck(D1: PersistenceDiagram, D2: PersistenceDiagram) -> tuple[float, PartialMatching]:
    """Bottleneck distance by binary search over candidate thresholds with perfect-matching feasibility."""
    n1, n2 = len(D1), len(D2)
    if n1 + n2 == 0:
        return 0.0, PartialMatching()
    C = _augmented_costs(D1, D2)
    cand = np.unique(C[np.isfinite(C)])
    keep, start = [cand[0]], cand[0]
    for v in cand[1:]:
        if v - start > CANDIDATE_DEDUP_TOL:
            keep.append(v)
            start = v
        else:
            keep[-1] = v  # the largest member represents the group so its threshold admits all of it
    cand = np.array(keep)

    def feasible(tau):
        adj = csr_matrix((C <= tau).astype(np.int8))
        match = maximum_bipartite_matching(adj, perm_type="column")
        return bool(np.all(match >= 0)), match

    lo, hi = 0, len(cand) - 1
    ok, best = feasible(cand[hi])
    if not ok:
        raise RuntimeError("augmented graph has no perfect matching at the largest threshold")
    while lo < hi:
        mid = (lo + hi) // 2
        ok, match = feasible(cand[mid])
        if ok:
            hi, best = mid, match
        else:
            lo = mid + 1
    m = _matching_from_assignment(np.arange(len(best)), best, n1, n2)
    return matching_cost(D1, D2, m, math.inf), m


def wasserstein_diagram(D1: PersistenceDiagram, D2: PersistenceDiagram, p: float = 2.0) -> tuple[float, PartialMatching]:
    """p-Wasserstein diagram distance via an assignment problem on the augmented matrix."""
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if math.isinf(p):
        return bottleneck(D1, D2)
    n1, n2 = len(D1), len(D2)
    if n1 + n2 == 0:
        return 0.0, PartialMatching()
    C = _augmented_costs(D1, D2)
    big = 1.0 + 2 * (n1 + n2) * float(np.max(C[np.isfinite(C)]) ** p)
    Cp = np.where(np.isfinite(C), C**p, big)
    rows, cols = linear_sum_assignment(Cp)
    m = _matching_from_assignment(rows, cols, n1, n2)
    return matching_cost(D1, D2, m, p), m


@dataclass(frozen=True)
class EmbeddingSpec:
    """Landmarks x_1..x_K and scale c for x -> {(2c(k-1), 2ck + d(x, x_k))}."""

    space: MetricSpace
    landmarks: tuple
    c: float | None = None

    def __post_init__(self):
        lm = tuple(self.landmarks)
        if not lm:
            raise DomainError("embedding needs at least one landmark")
        for q in lm:
            self.space._check(q)
        D = self.space.pairwise(lm, lm)
        off = D[~np.eye(len(lm), dtype=bool)]
        if off.size and off.min() <= SAME_POINT_TOL:
            raise DomainError("landmarks must be distinct")
        diam = float(D.max())
        if self.space.bounded:
            diam = max(diam, self.space.diameter())
        c = 2 * diam + 1 if self.c is None else float(self.c)
        if not c > diam:
            raise DomainError(f"c = {c} must exceed the diameter {diam}")
        object.__setattr__(self, "landmarks", lm)
        object.__setattr__(self, "c", c)

    def to_json(self) -> dict:
        return {"landmarks": [self.space.point_to_json(q) for q in self.landmarks], "c": self.c}


def _diagram_from_values(values: Sequence[float], c: float) -> PersistenceDiagram:
    return PersistenceDiagram(tuple((2 * c * k, 2 * c * (k + 1) + v) for k, v in enumerate(values)))


def embed(x: Point, spec: EmbeddingSpec) -> PersistenceDiagram:
    spec.space._check(x)
    d = spec.space.pairwise([x], list(spec.landmarks))[0]
    return _diagram_from_values(d, spec.c)


def midpoint_diagram(x: Point, y: Point, spec: EmbeddingSpec) -> PersistenceDiagram:
    """Diagram whose k-th point averages the death coordinates of embed(x) and embed(y)."""
    spec.space._check(x)
    spec.space._check(y)
    if spec.space.distance(x, y) <= SAME_POINT_TOL:
        raise DomainError("midpoint diagram needs x != y")
    D = spec.space.pairwise([x, y], list(spec.landmarks))
    return _diagram_from_values((D[0] + D[1]) / 2, spec.c)


def vertical_pairing(D1: PersistenceDiagram, D2: PersistenceDiagram, m: PartialMatching) -> bool:
    """True when every point is matched to a point with the same birth coordinate."""
    if m.unmatched1 or m.unmatched2:
        return False
    A, B = D1.array, D2.array
    return all(A[i, 0] == B[j, 0] for i, j in m.pairs)
