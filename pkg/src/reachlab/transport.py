"""Finitely supported probability measures and exact p-Wasserstein distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from reachlab.errors import DomainError
from reachlab.spaces import SAME_POINT_TOL, MetricSpace, Point, _power

WEIGHT_TOL = 1e-9
MARGINAL_TOL = 1e-10


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure with finitely many atoms.

    Atoms closer than 1e-12 are merged by summing their weights.  Weights must
    be positive and sum to one up to 1e-9; they are renormalized exactly.
    """

    space: MetricSpace
    atoms: tuple

    def __post_init__(self):
        atoms = list(self.atoms)
        if not atoms:
            raise DomainError("a measure needs at least one atom")
        pts = [a[0] for a in atoms]
        ws = np.array([float(a[1]) for a in atoms])
        for q in pts:
            self.space._check(q)
        if not np.all(ws > 0) or not np.all(np.isfinite(ws)):
            raise DomainError("atom weights must be positive and finite")
        total = ws.sum()
        if abs(total - 1) > WEIGHT_TOL:
            raise DomainError(f"weights sum to {total}, not 1")
        D = self.space.pairwise(pts, pts)
        merged_pts: list[Point] = []
        merged_w: list[float] = []
        owner = [-1] * len(pts)
        for i in range(len(pts)):
            for k in range(i):
                if owner[k] == k and D[i, k] <= SAME_POINT_TOL:
                    owner[i] = k
                    break
            else:
                owner[i] = i
        index = {}
        for i, o in enumerate(owner):
            if o not in index:
                index[o] = len(merged_pts)
                merged_pts.append(pts[o])
                merged_w.append(0.0)
            merged_w[index[o]] += ws[i]
        w = np.array(merged_w) / sum(merged_w)
        object.__setattr__(self, "atoms", tuple((q, float(wi)) for q, wi in zip(merged_pts, w)))

    @classmethod
    def dirac(cls, x: Point) -> "DiscreteMeasure":
        return cls(x.space, ((x, 1.0),))

    @classmethod
    def from_points(cls, space: MetricSpace, points: Sequence[Point], weights: Iterable[float]):
        return cls(space, tuple(zip(points, weights)))

    @property
    def points(self) -> list[Point]:
        return [a[0] for a in self.atoms]

    @property
    def weights(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms])

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def is_dirac(self) -> bool:
        return len(self.atoms) == 1


@dataclass
class TransportPlan:
    source: DiscreteMeasure
    target: DiscreteMeasure
    matrix: np.ndarray
    p: float
    cost: float  # sum of pi_ij d_ij^p
    certificate: dict = field(default_factory=dict)

    def marginal_error(self) -> float:
        return float(
            max(
                np.abs(self.matrix.sum(1) - self.source.weights).max(),
                np.abs(self.matrix.sum(0) - self.target.weights).max(),
            )
        )


def _same_space(mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    if mu.space is not nu.space and mu.space != nu.space:
        raise DomainError(f"measures live on different spaces ({mu.space.kind} vs {nu.space.kind})")


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> np.ndarray:
    return _power(mu.space.pairwise(mu.points, nu.points), p)


def wasserstein_p(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> tuple[float, TransportPlan]:
    """Exact W_p between two discrete measures, with an optimal plan."""
    _same_space(mu, nu)
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    C = cost_matrix(mu, nu, p)
    a, b = mu.weights, nu.weights
    if len(a) == 1 or len(b) == 1:
        # the product coupling is the only one
        X = np.outer(a, b)
        cert = {"reduced_cost_residual": 0.0, "iterations": 0}
    else:
        X, cert = transport_simplex(a, b, C)
    total = float((X * C).sum())
    plan = TransportPlan(mu, nu, X, p, total, cert)
    return _root(total, p), plan


def _root(x: float, p: float) -> float:
    return math.exp(math.log(x) / p) if x > 0 else 0.0


def transport_simplex(a: np.ndarray, b: np.ndarray, C: np.ndarray, max_iter: int | None = None):
    """Transportation simplex (MODI) for min <C, X> over couplings of a and b.

    Starts from a least-cost greedy basis completed to a spanning tree, prices
    with dual potentials on the basis tree and pivots along the unique tree
    cycle.  Degenerate stalls switch the entering rule from most-negative to
    first-negative to rule out cycling.  Returns the plan and an optimality
    certificate (most negative reduced cost, scaled to the cost range).
    """
    m, n = C.shape
    scale = max(1.0, float(np.abs(C).max()))
    tol = 1e-13 * scale
    X, rows, cols = _initial_basis(a, b, C)

    max_iter = max_iter or 50 * (m + n) ** 2
    degenerate_run = 0
    it = 0
    R = np.zeros_like(C)
    for it in range(max_iter):
        u, v = _potentials(rows, cols, C)
        R = C - u[:, None] - v[None, :]
        for i in range(m):
            for j in rows[i]:
                R[i, j] = 0.0
        if degenerate_run > m + n:
            neg = np.flatnonzero(R < -tol)
            if neg.size == 0:
                break
            k = int(neg[0])
        else:
            k = int(np.argmin(R))
            if R.flat[k] >= -tol:
                break
        ie, je = divmod(k, n)
        cycle = _cycle(rows, cols, ie, je)
        minus = cycle[1::2]
        theta = min(X[c] for c in minus)
        leave = next(c for c in minus if X[c] == theta)
        for pos, c in enumerate(cycle):
            X[c] += theta if pos % 2 == 0 else -theta
        rows[ie].add(je)
        cols[je].add(ie)
        rows[leave[0]].discard(leave[1])
        cols[leave[1]].discard(leave[0])
        X[leave] = 0.0
        degenerate_run = degenerate_run + 1 if theta <= 0 else 0
    else:
        raise RuntimeError("transportation simplex did not converge")
    X[X < 0] = 0.0
    residual = max(0.0, -float(R.min())) / scale
    return X, {"reduced_cost_residual": residual, "iterations": it}


def _initial_basis(a, b, C):
    """Least-cost greedy allocation, padded with zero cells into a spanning tree."""
    m, n = C.shape
    X = np.zeros((m, n))
    ra, rb = a.astype(float).copy(), b.astype(float).copy()
    eps = 1e-15
    parent = list(range(m + n))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    rows: list[set] = [set() for _ in range(m)]
    cols: list[set] = [set() for _ in range(n)]
    n_cells = 0

    def add(i, j):
        nonlocal n_cells
        ri, rj = find(i), find(m + j)
        if ri == rj:
            return False
        parent[ri] = rj
        rows[i].add(j)
        cols[j].add(i)
        n_cells += 1
        return True

    order = np.argsort(C, axis=None, kind="stable")
    for k in order:
        i, j = divmod(int(k), n)
        if ra[i] <= eps or rb[j] <= eps:
            continue
        q = min(ra[i], rb[j])
        if not add(i, j):
            continue
        X[i, j] = q
        ra[i] -= q
        rb[j] -= q
        if n_cells == m + n - 1:
            break
    if n_cells < m + n - 1:
        for k in order:
            i, j = divmod(int(k), n)
            add(i, j)
            if n_cells == m + n - 1:
                break
    # leftover rounding mass goes onto basic cells of the same row
    for i in range(m):
        if ra[i] > 0:
            X[i, next(iter(rows[i]))] += ra[i]
    return X, rows, cols


def _potentials(rows, cols, C) -> tuple[np.ndarray, np.ndarray]:
    m, n = C.shape
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    stack = [(0, 0)]
    while stack:
        side, k = stack.pop()
        if side == 0:
            for j in rows[k]:
                if np.isnan(v[j]):
                    v[j] = C[k, j] - u[k]
                    stack.append((1, j))
        else:
            for i in cols[k]:
                if np.isnan(u[i]):
                    u[i] = C[i, k] - v[k]
                    stack.append((0, i))
    return u, v


def _cycle(rows, cols, ie: int, je: int) -> list[tuple[int, int]]:
    """Cells of the cycle closed by entering (ie, je), alternating +, -, +, ..."""
    # search the basis tree from row node ie to column node je
    parent: dict[tuple[int, int], tuple[int, int] | None] = {(0, ie): None}
    frontier = [(0, ie)]
    target = (1, je)
    while target not in parent:
        nxt = []
        for side, k in frontier:
            nbrs = [(1, j) for j in rows[k]] if side == 0 else [(0, i) for i in cols[k]]
            for nb in nbrs:
                if nb not in parent:
                    parent[nb] = (side, k)
                    nxt.append(nb)
        if not nxt:
            raise RuntimeError("basis is not a spanning tree")
        frontier = nxt
    path = [target]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    # path runs je -> ... -> ie; consecutive nodes give basic cells
    cells = [(ie, je)]
    for s, t in zip(path, path[1:]):
        r = s[1] if s[0] == 0 else t[1]
        c = s[1] if s[0] == 1 else t[1]
        cells.append((int(r), int(c)))
    return cells


def dirac_to_measure_cost(x: Point, mu: DiscreteMeasure, p: float = 2.0) -> float:
    """W_p(delta_x, mu) = (sum_i w_i d(x, y_i)^p)^(1/p); the product plan is the only coupling."""
    mu.space._check(x)
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    d = mu.space.pairwise([x], mu.points)[0]
    return _root(float(mu.weights @ _power(d, p)), p)


def displacement_geodesic(
    x: Point, mu: DiscreteMeasure, t: float, branch_choices: Sequence[int] | None = None
) -> DiscreteMeasure:
    """Slide every atom of mu toward x: nu_t = sum_i w_i delta_{gamma_i(t)} with gamma_i from x to y_i."""
    space = mu.space
    space._check(x)
    if not 0 <= t <= 1:
        raise DomainError(f"t must lie in [0, 1], got {t}")
    if branch_choices is None:
        branch_choices = [0] * len(mu)
    if len(branch_choices) != len(mu):
        raise DomainError("need one branch choice per atom")
    atoms = []
    for (y, w), br in zip(mu.atoms, branch_choices):
        if space.distance(x, y) <= SAME_POINT_TOL:
            atoms.append((x, w))
            continue
        paths = space.minimizing_geodesics(x, y)
        if not 0 <= br < len(paths):
            raise DomainError(f"missing geodesic branch {br} toward atom {y}")
        atoms.append((paths[br](t), w))
    return DiscreteMeasure(space, tuple(atoms))
