"""Orlicz–Wasserstein distance between a Dirac mass and a discrete measure.

With a Dirac on one side there is a single coupling, so

    W_phi(delta_x, mu) = inf { t > 0 : sum_i w_i phi(d(x, y_i) / t) <= 1 },

the Luxemburg norm of the distance vector.  ``psi`` is fixed to the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from reachlab.barycenter import BarycenterResult, ProjectConfig, _cluster, golden_section_min
from reachlab.errors import DomainError
from reachlab.spaces import MetricSpace, Point
from reachlab.transport import DiscreteMeasure

BISECT_ITERS = 200
MAX_DOUBLINGS = 60


@dataclass(frozen=True)
class OrliczCost:
    """Convex gauge phi with phi(0) = 0 and phi(1) = 1.

    Build with :meth:`power`, :meth:`exp_gauge` or :meth:`custom`; the
    constructor validates normalization, monotonicity, convexity and the
    inverse on a sample grid.
    """

    family: str
    params: dict
    phi: Callable[[np.ndarray], np.ndarray] = field(compare=False, repr=False)
    phi_inverse: Callable[[float], float] = field(compare=False, repr=False)

    def __post_init__(self):
        self._validate()

    @classmethod
    def power(cls, p: float) -> "OrliczCost":
        p = float(p)
        if not p >= 1:
            raise DomainError(f"power gauge needs p >= 1, got {p}")
        return cls(
            "power",
            {"p": p},
            lambda t: np.power(np.asarray(t, dtype=float), p),
            lambda s: float(s) ** (1 / p),
        )

    @classmethod
    def exp_gauge(cls, a: float) -> "OrliczCost":
        a = float(a)
        if not a > 0:
            raise DomainError(f"exp gauge needs a > 0, got {a}")
        norm = math.expm1(a)

        def phi(t):
            with np.errstate(over="ignore"):
                return np.expm1(a * np.asarray(t, dtype=float)) / norm

        return cls("exp_gauge", {"a": a}, phi, lambda s: math.log1p(float(s) * norm) / a)

    @classmethod
    def custom(cls, phi: Callable, phi_inverse: Callable | None = None, name: str = "custom") -> "OrliczCost":
        def vphi(t):
            return np.vectorize(lambda u: float(phi(u)), otypes=[float])(np.asarray(t, dtype=float))

        inv = phi_inverse if phi_inverse is not None else (lambda s: _bisect_inverse(vphi, float(s)))
        return cls("custom", {"name": name}, vphi, inv)

    def _validate(self) -> None:
        one = float(self.phi(1.0))
        if abs(one - 1) > 1e-12:
            raise DomainError(f"gauge must satisfy phi(1) = 1, got {one!r}")
        if abs(float(self.phi(0.0))) > 1e-12:
            raise DomainError("gauge must satisfy phi(0) = 0")
        grid = np.linspace(0, 4, 401)
        vals = self.phi(grid)
        if not np.all(np.diff(vals) > 0):
            raise DomainError("gauge must be strictly increasing")
        if np.min(vals[2:] - 2 * vals[1:-1] + vals[:-2]) < -1e-10:
            raise DomainError("gauge must be convex")
        for s in (0.25, 0.5, 1.0, 2.0, 10.0):
            back = float(self.phi(self.phi_inverse(s)))
            if abs(back - s) > 1e-10 * max(1.0, s):
                raise DomainError(f"phi_inverse is inconsistent at {s}: phi(phi_inverse(s)) = {back}")

    def descriptor(self) -> dict:
        return {"family": self.family, **self.params}

    @classmethod
    def from_descriptor(cls, desc: dict) -> "OrliczCost":
        fam = desc.get("family")
        if fam == "power":
            return cls.power(desc["p"])
        if fam == "exp_gauge":
            return cls.exp_gauge(desc["a"])
        raise DomainError(f"unknown gauge family {fam!r}")


def _bisect_inverse(phi, s: float) -> float:
    if s < 0:
        raise DomainError("gauge inverse needs a nonnegative argument")
    lo, hi = 0.0, 1.0
    for _ in range(MAX_DOUBLINGS):
        if float(phi(hi)) >= s:
            break
        lo, hi = hi, 2 * hi
    else:
        raise DomainError("could not bracket the gauge inverse")
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if float(phi(mid)) < s:
            lo = mid
        else:
            hi = mid
    return hi


def gauge_norm(d: np.ndarray, w: np.ndarray, cost: OrliczCost) -> float:
    """inf { t > 0 : sum w phi(d / t) <= 1 } by monotone bisection."""
    d = np.asarray(d, dtype=float)
    w = np.asarray(w, dtype=float)
    dmax = float(d.max()) if d.size else 0.0
    if dmax <= 0:
        return 0.0

    def excess(t):
        with np.errstate(over="ignore", invalid="ignore"):
            return float(w @ cost.phi(d / t)) - 1.0

    wmin = float(w[d > 0].min())
    lo = dmax / cost.phi_inverse(1 / wmin)
    hi = dmax / cost.phi_inverse(1.0)
    for _ in range(MAX_DOUBLINGS):
        if excess(hi) <= 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise DomainError("no feasible scale found: gauge misconfigured")
    lo = min(lo, hi)
    if excess(lo) <= 0:
        return lo
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if excess(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return hi


def orlicz_distance_dirac(x: Point, mu: DiscreteMeasure, cost: OrliczCost) -> float:
    mu.space._check(x)
    d = mu.space.pairwise([x], mu.points)[0]
    return gauge_norm(d, mu.weights, cost)


def orlicz_constraint(x: Point, mu: DiscreteMeasure, cost: OrliczCost, t: float) -> float:
    """The defining sum sum_i w_i phi(d(x, y_i) / t); equals 1 at the distance unless attained strictly."""
    d = mu.space.pairwise([x], mu.points)[0]
    return float(mu.weights @ cost.phi(d / t))


def orlicz_endpoint_values(lam: float, dist_xy: float, cost: OrliczCost) -> tuple[float, float]:
    """W_phi(delta_x, mu) and W_phi(delta_y, mu) for mu = lam delta_x + (1 - lam) delta_y."""
    if not 0 < lam < 1:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    return dist_xy / cost.phi_inverse(1 / (1 - lam)), dist_xy / cost.phi_inverse(1 / lam)


def orlicz_two_point_threshold(lam: float, ell: float, cost: OrliczCost) -> float:
    """Arclength bound S* = ell (1/phi^-1(1/(1-lam)) - (1-lam)) / (2 lam - 1)."""
    if not 0.5 < lam < 1:
        raise DomainError(f"threshold needs 1/2 < lambda < 1, got {lam}")
    if not ell > 0:
        raise DomainError("geodesic length must be positive")
    return ell * (1 / cost.phi_inverse(1 / (1 - lam)) - (1 - lam)) / (2 * lam - 1)


def threshold_certified(lam: float, ell: float, cost: OrliczCost, factor: float = 0.99, tol: float = 1e-9):
    """Does the point at arclength factor * S* beat both endpoints?

    Returns (certified, value at that point, best endpoint value).
    """
    s = factor * orlicz_two_point_threshold(lam, ell, cost)
    ex, ey = orlicz_endpoint_values(lam, ell, cost)
    best_end = min(ex, ey)
    if not 0 < s < ell:
        return False, math.nan, best_end
    val = gauge_norm(np.array([s, ell - s]), np.array([lam, 1 - lam]), cost)
    return val <= best_end + tol, val, best_end


def gauge_witness(cost: OrliczCost, t_max: float = 1e3, n: int = 4000, tol: float = 1e-9) -> float | None:
    """Some t0 in (1, t_max] with phi(t0) != t0, or None if the grid finds none."""
    grid = np.geomspace(1 + 1e-3, t_max, n)
    with np.errstate(over="ignore"):
        gap = np.abs(cost.phi(grid) - grid)
    hits = np.flatnonzero(gap > tol * grid)
    return float(grid[hits[0]]) if hits.size else None


def orlicz_project_two_point(
    x: Point,
    y: Point,
    lam: float,
    cost: OrliczCost,
    space: MetricSpace | None = None,
    *,
    n_off: int = 200,
    rng_seed: int = 0,
    config: ProjectConfig | None = None,
) -> BarycenterResult:
    """Minimizers of a -> W_phi(delta_a, lam delta_x + (1 - lam) delta_y).

    Each minimizing geodesic is scanned by golden section (the profile is a
    norm of an affine vector, hence convex).  Random off-geodesic points are
    checked never to beat the best branch value, and for lam != 1/2 the
    minimizer is checked to be interior whenever it beats both endpoints.
    Flags record the outcome of both checks.
    """
    cfg = config or ProjectConfig()
    space = space or x.space
    space._check(x)
    space._check(y)
    if space.distance(x, y) <= 0:
        raise DomainError("x and y must differ")
    if not 0 < lam < 1:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    mu = DiscreteMeasure.from_points(space, [x, y], [lam, 1 - lam])
    ell = space.distance(x, y)
    cands = []
    interior = []
    for g in space.minimizing_geodesics(x, y):
        def f(s, g=g):
            return orlicz_distance_dirac(g(s / ell), mu, cost)

        s, val = golden_section_min(f, 0.0, ell, tol=1e-12 * max(1.0, ell))
        cands.append((g(s / ell), val, 0.0))
        interior.append(1e-9 * ell < s < ell * (1 - 1e-9))
    ex, ey = orlicz_endpoint_values(lam, ell, cost)
    cands.append((x, ex, 0.0))
    cands.append((y, ey, 0.0))
    reps, best, runner_up = _cluster(space, cands, cfg)
    flags = []
    beats = best < min(ex, ey) - cfg.tol_mult
    if beats:
        flags.append("interior" if all(interior) else "interior_check_failed")
    rng = np.random.default_rng(rng_seed)
    off = [orlicz_distance_dirac(q, mu, cost) for q in space.sample(rng, n_off)]
    if off and min(off) < best - 1e-9:
        flags.append("off_geodesic_violation")
    return BarycenterResult(
        minimizers=[(r[0], r[1]) for r in reps],
        global_value=best,
        multiplicity=len(reps),
        method="closed_form_two_point",
        flags=flags,
        runner_up=runner_up,
    )
