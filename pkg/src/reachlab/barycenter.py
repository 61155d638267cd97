"""Metric projection of a measure onto the Dirac-embedded base space.

``project`` returns every global minimizer of x -> W_p(delta_x, mu) it can find,
clustered into distinct barycenters, so that non-uniqueness (the failure of
``Unp``) shows up as ``multiplicity > 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from reachlab.errors import DomainError
from reachlab.report import Checker, ProbeReport
from reachlab.spaces import (
    SAME_POINT_TOL,
    Euclidean,
    FiniteGraph,
    MetricSpace,
    Point,
    _power,
)
from reachlab.transport import DiscreteMeasure, _root, dirac_to_measure_cost, wasserstein_p

INV_PHI = (math.sqrt(5) - 1) / 2

METHODS = ("closed_form_two_point", "euclidean_mean", "grid_refine", "vertex_enumeration")


def golden_section_min(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12, max_iter: int = 500):
    """Minimize a unimodal f on [a, b]; returns (argmin, min) including the endpoints as candidates."""
    lo, hi = min(a, b), max(a, b)
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
    cands = [(c, fc), (d, fd), (a, f(a)), (b, f(b))]
    return min(cands, key=lambda t: t[1])


def two_point_t0(lam: float, p: float) -> float:
    """Minimizing parameter of t -> lam t^p + (1 - lam)(1 - t)^p on [0, 1]."""
    _check_two_point(lam, p)
    # stationarity: (t / (1 - t))^(p-1) = (1 - lam) / lam, so t0 = 1 / (1 + (lam / (1 - lam))^(1/(p-1))).
    # Evaluated as a logistic in log space; the plain powers underflow for p near 1.
    r = (math.log(lam) - math.log1p(-lam)) / (p - 1)
    if r >= 0:
        e = math.exp(-r)
        return e / (1 + e)
    return 1 / (1 + math.exp(r))


def two_point_min_value(lam: float, p: float, dist_xy: float) -> float:
    """min over a geodesic of W_p(delta_gamma(t), lam delta_x + (1-lam) delta_y)."""
    _check_two_point(lam, p)
    if dist_xy < 0:
        raise DomainError("distance must be nonnegative")
    # at t0 the objective collapses to (ab / (a + b))^(p-1) with a = lam^(1/(p-1)), b = (1-lam)^(1/(p-1));
    # log(ab / (a + b)) = min(la, lb) - log1p(exp(-|la - lb|)) stays finite as p -> 1
    la = math.log(lam) / (p - 1)
    lb = math.log1p(-lam) / (p - 1)
    log_pow = min(math.log(lam), math.log1p(-lam)) - (p - 1) * math.log1p(math.exp(-abs(la - lb)))
    return math.exp(log_pow / p) * dist_xy


def _check_two_point(lam: float, p: float) -> None:
    if not 0 < lam < 1:
        raise DomainError(f"degenerate two-point measure: lambda = {lam} must lie in (0, 1)")
    if not p > 1:
        raise DomainError(f"closed form needs p > 1, got {p}")


@dataclass
class ProjectConfig:
    tol_mult: float = 1e-7
    cluster_sep: float = 1e-4
    grid: int = 32
    refine_iters: int = 200
    max_starts: int = 8
    stationarity_tol: float = 1e-7
    force_method: str | None = None

    def __post_init__(self):
        if self.tol_mult <= 0 or self.cluster_sep <= 0 or self.stationarity_tol <= 0:
            raise DomainError("tolerances must be positive")
        if self.force_method is not None and self.force_method not in METHODS:
            raise DomainError(f"unknown method {self.force_method!r}")


@dataclass
class BarycenterResult:
    minimizers: list  # [(Point, W_p value)]
    global_value: float
    multiplicity: int
    method: str
    flags: list = field(default_factory=list)
    runner_up: float | None = None  # best candidate value outside the minimizer clusters
    stationarity: float = 0.0  # largest |directional derivative| among non-vertex minimizers

    @property
    def points(self) -> list[Point]:
        return [m[0] for m in self.minimizers]

    @property
    def flat(self) -> bool:
        return "flat_minimum" in self.flags

    def to_dict(self) -> dict:
        space = self.minimizers[0][0].space
        return {
            "global_value": self.global_value,
            "minimizers": [{"point": space.point_to_json(q), "value": v} for q, v in self.minimizers],
            "multiplicity": self.multiplicity,
            "method": self.method,
            "flags": list(self.flags),
        }


def _cluster(space: MetricSpace, cands: list, cfg: ProjectConfig):
    """Group candidates (point, value, stationarity) into distinct global minimizers."""
    cands = sorted(cands, key=lambda c: (c[1], tuple(np.ravel(c[0].coords))))
    best = cands[0][1]
    reps: list = []
    runner_up = None
    for q, val, stat in cands:
        near = any(space.distance(q, r[0]) <= cfg.cluster_sep for r in reps)
        if val <= best + cfg.tol_mult:
            if not near:
                reps.append((q, val, stat))
        elif not near and runner_up is None:
            runner_up = val
    return reps, best, runner_up


def _finish(space, mu, p, cands, cfg, method, flags=()):
    certified = [c for c in cands if c[2] <= cfg.stationarity_tol]
    if certified:
        # a non-stationary candidate is kept only if no certified one matches its value
        floor = min(c[1] for c in certified)
        cands = certified + [c for c in cands if c[2] > cfg.stationarity_tol and c[1] < floor - cfg.tol_mult]
    reps, best, runner_up = _cluster(space, cands, cfg)
    flags = list(flags)
    stat = max((r[2] for r in reps), default=0.0)
    if stat > cfg.stationarity_tol:
        flags.append("uncertified")
    if "flat_minimum" not in flags and len(reps) >= 2:
        for i in range(len(reps)):
            for j in range(i + 1, len(reps)):
                m = space.midpoint(reps[i][0], reps[j][0], 0)
                if dirac_to_measure_cost(m, mu, p) <= best + cfg.tol_mult:
                    flags.append("flat_minimum")
                    break
            if "flat_minimum" in flags:
                break
    return BarycenterResult(
        minimizers=[(r[0], r[1]) for r in reps],
        global_value=best,
        multiplicity=len(reps),
        method=method,
        flags=flags,
        runner_up=runner_up,
        stationarity=stat,
    )


def project(mu: DiscreteMeasure, p: float = 2.0, config: ProjectConfig | None = None) -> BarycenterResult:
    """All barycenters of mu, i.e. global minimizers of x -> W_p(delta_x, mu)."""
    cfg = config or ProjectConfig()
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if len(mu) == 0:
        raise DomainError("empty measure")
    space = mu.space
    method = cfg.force_method
    if method is None:
        if len(mu) <= 2:
            method = "closed_form_two_point"
        elif isinstance(space, Euclidean) and p == 2:
            method = "euclidean_mean"
        elif isinstance(space, FiniteGraph):
            method = "vertex_enumeration"
        else:
            method = "grid_refine"
    if method == "closed_form_two_point":
        return _two_point(mu, p, cfg)
    if method == "euclidean_mean":
        if not (isinstance(space, Euclidean) and p == 2):
            raise DomainError("the weighted mean is the barycenter only for p = 2 in Euclidean space")
        m = space.point(mu.weights @ space.coords_array(mu.points))
        return _finish(space, mu, p, [(m, dirac_to_measure_cost(m, mu, p), 0.0)], cfg, method)
    if method == "vertex_enumeration":
        if not isinstance(space, FiniteGraph):
            raise DomainError("vertex enumeration needs a finite_graph")
        return _graph_project(mu, p, cfg)
    if isinstance(space, FiniteGraph):
        raise DomainError("grid refinement is not available on finite_graph")
    return _grid_refine(mu, p, cfg)


def _two_point(mu: DiscreteMeasure, p: float, cfg: ProjectConfig) -> BarycenterResult:
    space = mu.space
    if len(mu) == 1:
        x = mu.points[0]
        return _finish(space, mu, p, [(x, 0.0, 0.0)], cfg, "closed_form_two_point", ["dirac"])
    if len(mu) != 2:
        raise DomainError("closed form applies to two-atom measures only")
    (x, lam), (y, _) = mu.atoms
    d = space.distance(x, y)
    paths = space.minimizing_geodesics(x, y)
    cands = []
    flags = []
    if p > 1:
        t0 = two_point_t0(lam, p)
        val = two_point_min_value(lam, p, d)
        for g in paths:
            cands.append((g(t0), val, 0.0))
    elif abs(lam - 0.5) <= 1e-15:
        # p = 1, equal weights: every point of every minimizing geodesic is optimal
        flags.append("flat_minimum")
        val = d / 2
        cands = [(x, val, 0.0), (y, val, 0.0)] + [(g(0.5), val, 0.0) for g in paths]
    else:
        heavy = x if lam > 0.5 else y
        cands = [(heavy, min(lam, 1 - lam) * d, 0.0)]
    return _finish(space, mu, p, cands, cfg, "closed_form_two_point", flags)


# --- continuous spaces: multistart grid + refinement ---------------------------------


def _grid_local_minima(values: np.ndarray, periodic: tuple[bool, ...]) -> np.ndarray:
    """Boolean mask of grid cells not larger than any of their neighbours."""
    mask = np.ones(values.shape, dtype=bool)
    nd = values.ndim
    for offset in np.ndindex(*(3,) * nd):
        shift = tuple(o - 1 for o in offset)
        if not any(shift):
            continue
        shifted = values
        valid = np.ones(values.shape, dtype=bool)
        for ax, s in enumerate(shift):
            if s == 0:
                continue
            shifted = np.roll(shifted, -s, axis=ax)
            if not periodic[ax]:
                idx = [slice(None)] * nd
                idx[ax] = slice(-1, None) if s > 0 else slice(0, 1)
                valid[tuple(idx)] = False
        mask &= ~valid | (values <= shifted)
    return mask


def _refine_continuous(space, start, v0, Y, w, p, cfg):
    fg, to_coords, dim = space._objective(start, Y, w, p)
    res = minimize(fg, v0, jac=True, method="BFGS", options={"maxiter": cfg.refine_iters, "gtol": 1e-12})
    c = to_coords(res.x)
    # re-centre the chart on the result and polish once more
    fg, to_coords, dim = space._objective(c, Y, w, p)
    res = minimize(fg, np.zeros(dim), jac=True, method="BFGS", options={"maxiter": cfg.refine_iters, "gtol": 1e-12})
    c = to_coords(res.x)
    fg, _, _ = space._objective(c, Y, w, p)
    f, g = fg(np.zeros(dim))
    return c, f, float(np.linalg.norm(g))


def _polish_root(g, s: float, lo: float, hi: float) -> float:
    """Bisect on the sign of the derivative g around s.

    Function values only pin a minimizer down to about sqrt(machine eps);
    the derivative's sign change pins it to machine precision.
    """
    delta = 1e-9 * max(1.0, hi - lo)
    while delta < hi - lo:
        a, b = max(lo, s - delta), min(hi, s + delta)
        if g(a) <= 0 <= g(b):
            break
        delta *= 4
    else:
        return s
    for _ in range(100):
        m = 0.5 * (a + b)
        if m in (a, b):
            break
        if g(m) < 0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _refine_1d(space, start, lo, hi, Y, w, p):
    """Golden section on [lo, hi] in chart units; None when the minimum sits at the far end."""
    fg, to_coords, _ = space._objective(start, Y, w, p)
    s, _ = golden_section_min(lambda v: fg(np.array([v]))[0], lo, hi, tol=1e-13)
    far = lo if hi == 0 else hi
    if abs(s - far) <= 1e-12 * max(1.0, abs(far)):
        return None
    s = _polish_root(lambda v: fg(np.array([v]))[1][0], s, lo, hi)
    c = to_coords(np.array([s]))
    fg, _, _ = space._objective(c, Y, w, p)
    f, g = fg(np.zeros(1))
    return c, f, abs(float(g[0]))


def _grid_refine(mu: DiscreteMeasure, p: float, cfg: ProjectConfig) -> BarycenterResult:
    space = mu.space
    Y = space.coords_array(mu.points)
    w = mu.weights
    grid, periodic = space._seed_grid(cfg.grid, Y)
    starts: list[np.ndarray] = []
    flat = np.empty((0, Y.shape[1]))
    if grid.size:
        shape = grid.shape[:-1]
        flat = grid.reshape(-1, grid.shape[-1])
        vals = _power(space._pairwise(flat, Y), p) @ w
        vals = vals.reshape(shape)
        mins = np.flatnonzero(_grid_local_minima(vals, periodic))
        order = mins[np.argsort(vals.ravel()[mins], kind="stable")]
        starts = [flat[k] for k in order[: cfg.max_starts]]
    convex = isinstance(space, Euclidean)
    if convex:
        starts.append(w @ Y)
    cands = []
    for s in starts:
        # half the distance to the nearest other seed: several minimizers may share one grid cell
        dn = space._pairwise(s[None, :], flat)[0] if len(flat) > 1 else np.array([0.0])
        dn = dn[dn > SAME_POINT_TOL]
        h = float(dn.min()) if dn.size else 1.0
        if space.intrinsic_dim == 1:
            for lo, hi in ((-h / space._chart_unit(), 0.0), (0.0, h / space._chart_unit())):
                out = _refine_1d(space, s, lo, hi, Y, w, p)
                if out is not None:
                    cands.append((space.point(out[0]), _root(out[1], p), out[2]))
            continue
        offsets = [np.zeros(space.intrinsic_dim)]
        if not convex:
            step = 0.5 * h / space._chart_unit()
            offsets += [step * np.array(o, dtype=float) for o in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
        for v0 in offsets:
            c, f, stat = _refine_continuous(space, s, v0, Y, w, p, cfg)
            cands.append((space.point(c), _root(f, p), stat))
    # atoms are candidates in their own right: the objective is not smooth there when p < 2
    for q in mu.points:
        cands.append((q, dirac_to_measure_cost(q, mu, p), 0.0))
    return _finish(space, mu, p, cands, cfg, "grid_refine")


# --- metric graphs: vertices plus convex pieces of every edge ---------------------------


def _edge_lines(space: FiniteGraph, key, w_e, y: Point):
    """Affine pieces describing s -> d((key, s), y) as min(l1, l2, max(l3, l4))."""
    a, b = key
    da = space.distance(space.vertex(a), y)
    db = space.distance(space.vertex(b), y)
    mins = [(da, 1.0), (w_e + db, -1.0)]
    maxs = []
    cy = y.coords
    if cy[0] != cy[1] and (cy[0], cy[1]) == key:
        maxs = [(-cy[2], 1.0), (cy[2], -1.0)]
    return mins, maxs


def _edge_eval(lines, s):
    """Distance value and its slope at s (right derivative)."""
    mins, maxs = lines
    opts = [(al + be * s, be) for al, be in mins]
    if maxs:
        opts.append(max(((al + be * s, be) for al, be in maxs), key=lambda t: (t[0], t[1])))
    return min(opts, key=lambda t: (t[0], t[1]))


def _graph_project(mu: DiscreteMeasure, p: float, cfg: ProjectConfig) -> BarycenterResult:
    space: FiniteGraph = mu.space  # type: ignore[assignment]
    w = mu.weights
    cands = []
    for v in range(len(space.vertices)):
        q = space.vertex(v)
        cands.append((q, dirac_to_measure_cost(q, mu, p), 0.0))
    for key, w_e in sorted(space._w.items()):
        lines = [_edge_lines(space, key, w_e, y) for y in mu.points]

        def f(s, lines=lines):
            d = np.array([_edge_eval(L, s)[0] for L in lines])
            return float(w @ _power(np.maximum(d, 0.0), p))

        breaks = {0.0, w_e}
        for mins, maxs in lines:
            allv = mins + maxs
            for i in range(len(allv)):
                for j in range(i + 1, len(allv)):
                    (a1, b1), (a2, b2) = allv[i], allv[j]
                    if b1 != b2:
                        s = (a2 - a1) / (b1 - b2)
                        if 0 < s < w_e:
                            breaks.add(s)
        def slope(s, lines=lines):
            return sum(wi * p * max(dv, 0.0) ** (p - 1) * sl for wi, (dv, sl) in zip(w, (_edge_eval(L, s) for L in lines)))

        pts = sorted(breaks)
        for lo, hi in zip(pts, pts[1:]):
            s, val = golden_section_min(f, lo, hi, tol=1e-13 * max(1.0, w_e))
            on_break = min(abs(s - lo), abs(s - hi)) <= 1e-9 * max(1.0, w_e)
            if on_break:
                stat = 0.0
            else:
                s = _polish_root(slope, s, lo, hi)
                val = f(s)
                stat = abs(slope(s))
            if 0 < s < w_e:
                q = space.point((key[0], key[1], s))
                cands.append((q, _root(val, p), stat))
    return _finish(space, mu, p, cands, cfg, "vertex_enumeration")


# --- submetry ---------------------------------------------------------------------------


def submetry_check(
    mu: DiscreteMeasure,
    r: float,
    n_samples: int = 200,
    rng_seed: int = 0,
    *,
    p: float = 2.0,
    lipschitz_tol: float = 1e-8,
    translation_tol: float = 1e-10,
    proj_tol: float = 1e-8,
) -> ProbeReport:
    """Sampled check that the 2-barycenter map is 1-Lipschitz and onto every ball.

    Lipschitz side: random nu with W_2(mu, nu) <= r must satisfy
    |proj(mu) - proj(nu)| <= W_2(mu, nu).  Surjectivity side: for b with
    |b - proj(mu)| < r the translate T#mu (T moving proj(mu) to b) lies within
    |b - proj(mu)| of mu and projects to b.
    """
    space = mu.space
    if not isinstance(space, Euclidean) or p != 2:
        raise DomainError("submetry check is supported for p = 2 on euclidean spaces only")
    if not r > 0:
        raise DomainError("radius must be positive")
    rng = np.random.default_rng(rng_seed)
    chk = Checker()
    Y = space.coords_array(mu.points)
    center = project(mu, 2.0).points[0]
    c = space.coords(center)
    n = space.n
    lip_slacks = []
    attempts = 0
    while len(lip_slacks) < n_samples:
        attempts += 1
        if attempts > 100 * n_samples:
            chk.inconclusive("could not sample enough measures inside the ball")
            break
        k = int(rng.integers(1, 6))
        sigma = rng.uniform(0, r)
        base = Y[rng.integers(len(Y), size=k)]
        pts = base + sigma * rng.standard_normal((k, n)) / math.sqrt(n)
        wts = rng.dirichlet(np.ones(k))
        nu = DiscreteMeasure.from_points(space, [space.point(q) for q in pts], wts)
        w2, _ = wasserstein_p(mu, nu, 2.0)
        if w2 > r:
            continue
        c_nu = space.coords(project(nu, 2.0).points[0])
        excess = float(np.linalg.norm(c_nu - c)) - w2
        lip_slacks.append(excess)
        chk.check("lipschitz", excess, lipschitz_tol)
    for _ in range(n_samples):
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        rad = r * rng.uniform(0, 1) ** (1 / n)
        b = c + rad * direction
        shifted = DiscreteMeasure.from_points(space, [space.point(q + (b - c)) for q in Y], mu.weights)
        w2, _ = wasserstein_p(mu, shifted, 2.0)
        chk.check("translation_distance", w2 - float(np.linalg.norm(b - c)), translation_tol)
        c_shift = space.coords(project(shifted, 2.0).points[0])
        chk.check("translation_projection", float(np.linalg.norm(c_shift - b)), proj_tol)
    hist, edges = np.histogram(lip_slacks, bins=20) if lip_slacks else (np.array([]), np.array([]))
    mu_json = {
        "space": space.descriptor(),
        "atoms": [{"point": space.point_to_json(q), "weight": w} for q, w in mu.atoms],
    }
    params = {"mu": mu_json, "r": r, "n_samples": n_samples, "rng_seed": rng_seed, "p": float(p)}
    return chk.report(
        "submetry",
        space.descriptor(),
        params,
        witnesses=[{"measure_atoms": Y.tolist(), "weights": mu.weights.tolist(), "projection": c.tolist()}],
        data={"lipschitz_slack_histogram": {"counts": hist.tolist(), "edges": edges.tolist()}},
    )
