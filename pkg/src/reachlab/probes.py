"""Reach probes: constructive witnesses for null reach and sampled evidence of unique projections.

Every probe stores its inputs in JSON form under ``params`` so that
:func:`replay` can rebuild and rerun it from a saved report.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Sequence

import numpy as np

from reachlab.barycenter import ProjectConfig, project, submetry_check
from reachlab.diagrams import EmbeddingSpec, bottleneck, embed, midpoint_diagram, vertical_pairing
from reachlab.errors import DomainError, PreconditionError
from reachlab.orlicz import (
    OrliczCost,
    gauge_witness,
    orlicz_distance_dirac,
    orlicz_endpoint_values,
    orlicz_project_two_point,
)
from reachlab.report import Checker, ProbeReport
from reachlab.serialize import embedding_from_json, gauge_from_json, measure_from_json, measure_to_json
from reachlab.spaces import (
    SAME_POINT_TOL,
    Euclidean,
    FiniteGraph,
    MetricSpace,
    Point,
    convexity_probe,
    space_from_descriptor,
)
from reachlab.transport import DiscreteMeasure, dirac_to_measure_cost, displacement_geodesic, wasserstein_p

DEFAULT_LAMBDAS = (0.5, 0.75, 0.9, 0.99, 0.999)
DEFAULT_EPS = (1.0, 0.1, 0.01)
DEFAULT_T_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

VALUE_TOL = 1e-12
CLOSED_FORM_TOL = 1e-9
ORLICZ_TOL = 1e-10


def _pjson(space: MetricSpace, x: Point) -> Any:
    return space.point_to_json(x)


def _minimizers_json(space, res) -> list:
    return [{"point": _pjson(space, q), "value": v} for q, v in res.minimizers]


def _accumulation_neighbour(space: MetricSpace, x: Point, radius: float) -> Point | None:
    y = space.sample_near(x, radius)
    if y is None:
        return None
    d = space.distance(x, y)
    return y if 0 < d < radius else None


def probe_w1_null_reach(
    space: MetricSpace,
    x: Point,
    eps_list: Sequence[float] = DEFAULT_EPS,
    config: ProjectConfig | None = None,
) -> ProbeReport:
    """For each eps, a measure within eps of delta_x whose W_1 projection is not unique."""
    cfg = config or ProjectConfig()
    chk = Checker()
    records = []
    for eps in eps_list:
        if not eps > 0:
            raise DomainError(f"eps must be positive, got {eps}")
        y = _accumulation_neighbour(space, x, eps)
        if y is None:
            chk.inconclusive(f"eps={eps!r}: no point y with 0 < d(x, y) < eps; x is isolated at this scale")
            records.append({"eps": eps, "status": "isolated"})
            continue
        d = space.distance(x, y)
        mu = DiscreteMeasure.from_points(space, [x, y], [0.5, 0.5])
        w1 = dirac_to_measure_cost(x, mu, 1.0)
        w1_y = dirac_to_measure_cost(y, mu, 1.0)
        res = project(mu, 1.0, cfg)
        ok = True
        ok &= chk.check("w1_equals_half_distance", abs(w1 - d / 2), VALUE_TOL)
        ok &= chk.require("w1_below_eps", w1 < eps)
        ok &= chk.require("multiplicity_at_least_2", res.multiplicity >= 2)
        ok &= chk.check("x_optimal", w1 - res.global_value, cfg.tol_mult)
        ok &= chk.check("y_optimal", w1_y - res.global_value, cfg.tol_mult)
        records.append(
            {
                "eps": eps,
                "status": "confirmed" if ok else "failed",
                "y": _pjson(space, y),
                "distance": d,
                "w1": w1,
                "multiplicity": res.multiplicity,
                "flags": res.flags,
                "minimizers": _minimizers_json(space, res),
            }
        )
    params = {"x": _pjson(space, x), "eps_list": [float(v) for v in eps_list]}
    return chk.report("w1-null-reach", space.descriptor(), params, witnesses=records)


def probe_multi_geodesic_null_reach(
    space: MetricSpace,
    x: Point,
    y: Point,
    p: float = 2.0,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDAS,
    config: ProjectConfig | None = None,
    cross_check: bool = True,
) -> ProbeReport:
    """mu_lam = lam delta_x + (1-lam) delta_y keeps >= 2 barycenters while W_p(mu_lam, delta_x) -> 0."""
    cfg = config or ProjectConfig()
    if not p > 1:
        raise DomainError(f"multi-geodesic probe needs p > 1, got {p}")
    if space.distance(x, y) <= SAME_POINT_TOL:
        raise PreconditionError("x and y coincide")
    paths = space.minimizing_geodesics(x, y)
    if len(paths) < 2:
        raise PreconditionError(f"only {len(paths)} minimizing geodesic between x and y; need at least 2")
    d = space.distance(x, y)
    chk = Checker()
    records = []
    lams = sorted(lambda_grid)
    dists = []
    for lam in lams:
        if not 0 < lam < 1:
            raise DomainError(f"lambda must lie in (0, 1), got {lam}")
        mu = DiscreteMeasure.from_points(space, [x, y], [lam, 1 - lam])
        res = project(mu, p, cfg)
        wx = dirac_to_measure_cost(x, mu, p)
        expected = (1 - lam) ** (1 / p) * d
        chk.require("multiplicity_at_least_2", res.multiplicity >= 2)
        chk.check("closed_form_distance", abs(wx - expected), CLOSED_FORM_TOL)
        rec = {
            "lambda": lam,
            "w_to_x": wx,
            "closed_form": expected,
            "multiplicity": res.multiplicity,
            "global_value": res.global_value,
            "minimizers": _minimizers_json(space, res),
        }
        if cross_check and not isinstance(space, FiniteGraph):
            grid = project(mu, p, ProjectConfig(**{**cfg.__dict__, "force_method": "grid_refine"}))
            chk.require("grid_multiplicity_at_least_2", grid.multiplicity >= 2)
            chk.check("grid_value_agreement", abs(grid.global_value - res.global_value), cfg.tol_mult)
            rec["grid_multiplicity"] = grid.multiplicity
            rec["grid_global_value"] = grid.global_value
        dists.append(wx)
        records.append(rec)
    for a, b in zip(dists, dists[1:]):
        chk.require("strictly_decreasing", b < a)
    params = {"x": _pjson(space, x), "y": _pjson(space, y), "p": float(p), "lambda_grid": [float(v) for v in lambda_grid]}
    return chk.report(
        "multi-geodesic-null-reach",
        space.descriptor(),
        params,
        witnesses=records,
        data={"n_branches": len(paths)},
    )


def probe_unique_barycenters(
    space: MetricSpace,
    p: float = 2.0,
    n_measures: int = 1000,
    rng_seed: int = 0,
    max_atoms: int = 5,
    config: ProjectConfig | None = None,
) -> ProbeReport:
    """Random measures on euclidean space all have a single barycenter.

    For p = 2 the numeric minimizer (grid refinement) is compared with the
    weighted mean.  The report carries the smallest value gap between the
    minimizer and the best competing candidate.
    """
    cfg = config or ProjectConfig()
    if not isinstance(space, Euclidean):
        raise PreconditionError("unique-barycenter probe runs on euclidean spaces only")
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    rng = np.random.default_rng(rng_seed)
    chk = Checker()
    gaps = []
    worst = None
    for k in range(n_measures):
        m = int(rng.integers(1, max_atoms + 1))
        pts = space.sample(rng, m)
        w = rng.dirichlet(np.ones(m))
        mu = DiscreteMeasure.from_points(space, pts, w)
        if p == 2:
            res = project(mu, p, ProjectConfig(**{**cfg.__dict__, "force_method": "grid_refine"}))
            mean = mu.weights @ space.coords_array(mu.points)
            err = float(np.linalg.norm(space.coords(res.points[0]) - mean))
            chk.check("mean_agreement", err, 1e-9)
        else:
            res = project(mu, p, cfg)
        ok = chk.require("multiplicity_1", res.multiplicity == 1)
        if "uncertified" in res.flags:
            chk.inconclusive(f"measure {k}: stationarity not certified ({res.stationarity:.3g})")
        if res.runner_up is not None:
            gaps.append(res.runner_up - res.global_value)
        if not ok and worst is None:
            worst = {"index": k, "measure": measure_to_json(mu), "minimizers": _minimizers_json(space, res)}
    chk.bump("measures", n_measures)
    params = {"p": float(p), "n_measures": n_measures, "rng_seed": rng_seed, "max_atoms": max_atoms}
    data = {
        "min_value_gap": min(gaps) if gaps else None,
        "max_value_gap": max(gaps) if gaps else None,
    }
    return chk.report(
        "unique-barycenters",
        space.descriptor(),
        params,
        witnesses=[worst] if worst else [],
        data=data,
        notes=[f"sampled {n_measures} measures; uniqueness over all measures is not claimed"],
    )


def probe_density_unp(
    space: MetricSpace,
    mu: DiscreteMeasure,
    x: Point,
    p: float = 2.0,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    config: ProjectConfig | None = None,
) -> ProbeReport:
    """Measures on the displacement geodesic from delta_x to mu project uniquely onto x."""
    cfg = config or ProjectConfig()
    base = project(mu, p, cfg)
    wx = dirac_to_measure_cost(x, mu, p)
    if wx > base.global_value + cfg.tol_mult:
        raise DomainError(f"x is not a barycenter of mu (value {wx} vs optimum {base.global_value})")
    chk = Checker()
    records = []
    for t in t_grid:
        if not 0 < t < 1:
            raise DomainError(f"t must lie in (0, 1), got {t}")
        nu = displacement_geodesic(x, mu, t)
        res = project(nu, p, cfg)
        w_x_nu = dirac_to_measure_cost(x, nu, p)
        w_nu_mu, _ = wasserstein_p(nu, mu, p)
        chk.check("geodesic_start", abs(w_x_nu - t * wx), 1e-8)
        chk.check("geodesic_end", abs(w_nu_mu - (1 - t) * wx), 1e-8)
        chk.require("multiplicity_1", res.multiplicity == 1)
        chk.check("projects_to_x", space.distance(res.points[0], x), cfg.cluster_sep)
        records.append(
            {
                "t": t,
                "measure": measure_to_json(nu),
                "multiplicity": res.multiplicity,
                "minimizers": _minimizers_json(space, res),
            }
        )
    params = {"mu": measure_to_json(mu), "x": _pjson(space, x), "p": float(p), "t_grid": [float(v) for v in t_grid]}
    return chk.report(
        "density-unp",
        space.descriptor(),
        params,
        witnesses=records,
        data={"base_multiplicity": base.multiplicity},
    )


def probe_dgm_null_reach(
    space: MetricSpace,
    spec: EmbeddingSpec,
    x: Point,
    eps_list: Sequence[float] = (0.5, 0.1),
) -> ProbeReport:
    """Midpoint diagrams between embed(x) and a nearby embed(y) have two nearest landmarks."""
    chk = Checker()
    records = []
    landmarks = list(spec.landmarks)
    for eps in eps_list:
        if not eps > 0:
            raise DomainError(f"eps must be positive, got {eps}")
        near = [z for z in landmarks if 0 < space.distance(x, z) < 2 * eps]
        if near:
            y = min(near, key=lambda z: (space.distance(x, z), landmarks.index(z)))
        else:
            y = _accumulation_neighbour(space, x, 2 * eps)
        if y is None:
            chk.inconclusive(f"eps={eps!r}: no point y with 0 < d(x, y) < 2 eps; x is isolated at this scale")
            records.append({"eps": eps, "status": "isolated"})
            continue
        d = space.distance(x, y)
        P = midpoint_diagram(x, y, spec)
        ok = True
        wx, mx = bottleneck(embed(x, spec), P)
        wy, my = bottleneck(embed(y, spec), P)
        ok &= chk.check("x_at_half_distance", abs(wx - d / 2), VALUE_TOL)
        ok &= chk.check("y_at_half_distance", abs(wy - d / 2), VALUE_TOL)
        ok &= chk.require("vertical_pairing", vertical_pairing(embed(x, spec), P, mx) and vertical_pairing(embed(y, spec), P, my))
        closest = math.inf
        nearest = []
        for k, z in enumerate(landmarks):
            ez = embed(z, spec)
            wz, mz = bottleneck(ez, P)
            ok &= chk.require("vertical_pairing", vertical_pairing(ez, P, mz))
            ok &= chk.check("no_closer_landmark", d / 2 - wz, VALUE_TOL)
            closest = min(closest, wz)
            if wz <= d / 2 + 1e-9:
                nearest.append(k)
        for name, q in (("x", x), ("y", y)):
            idx = [k for k, z in enumerate(landmarks) if space.distance(q, z) <= SAME_POINT_TOL]
            if idx:
                ok &= chk.require(f"{name}_among_nearest_landmarks", idx[0] in nearest)
        records.append(
            {
                "eps": eps,
                "status": "confirmed" if ok else "failed",
                "y": _pjson(space, y),
                "distance": d,
                "w_inf_x": wx,
                "w_inf_y": wy,
                "closest_landmark_distance": closest,
                "nearest_landmarks": nearest,
                "midpoint_diagram": P.to_json(),
            }
        )
    params = {"x": _pjson(space, x), "eps_list": [float(v) for v in eps_list], "embedding": spec.to_json()}
    return chk.report("dgm-null-reach", space.descriptor(), params, witnesses=records)


def probe_orlicz_null_reach(
    space: MetricSpace,
    x: Point,
    y: Point,
    gauge: OrliczCost,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDAS,
    n_off: int = 200,
    rng_seed: int = 0,
) -> ProbeReport:
    """Orlicz analogue of the multi-geodesic probe, driven by the gauge's closed-form endpoint value."""
    if space.distance(x, y) <= SAME_POINT_TOL:
        raise PreconditionError("x and y coincide")
    paths = space.minimizing_geodesics(x, y)
    if len(paths) < 2:
        raise PreconditionError(f"only {len(paths)} minimizing geodesic between x and y; need at least 2")
    params = {
        "x": _pjson(space, x),
        "y": _pjson(space, y),
        "gauge": gauge.descriptor(),
        "lambda_grid": [float(v) for v in lambda_grid],
        "n_off": n_off,
        "rng_seed": rng_seed,
    }
    chk = Checker()
    t0 = gauge_witness(gauge)
    if t0 is None:
        chk.inconclusive("no t0 in (1, 1000] with phi(t0) != t0; the gauge acts like the identity")
        return chk.report("orlicz-null-reach", space.descriptor(), params, data={"gauge_witness": None})
    d = space.distance(x, y)
    records = []
    ends = []
    for lam in sorted(lambda_grid):
        if not 0 < lam < 1:
            raise DomainError(f"lambda must lie in (0, 1), got {lam}")
        mu = DiscreteMeasure.from_points(space, [x, y], [lam, 1 - lam])
        res = orlicz_project_two_point(x, y, lam, gauge, space, n_off=n_off, rng_seed=rng_seed)
        closed, _ = orlicz_endpoint_values(lam, d, gauge)
        wx = orlicz_distance_dirac(x, mu, gauge)
        chk.require("multiplicity_at_least_2", res.multiplicity >= 2)
        chk.check("endpoint_formula", abs(wx - closed), ORLICZ_TOL)
        chk.require("no_off_geodesic_minimizer", "off_geodesic_violation" not in res.flags)
        chk.require("interior_minimizer", "interior_check_failed" not in res.flags)
        ends.append(closed)
        records.append(
            {
                "lambda": lam,
                "w_to_x": wx,
                "closed_form": closed,
                "multiplicity": res.multiplicity,
                "global_value": res.global_value,
                "flags": res.flags,
                "minimizers": _minimizers_json(space, res),
            }
        )
    for a, b in zip(ends, ends[1:]):
        chk.require("strictly_decreasing", b < a)
    return chk.report(
        "orlicz-null-reach",
        space.descriptor(),
        params,
        witnesses=records,
        data={"gauge_witness": t0, "n_branches": len(paths)},
    )


# --- registry and replay ------------------------------------------------------------------


def _pt(space, params, key):
    if key not in params:
        raise DomainError(f"probe parameter {key!r} is required")
    return space.point_from_json(params[key])


def _run_w1(space, q):
    return probe_w1_null_reach(space, _pt(space, q, "x"), q.get("eps_list", DEFAULT_EPS))


def _run_multi(space, q):
    return probe_multi_geodesic_null_reach(
        space, _pt(space, q, "x"), _pt(space, q, "y"), float(q.get("p", 2.0)), q.get("lambda_grid", DEFAULT_LAMBDAS)
    )


def _run_unique(space, q):
    return probe_unique_barycenters(
        space,
        float(q.get("p", 2.0)),
        int(q.get("n_measures", 1000)),
        int(q.get("rng_seed", 0)),
        int(q.get("max_atoms", 5)),
    )


def _run_density(space, q):
    if "mu" not in q:
        raise DomainError("probe parameter 'mu' is required")
    mu = measure_from_json(q["mu"], space)
    return probe_density_unp(space, mu, _pt(space, q, "x"), float(q.get("p", 2.0)), q.get("t_grid", DEFAULT_T_GRID))


def _run_dgm(space, q):
    emb = q.get("embedding")
    if emb is None:
        raise DomainError("probe parameter 'embedding' is required")
    spec = embedding_from_json(emb, space)
    return probe_dgm_null_reach(space, spec, _pt(space, q, "x"), q.get("eps_list", (0.5, 0.1)))


def _run_orlicz(space, q):
    if "gauge" not in q:
        raise DomainError("probe parameter 'gauge' is required")
    return probe_orlicz_null_reach(
        space,
        _pt(space, q, "x"),
        _pt(space, q, "y"),
        gauge_from_json(q["gauge"]),
        q.get("lambda_grid", DEFAULT_LAMBDAS),
        int(q.get("n_off", 200)),
        int(q.get("rng_seed", 0)),
    )


def _run_convexity(space, q):
    return convexity_probe(
        space, float(q.get("p", 2.0)), int(q.get("n_triples", 1000)), int(q.get("rng_seed", 0)), tol=float(q.get("tol", 1e-9))
    )


def _run_submetry(space, q):
    if "mu" not in q:
        raise DomainError("probe parameter 'mu' is required")
    mu = measure_from_json(q["mu"], space)
    return submetry_check(mu, float(q.get("r", 1.0)), int(q.get("n_samples", 200)), int(q.get("rng_seed", 0)))


PROBES: dict[str, Callable[[MetricSpace, dict], ProbeReport]] = {
    "w1-null-reach": _run_w1,
    "multi-geodesic-null-reach": _run_multi,
    "unique-barycenters": _run_unique,
    "density-unp": _run_density,
    "dgm-null-reach": _run_dgm,
    "orlicz-null-reach": _run_orlicz,
    "convexity": _run_convexity,
    "submetry": _run_submetry,
}


def run_probe(name: str, space: MetricSpace, params: dict) -> ProbeReport:
    if name not in PROBES:
        raise DomainError(f"unknown probe {name!r}; choose from {', '.join(PROBES)}")
    return PROBES[name](space, params)


def replay(report: ProbeReport | dict) -> ProbeReport:
    """Rerun a probe from the space descriptor and parameters stored in its report."""
    if isinstance(report, dict):
        report = ProbeReport.from_dict(report)
    if report.space is None:
        raise DomainError("report has no space descriptor")
    return run_probe(report.name, space_from_descriptor(report.space), report.params)
