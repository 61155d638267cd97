"""The acceptance battery run by ``reachlab probe-suite``.

Each criterion returns a ProbeReport named ``criterion-<n>-<slug>``.  The
numeric oracles used here (derivative bisection, exhaustive matchings, dense
scans) are deliberately independent of the solvers they check.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

from reachlab.barycenter import golden_section_min, submetry_check, two_point_min_value, two_point_t0
from reachlab.diagrams import (
    EmbeddingSpec,
    PartialMatching,
    PersistenceDiagram,
    bottleneck,
    embed,
    matching_cost,
    wasserstein_diagram,
)
from reachlab.orlicz import (
    OrliczCost,
    orlicz_distance_dirac,
    orlicz_endpoint_values,
    orlicz_two_point_threshold,
    threshold_certified,
)
from reachlab.probes import (
    probe_dgm_null_reach,
    probe_multi_geodesic_null_reach,
    probe_unique_barycenters,
    probe_w1_null_reach,
)
from reachlab.report import Checker, ProbeReport, Verdict
from reachlab.spaces import Circle, Euclidean, FiniteGraph, Sphere2, convexity_probe, path_graph
from reachlab.transport import DiscreteMeasure, dirac_to_measure_cost, wasserstein_p


def _summary(r: ProbeReport) -> dict:
    return {"name": r.name, "space": r.space, "verdict": r.verdict.value, "slacks": r.slacks, "counts": r.counts}


def _argmin_by_derivative(lam: float, p: float) -> float:
    """Root of d/dt [lam t^p + (1-lam)(1-t)^p], which increases from negative to positive on [0, 1]."""
    lo, hi = 0.0, 1.0
    for _ in range(200):
        m = 0.5 * (lo + hi)
        if m in (lo, hi):
            break
        # compare logs to avoid underflow of t^(p-1) for tiny t
        left = math.log(lam) + (p - 1) * math.log(m)
        right = math.log(1 - lam) + (p - 1) * math.log(1 - m)
        if left < right:
            lo = m
        else:
            hi = m
    return 0.5 * (lo + hi)


def criterion_1(seed: int = 0, n: int = 1000) -> ProbeReport:
    rng = np.random.default_rng(seed)
    chk = Checker()
    C = Circle(1.0)
    x, y = C.point(0.0), C.point(math.pi)
    paths = C.minimizing_geodesics(x, y)
    for k in range(n):
        lam = float(rng.uniform(0.01, 0.99))
        p = float(rng.uniform(1.01, 5.0))
        chk.check("t0_vs_numeric_argmin", abs(two_point_t0(lam, p) - _argmin_by_derivative(lam, p)), 1e-8)
        if k < 200:
            mu = DiscreteMeasure.from_points(C, [x, y], [lam, 1 - lam])
            vals = [golden_section_min(lambda t, g=g: dirac_to_measure_cost(g(t), mu, p), 0.0, 1.0)[1] for g in paths]
            chk.check("branch_values_agree", abs(vals[0] - vals[1]), 1e-9)
            chk.check("branch_value_vs_closed_form", abs(vals[0] - two_point_min_value(lam, p, math.pi)), 1e-9)
    return chk.report("criterion-1-t0", None, {"n": n, "seed": seed})


def criterion_2() -> ProbeReport:
    chk = Checker()
    subs = []
    cases = [
        (Euclidean(1), (0.0,)),
        (Circle(1.0), 0.0),
        (path_graph(6, 0.05), 2),
    ]
    for space, xc in cases:
        r = probe_w1_null_reach(space, space.point(xc), (1.0, 0.1, 0.01))
        subs.append(_summary(r))
        realized = [w for w in r.witnesses if w["status"] != "isolated"]
        chk.require(f"{space.kind}:some_eps_realized", bool(realized))
        for w in realized:
            chk.require(f"{space.kind}:eps={w['eps']}", w["status"] == "confirmed" and w["multiplicity"] >= 2)
            chk.check(f"{space.kind}:w1_half_distance", abs(w["w1"] - w["distance"] / 2), 1e-12)
    return chk.report("criterion-2-w1-null-reach", None, {}, data={"probes": subs})


def criterion_3() -> ProbeReport:
    chk = Checker()
    subs = []
    C, S = Circle(1.0), Sphere2(1.0)
    pairs = [(C, C.point(0.0), C.point(math.pi)), (S, S.point((0, 0, 1)), S.point((0, 0, -1)))]
    for space, x, y in pairs:
        for p in (2.0, 3.0):
            r = probe_multi_geodesic_null_reach(space, x, y, p, (0.5, 0.9, 0.99))
            subs.append(_summary(r))
            chk.require(f"{space.kind}:p={p}:confirmed", r.verdict is Verdict.CONFIRMED)
            for w in r.witnesses:
                chk.require(f"{space.kind}:p={p}:clusters", w["multiplicity"] >= 2)
                chk.check(f"{space.kind}:p={p}:closed_form", abs(w["w_to_x"] - w["closed_form"]), 1e-9)
    return chk.report("criterion-3-multi-geodesic", None, {}, data={"probes": subs})


def criterion_4(seed: int = 0, n: int = 1000) -> ProbeReport:
    chk = Checker()
    subs = []
    E = Euclidean(2)
    for p in (1.5, 2.0, 3.0):
        r = probe_unique_barycenters(E, p, n, seed, 5)
        subs.append(_summary(r))
        chk.require(f"p={p}:confirmed", r.verdict is Verdict.CONFIRMED)
        if p == 2.0:
            chk.check("mean_agreement", r.slacks.get("mean_agreement", math.inf), 1e-9)
    return chk.report("criterion-4-unique-barycenters", None, {"n": n, "seed": seed}, data={"probes": subs})


def criterion_5(seed: int = 0) -> ProbeReport:
    E = Euclidean(2)
    mu = DiscreteMeasure.from_points(E, [E.point((0, 0)), E.point((1, 0)), E.point((0.2, 0.9))], [0.5, 0.3, 0.2])
    r = submetry_check(mu, 1.0, 200, seed)
    chk = Checker()
    for key in ("lipschitz", "translation_distance", "translation_projection"):
        chk.check(key, r.slacks.get(key, math.inf), 1e-8)
        chk.require(f"{key}:200_samples", r.counts.get(f"{key}:pass", 0) == 200)
    return chk.report("criterion-5-submetry", None, {"seed": seed}, data={"probes": [_summary(r)]})


def criterion_6(seed: int = 0, n: int = 1000) -> ProbeReport:
    rng = np.random.default_rng(seed)
    chk = Checker()
    E = Euclidean(2)
    for _ in range(n):
        p = float(rng.uniform(1.0, 4.0))
        k = int(rng.integers(1, 6))
        mu = DiscreteMeasure.from_points(E, E.sample(rng, k), rng.dirichlet(np.ones(k)))
        x = E.sample(rng, 1)[0]
        wp, _ = wasserstein_p(DiscreteMeasure.dirac(x), mu, p)
        chk.check("power_gauge_equals_wp", abs(orlicz_distance_dirac(x, mu, OrliczCost.power(p)) - wp), 1e-9)
    C = Circle(1.0)
    x, y = C.point(0.0), C.point(math.pi)
    for gauge in (OrliczCost.power(2), OrliczCost.power(3), OrliczCost.exp_gauge(1.5)):
        for lam in (0.5, 0.75, 0.9, 0.99, 0.999):
            mu = DiscreteMeasure.from_points(C, [x, y], [lam, 1 - lam])
            ex, ey = orlicz_endpoint_values(lam, math.pi, gauge)
            chk.check("endpoint_x_formula", abs(orlicz_distance_dirac(x, mu, gauge) - ex), 1e-10)
            chk.check("endpoint_y_formula", abs(orlicz_distance_dirac(y, mu, gauge) - ey), 1e-10)
    s_star = orlicz_two_point_threshold(0.75, 1.0, OrliczCost.power(2))
    ok, val, best = threshold_certified(0.75, 1.0, OrliczCost.power(2))
    chk.check("threshold_value", abs(s_star - 0.5), 1e-12)
    chk.require("threshold_positive", s_star > 0)
    chk.require("threshold_certified", ok)
    return chk.report(
        "criterion-6-orlicz",
        None,
        {"n": n, "seed": seed},
        data={"s_star": s_star, "value_at_0.99_s_star": val, "best_endpoint": best},
    )


def all_partial_matchings(n1: int, n2: int):
    """Every partial matching between index sets of sizes n1 and n2."""
    for k in range(min(n1, n2) + 1):
        for left in itertools.combinations(range(n1), k):
            for right in itertools.permutations(range(n2), k):
                yield PartialMatching.from_pairs(zip(left, right), n1, n2)


def _random_diagram(rng, max_points: int) -> PersistenceDiagram:
    m = int(rng.integers(0, max_points + 1))
    b = rng.integers(0, 6, size=m).astype(float)
    d = b + rng.integers(1, 6, size=m)
    return PersistenceDiagram(tuple(zip(b, d)))


def _random_graph(rng, n: int) -> FiniteGraph:
    edges = [(i, i + 1, float(rng.uniform(0.2, 2.0))) for i in range(n - 1)]
    for i, j in itertools.combinations(range(n), 2):
        if j > i + 1 and rng.random() < 0.3:
            edges.append((i, j, float(rng.uniform(0.2, 2.0))))
    return FiniteGraph(tuple(range(n)), tuple(edges))


def criterion_7(seed: int = 0, n: int = 1000) -> ProbeReport:
    rng = np.random.default_rng(seed)
    chk = Checker()
    for k in range(n):
        D1, D2 = _random_diagram(rng, 5), _random_diagram(rng, 5)
        costs_inf, costs_p = [], []
        p = 1.0 + (k % 3)
        for m in all_partial_matchings(len(D1), len(D2)):
            costs_inf.append(matching_cost(D1, D2, m, math.inf))
            costs_p.append(matching_cost(D1, D2, m, p))
        chk.check("bottleneck_vs_brute_force", abs(bottleneck(D1, D2)[0] - min(costs_inf)), 1e-12)
        chk.check("wp_vs_brute_force", abs(wasserstein_diagram(D1, D2, p)[0] - min(costs_p)), 1e-12)
    subs = []
    for g in range(5):
        G = _random_graph(rng, int(rng.integers(3, 7)))
        verts = [G.vertex(i) for i in range(len(G.vertices))]
        spec = EmbeddingSpec(G, tuple(verts))
        for a, b in itertools.combinations(verts, 2):
            chk.check("graph_isometry", abs(bottleneck(embed(a, spec), embed(b, spec))[0] - G.distance(a, b)), 1e-12)
        r = probe_dgm_null_reach(G, spec, verts[0], (1.0, 2.0))
        subs.append(_summary(r))
        chk.require("graph_midpoint_witness", r.verdict is not Verdict.VIOLATED)
        chk.require("graph_midpoint_realized", any(w["status"] == "confirmed" for w in r.witnesses))
    C = Circle(1.0)
    lm = tuple(C.point(2 * math.pi * k / 64) for k in range(64))
    r = probe_dgm_null_reach(C, EmbeddingSpec(C, lm), lm[0], (2.0, 0.5, 0.1))
    subs.append(_summary(r))
    chk.require("circle_midpoint_witness", r.verdict is Verdict.CONFIRMED)
    return chk.report("criterion-7-diagrams", None, {"n": n, "seed": seed}, data={"probes": subs})


def criterion_8(seed: int = 0) -> ProbeReport:
    chk = Checker()
    e = convexity_probe(Euclidean(2), 2.0, 10_000, seed)
    s = convexity_probe(Sphere2(1.0), 2.0, 1000, seed)
    chk.require("euclidean_convexity", e.counts.get("convexity:violations", 1) == 0)
    chk.require("euclidean_busemann", e.counts.get("busemann:violations", 1) == 0)
    chk.require("sphere_violation_witness", len(s.witnesses) >= 1)
    return chk.report(
        "criterion-8-convexity",
        None,
        {"seed": seed},
        witnesses=s.witnesses[:1],
        data={"probes": [_summary(e), _summary(s)]},
    )


CRITERIA: dict[str, Callable[..., ProbeReport]] = {
    "1": criterion_1,
    "2": criterion_2,
    "3": criterion_3,
    "4": criterion_4,
    "5": criterion_5,
    "6": criterion_6,
    "7": criterion_7,
    "8": criterion_8,
}
SEEDED = {"1", "4", "5", "6", "7", "8"}


def run_criterion(key: str, seed: int = 0) -> ProbeReport:
    fn = CRITERIA[key]
    return fn(seed=seed) if key in SEEDED else fn()


def run_suite(seed: int = 0, workers: int = 1, only: list[str] | None = None) -> list[ProbeReport]:
    keys = only or list(CRITERIA)
    if workers <= 1:
        return [run_criterion(k, seed) for k in keys]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_criterion, keys, [seed] * len(keys)))


def aggregate_csv(reports: list[ProbeReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["probe", "space", "params", "verdict", "slacks"])
    for r in reports:
        slacks = ";".join(f"{k}={v:.17g}" for k, v in sorted(r.slacks.items()))
        w.writerow(
            [
                r.name,
                json.dumps(r.space, sort_keys=True, separators=(",", ":")) if r.space else "",
                json.dumps(r.params, sort_keys=True, separators=(",", ":")),
                r.verdict.value,
                slacks,
            ]
        )
    return buf.getvalue()
