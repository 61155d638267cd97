import json
import math

import numpy as np
import pytest

from reachlab import (
    Circle,
    DiscreteMeasure,
    DomainError,
    EmbeddingSpec,
    Euclidean,
    FiniteGraph,
    FlatTorus,
    OrliczCost,
    PreconditionError,
    Sphere2,
    Verdict,
    dirac_to_measure_cost,
    probe_density_unp,
    probe_dgm_null_reach,
    probe_multi_geodesic_null_reach,
    probe_orlicz_null_reach,
    probe_unique_barycenters,
    probe_w1_null_reach,
    replay,
    run_probe,
)
from reachlab.probes import PROBES
from reachlab.serialize import dumps, loads
from reachlab.spaces import path_graph

CONFIRMED, INCONCLUSIVE = Verdict.CONFIRMED, Verdict.INCONCLUSIVE


# --- W_1 --------------------------------------------------------------------------------


def test_w1_circle_example():
    C = Circle(1.0)
    rep = probe_w1_null_reach(C, C.point(0.0), [0.1])
    assert rep.verdict is CONFIRMED
    rec = rep.witnesses[0]
    assert 0 < rec["distance"] < 0.1
    assert rec["w1"] == pytest.approx(rec["distance"] / 2, abs=1e-15)
    assert rec["multiplicity"] >= 2


def test_w1_line_all_scales():
    E = Euclidean(1)
    rep = probe_w1_null_reach(E, E.point((0,)), [1, 0.1, 0.01])
    assert rep.verdict is CONFIRMED
    assert [r["status"] for r in rep.witnesses] == ["confirmed"] * 3


def test_w1_path_graph_realized_and_isolated_scales():
    # graph probes only move between vertices, so scales below the edge length are isolated
    G = path_graph(4, 0.05)
    rep = probe_w1_null_reach(G, G.vertex(1), [1, 0.1, 0.01])
    assert [r["status"] for r in rep.witnesses] == ["confirmed", "confirmed", "isolated"]
    assert rep.verdict is INCONCLUSIVE
    assert rep.witnesses[0]["w1"] == pytest.approx(0.025)


def test_w1_two_vertex_graph_is_isolated():
    G = FiniteGraph(("a", "b"), ((0, 1, 1.0),))
    rep = probe_w1_null_reach(G, G.vertex(0), [0.5])
    assert rep.verdict is INCONCLUSIVE
    assert rep.witnesses == [{"eps": 0.5, "status": "isolated"}]
    assert rep.notes


def test_dgm_two_point_space_is_isolated():
    G = FiniteGraph(("a", "b"), ((0, 1, 1.0),))
    spec = EmbeddingSpec(G, (G.vertex(0), G.vertex(1)))
    rep = probe_dgm_null_reach(G, spec, G.vertex(0), [0.4])
    assert rep.verdict is INCONCLUSIVE


def test_w1_rejects_bad_eps():
    E = Euclidean(1)
    with pytest.raises(DomainError):
        probe_w1_null_reach(E, E.point((0,)), [0.0])


# --- multi-geodesic ---------------------------------------------------------------------


def test_multi_geodesic_circle():
    C = Circle(1.0)
    rep = probe_multi_geodesic_null_reach(C, C.point(0.0), C.point(math.pi), 2, [0.5, 0.9, 0.99])
    assert rep.verdict is CONFIRMED
    for rec in rep.witnesses:
        assert rec["w_to_x"] == pytest.approx(math.sqrt((1 - rec["lambda"]) * math.pi**2), abs=1e-12)
        assert rec["multiplicity"] == 2


def test_multi_geodesic_sphere_poles():
    S = Sphere2(1.0)
    rep = probe_multi_geodesic_null_reach(S, S.point((0, 0, 1)), S.point((0, 0, -1)), 2, [0.5, 0.9, 0.99])
    assert rep.verdict is CONFIRMED
    assert all(r["multiplicity"] >= 2 for r in rep.witnesses)


def test_multi_geodesic_torus_four_branches():
    T = FlatTorus(2 * math.pi, 2 * math.pi)
    rep = probe_multi_geodesic_null_reach(T, T.point((0, 0)), T.point((math.pi, math.pi)), 3, [0.5, 0.9])
    assert rep.verdict is CONFIRMED
    assert rep.data["n_branches"] == 4
    assert all(r["multiplicity"] == 4 for r in rep.witnesses)


def test_multi_geodesic_needs_two_branches():
    E = Euclidean(2)
    with pytest.raises(PreconditionError):
        probe_multi_geodesic_null_reach(E, E.point((0, 0)), E.point((1, 0)))
    C = Circle(1.0)
    with pytest.raises(DomainError):
        probe_multi_geodesic_null_reach(C, C.point(0.0), C.point(math.pi), 1.0)


def test_multi_geodesic_sweep_is_monotone():
    C = Circle(1.0)
    rep = probe_multi_geodesic_null_reach(C, C.point(0.0), C.point(math.pi), 3)
    vals = [r["w_to_x"] for r in rep.witnesses]
    assert all(b < a for a, b in zip(vals, vals[1:]))


# --- uniqueness and density -------------------------------------------------------------


def test_unique_barycenters_p2():
    rep = probe_unique_barycenters(Euclidean(2), 2.0, 200, rng_seed=1)
    assert rep.verdict is CONFIRMED
    assert rep.counts["measures"] == 200


def test_unique_barycenters_p15_and_line_p3():
    assert probe_unique_barycenters(Euclidean(2), 1.5, 100, rng_seed=2).verdict is CONFIRMED
    assert probe_unique_barycenters(Euclidean(1), 3.0, 100, rng_seed=3).verdict is CONFIRMED


def test_unique_barycenters_only_euclidean():
    with pytest.raises(PreconditionError):
        probe_unique_barycenters(Circle(1.0), 2.0, 10)


def test_density_euclidean():
    E = Euclidean(2)
    mu = DiscreteMeasure.from_points(E, [E.point((-1, 0)), E.point((1, 0))], [0.5, 0.5])
    rep = probe_density_unp(E, mu, E.point((0, 0)))
    assert rep.verdict is CONFIRMED
    assert len(rep.witnesses) == 9


def test_density_circle_from_one_of_two_barycenters():
    C = Circle(1.0)
    mu = DiscreteMeasure.from_points(C, [C.point(0.0), C.point(math.pi)], [0.5, 0.5])
    rep = probe_density_unp(C, mu, C.point(math.pi / 2), 2.0, [0.05, 0.1, 0.2])
    assert rep.verdict is CONFIRMED
    assert rep.data["base_multiplicity"] == 2


def test_density_rejects_non_barycenter():
    E = Euclidean(2)
    mu = DiscreteMeasure.from_points(E, [E.point((-1, 0)), E.point((1, 0))], [0.5, 0.5])
    with pytest.raises(DomainError):
        probe_density_unp(E, mu, E.point((0.5, 0)))


# --- diagrams ---------------------------------------------------------------------------


def test_dgm_circle_64_landmarks():
    C = Circle(1.0)
    spec = EmbeddingSpec(C, tuple(C.point(2 * math.pi * k / 64) for k in range(64)))
    rep = probe_dgm_null_reach(C, spec, C.point(0.0), [0.5, 0.1])
    assert rep.verdict is CONFIRMED
    for rec in rep.witnesses:
        assert rec["w_inf_x"] == pytest.approx(rec["distance"] / 2, abs=1e-12)
        assert rec["closest_landmark_distance"] >= rec["distance"] / 2 - 1e-12


def test_dgm_graph_all_vertices():
    G = FiniteGraph(tuple(range(4)), ((0, 1, 0.3), (1, 2, 1.0), (2, 3, 1.0)))
    spec = EmbeddingSpec(G, tuple(G.vertex(i) for i in range(4)))
    rep = probe_dgm_null_reach(G, spec, G.vertex(0), [0.5])
    assert rep.verdict is CONFIRMED
    assert set(rep.witnesses[0]["nearest_landmarks"]) >= {0, 1}


# --- Orlicz -----------------------------------------------------------------------------


@pytest.mark.parametrize("gauge", [OrliczCost.power(2), OrliczCost.exp_gauge(1.5)], ids=["power2", "exp1.5"])
def test_orlicz_circle(gauge):
    C = Circle(1.0)
    rep = probe_orlicz_null_reach(C, C.point(0.0), C.point(math.pi), gauge, [0.75, 0.9, 0.99])
    assert rep.verdict is CONFIRMED
    ends = [r["closed_form"] for r in rep.witnesses]
    assert all(b < a for a, b in zip(ends, ends[1:]))


def test_orlicz_identity_gauge_inconclusive():
    C = Circle(1.0)
    rep = probe_orlicz_null_reach(C, C.point(0.0), C.point(math.pi), OrliczCost.power(1), [0.75, 0.9])
    assert rep.verdict is INCONCLUSIVE
    assert rep.data["gauge_witness"] is None


# --- registry, replay, consistency ------------------------------------------------------


def test_registry_names():
    assert set(PROBES) == {
        "w1-null-reach",
        "multi-geodesic-null-reach",
        "unique-barycenters",
        "density-unp",
        "dgm-null-reach",
        "orlicz-null-reach",
        "convexity",
        "submetry",
    }
    with pytest.raises(DomainError):
        run_probe("nope", Euclidean(1), {})


def test_missing_parameter():
    with pytest.raises(DomainError):
        run_probe("w1-null-reach", Euclidean(1), {})


def _replay_cases():
    C = Circle(1.0)
    S = Sphere2(1.0)
    E = Euclidean(2)
    spec = EmbeddingSpec(C, tuple(C.point(2 * math.pi * k / 16) for k in range(16)))
    mu = DiscreteMeasure.from_points(E, [E.point((-1, 0)), E.point((1, 0))], [0.5, 0.5])
    return [
        probe_w1_null_reach(C, C.point(0.3), [0.1, 0.01]),
        probe_multi_geodesic_null_reach(S, S.point((0, 0, 1)), S.point((0, 0, -1)), 3, [0.5, 0.9]),
        probe_unique_barycenters(E, 1.5, 20, rng_seed=4),
        probe_density_unp(E, mu, E.point((0, 0)), 2.0, [0.2, 0.7]),
        probe_dgm_null_reach(C, spec, C.point(0.0), [0.5]),
        probe_orlicz_null_reach(C, C.point(0.0), C.point(math.pi), OrliczCost.exp_gauge(1.0), [0.75, 0.9], n_off=20),
    ]


def test_replay_is_identical():
    for rep in _replay_cases():
        assert rep.verdict is CONFIRMED, rep.name
        text = dumps(rep.to_dict())
        again = replay(loads(text))
        assert dumps(again.to_dict()) == text


def test_reported_distances_reevaluate():
    C = Circle(1.0)
    rep = probe_multi_geodesic_null_reach(C, C.point(0.0), C.point(math.pi), 2, [0.6, 0.8])
    for rec in rep.witnesses:
        mu = DiscreteMeasure.from_points(C, [C.point(0.0), C.point(math.pi)], [rec["lambda"], 1 - rec["lambda"]])
        assert abs(dirac_to_measure_cost(C.point(0.0), mu, 2) - rec["w_to_x"]) <= 1e-12
        for m in rec["minimizers"]:
            assert abs(dirac_to_measure_cost(C.point_from_json(m["point"]), mu, 2) - m["value"]) <= 1e-12


def test_report_json_is_plain():
    rep = probe_w1_null_reach(Euclidean(1), Euclidean(1).point((0,)), [0.1])
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["verdict"] == "confirmed"
    assert d["params"]["eps_list"] == [0.1]
