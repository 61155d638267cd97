import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import golden, two_point_argmin
from reachlab import (
    Circle,
    DiscreteMeasure,
    DomainError,
    Euclidean,
    FiniteGraph,
    FlatTorus,
    ProjectConfig,
    Sphere2,
    Verdict,
    dirac_to_measure_cost,
    project,
    submetry_check,
    two_point_min_value,
    two_point_t0,
)
from reachlab.spaces import path_graph


def two_atoms(space, x, y, lam):
    return DiscreteMeasure.from_points(space, [x, y], [lam, 1 - lam])


# --- closed form ------------------------------------------------------------------------


def test_t0_symmetric():
    for p in (1.1, 2.0, 3.0, 7.5):
        assert two_point_t0(0.5, p) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("lam,p", [(0.75, 2.0), (0.9, 3.0)])
def test_t0_matches_golden_section(lam, p):
    t, _ = golden(lambda t: lam * t**p + (1 - lam) * (1 - t) ** p, 0.0, 1.0)
    assert abs(two_point_t0(lam, p) - t) <= 1e-8
    assert abs(two_point_t0(lam, p) - two_point_argmin(lam, p)) <= 1e-10


def test_t0_frozen_values():
    # values frozen from the derivative-bisection oracle
    assert two_point_t0(0.75, 2.0) == pytest.approx(0.25, abs=1e-12)
    assert two_point_t0(0.9, 3.0) == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(1.01, 5.0))
def test_t0_is_stationary(lam, p):
    t = two_point_t0(lam, p)
    assert abs(t - two_point_argmin(lam, p)) <= 1e-8
    # extreme weights with p near 1 push t0 within one ulp of an endpoint
    assert 0 <= t <= 1


def test_min_value_examples():
    assert two_point_min_value(0.5, 2.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert two_point_min_value(0.75, 2.0, 1.0) == pytest.approx(math.sqrt(3 / 16), abs=1e-14)
    E = Euclidean(1)
    mu = two_atoms(E, E.point((0,)), E.point((1,)), 0.75)
    assert dirac_to_measure_cost(E.point((0.25,)), mu, 2) == pytest.approx(math.sqrt(3 / 16), abs=1e-14)


def test_min_value_equals_objective_at_t0():
    rng = np.random.default_rng(1)
    for _ in range(500):
        lam, p, d = rng.uniform(0.01, 0.99), rng.uniform(1.05, 5), rng.uniform(0.1, 3)
        t = two_point_argmin(lam, p)
        direct = (lam * (t * d) ** p + (1 - lam) * ((1 - t) * d) ** p) ** (1 / p)
        assert two_point_min_value(lam, p, d) == pytest.approx(direct, rel=1e-10)


def test_min_value_below_endpoints():
    rng = np.random.default_rng(2)
    for _ in range(100):
        lam, p, d = rng.uniform(0.01, 0.99), rng.uniform(1.05, 5), rng.uniform(0.1, 3)
        v = two_point_min_value(lam, p, d)
        assert v <= min(((1 - lam) * d**p) ** (1 / p), (lam * d**p) ** (1 / p)) + 1e-15


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.2, 1.5])
def test_degenerate_lambda(lam):
    with pytest.raises(DomainError):
        two_point_t0(lam, 2.0)
    with pytest.raises(DomainError):
        two_point_min_value(lam, 2.0, 1.0)


def test_closed_form_needs_p_above_one():
    with pytest.raises(DomainError):
        two_point_t0(0.5, 1.0)


def test_contraction_as_lambda_grows():
    C = Circle(1.0)
    x, y = C.point(0.0), C.point(2.0)
    prev = math.inf
    for lam in (0.5, 0.75, 0.9, 0.99, 0.999, 0.9999):
        v = dirac_to_measure_cost(x, two_atoms(C, x, y, lam), 3.0)
        assert v == pytest.approx(((1 - lam) * 2.0**3) ** (1 / 3), rel=1e-13)
        assert v < prev
        prev = v


# --- project ----------------------------------------------------------------------------


def test_euclidean_mean_example():
    E = Euclidean(2)
    mu = two_atoms(E, E.point((0, 0)), E.point((2, 0)), 0.5)
    r = project(mu, 2)
    assert r.multiplicity == 1
    assert np.allclose(r.points[0].coords, (1, 0), atol=1e-15)
    assert r.global_value == pytest.approx(1.0)


def test_circle_antipodal_two_minimizers():
    C = Circle(1.0)
    mu = two_atoms(C, C.point(0.0), C.point(math.pi), 0.5)
    r = project(mu, 2)
    assert r.multiplicity == 2
    assert r.method == "closed_form_two_point"
    # dense scan oracle at resolution 1e-5
    grid = np.arange(0, 2 * math.pi, 1e-5)
    vals = np.array([dirac_to_measure_cost(C.point(t), mu, 2) for t in grid[::50]])
    coarse = grid[::50][vals <= vals.min() + 1e-6]
    found = sorted(float(q.coords[0]) % (2 * math.pi) for q in r.points)
    assert found == pytest.approx([math.pi / 2, 3 * math.pi / 2], abs=1e-12)
    for f in found:
        assert np.min(np.abs(coarse - f)) <= 5e-4
    assert r.global_value == pytest.approx(vals.min(), abs=1e-8)


def test_circle_grid_refine_agrees_with_closed_form():
    C = Circle(1.0)
    for lam in (0.5, 0.75, 0.9, 0.99):
        for p in (2.0, 3.0):
            mu = two_atoms(C, C.point(0.0), C.point(math.pi), lam)
            a = project(mu, p)
            b = project(mu, p, ProjectConfig(force_method="grid_refine"))
            assert a.multiplicity == b.multiplicity == 2
            assert abs(a.global_value - b.global_value) <= 1e-9
            for q in a.points:
                assert min(C.distance(q, s) for s in b.points) <= 1e-6


def test_w1_flat_minimum():
    E = Euclidean(1)
    mu = two_atoms(E, E.point((0,)), E.point((1,)), 0.5)
    r = project(mu, 1)
    assert r.flat
    assert sorted(q.coords[0] for q in r.points) == [0.0, 0.5, 1.0]
    assert r.global_value == pytest.approx(0.5)


def test_w1_unequal_weights_picks_heavy_atom():
    E = Euclidean(1)
    mu = two_atoms(E, E.point((0,)), E.point((1,)), 0.7)
    r = project(mu, 1)
    assert r.multiplicity == 1 and not r.flat
    assert r.points[0].coords[0] == 0.0
    assert r.global_value == pytest.approx(0.3)


def test_two_atom_minimizers_lie_on_geodesics():
    rng = np.random.default_rng(3)
    for space in (Euclidean(2), Circle(1.0), Sphere2(1.0), FlatTorus(1.0, 1.0)):
        for _ in range(30):
            x, y = space.sample(rng, 2)
            lam, p = rng.uniform(0.05, 0.95), rng.uniform(1.2, 4)
            r = project(two_atoms(space, x, y, lam), p)
            d = space.distance(x, y)
            for q in r.points:
                assert abs(space.distance(x, q) + space.distance(q, y) - d) <= 1e-7


def test_branch_values_agree_on_sphere_poles():
    S = Sphere2(1.0, n_branches=6)
    mu = two_atoms(S, S.point((0, 0, 1)), S.point((0, 0, -1)), 0.9)
    r = project(mu, 2)
    assert r.multiplicity == 6
    vals = [v for _, v in r.minimizers]
    assert max(vals) - min(vals) <= 1e-9


def test_minimizer_values_within_window():
    rng = np.random.default_rng(4)
    C = Circle(1.0)
    for _ in range(20):
        k = int(rng.integers(3, 6))
        mu = DiscreteMeasure.from_points(C, C.sample(rng, k), rng.dirichlet(np.ones(k)))
        r = project(mu, 2)
        for q, v in r.minimizers:
            assert v <= r.global_value + 1e-7
            assert v == pytest.approx(dirac_to_measure_cost(q, mu, 2), abs=1e-12)
        for i, a in enumerate(r.points):
            for b in r.points[i + 1 :]:
                assert C.distance(a, b) > 1e-4


def test_circle_grid_refine_against_dense_scan():
    rng = np.random.default_rng(5)
    C = Circle(1.0)
    grid = np.linspace(0, 2 * math.pi, 20001)
    for _ in range(10):
        k = int(rng.integers(3, 6))
        mu = DiscreteMeasure.from_points(C, C.sample(rng, k), rng.dirichlet(np.ones(k)))
        p = float(rng.choice([1.5, 2.0, 3.0]))
        r = project(mu, p)
        scan = min(dirac_to_measure_cost(C.point(t), mu, p) for t in grid)
        assert r.global_value <= scan + 1e-12
        assert r.global_value >= scan - 1e-3


def test_euclidean_uniqueness():
    rng = np.random.default_rng(6)
    E = Euclidean(2)
    for p in (1.5, 2.0, 3.0):
        for _ in range(40):
            k = int(rng.integers(1, 6))
            mu = DiscreteMeasure.from_points(E, E.sample(rng, k), rng.dirichlet(np.ones(k)))
            assert project(mu, p).multiplicity == 1


def test_euclidean_gradient_matches_mean_at_p2():
    rng = np.random.default_rng(7)
    E = Euclidean(2)
    for _ in range(20):
        k = int(rng.integers(3, 6))
        mu = DiscreteMeasure.from_points(E, E.sample(rng, k), rng.dirichlet(np.ones(k)))
        a = project(mu, 2)
        b = project(mu, 2, ProjectConfig(force_method="grid_refine"))
        assert b.multiplicity == 1
        assert E.distance(a.points[0], b.points[0]) <= 1e-9


def _graph_scan(G, mu, p, n=4000):
    best = min(dirac_to_measure_cost(G.vertex(v), mu, p) for v in range(len(G.vertices)))
    for (i, j), w in G._w.items():
        for s in np.linspace(0, w, n)[1:-1]:
            best = min(best, dirac_to_measure_cost(G.point((i, j, float(s))), mu, p))
    return best


def test_graph_vertex_enumeration_against_scan():
    rng = np.random.default_rng(8)
    for _ in range(6):
        n = int(rng.integers(3, 6))
        edges = [(i, i + 1, float(rng.uniform(0.5, 2))) for i in range(n - 1)]
        edges.append((0, n - 1, float(rng.uniform(0.5, 2))))
        G = FiniteGraph(tuple(range(n)), tuple(edges))
        k = int(rng.integers(2, 4))
        mu = DiscreteMeasure.from_points(G, G.sample(rng, k), rng.dirichlet(np.ones(k)))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        r = project(mu, p, ProjectConfig(force_method="vertex_enumeration"))
        scan = _graph_scan(G, mu, p)
        assert r.global_value <= scan + 1e-12
        assert r.global_value >= scan - 1e-3


def test_path_graph_w1_is_flat():
    G = path_graph(3)
    mu = two_atoms(G, G.vertex(0), G.vertex(2), 0.5)
    r = project(mu, 1, ProjectConfig(force_method="vertex_enumeration"))
    assert r.flat
    assert r.global_value == pytest.approx(1.0)


def test_empty_and_bad_configs():
    with pytest.raises(DomainError):
        ProjectConfig(tol_mult=0)
    with pytest.raises(DomainError):
        ProjectConfig(force_method="newton")
    E = Euclidean(2)
    mu = DiscreteMeasure.dirac(E.point((0, 0)))
    with pytest.raises(DomainError):
        project(mu, 0.5)
    C = Circle(1.0)
    with pytest.raises(DomainError):
        project(DiscreteMeasure.dirac(C.point(0.0)), 2, ProjectConfig(force_method="euclidean_mean"))


def test_result_json_shape():
    E = Euclidean(2)
    r = project(two_atoms(E, E.point((0, 0)), E.point((2, 0)), 0.5), 2)
    d = r.to_dict()
    assert set(d) == {"global_value", "minimizers", "multiplicity", "method", "flags"}
    assert d["minimizers"][0]["point"] == [1.0, 0.0]


# --- submetry ---------------------------------------------------------------------------


def test_submetry_dirac_translation():
    E = Euclidean(1)
    mu = DiscreteMeasure.dirac(E.point((0,)))
    shifted = DiscreteMeasure.dirac(E.point((0.7,)))
    assert dirac_to_measure_cost(E.point((0,)), shifted, 2) == pytest.approx(0.7)
    assert project(shifted, 2).points[0].coords[0] == pytest.approx(0.7)
    rep = submetry_check(mu, 1.0, n_samples=50, rng_seed=1)
    assert rep.verdict is Verdict.CONFIRMED


def test_submetry_planar_three_atoms():
    E = Euclidean(2)
    mu = DiscreteMeasure.from_points(E, [E.point((0, 0)), E.point((1, 0)), E.point((0, 2))], [0.2, 0.5, 0.3])
    rep = submetry_check(mu, 0.5, n_samples=200, rng_seed=3)
    assert rep.verdict is Verdict.CONFIRMED
    assert not any(k.endswith(":fail") for k in rep.counts)
    assert rep.counts["lipschitz:pass"] == 200
    assert rep.counts["translation_projection:pass"] == 200
    hist = rep.data["lipschitz_slack_histogram"]
    assert sum(hist["counts"]) == 200
    assert max(rep.slacks.values()) <= 1e-8


def test_submetry_rejects_other_spaces():
    C = Circle(1.0)
    with pytest.raises(DomainError):
        submetry_check(DiscreteMeasure.dirac(C.point(0.0)), 1.0)
    E = Euclidean(2)
    with pytest.raises(DomainError):
        submetry_check(DiscreteMeasure.dirac(E.point((0, 0))), 1.0, p=3.0)
    with pytest.raises(DomainError):
        submetry_check(DiscreteMeasure.dirac(E.point((0, 0))), 0.0)


def test_closed_form_near_p_one():
    # the W_1 limit: the heavier atom, at distance min(lam, 1 - lam) * d
    for p in (1 + 1e-3, 1 + 1e-6, 1 + 1e-12):
        for lam in (0.1, 0.3, 0.7):
            t = two_point_t0(lam, p)
            v = two_point_min_value(lam, p, 2.0)
            assert math.isfinite(t) and math.isfinite(v)
            assert abs(t - two_point_argmin(lam, p)) <= 1e-8
            assert v == pytest.approx(2.0 * min(lam, 1 - lam), rel=5e-3)
