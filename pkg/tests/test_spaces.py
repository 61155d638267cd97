import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import floyd_warshall
from reachlab import (
    Circle,
    DomainError,
    Euclidean,
    FiniteGraph,
    FlatTorus,
    Sphere2,
    convexity_probe,
    space_from_descriptor,
)
from reachlab.spaces import path_graph

PI = math.pi

SPACES = [
    Euclidean(1),
    Euclidean(2),
    Euclidean(3),
    Circle(1.0),
    Circle(2.5),
    Sphere2(1.0),
    Sphere2(0.5, n_branches=4),
    FlatTorus(),
    FlatTorus(1.0, 3.0),
    FiniteGraph(tuple(range(5)), ((0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 0, 1.5), (1, 4, 0.7), (2, 4, 1.1))),
]
IDS = [f"{s.kind}-{k}" for k, s in enumerate(SPACES)]


def test_euclidean_distance_pythagorean():
    E = Euclidean(2)
    assert E.distance(E.point((0, 0)), E.point((3, 4))) == 5.0


def test_circle_antipodal_distance():
    C = Circle(1.0)
    assert C.distance(C.point(0.0), C.point(PI)) == pytest.approx(PI, abs=1e-15)


def test_path_graph_distance_matches_floyd_warshall():
    G = FiniteGraph(("A", "B", "C"), ((0, 1, 1.0), (1, 2, 2.0)))
    assert G.distance(G.vertex(0), G.vertex(2)) == 3.0
    assert np.allclose(G.vertex_distances, floyd_warshall(3, G.edges))


def test_random_graphs_match_floyd_warshall():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        edges = [(i, i + 1, float(rng.uniform(0.1, 3))) for i in range(n - 1)]
        for i in range(n):
            for j in range(i + 2, n):
                if rng.random() < 0.35:
                    edges.append((i, j, float(rng.uniform(0.1, 3))))
        G = FiniteGraph(tuple(range(n)), tuple(edges))
        assert np.allclose(G.vertex_distances, floyd_warshall(n, edges), rtol=0, atol=1e-12)


def test_mismatched_space_is_domain_error():
    C, E = Circle(1.0), Euclidean(1)
    with pytest.raises(DomainError):
        C.distance(C.point(0.0), E.point((0.0,)))


@pytest.mark.parametrize("space", SPACES, ids=IDS)
def test_metric_axioms_on_random_triples(space):
    rng = np.random.default_rng(0)
    n = 10_000
    pts = space.sample(rng, 3 * n)
    X, Y, Z = pts[0::3], pts[1::3], pts[2::3]
    dxy = np.array([space.distance(a, b) for a, b in zip(X, Y)])
    dyx = np.array([space.distance(b, a) for a, b in zip(X, Y)])
    dyz = np.array([space.distance(a, b) for a, b in zip(Y, Z)])
    dxz = np.array([space.distance(a, b) for a, b in zip(X, Z)])
    assert np.all(dxy >= 0)
    assert np.max(np.abs(dxy - dyx)) <= 1e-12
    assert np.max(dxz - dxy - dyz) <= 1e-9
    assert all(space.distance(a, a) <= 1e-12 for a in X[:200])


@pytest.mark.parametrize("space", SPACES, ids=IDS)
def test_geodesics_have_constant_speed(space):
    rng = np.random.default_rng(1)
    pts = space.sample(rng, 200)
    for x, y in zip(pts[0::2], pts[1::2]):
        d = space.distance(x, y)
        if d <= 1e-12:
            continue
        for g in space.minimizing_geodesics(x, y):
            assert g.length == pytest.approx(d, abs=1e-9)
            assert space.distance(g(0.0), x) <= 1e-9
            assert space.distance(g(1.0), y) <= 1e-9
            for s, t in rng.uniform(0, 1, size=(10, 2)):
                assert space.distance(g(s), g(t)) == pytest.approx(abs(s - t) * d, abs=1e-9)


@pytest.mark.parametrize("space", SPACES, ids=IDS)
def test_midpoints_are_equidistant(space):
    rng = np.random.default_rng(2)
    pts = space.sample(rng, 400)
    for x, y in zip(pts[0::2], pts[1::2]):
        d = space.distance(x, y)
        if d <= 1e-12:
            continue
        for br in range(len(space.minimizing_geodesics(x, y))):
            m = space.midpoint(x, y, br)
            assert abs(space.distance(x, m) - space.distance(y, m)) <= 1e-9
            assert abs(space.distance(x, m) - d / 2) <= 1e-9


def test_diameter_finite_except_euclidean():
    for s in SPACES:
        assert math.isfinite(s.diameter()) == (s.kind != "euclidean")
    assert Circle(1.0).diameter() == pytest.approx(PI)
    assert Sphere2(2.0).diameter() == pytest.approx(2 * PI)
    assert FlatTorus().diameter() == pytest.approx(math.hypot(PI, PI))


def test_graph_diameter_against_dense_scan():
    G = SPACES[-1]
    pts = [G.point((u, v, s)) for (u, v), w in G._w.items() for s in np.linspace(0, w, 41)]
    D = G.pairwise(pts, pts)
    assert D.max() <= G.diameter() + 1e-12
    assert D.max() >= G.diameter() - 0.05


def test_circle_antipodal_has_two_geodesics_of_length_pi():
    C = Circle(1.0)
    paths = C.minimizing_geodesics(C.point(0.0), C.point(PI))
    assert len(paths) == 2
    assert all(g.length == pytest.approx(PI) for g in paths)
    assert {round(g(0.5).coords[0], 12) for g in paths} == {round(PI / 2, 12), round(3 * PI / 2, 12)}


def test_circle_midpoint_branches():
    C = Circle(1.0)
    assert C.midpoint(C.point(0.0), C.point(PI), 0).coords[0] == pytest.approx(PI / 2)
    assert C.midpoint(C.point(0.0), C.point(PI), 1).coords[0] == pytest.approx(3 * PI / 2)


def test_euclidean_unique_segment_and_midpoint():
    E = Euclidean(4)
    x, y = E.point((0, 1, 2, 3)), E.point((1, 1, 1, 1))
    assert len(E.minimizing_geodesics(x, y)) == 1
    assert Euclidean(1).midpoint(Euclidean(1).point((0,)), Euclidean(1).point((2,))).coords == (1.0,)


def test_sphere_poles_have_n_branches_meridians():
    for nb in (2, 3, 6):
        S = Sphere2(1.0, n_branches=nb)
        n, s = S.point((0, 0, 1)), S.point((0, 0, -1))
        paths = S.minimizing_geodesics(n, s)
        assert len(paths) == nb
        mids = [S.coords(g(0.5)) for g in paths]
        assert all(abs(m[2]) < 1e-12 for m in mids)
        # equally spaced meridians: neighbouring equator points are 2 pi / nb apart
        ang = sorted(math.atan2(m[1], m[0]) % (2 * PI) for m in mids)
        gaps = np.diff(ang + [ang[0] + 2 * PI])
        assert np.allclose(gaps, 2 * PI / nb)


def test_sphere_near_antipodal_is_unique():
    S = Sphere2(1.0)
    t = 1e-6
    x, y = S.point((0, 0, 1)), S.point((math.sin(t), 0, -math.cos(t)))
    assert len(S.minimizing_geodesics(x, y)) == 1


def test_torus_midpoint_over_deck_translates():
    T = FlatTorus()
    x, y = T.point((0, 0)), T.point((PI, 0))
    paths = T.minimizing_geodesics(x, y)
    assert len(paths) == 2
    mids = sorted(round(T.midpoint(x, y, b).coords[0], 12) for b in range(2))
    assert mids == [round(PI / 2, 12), round(3 * PI / 2, 12)]
    # the quotient metric is the minimum over deck translates
    for b in range(2):
        m = np.array(T.midpoint(x, y, b).coords)
        lifts = [np.hypot(m[0] + 2 * PI * i, m[1] + 2 * PI * j) for i in (-1, 0, 1) for j in (-1, 0, 1)]
        assert min(lifts) == pytest.approx(PI / 2)


def test_torus_corner_pair_has_four_geodesics():
    T = FlatTorus()
    assert len(T.minimizing_geodesics(T.point((0, 0)), T.point((PI, PI)))) == 4


def test_graph_geodesics_enumerate_all_shortest_paths():
    # square with unit sides: two shortest paths between opposite corners
    G = FiniteGraph(tuple(range(4)), ((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)))
    paths = G.minimizing_geodesics(G.vertex(0), G.vertex(2))
    assert len(paths) == 2
    mids = {G.point_to_json(g(0.5)) for g in paths}
    assert mids == {1, 3}


def test_graph_geodesic_count_is_capped():
    # 7 diamonds in series give 2^7 = 128 shortest paths; the enumeration stops at 64
    edges = []
    for k in range(7):
        a, b, c, d = 3 * k, 3 * k + 1, 3 * k + 2, 3 * k + 3
        edges += [(a, b, 1.0), (a, c, 1.0), (b, d, 1.0), (c, d, 1.0)]
    G = FiniteGraph(tuple(range(22)), tuple(edges))
    assert len(G.minimizing_geodesics(G.vertex(0), G.vertex(21))) == 64


def test_same_point_has_no_geodesic():
    C = Circle(1.0)
    with pytest.raises(DomainError):
        C.minimizing_geodesics(C.point(1.0), C.point(1.0))


def test_invalid_branch_rejected():
    C = Circle(1.0)
    with pytest.raises(DomainError):
        C.midpoint(C.point(0.0), C.point(1.0), 1)


def test_canonical_forms():
    assert Circle(1.0).point(-PI / 2).coords[0] == pytest.approx(3 * PI / 2)
    assert Circle(1.0).point(2 * PI).coords[0] == 0.0
    T = FlatTorus(2.0, 3.0)
    assert T.point((-0.5, 7.0)).coords == pytest.approx((1.5, 1.0))
    assert Sphere2(1.0).point((0, 0, 1.0 - 1e-9)).coords[2] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        Sphere2(1.0).point((0, 0, 2.0))


def test_graph_rejects_bad_edges():
    with pytest.raises(DomainError):
        FiniteGraph((0, 1), ((0, 1, 0.0),))
    with pytest.raises(DomainError):
        FiniteGraph((0, 1, 2), ((0, 1, 1.0),))


@pytest.mark.parametrize("space", SPACES, ids=IDS)
def test_descriptor_and_point_json_round_trip(space):
    again = space_from_descriptor(space.descriptor())
    assert again == space
    for q in space.sample(np.random.default_rng(3), 20):
        assert again.distance(again.point_from_json(space.point_to_json(q)), q) <= 1e-12


def test_convexity_euclidean_has_no_violations():
    r = convexity_probe(Euclidean(2), 2.0, 1000, 0)
    assert r.counts["convexity:violations"] == 0
    assert r.counts["busemann:violations"] == 0
    assert r.confirmed


def test_convexity_sphere_reports_witness():
    r = convexity_probe(Sphere2(1.0), 2.0, 1000, 0)
    assert r.counts["convexity:violations"] >= 1
    w = r.witnesses[0]
    assert w["slack"] > 0
    S = Sphere2(1.0)
    x, y, z = (S.point_from_json(q) for q in w["triple"])
    if w["kind"] == "convexity":
        m = S.midpoint(x, y, w["branch"])
        rhs = math.sqrt(0.5 * S.distance(x, z) ** 2 + 0.5 * S.distance(y, z) ** 2)
        assert S.distance(m, z) - rhs == pytest.approx(w["slack"], abs=1e-12)


def test_circle_busemann_triple_by_arithmetic():
    C = Circle(1.0)
    x, y, z = C.point(0.0), C.point(PI - 0.1), C.point(PI / 2)
    r = convexity_probe(C, 2.0, triples=[(x, y, z)])
    # m(x, z) = pi/4, m(x, y) = (pi - 0.1)/2; d(z, y) = pi/2 - 0.1
    lhs = abs(PI / 4 - (PI - 0.1) / 2)
    rhs = (PI / 2 - 0.1) / 2
    assert r.slacks["busemann"] == pytest.approx(lhs - rhs, abs=1e-12)
    assert lhs <= rhs


def test_uniform_convexity_with_supplied_modulus():
    # in the plane, d(m, z)^2 = M_2^2 - d(x, y)^2 / 4, so rho(eps) = 1 - sqrt(1 - eps^2/4) is valid
    rho = lambda e: 1 - math.sqrt(1 - e * e / 4)  # noqa: E731
    r = convexity_probe(Euclidean(2), 2.0, 500, 4, rho=rho, eps=0.5)
    assert r.counts.get("uniform:violations", 0) == 0
    r_bad = convexity_probe(Euclidean(2), 2.0, 500, 4, rho=lambda e: 0.5, eps=0.5)
    assert r_bad.counts["uniform:violations"] > 0


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-10, 10),
    st.floats(-10, 10),
    st.floats(-10, 10),
)
def test_circle_distance_is_wrapped_arc(a, b, r):
    C = Circle(1.0 + abs(r))
    d = C.distance(C.point(a), C.point(b))
    delta = (a - b) % (2 * PI)
    assert d == pytest.approx(C.radius * min(delta, 2 * PI - delta), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_torus_triangle_inequality(c):
    T = FlatTorus(2.0, 3.0)
    x, y, z = T.point(c[0:2]), T.point(c[2:4]), T.point(c[4:6])
    assert T.distance(x, z) <= T.distance(x, y) + T.distance(y, z) + 1e-9


def test_path_graph_helper():
    G = path_graph(4, 0.5)
    assert G.distance(G.vertex(0), G.vertex(3)) == pytest.approx(1.5)
