"""Geodesic metric spaces used as test beds: Euclidean space, circle, round sphere,
flat torus and metric graphs.

Points are immutable and carry a reference to the space they live in, so mixing
points of different spaces is caught at the boundary of every operation.
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from reachlab.errors import DomainError
from reachlab.report import Checker, ProbeReport

TWO_PI = 2.0 * math.pi
# relative closeness to the diameter at which two points count as antipodal
ANTIPODAL_RTOL = 1e-9
SAME_POINT_TOL = 1e-12
MAX_GRAPH_PATHS = 64


@dataclass(frozen=True)
class Point:
    space: "MetricSpace" = field(repr=False)
    coords: tuple

    def __repr__(self) -> str:
        return f"Point({self.space.kind}, {self.coords})"


@dataclass(frozen=True)
class GeodesicPath:
    start: Point
    end: Point
    length: float
    branch_id: int
    at: Callable[[float], Point] = field(repr=False, compare=False)

    def __call__(self, t: float) -> Point:
        if not -1e-12 <= t <= 1 + 1e-12:
            raise DomainError(f"geodesic parameter {t} outside [0, 1]")
        return self.at(min(max(t, 0.0), 1.0))


class MetricSpace(ABC):
    kind: ClassVar[str]
    intrinsic_dim: ClassVar[int]

    # -- points -----------------------------------------------------------
    def point(self, coords: Any) -> Point:
        return Point(self, self._canon(coords))

    @abstractmethod
    def _canon(self, coords: Any) -> tuple: ...

    def _check(self, x: Point) -> None:
        if not isinstance(x, Point):
            raise DomainError(f"expected a Point, got {type(x).__name__}")
        if x.space is not self and x.space != self:
            raise DomainError(f"point of {x.space.kind} used in {self.kind}")

    def coords(self, x: Point) -> np.ndarray:
        self._check(x)
        return np.asarray(x.coords, dtype=float)

    def coords_array(self, xs: Sequence[Point]) -> np.ndarray:
        return np.array([self.coords(x) for x in xs], dtype=float).reshape(len(xs), -1)

    # -- metric -------------------------------------------------------------
    def distance(self, x: Point, y: Point) -> float:
        return float(self._dist(self.coords(x), self.coords(y)))

    @abstractmethod
    def _dist(self, a: np.ndarray, b: np.ndarray) -> float: ...

    def pairwise(self, xs: Sequence[Point], ys: Sequence[Point]) -> np.ndarray:
        return self._pairwise(self.coords_array(xs), self.coords_array(ys))

    def _pairwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        out = np.empty((len(A), len(B)))
        for i, a in enumerate(A):
            for j, b in enumerate(B):
                out[i, j] = self._dist(a, b)
        return out

    @abstractmethod
    def diameter(self) -> float: ...

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.diameter())

    # -- geodesics ----------------------------------------------------------
    def minimizing_geodesics(self, x: Point, y: Point) -> list[GeodesicPath]:
        self._check(x)
        self._check(y)
        if self.distance(x, y) <= SAME_POINT_TOL:
            raise DomainError("minimizing_geodesics needs x != y")
        return self._geodesics(x, y)

    @abstractmethod
    def _geodesics(self, x: Point, y: Point) -> list[GeodesicPath]: ...

    def midpoint(self, x: Point, y: Point, branch: int = 0) -> Point:
        self._check(x)
        self._check(y)
        if self.distance(x, y) <= SAME_POINT_TOL:
            if branch != 0:
                raise DomainError(f"invalid branch {branch} for coincident points")
            return x
        paths = self._geodesics(x, y)
        if not 0 <= branch < len(paths):
            raise DomainError(f"invalid branch {branch}; {len(paths)} minimizing geodesics")
        return paths[branch](0.5)

    def is_antipodal(self, x: Point, y: Point) -> bool:
        diam = self.diameter()
        return math.isfinite(diam) and self.distance(x, y) >= (1 - ANTIPODAL_RTOL) * diam

    # -- sampling -------------------------------------------------------------
    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int) -> list[Point]: ...

    @abstractmethod
    def sample_near(self, x: Point, eps: float) -> Point | None:
        """A point y with 0 < d(x, y) < eps, or None if the sampler has none."""

    # -- serialization ----------------------------------------------------------
    @abstractmethod
    def descriptor(self) -> dict: ...

    def point_to_json(self, x: Point) -> Any:
        self._check(x)
        return [float(c) for c in x.coords]

    def point_from_json(self, obj: Any) -> Point:
        return self.point(obj)

    # -- hooks used by the barycenter solver (continuous spaces only) ------------
    def _seed_grid(self, k: int, Y: np.ndarray) -> tuple[np.ndarray, tuple[bool, ...]]:
        raise NotImplementedError

    def _objective(self, base: np.ndarray, Y: np.ndarray, w: np.ndarray, p: float):
        raise NotImplementedError

    def _chart_unit(self) -> float:
        """Space distance covered by a unit step of the local chart near its base point."""
        return 1.0


def _power(d: np.ndarray | float, p: float):
    """d**p for d >= 0 computed as exp(p log d) with d == 0 mapped to 0."""
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    pos = d > 0
    out[pos] = np.exp(p * np.log(d[pos]))
    return out if out.ndim else float(out)


def _wrap(delta: np.ndarray | float, period: float):
    """Signed representative of delta modulo period in [-period/2, period/2)."""
    return (np.asarray(delta) + period / 2) % period - period / 2


def _grad_weights(d: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    """w * p * d**(p-1) with the p == 1, d == 0 subgradient taken as 0."""
    out = np.zeros_like(d)
    pos = d > 0
    out[pos] = w[pos] * p * np.exp((p - 1) * np.log(d[pos]))
    return out


# ---------------------------------------------------------------------------
# Euclidean space
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Euclidean(MetricSpace):
    n: int = 2
    kind: ClassVar[str] = "euclidean"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"euclidean dimension must be a positive integer, got {self.n}")

    @property
    def intrinsic_dim(self) -> int:  # type: ignore[override]
        return self.n

    def _canon(self, coords) -> tuple:
        c = np.atleast_1d(np.asarray(coords, dtype=float))
        if c.shape != (self.n,) or not np.all(np.isfinite(c)):
            raise DomainError(f"euclidean({self.n}) point needs {self.n} finite coordinates, got {coords!r}")
        return tuple(float(v) for v in c)

    def _dist(self, a, b) -> float:
        return math.sqrt(float(np.sum((a - b) ** 2)))

    def _pairwise(self, A, B):
        return np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(-1))

    def diameter(self) -> float:
        return math.inf

    def _geodesics(self, x, y):
        a, b = self.coords(x), self.coords(y)
        return [GeodesicPath(x, y, self._dist(a, b), 0, lambda t: self.point((1 - t) * a + t * b))]

    def sample(self, rng, n):
        return [self.point(c) for c in rng.standard_normal((n, self.n))]

    def sample_near(self, x, eps):
        c = self.coords(x).copy()
        c[0] += eps / 2
        return self.point(c)

    def descriptor(self) -> dict:
        return {"kind": "euclidean", "n": self.n}

    def point_to_json(self, x):
        self._check(x)
        return [float(v) for v in x.coords]

    def _seed_grid(self, k, Y):
        if self.n > 2:
            return np.empty((0, self.n)), ()
        lo, hi = Y.min(axis=0), Y.max(axis=0)
        axes = [np.linspace(lo[i], hi[i], k) if hi[i] > lo[i] else np.array([lo[i]]) for i in range(self.n)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return mesh, (False,) * self.n

    def _objective(self, base, Y, w, p):
        def fg(v):
            diff = (base + v)[None, :] - Y
            d = np.sqrt((diff**2).sum(-1))
            f = float(w @ _power(d, p))
            gw = _grad_weights(d, w, p)
            safe = np.where(d > 0, d, 1.0)
            g = ((gw / safe)[:, None] * diff).sum(0)
            return f, g

        return fg, (lambda v: base + v), self.n


# ---------------------------------------------------------------------------
# Circle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circle(MetricSpace):
    radius: float = 1.0
    kind: ClassVar[str] = "circle"
    intrinsic_dim: ClassVar[int] = 1

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("circle radius must be positive")

    def _canon(self, coords) -> tuple:
        theta = np.asarray(coords, dtype=float).reshape(-1)
        if theta.shape != (1,) or not np.isfinite(theta[0]):
            raise DomainError(f"circle point is a single angle, got {coords!r}")
        t = float(theta[0]) % TWO_PI
        if t >= TWO_PI:
            t = 0.0
        return (t,)

    def _arc(self, a, b):
        delta = np.abs(_wrap(np.asarray(b) - np.asarray(a), TWO_PI))
        return np.minimum(delta, TWO_PI - delta)

    def _dist(self, a, b) -> float:
        return float(self.radius * self._arc(a[0], b[0]))

    def _pairwise(self, A, B):
        return self.radius * self._arc(A[:, 0][:, None], B[:, 0][None, :])

    def diameter(self) -> float:
        return math.pi * self.radius

    def _geodesics(self, x, y):
        a, b = x.coords[0], y.coords[0]
        if self.is_antipodal(x, y):
            ccw = (b - a) % TWO_PI
            deltas = [ccw, ccw - TWO_PI]
        else:
            deltas = [float(_wrap(b - a, TWO_PI))]
        return [
            GeodesicPath(x, y, abs(dl) * self.radius, k, lambda t, dl=dl: self.point(a + t * dl))
            for k, dl in enumerate(deltas)
        ]

    def sample(self, rng, n):
        return [self.point(t) for t in rng.uniform(0, TWO_PI, n)]

    def sample_near(self, x, eps):
        h = min(eps / 2, self.diameter() / 2)
        return self.point(x.coords[0] + h / self.radius)

    def descriptor(self) -> dict:
        return {"kind": "circle", "radius": self.radius}

    def point_to_json(self, x):
        self._check(x)
        return float(x.coords[0])

    def _seed_grid(self, k, Y):
        return (np.arange(k) * TWO_PI / k)[:, None], (True,)

    def _objective(self, base, Y, w, p):
        r = self.radius

        def fg(v):
            delta = _wrap(base[0] + v[0] - Y[:, 0], TWO_PI)
            d = r * np.abs(delta)
            f = float(w @ _power(d, p))
            g = float((_grad_weights(d, w, p) * r * np.sign(delta)).sum())
            return f, np.array([g])

        return fg, (lambda v: np.array([(base[0] + v[0]) % TWO_PI])), 1


# ---------------------------------------------------------------------------
# Round 2-sphere
# ---------------------------------------------------------------------------


def _orthonormal_frame(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(a)))] = 1.0
    e1 = axis - (axis @ a) * a
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(a, e1)


@dataclass(frozen=True)
class Sphere2(MetricSpace):
    radius: float = 1.0
    n_branches: int = 2
    kind: ClassVar[str] = "sphere2"
    intrinsic_dim: ClassVar[int] = 2

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("sphere radius must be positive")
        if int(self.n_branches) != self.n_branches or self.n_branches < 2:
            raise DomainError("n_branches must be an integer >= 2")

    def _canon(self, coords) -> tuple:
        c = np.asarray(coords, dtype=float).reshape(-1)
        if c.shape != (3,) or not np.all(np.isfinite(c)):
            raise DomainError(f"sphere2 point is a unit 3-vector, got {coords!r}")
        nrm = np.linalg.norm(c)
        if abs(nrm - 1) > 1e-6:
            raise DomainError(f"sphere2 point must have unit norm, got norm {nrm}")
        return tuple(float(v) for v in c / nrm)

    def _angle(self, a, b):
        return math.atan2(float(np.linalg.norm(np.cross(a, b))), float(a @ b))

    def _dist(self, a, b) -> float:
        return self.radius * self._angle(a, b)

    def _pairwise(self, A, B):
        cross = np.linalg.norm(np.cross(A[:, None, :], B[None, :, :]), axis=-1)
        dot = A @ B.T
        return self.radius * np.arctan2(cross, dot)

    def diameter(self) -> float:
        return math.pi * self.radius

    def _geodesics(self, x, y):
        a, b = self.coords(x), self.coords(y)
        theta = self._angle(a, b)
        if self.is_antipodal(x, y):
            e1, e2 = _orthonormal_frame(a)
            paths = []
            for k in range(self.n_branches):
                phi = TWO_PI * k / self.n_branches
                u = math.cos(phi) * e1 + math.sin(phi) * e2

                def at(t, u=u):
                    if t == 1.0:
                        return y
                    return self.point(math.cos(math.pi * t) * a + math.sin(math.pi * t) * u)

                paths.append(GeodesicPath(x, y, math.pi * self.radius, k, at))
            return paths
        s = math.sin(theta)

        def slerp(t):
            c = (math.sin((1 - t) * theta) * a + math.sin(t * theta) * b) / s
            return self.point(c / np.linalg.norm(c))

        return [GeodesicPath(x, y, theta * self.radius, 0, slerp)]

    def sample(self, rng, n):
        v = rng.standard_normal((n, 3))
        return [self.point(c / np.linalg.norm(c)) for c in v]

    def sample_near(self, x, eps):
        a = self.coords(x)
        e1, _ = _orthonormal_frame(a)
        ang = min(eps / 2, self.diameter() / 2) / self.radius
        return self.point(math.cos(ang) * a + math.sin(ang) * e1)

    def descriptor(self) -> dict:
        return {"kind": "sphere2", "radius": self.radius, "n_branches": self.n_branches}

    def _chart_unit(self) -> float:
        return self.radius

    def _seed_grid(self, k, Y):
        colat = math.pi * (np.arange(k) + 0.5) / k
        lon = TWO_PI * np.arange(k) / k
        C, L = np.meshgrid(colat, lon, indexing="ij")
        pts = np.stack([np.sin(C) * np.cos(L), np.sin(C) * np.sin(L), np.cos(C)], axis=-1)
        return pts, (False, True)

    def _objective(self, base, Y, w, p):
        # chart v -> normalize(base + E v); isometric to first order at v = 0
        e1, e2 = _orthonormal_frame(base)
        E = np.stack([e1, e2], axis=1)
        R = self.radius

        def to_coords(v):
            u = base + E @ v
            return u / np.linalg.norm(u)

        def fg(v):
            u = base + E @ v
            nu = np.linalg.norm(u)
            a = u / nu
            cross = np.linalg.norm(np.cross(a[None, :], Y), axis=-1)
            dot = Y @ a
            ang = np.arctan2(cross, dot)
            d = R * ang
            f = float(w @ _power(d, p))
            # unit tangent at a pointing to each atom; undefined at the atom and its antipode
            tang = Y - dot[:, None] * a[None, :]
            tn = np.linalg.norm(tang, axis=-1)
            ok = tn > 1e-300
            what = np.zeros_like(tang)
            what[ok] = tang[ok] / tn[ok, None]
            gw = _grad_weights(d, w, p)
            grad_u = -(R / nu) * (gw[:, None] * what).sum(0)
            return f, E.T @ grad_u

        return fg, to_coords, 2


# ---------------------------------------------------------------------------
# Flat torus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlatTorus(MetricSpace):
    a: float = TWO_PI
    b: float = TWO_PI
    kind: ClassVar[str] = "flat_torus"
    intrinsic_dim: ClassVar[int] = 2

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("torus periods must be positive")

    @property
    def periods(self) -> np.ndarray:
        return np.array([self.a, self.b])

    def _canon(self, coords) -> tuple:
        c = np.asarray(coords, dtype=float).reshape(-1)
        if c.shape != (2,) or not np.all(np.isfinite(c)):
            raise DomainError(f"flat_torus point is a pair of angles, got {coords!r}")
        c = c % self.periods
        c = np.where(c >= self.periods, 0.0, c)
        return (float(c[0]), float(c[1]))

    def _dist(self, a, b) -> float:
        d = _wrap(b - a, self.periods)
        return math.hypot(float(d[0]), float(d[1]))

    def _pairwise(self, A, B):
        d = _wrap(B[None, :, :] - A[:, None, :], self.periods)
        return np.sqrt((d**2).sum(-1))

    def diameter(self) -> float:
        return math.hypot(self.a / 2, self.b / 2)

    def _geodesics(self, x, y):
        a, b = self.coords(x), self.coords(y)
        options = []
        for i, P in enumerate(self.periods):
            fwd = (b[i] - a[i]) % P
            delta = float(_wrap(b[i] - a[i], P))
            if abs(delta) >= (1 - ANTIPODAL_RTOL) * P / 2:
                options.append([fwd, fwd - P])
            else:
                options.append([delta])
        paths = []
        for k, (d0, d1) in enumerate(itertools.product(*options)):
            dv = np.array([d0, d1])
            paths.append(
                GeodesicPath(x, y, math.hypot(d0, d1), k, lambda t, dv=dv: self.point(a + t * dv))
            )
        return paths

    def sample(self, rng, n):
        return [self.point(c) for c in rng.uniform(0, 1, (n, 2)) * self.periods]

    def sample_near(self, x, eps):
        h = min(eps / 2, min(self.a, self.b) / 4)
        return self.point(self.coords(x) + np.array([h, 0.0]))

    def descriptor(self) -> dict:
        return {"kind": "flat_torus", "a": self.a, "b": self.b}

    def _seed_grid(self, k, Y):
        u = np.arange(k) / k
        U, V = np.meshgrid(u * self.a, u * self.b, indexing="ij")
        return np.stack([U, V], axis=-1), (True, True)

    def _objective(self, base, Y, w, p):
        P = self.periods

        def fg(v):
            diff = _wrap((base + v)[None, :] - Y, P)
            d = np.sqrt((diff**2).sum(-1))
            f = float(w @ _power(d, p))
            gw = _grad_weights(d, w, p)
            safe = np.where(d > 0, d, 1.0)
            return f, ((gw / safe)[:, None] * diff).sum(0)

        return fg, (lambda v: (base + v) % P), 2


# ---------------------------------------------------------------------------
# Metric graph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteGraph(MetricSpace):
    """Metric graph: vertices plus points in the interior of edges.

    A point is ``(u, u, 0.0)`` for vertex ``u`` or ``(u, v, s)`` with ``u < v``
    for the point at arclength ``s`` from ``u`` on edge ``{u, v}``.  The
    accumulation-point sampler only ever proposes vertices, so the graph
    behaves as a discrete space in the reach probes.
    """

    vertices: tuple = ()
    edges: tuple = ()
    kind: ClassVar[str] = "finite_graph"
    intrinsic_dim: ClassVar[int] = 1
    _D: np.ndarray = field(default=None, compare=False, repr=False, hash=False)
    _w: dict = field(default=None, compare=False, repr=False, hash=False)
    _adj: tuple = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        n = len(self.vertices)
        if n == 0:
            raise DomainError("finite_graph needs at least one vertex")
        edges = tuple((int(i), int(j), float(w)) for i, j, w in self.edges)
        weights: dict[tuple[int, int], float] = {}
        for i, j, w in edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise DomainError(f"invalid edge ({i}, {j})")
            if not (w > 0 and math.isfinite(w)):
                raise DomainError(f"edge ({i}, {j}) weight must be positive, got {w}")
            key = (min(i, j), max(i, j))
            if key in weights:
                raise DomainError(f"duplicate edge {key}")
            weights[key] = w
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_w", weights)
        adj: list[list[int]] = [[] for _ in range(n)]
        for i, j in weights:
            adj[i].append(j)
            adj[j].append(i)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))
        D = self._shortest_paths(weights)
        if not np.all(np.isfinite(D)):
            raise DomainError("finite_graph must be connected")
        object.__setattr__(self, "_D", D)

    def _shortest_paths(self, weights) -> np.ndarray:
        n = len(self.vertices)
        if not weights:
            return np.zeros((n, n)) if n == 1 else np.full((n, n), np.inf)
        rows, cols, vals = zip(*[(i, j, w) for (i, j), w in weights.items()])
        M = csr_matrix((vals, (rows, cols)), shape=(n, n))
        return shortest_path(M, method="D", directed=False)

    @property
    def vertex_distances(self) -> np.ndarray:
        return self._D

    def vertex(self, i: int) -> Point:
        return self.point(int(i))

    def weight(self, u: int, v: int) -> float:
        return self._w[(min(u, v), max(u, v))]

    def _canon(self, coords) -> tuple:
        if isinstance(coords, dict):
            u, v = coords["edge"]
            return self._canon((u, v, coords["offset"]))
        if isinstance(coords, (int, np.integer)):
            coords = (int(coords), int(coords), 0.0)
        try:
            u, v, s = coords
            u, v, s = int(u), int(v), float(s)
        except (TypeError, ValueError) as exc:
            raise DomainError(f"invalid finite_graph point {coords!r}") from exc
        n = len(self.vertices)
        if not (0 <= u < n and 0 <= v < n):
            raise DomainError(f"vertex index out of range in {coords!r}")
        if u == v:
            return (u, u, 0.0)
        key = (min(u, v), max(u, v))
        if key not in self._w:
            raise DomainError(f"no edge {key}")
        w = self._w[key]
        if u > v:
            s = w - s
        if not -SAME_POINT_TOL <= s <= w + SAME_POINT_TOL:
            raise DomainError(f"offset {s} outside edge {key} of length {w}")
        if s <= SAME_POINT_TOL:
            return (key[0], key[0], 0.0)
        if s >= w - SAME_POINT_TOL:
            return (key[1], key[1], 0.0)
        return (key[0], key[1], s)

    def coords(self, x: Point) -> np.ndarray:  # type: ignore[override]
        self._check(x)
        return np.asarray(x.coords, dtype=float)

    def _exits(self, c) -> list[tuple[int, float]]:
        u, v, s = int(c[0]), int(c[1]), float(c[2])
        if u == v:
            return [(u, 0.0)]
        return [(u, s), (v, self._w[(u, v)] - s)]

    def _dist(self, a, b) -> float:
        best = math.inf
        for i, oi in self._exits(a):
            for j, oj in self._exits(b):
                best = min(best, oi + self._D[i, j] + oj)
        if a[0] != a[1] and int(a[0]) == int(b[0]) and int(a[1]) == int(b[1]):
            best = min(best, abs(float(a[2]) - float(b[2])))
        return float(best)

    def diameter(self) -> float:
        n = len(self.vertices)
        best = float(self._D.max()) if n else 0.0
        D = self._D
        keys = sorted(self._w)
        for e1 in keys:
            a, b = e1
            w1 = self._w[e1]
            for e2 in keys:
                if e2 == e1:
                    continue
                c, d = e2
                w2 = self._w[e2]
                cands = [0.0, w1]
                for z in (c, d):
                    cands.append(min(max((w1 + D[b, z] - D[a, z]) / 2, 0.0), w1))
                for s in cands:
                    Ac = min(s + D[a, c], w1 - s + D[b, c])
                    Ad = min(s + D[a, d], w1 - s + D[b, d])
                    best = max(best, (Ac + Ad + w2) / 2)
            # two points on the same edge may be farthest apart around a cycle
            rest = {k: w for k, w in self._w.items() if k != e1}
            R = self._shortest_paths(rest)[a, b] if rest else math.inf
            best = max(best, min(w1, (w1 + R) / 2))
        return float(best)

    def _vertex_paths(self, s: int, t: int, tol: float) -> list[list[int]]:
        D = self._D
        out: list[list[int]] = []

        def back(v: int, suffix: list[int]) -> None:
            if len(out) >= MAX_GRAPH_PATHS:
                return
            if v == s:
                out.append([s] + suffix)
                return
            for u in self._adj[v]:
                if abs(D[s, u] + self.weight(u, v) - D[s, v]) <= tol:
                    back(u, [v] + suffix)

        back(t, [])
        return out

    def _offset_on(self, c, key) -> float:
        u, v, s = int(c[0]), int(c[1]), float(c[2])
        if u == v:
            return 0.0 if u == key[0] else self._w[key]
        return s

    def _segment(self, c0, c1):
        """Edge key and start/end offsets of the straight piece between two nodes on one edge."""
        if c0[0] != c0[1]:
            key = (int(c0[0]), int(c0[1]))
        elif c1[0] != c1[1]:
            key = (int(c1[0]), int(c1[1]))
        else:
            u, v = int(c0[0]), int(c1[0])
            key = (min(u, v), max(u, v))
        return key, self._offset_on(c0, key), self._offset_on(c1, key)

    def _polyline_path(self, x: Point, y: Point, nodes: list[tuple], branch: int) -> GeodesicPath:
        segs = []
        for c0, c1 in zip(nodes, nodes[1:]):
            key, o0, o1 = self._segment(c0, c1)
            segs.append((key, o0, o1, abs(o1 - o0)))
        length = sum(s[3] for s in segs)
        cum = np.cumsum([0.0] + [s[3] for s in segs])

        def at(t: float) -> Point:
            if t <= 0:
                return x
            if t >= 1:
                return y
            target = t * length
            k = min(int(np.searchsorted(cum, target, side="right")) - 1, len(segs) - 1)
            key, o0, o1, L = segs[k]
            frac = (target - cum[k]) / L if L > 0 else 0.0
            return self.point((key[0], key[1], o0 + (o1 - o0) * frac))

        return GeodesicPath(x, y, float(length), branch, at)

    def _geodesics(self, x, y):
        cx, cy = x.coords, y.coords
        d = self.distance(x, y)
        tol = 1e-9 * max(1.0, d)
        node_lists: list[list[tuple]] = []
        if cx[0] != cx[1] and (cx[0], cx[1]) == (cy[0], cy[1]) and abs(cx[2] - cy[2]) <= d + tol:
            node_lists.append([cx, cy])
        for i, oi in self._exits(cx):
            for j, oj in self._exits(cy):
                if oi + self._D[i, j] + oj > d + tol:
                    continue
                for vp in self._vertex_paths(i, j, tol):
                    nodes = [cx] + [(v, v, 0.0) for v in vp] + [cy]
                    dedup = [nodes[0]]
                    for nd in nodes[1:]:
                        if nd != dedup[-1]:
                            dedup.append(nd)
                    if dedup not in node_lists:
                        node_lists.append(dedup)
        node_lists = node_lists[:MAX_GRAPH_PATHS]
        return [self._polyline_path(x, y, nl, k) for k, nl in enumerate(node_lists)]

    def sample(self, rng, n):
        keys = sorted(self._w)
        out = []
        for _ in range(n):
            if not keys or rng.random() < 0.5:
                out.append(self.vertex(int(rng.integers(len(self.vertices)))))
            else:
                key = keys[int(rng.integers(len(keys)))]
                out.append(self.point((key[0], key[1], rng.uniform(0, self._w[key]))))
        return out

    def sample_near(self, x, eps):
        best = None
        for v in range(len(self.vertices)):
            y = self.vertex(v)
            dv = self.distance(x, y)
            if 0 < dv < eps and (best is None or dv < best[0]):
                best = (dv, y)
        return None if best is None else best[1]

    def descriptor(self) -> dict:
        return {
            "kind": "finite_graph",
            "vertices": list(self.vertices),
            "edges": [[i, j, w] for i, j, w in self.edges],
        }

    def point_to_json(self, x):
        self._check(x)
        u, v, s = x.coords
        if u == v:
            return int(u)
        return {"edge": [int(u), int(v)], "offset": float(s)}


# ---------------------------------------------------------------------------


def space_from_descriptor(desc: dict) -> MetricSpace:
    if not isinstance(desc, dict):
        raise DomainError("space descriptor must be a JSON object")
    kind = desc.get("kind")
    if kind is None and "vertices" in desc:
        kind = "finite_graph"
    try:
        if kind == "euclidean":
            return Euclidean(int(desc.get("n", 2)))
        if kind == "circle":
            return Circle(float(desc.get("radius", 1.0)))
        if kind == "sphere2":
            return Sphere2(float(desc.get("radius", 1.0)), int(desc.get("n_branches", 2)))
        if kind == "flat_torus":
            return FlatTorus(float(desc.get("a", TWO_PI)), float(desc.get("b", TWO_PI)))
        if kind == "finite_graph":
            return FiniteGraph(tuple(desc["vertices"]), tuple(tuple(e) for e in desc["edges"]))
    except KeyError as exc:
        raise DomainError(f"space descriptor missing field {exc}") from exc
    raise DomainError(f"unknown space kind {kind!r}")


def path_graph(n: int, weight: float = 1.0) -> FiniteGraph:
    return FiniteGraph(tuple(range(n)), tuple((i, i + 1, weight) for i in range(n - 1)))


# ---------------------------------------------------------------------------
# Convexity probe
# ---------------------------------------------------------------------------


def _power_mean(a: float, b: float, p: float) -> float:
    return (0.5 * a**p + 0.5 * b**p) ** (1 / p)


def _n_branches(space: MetricSpace, x: Point, y: Point) -> int:
    if space.distance(x, y) <= SAME_POINT_TOL:
        return 1
    return len(space._geodesics(x, y))


def convexity_probe(
    space: MetricSpace,
    p: float = 2.0,
    n_triples: int = 1000,
    rng_seed: int = 0,
    *,
    triples: Iterable[tuple[Point, Point, Point]] | None = None,
    rho: Callable[[float], float] | None = None,
    eps: float | None = None,
    tol: float = 1e-9,
) -> ProbeReport:
    """Check p-convexity and the Busemann midpoint inequality on sampled triples.

    For each triple (x, y, z) and every midpoint branch m of (x, y) this tests
    d(m, z) <= (d(x,z)^p/2 + d(y,z)^p/2)^(1/p); for every pair of branches of
    m(x, z), m(x, y) it tests d(m(x,z), m(x,y)) <= d(z, y)/2.  When ``rho`` and
    ``eps`` are given, triples with d(x,y) > eps * M_p additionally test the
    uniform bound d(m, z) <= (1 - rho(eps)) M_p.
    """
    if p < 1:
        raise DomainError("p must be >= 1")
    rng = np.random.default_rng(rng_seed)
    if triples is None:
        pts = space.sample(rng, 3 * n_triples)
        triples = [tuple(pts[3 * i : 3 * i + 3]) for i in range(n_triples)]
    triples = list(triples)
    chk = Checker()
    worst = {"convexity": (-math.inf, None), "busemann": (-math.inf, None), "uniform": (-math.inf, None)}
    violations = {"convexity": 0, "busemann": 0, "uniform": 0}
    evaluated = {"convexity": 0, "busemann": 0, "uniform": 0}

    def record(key, excess, triple, detail):
        evaluated[key] += 1
        if excess > tol:
            violations[key] += 1
        if excess > worst[key][0]:
            worst[key] = (excess, {"triple": [space.point_to_json(q) for q in triple], **detail})

    for x, y, z in triples:
        dxz, dyz, dxy = space.distance(x, z), space.distance(y, z), space.distance(x, y)
        mp = _power_mean(dxz, dyz, p)
        for br in range(_n_branches(space, x, y)):
            m = space.midpoint(x, y, br)
            lhs = space.distance(m, z)
            record("convexity", lhs - mp, (x, y, z), {"branch": br, "lhs": lhs, "rhs": mp})
            if rho is not None and eps is not None and dxy > eps * mp:
                bound = (1 - rho(eps)) * mp
                record("uniform", lhs - bound, (x, y, z), {"branch": br, "lhs": lhs, "rhs": bound})
        for b1 in range(_n_branches(space, x, z)):
            m1 = space.midpoint(x, z, b1)
            for b2 in range(_n_branches(space, x, y)):
                m2 = space.midpoint(x, y, b2)
                lhs = space.distance(m1, m2)
                record("busemann", lhs - dyz / 2, (x, y, z), {"branches": [b1, b2], "lhs": lhs, "rhs": dyz / 2})

    witnesses = []
    for key in ("convexity", "busemann", "uniform"):
        if evaluated[key] == 0:
            continue
        chk.check(key, worst[key][0], tol)
        chk.bump(f"{key}:evaluated", evaluated[key])
        chk.bump(f"{key}:violations", violations[key])
        if violations[key]:
            witnesses.append({"kind": key, "slack": worst[key][0], **worst[key][1]})
    params = {"p": float(p), "n_triples": len(triples), "rng_seed": rng_seed, "tol": tol}
    if rho is not None:
        params["eps"] = eps
        params["rho"] = rho(eps) if eps is not None else None
    return chk.report("convexity", space.descriptor(), params, witnesses=witnesses)
