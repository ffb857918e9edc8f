"""Model metric spaces with canonical conical bicombings.

Two families are supported:

* :class:`NormedSpace` -- ``R^n`` with a p-norm, a weighted sup-norm or a
  polyhedral norm.  Points are float arrays; the canonical bicombing is
  linear interpolation.
* :class:`MetricTree` -- a finite tree with positive edge lengths.  Points
  are :class:`TreePoint` (edge + offset); the canonical bicombing follows the
  unique arc-length parametrized geodesic.

Distances in trees go through a rooted copy with binary-lifting LCA tables,
so a query costs ``O(log V)`` plus the walk needed to materialize geodesic
points.
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog, minimize

from .errors import BudgetError, DomainError, RangeError, SchemaError

DEFAULT_TOLERANCE = 1e-9
MAX_HULL_GENERATORS = 64


def scaled(tolerance, *lengths):
    """Absolute tolerance for a relative one at the scale of ``lengths``."""
    return tolerance * (1.0 + max(lengths, default=0.0))


class Space(ABC):
    """Common surface of the model spaces."""

    kind: str

    @abstractmethod
    def point(self, p):
        """Validate ``p`` and return its canonical form."""

    @abstractmethod
    def distance(self, p, q) -> float: ...

    @abstractmethod
    def geodesic(self, p, q, t: float):
        """Canonical bicombing, no validation or range checks."""

    @abstractmethod
    def key(self, p):
        """Hashable identity of a canonical point."""

    @abstractmethod
    def sample_points(self, rng: np.random.Generator, count: int) -> list: ...

    @abstractmethod
    def chart(self, points, tolerance=1e-12):
        """Isometric linear chart of ``points`` if one is known.

        Returns ``(coords, inverse)`` where ``coords`` has one row per point
        and ``inverse`` maps a coordinate row back to a point, or ``None``.
        """

    @abstractmethod
    def to_json(self) -> dict: ...

    @abstractmethod
    def point_to_json(self, p) -> dict: ...

    @abstractmethod
    def point_from_json(self, obj): ...

    def bicombing(self) -> "Bicombing":
        return Bicombing(self, self.geodesic, reversible=True, name="canonical")

    def diameter(self, points) -> float:
        # duplicated tuples are common; compare each distinct point once
        pts = list({self.key(p): p for p in points}.values())
        return max(
            (self.distance(a, b) for a, b in itertools.combinations(pts, 2)),
            default=0.0,
        )

    def same_point(self, p, q, tolerance=1e-12) -> bool:
        return self.distance(p, q) <= tolerance


# ---------------------------------------------------------------------------
# Normed spaces


@dataclass(frozen=True, eq=True)
class NormedSpace(Space):
    """``(R^dim, norm)``; exactly one of ``p``, ``weights``, ``functionals``."""

    dim: int
    p: float | None = None
    weights: tuple | None = None
    functionals: tuple | None = None
    kind: str = field(default="normed", init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise SchemaError("dimension must be a positive integer", dim=self.dim)
        given = [x is not None for x in (self.p, self.weights, self.functionals)]
        if sum(given) != 1:
            raise SchemaError("exactly one norm specification is required")
        if self.p is not None:
            p = float(self.p)
            if not (p >= 1.0):
                raise SchemaError("p-norm exponent must lie in [1, inf]", p=self.p)
            object.__setattr__(self, "p", p)
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != self.dim or min(w) <= 0 or not all(map(math.isfinite, w)):
                raise SchemaError("weights must be positive, finite, one per axis")
            object.__setattr__(self, "weights", w)
        if self.functionals is not None:
            F = np.asarray(self.functionals, dtype=float)
            if F.ndim != 2 or F.shape[1] != self.dim or not np.all(np.isfinite(F)):
                raise SchemaError("functionals must be a list of dim-vectors")
            if np.linalg.matrix_rank(F) < self.dim:
                raise SchemaError("polyhedral functionals must span the dual space")
            object.__setattr__(self, "functionals", tuple(map(tuple, F.tolist())))

    # constructors ---------------------------------------------------------

    @classmethod
    def lp(cls, dim, p=2.0):
        return cls(dim, p=p)

    @classmethod
    def euclidean(cls, dim=2):
        return cls(dim, p=2.0)

    @classmethod
    def sup(cls, dim=2):
        return cls(dim, p=math.inf)

    @classmethod
    def weighted_sup(cls, weights):
        return cls(len(weights), weights=tuple(weights))

    @classmethod
    def polyhedral(cls, functionals):
        F = np.asarray(functionals, dtype=float)
        return cls(F.shape[1], functionals=tuple(map(tuple, F.tolist())))

    # norm -----------------------------------------------------------------

    @property
    def _F(self):
        # symmetrized functional matrix; cached on first use
        try:
            return self.__dict__["_Fcache"]
        except KeyError:
            F = np.asarray(self.functionals, dtype=float)
            F = np.vstack([F, -F])
            object.__setattr__(self, "_Fcache", F)
            return F

    def norm(self, v) -> float | np.ndarray:
        """Norm of a vector, or row-wise norms of a 2-d array."""
        v = np.asarray(v, dtype=float)
        if self.p is not None:
            return np.linalg.norm(v, ord=self.p, axis=-1)
        if self.weights is not None:
            return np.max(np.abs(v) * np.asarray(self.weights), axis=-1)
        return np.max(v @ self._F.T, axis=-1)

    def dual_norm(self, w) -> float:
        """``max {w . v : norm(v) <= 1}``."""
        w = np.asarray(w, dtype=float)
        if self.p is not None:
            if self.p == 1.0:
                return float(np.max(np.abs(w)))
            if math.isinf(self.p):
                return float(np.sum(np.abs(w)))
            q = self.p / (self.p - 1.0)
            return float(np.linalg.norm(w, ord=q))
        if self.weights is not None:
            return float(np.sum(np.abs(w) / np.asarray(self.weights)))
        F = self._F
        res = linprog(-w, A_ub=F, b_ub=np.ones(len(F)), bounds=[(None, None)] * self.dim,
                      method="highs")
        return float(-res.fun)

    @property
    def is_monotone(self) -> bool:
        """Whether ``|u_i| <= |v_i|`` for all i implies ``norm(u) <= norm(v)``."""
        return self.functionals is None

    # Space API --------------------------------------------------------------

    def point(self, p):
        if isinstance(p, TreePoint):
            raise DomainError("tree point used in a normed space")
        if isinstance(p, dict):
            return self.point_from_json(p)
        arr = np.array(p, dtype=float)
        if arr.shape != (self.dim,):
            raise DomainError(
                "point has wrong dimension", expected=self.dim, shape=list(arr.shape)
            )
        if not np.all(np.isfinite(arr)):
            raise DomainError("point coordinates must be finite")
        arr.setflags(write=False)
        return arr

    def distance(self, p, q) -> float:
        return float(self.norm(np.asarray(p) - np.asarray(q)))

    def geodesic(self, p, q, t):
        if t == 0:
            return p
        if t == 1:
            return q
        out = (1.0 - t) * np.asarray(p) + t * np.asarray(q)
        out.setflags(write=False)
        return out

    def key(self, p):
        return tuple(float(x) for x in p)

    def sample_points(self, rng, count, scale=2.0):
        pts = rng.uniform(-scale, scale, size=(count, self.dim))
        return [self.point(row) for row in pts]

    def chart(self, points, tolerance=1e-12):
        coords = np.array([np.asarray(p, dtype=float) for p in points])

        def inverse(row):
            return self.point(row)

        return coords, inverse

    def to_json(self):
        if self.p is not None:
            p = "inf" if math.isinf(self.p) else self.p
            norm = {"p": p}
        elif self.weights is not None:
            norm = {"weights": list(self.weights)}
        else:
            norm = {"functionals": [list(f) for f in self.functionals]}
        return {"kind": "normed", "dim": int(self.dim), "norm": norm}

    def point_to_json(self, p):
        return {"coords": [float(x) for x in p]}

    def point_from_json(self, obj):
        if isinstance(obj, list):
            return self.point(obj)
        if not isinstance(obj, dict) or "coords" not in obj:
            raise SchemaError("normed-space point must be {'coords': [...]}", point=obj)
        return self.point(obj["coords"])

    # convex hull ----------------------------------------------------------

    def hull_residual(self, generators, p) -> float:
        """Norm distance from ``p`` to the convex hull of ``generators``."""
        G = np.array([np.asarray(g, dtype=float) for g in generators])
        p = np.asarray(p, dtype=float)
        m = len(G)
        if m == 1:
            return self.distance(G[0], p)
        if self.p is None or self.p in (1.0, math.inf):
            return self._polyhedral_hull_residual(G, p)
        # l_inf residual brackets the p-norm residual within a factor dim^(1/p)
        w_inf, r_inf = self._lp_hull(G, p, self._box_functionals(math.inf))
        best = self.distance(w_inf @ G, p)
        if best <= 1e-15 or r_inf * self.dim ** (1.0 / self.p) <= 1e-15:
            return best

        def objective(w):
            return self.distance(w @ G, p)

        res = minimize(
            objective,
            w_inf,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * m,
            constraints=[{"type": "eq", "fun": lambda w: np.sum(w) - 1.0}],
            options={"ftol": 1e-15, "maxiter": 500},
        )
        w = np.clip(res.x, 0.0, None)
        w = w / w.sum()
        return min(best, self.distance(w @ G, p))

    def _box_functionals(self, p):
        eye = np.eye(self.dim)
        if math.isinf(p):
            return np.vstack([eye, -eye])
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.dim)))
        return signs

    def _polyhedral_functionals(self):
        if self.functionals is not None:
            return self._F
        if self.weights is not None:
            W = np.diag(self.weights)
            return np.vstack([W, -W])
        return self._box_functionals(self.p)

    def _polyhedral_hull_residual(self, G, p):
        w, _ = self._lp_hull(G, p, self._polyhedral_functionals())
        return self.distance(w @ G, p)

    @staticmethod
    def _lp_hull(G, p, F):
        # variables: weights w (m), residual bound r; minimize r
        m, n = G.shape
        c = np.zeros(m + 1)
        c[-1] = 1.0
        # F (G^T w - p) <= r
        A = np.hstack([F @ G.T, -np.ones((len(F), 1))])
        b = F @ p
        A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
        res = linprog(
            c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=[1.0],
            bounds=[(0, None)] * m + [(None, None)], method="highs",
        )
        w = np.clip(res.x[:m], 0.0, None)
        return w / w.sum(), float(res.x[-1])


# ---------------------------------------------------------------------------
# Metric trees


@dataclass(frozen=True, order=True)
class TreePoint:
    """Point at ``offset`` from ``edge[0]`` along ``edge``.

    Produced in canonical form by :meth:`MetricTree.point`; a vertex is
    stored as its lexicographically smallest incident representation.
    """

    edge: tuple
    offset: float


class MetricTree(Space):
    """Finite metric tree built from ``(u, v, length)`` edges."""

    kind = "tree"

    def __init__(self, vertices, edges):
        self.vertices = tuple(vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise SchemaError("duplicate vertex ids")
        vset = set(self.vertices)
        if not edges:
            raise SchemaError("a tree needs at least one edge")
        self.edges = []
        self._edge_index = {}
        for e in edges:
            if len(e) != 3:
                raise SchemaError("edge must be [u, v, length]", edge=list(e))
            u, v, length = e
            length = float(length)
            if u not in vset or v not in vset or u == v:
                raise SchemaError("edge endpoints must be distinct known vertices", edge=[u, v])
            if not (length > 0 and math.isfinite(length)):
                raise SchemaError("edge length must be positive and finite", edge=[u, v])
            if frozenset((u, v)) in self._edge_index:
                raise SchemaError("duplicate edge", edge=[u, v])
            self._edge_index[frozenset((u, v))] = len(self.edges)
            self.edges.append((u, v, length))
        if len(self.edges) != len(self.vertices) - 1:
            raise SchemaError("a tree on V vertices has V-1 edges")
        self._root_tree()
        self._vertex_rep = {}
        for vtx in self.vertices:
            reps = []
            for (u, v, length) in self.edges:
                if vtx == u:
                    reps.append(((u, v), 0.0))
                elif vtx == v:
                    reps.append(((u, v), length))
            self._vertex_rep[vtx] = min(reps, key=lambda r: (str(r[0][0]), str(r[0][1]), r[1]))

    def _root_tree(self):
        adj = {v: [] for v in self.vertices}
        for idx, (u, v, length) in enumerate(self.edges):
            adj[u].append((v, idx))
            adj[v].append((u, idx))
        root = self.vertices[0]
        parent = {root: None}
        up_edge = {root: None}
        depth = {root: 0.0}
        level = {root: 0}
        order = [root]
        queue = deque([root])
        while queue:
            a = queue.popleft()
            for b, idx in adj[a]:
                if b in parent:
                    continue
                parent[b] = a
                up_edge[b] = idx
                depth[b] = depth[a] + self.edges[idx][2]
                level[b] = level[a] + 1
                order.append(b)
                queue.append(b)
        if len(parent) != len(self.vertices):
            raise SchemaError("tree is not connected")
        self.root = root
        self._parent = parent
        self._up_edge = up_edge
        self._depth = depth
        self._level = level
        log = max(1, (len(self.vertices)).bit_length())
        up = [dict((v, parent[v] if parent[v] is not None else root) for v in self.vertices)]
        for _ in range(1, log):
            prev = up[-1]
            up.append({v: prev[prev[v]] for v in self.vertices})
        self._up = up

    @classmethod
    def tripod(cls, legs=(2.0, 1.0, 1.0), names=("x", "y", "z"), center="m"):
        """Star with one leg per entry of ``legs`` glued at ``center``."""
        return cls([center, *names], [(center, n, l) for n, l in zip(names, legs)])

    # internal representation: (child vertex, height above child) -----------

    def _edge_len(self, child):
        return self.edges[self._up_edge[child]][2]

    def _lift(self, p: TreePoint):
        u, v = p.edge
        idx = self._edge_index[frozenset((u, v))]
        a, b, length = self.edges[idx]
        off = p.offset if (u, v) == (a, b) else length - p.offset
        if self._parent.get(b) == a:
            return b, length - off
        return a, off

    def _drop(self, child, height) -> TreePoint:
        a, b, length = self.edges[self._up_edge[child]]
        off = length - height if child == b else height
        return self._canonical((a, b), off, length)

    def _canonical(self, edge, off, length):
        if off <= 0.0:
            e, o = self._vertex_rep[edge[0]]
            return TreePoint(e, o)
        if off >= length:
            e, o = self._vertex_rep[edge[1]]
            return TreePoint(e, o)
        return TreePoint(edge, float(off))

    def _lca(self, a, b):
        la, lb = self._level[a], self._level[b]
        if la < lb:
            a, b, la, lb = b, a, lb, la
        diff = la - lb
        j = 0
        while diff:
            if diff & 1:
                a = self._up[j][a]
            diff >>= 1
            j += 1
        if a == b:
            return a
        for j in range(len(self._up) - 1, -1, -1):
            if self._up[j][a] != self._up[j][b]:
                a, b = self._up[j][a], self._up[j][b]
        return self._parent[a]

    def _pdepth(self, c, h):
        return self._depth[c] - h

    def _top(self, c1, h1, c2, h2):
        """Depth of the highest point on the geodesic between two lifted points."""
        if c1 == c2:
            return min(self._pdepth(c1, h1), self._pdepth(c2, h2))
        w = self._lca(c1, c2)
        if w == c1:
            return self._pdepth(c1, h1)
        if w == c2:
            return self._pdepth(c2, h2)
        return self._depth[w]

    def _ascend(self, c, h, amount):
        h = h + amount
        while h > self._edge_len(c):
            par = self._parent[c]
            if par == self.root:
                return c, self._edge_len(c)
            h -= self._edge_len(c)
            c = par
        return c, h

    # Space API --------------------------------------------------------------

    def edge_length(self, edge) -> float:
        return self.edges[self._edge_index[frozenset(edge)]][2]

    def vertex(self, name) -> TreePoint:
        if name not in self._vertex_rep:
            raise DomainError("unknown vertex", vertex=name)
        e, o = self._vertex_rep[name]
        return TreePoint(e, o)

    def point(self, p):
        if isinstance(p, dict):
            return self.point_from_json(p)
        if not isinstance(p, TreePoint):
            raise DomainError("tree spaces need TreePoint values", point=repr(p))
        u, v = p.edge
        idx = self._edge_index.get(frozenset((u, v)))
        if idx is None:
            raise DomainError("edge does not belong to this tree", edge=[u, v])
        a, b, length = self.edges[idx]
        off = float(p.offset)
        slack = 1e-12 * length
        if not (-slack <= off <= length + slack) or not math.isfinite(off):
            raise DomainError("offset outside edge", edge=[u, v], offset=off)
        if (u, v) != (a, b):
            off = length - off
        return self._canonical((a, b), off, length)

    def distance(self, p, q) -> float:
        c1, h1 = self._lift(p)
        c2, h2 = self._lift(q)
        if c1 == c2:
            return abs(h1 - h2)
        top = self._top(c1, h1, c2, h2)
        return max(0.0, (self._pdepth(c1, h1) - top) + (self._pdepth(c2, h2) - top))

    def geodesic(self, p, q, t):
        if t == 0:
            return p
        if t == 1:
            return q
        c1, h1 = self._lift(p)
        c2, h2 = self._lift(q)
        top = self._top(c1, h1, c2, h2)
        up_p = self._pdepth(c1, h1) - top
        up_q = self._pdepth(c2, h2) - top
        total = up_p + up_q
        s = t * total
        if s <= up_p:
            return self._drop(*self._ascend(c1, h1, s))
        return self._drop(*self._ascend(c2, h2, total - s))

    def key(self, p):
        return (p.edge, p.offset)

    def sample_points(self, rng, count, vertex_rate=0.15):
        lengths = np.array([e[2] for e in self.edges])
        probs = lengths / lengths.sum()
        out = []
        for _ in range(count):
            if rng.random() < vertex_rate:
                out.append(self.vertex(self.vertices[rng.integers(len(self.vertices))]))
                continue
            idx = rng.choice(len(self.edges), p=probs)
            u, v, length = self.edges[idx]
            out.append(self.point(TreePoint((u, v), float(rng.uniform(0, length)))))
        return out

    def chart(self, points, tolerance=1e-12):
        pts = list(points)
        a = max(pts, key=lambda p: self.distance(pts[0], p))
        b = max(pts, key=lambda p: self.distance(a, p))
        D = self.distance(a, b)
        if D == 0.0:
            return np.zeros((len(pts), 1)), lambda row: a
        tol = tolerance * (1.0 + D)
        coords = []
        for p in pts:
            da, db = self.distance(a, p), self.distance(p, b)
            if da + db - D > tol:
                return None
            coords.append([da])

        def inverse(row):
            s = min(max(float(row[0]) / D, 0.0), 1.0)
            return self.geodesic(a, b, s)

        return np.array(coords), inverse

    def on_geodesic(self, a, b, p, tolerance=DEFAULT_TOLERANCE) -> bool:
        d = self.distance(a, b)
        return self.distance(a, p) + self.distance(p, b) - d <= scaled(tolerance, d)

    def automorphism(self, mapping: dict) -> Callable:
        """Isometry induced by a vertex permutation preserving edge lengths."""
        for (u, v, length) in self.edges:
            key = frozenset((mapping[u], mapping[v]))
            if key not in self._edge_index or self.edges[self._edge_index[key]][2] != length:
                raise DomainError("vertex map is not a length-preserving automorphism")

        def gamma(p: TreePoint) -> TreePoint:
            u, v = p.edge
            return self.point(TreePoint((mapping[u], mapping[v]), p.offset))

        return gamma

    def automorphisms(self) -> list:
        """All length-preserving automorphisms (brute force, small trees only)."""
        if len(self.vertices) > 8:
            raise BudgetError("automorphism enumeration is limited to 8 vertices")
        out = []
        for perm in itertools.permutations(self.vertices):
            mapping = dict(zip(self.vertices, perm))
            try:
                out.append(self.automorphism(mapping))
            except (DomainError, KeyError):
                continue
        return out

    def __eq__(self, other):
        return (
            isinstance(other, MetricTree)
            and self.vertices == other.vertices
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.vertices, tuple(self.edges)))

    def __repr__(self):
        return f"MetricTree(vertices={list(self.vertices)!r}, edges={self.edges!r})"

    def to_json(self):
        return {
            "kind": "tree",
            "vertices": list(self.vertices),
            "edges": [[u, v, length] for (u, v, length) in self.edges],
        }

    def point_to_json(self, p):
        return {"edge": list(p.edge), "offset": float(p.offset)}

    def point_from_json(self, obj):
        if isinstance(obj, dict) and "vertex" in obj:
            return self.vertex(obj["vertex"])
        if not isinstance(obj, dict) or "edge" not in obj or "offset" not in obj:
            raise SchemaError("tree point must be {'edge': [a, b], 'offset': t}", point=obj)
        edge = obj["edge"]
        if not isinstance(edge, (list, tuple)) or len(edge) != 2:
            raise SchemaError("edge must name two vertices", point=obj)
        return self.point(TreePoint(tuple(edge), float(obj["offset"])))


# ---------------------------------------------------------------------------
# Bicombings and verifiers


@dataclass(frozen=True)
class Bicombing:
    space: Space
    rule: Callable
    reversible: bool = False
    name: str = "custom"

    def __call__(self, x, y, t):
        return geodesic_eval(self, x, y, t)


@dataclass
class VerificationReport:
    passed: bool
    sample_count: int
    tolerance: float
    max_violation: float
    violations: list = field(default_factory=list)
    samples: list = field(default_factory=list)

    def to_dict(self, include_samples=False):
        out = {
            "passed": self.passed,
            "sample_count": self.sample_count,
            "tolerance": self.tolerance,
            "max_violation": self.max_violation,
            "violation_count": len(self.violations),
            "violations": self.violations[:20],
        }
        if include_samples:
            out["samples"] = self.samples
        return out


def _check_space(space, *points):
    return [space.point(p) for p in points]


def distance(space: Space, p, q) -> float:
    p, q = _check_space(space, p, q)
    return space.distance(p, q)


def geodesic_eval(bicombing: Bicombing, x, y, t: float):
    t = float(t)
    if not (0.0 <= t <= 1.0):
        raise RangeError("geodesic parameter outside [0, 1]", t=t)
    x, y = _check_space(bicombing.space, x, y)
    if t == 0.0:
        return x
    if t == 1.0:
        return y
    return bicombing.space.point(bicombing.rule(x, y, t))


def _t_values(rng, extra):
    return [0.0, 0.25, 0.5, 0.75, 1.0] + list(rng.uniform(0.0, 1.0, size=extra))


def conical_check(bicombing: Bicombing, sample_count=1000, tolerance=DEFAULT_TOLERANCE,
                  seed=0) -> VerificationReport:
    """Sample quadruples and check endpoints, constant speed and conicality.

    A sample violates when an inequality fails by more than
    ``tolerance * (1 + scale)``, with ``scale`` the largest distance among
    the sampled points.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be positive")
    space = bicombing.space
    rng = np.random.default_rng(seed)
    violations = []
    samples = []
    worst = 0.0
    for s in range(sample_count):
        x, y, x2, y2 = space.sample_points(rng, 4)
        t = float(rng.choice(_t_values(rng, 3)))
        t2 = float(rng.uniform(0.0, 1.0))
        dxy = space.distance(x, y)
        scale = max(dxy, space.distance(x2, y2), space.distance(x, x2), space.distance(y, y2))
        tol = scaled(tolerance, scale)
        g = geodesic_eval(bicombing, x, y, t)
        g_other = geodesic_eval(bicombing, x, y, t2)
        g2 = geodesic_eval(bicombing, x2, y2, t)
        checks = {
            "start": space.distance(bicombing.space.point(bicombing.rule(x, y, 0.0)), x),
            "end": space.distance(bicombing.space.point(bicombing.rule(x, y, 1.0)), y),
            "speed": abs(space.distance(g, g_other) - abs(t - t2) * dxy),
            "speed_from_x": abs(space.distance(x, g) - t * dxy),
            "conical": space.distance(g, g2)
            - ((1 - t) * space.distance(x, x2) + t * space.distance(y, y2)),
        }
        samples.append({"index": s, "t": t, "t2": t2})
        for name, excess in checks.items():
            worst = max(worst, excess)
            if excess > tol:
                violations.append({"sample": s, "check": name, "t": t, "excess": float(excess)})
    return VerificationReport(not violations, sample_count, tolerance, float(worst),
                              violations, samples)


def reversibility_gap(bicombing: Bicombing, sample_count=100, seed=0) -> float:
    """Largest ``d(sigma_xy(t), sigma_yx(1-t))`` over sampled pairs."""
    space = bicombing.space
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(sample_count):
        x, y = space.sample_points(rng, 2)
        t = float(rng.uniform())
        worst = max(worst, space.distance(geodesic_eval(bicombing, x, y, t),
                                          geodesic_eval(bicombing, y, x, 1.0 - t)))
    return worst


def hull_contains(space: Space, generators: Sequence, p, tolerance=DEFAULT_TOLERANCE) -> bool:
    """Membership in the closed convex hull of ``generators`` (relative tolerance)."""
    gens = list(generators)
    if not gens:
        raise ValueError("generators must be non-empty")
    gens = _check_space(space, *gens)
    (p,) = _check_space(space, p)
    tol = scaled(tolerance, space.diameter(gens), max(space.distance(g, p) for g in gens))
    if isinstance(space, MetricTree):
        return any(
            space.distance(a, p) + space.distance(p, b) - space.distance(a, b) <= tol
            for a, b in itertools.combinations_with_replacement(gens, 2)
        )
    if len(gens) > MAX_HULL_GENERATORS:
        raise BudgetError("hull membership supports at most 64 generators", count=len(gens))
    return space.hull_residual(gens, p) <= tol


def hull_diameter(space: Space, generators: Sequence) -> float:
    gens = list(generators)
    if not gens:
        raise ValueError("generators must be non-empty")
    return space.diameter(_check_space(space, *gens))


def hull_iterates(space: Space, generators, rounds=2, per_round=30, seed=0):
    """Random members of ``C_k = union of [x, y]`` for ``x, y`` in ``C_{k-1}``."""
    rng = np.random.default_rng(seed)
    current = list(generators)
    for _ in range(rounds):
        nxt = list(current)
        for _ in range(per_round):
            a, b = rng.integers(len(current), size=2)
            nxt.append(space.geodesic(current[a], current[b], float(rng.uniform())))
        current = nxt
    return current


def space_from_json(obj) -> Space:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError("space descriptor needs a 'kind'", space=obj)
    kind = obj["kind"]
    if kind == "normed":
        dim = obj.get("dim")
        norm = obj.get("norm", {"p": 2})
        if not isinstance(dim, int):
            raise SchemaError("normed space needs integer 'dim'")
        if "p" in norm:
            p = norm["p"]
            p = math.inf if p in ("inf", "Infinity", None) else float(p)
            return NormedSpace(dim, p=p)
        if "weights" in norm:
            return NormedSpace(dim, weights=tuple(norm["weights"]))
        if "functionals" in norm:
            return NormedSpace(dim, functionals=tuple(map(tuple, norm["functionals"])))
        raise SchemaError("unknown norm specification", norm=norm)
    if kind == "tree":
        try:
            return MetricTree(obj["vertices"], [tuple(e) for e in obj["edges"]])
        except KeyError as exc:
            raise SchemaError("tree descriptor needs 'vertices' and 'edges'") from exc
    raise SchemaError("unknown space kind", kind=kind)
