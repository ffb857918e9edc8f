"""Finitely supported measures and Wasserstein-1 transport.

Plans keep the row/column convention ``sum_j T(i, j) = a_i`` (rows follow
the source) and ``sum_i T(i, j) = b_j``.

Small instances (both supports up to 16 points) are solved exactly with a
transportation simplex over :class:`fractions.Fraction`, using the float
distances converted exactly.  Larger ones go to HiGHS; either way the
result carries dual potentials that certify optimality.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.spatial import cKDTree

from .errors import BudgetError, ConvergenceError, DomainError, SchemaError
from .spaces import NormedSpace, Space

EXACT_SUPPORT_LIMIT = 16
SUPPORT_LIMIT = 256
ASSIGNMENT_LIMIT = 1000
EXHAUSTIVE_LIMIT = 9
MERGE_DISTANCE = 1e-12


@dataclass(frozen=True)
class FiniteMeasure:
    """``sum_i weights[i] * delta(support[i])``.

    Points closer than ``1e-12`` are merged and their weights summed, so
    the support is pairwise distinct.
    """

    space: Space
    support: tuple
    weights: tuple

    def __post_init__(self):
        pts = [self.space.point(p) for p in self.support]
        w = [float(x) for x in self.weights]
        if len(pts) != len(w) or not pts:
            raise DomainError("support and weights must be non-empty and of equal length")
        if any(not (x > 0) or not math.isfinite(x) for x in w):
            raise DomainError("weights must be strictly positive")
        if abs(sum(w) - 1.0) > 1e-12:
            raise DomainError("weights must sum to 1", total=sum(w))
        merged_pts, merged_w = _merge(self.space, pts, w)
        object.__setattr__(self, "support", tuple(merged_pts))
        object.__setattr__(self, "weights", tuple(merged_w))

    @classmethod
    def dirac(cls, space, p):
        return cls(space, (p,), (1.0,))

    @classmethod
    def uniform(cls, space, points):
        pts = list(points)
        return cls(space, tuple(pts), tuple([1.0 / len(pts)] * len(pts)))

    def __len__(self):
        return len(self.support)

    def to_json(self):
        return {
            "support": [self.space.point_to_json(p) for p in self.support],
            "weights": list(self.weights),
        }

    @classmethod
    def from_json(cls, space, obj):
        if not isinstance(obj, dict) or "support" not in obj or "weights" not in obj:
            raise SchemaError("measure must be {'support': [...], 'weights': [...]}")
        support = [space.point_from_json(p) for p in obj["support"]]
        return cls(space, tuple(support), tuple(obj["weights"]))


def _merge(space, pts, w):
    """Union points within ``MERGE_DISTANCE``; first occurrence keeps its slot."""
    n = len(pts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in _candidate_pairs(space, pts):
        if space.distance(pts[i], pts[j]) <= MERGE_DISTANCE:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    out_p, out_w, slot = [], [], {}
    for i in range(n):
        r = find(i)
        if r not in slot:
            slot[r] = len(out_p)
            out_p.append(pts[r])
            out_w.append(0.0)
        out_w[slot[r]] += w[i]
    return out_p, out_w


def _candidate_pairs(space, pts):
    if len(pts) <= 64:
        return itertools.combinations(range(len(pts)), 2)
    if isinstance(space, NormedSpace):
        # norm <= r forces every coordinate below r * dual_norm(e_i)
        reach = MERGE_DISTANCE * max(space.dual_norm(e) for e in np.eye(space.dim))
        tree = cKDTree(np.array([np.asarray(p, dtype=float) for p in pts]))
        return tree.query_pairs(reach * (1 + 1e-9), p=np.inf)
    # tree points: near-duplicates share an edge or sit next to a vertex
    order = sorted(range(len(pts)), key=lambda i: (str(pts[i].edge), pts[i].offset))
    pairs = set()
    for a, b in zip(order, order[1:]):
        if pts[a].edge == pts[b].edge:
            pairs.add((a, b))
    near_vertex = [i for i in range(len(pts))
                   if pts[i].offset <= MERGE_DISTANCE
                   or space.edge_length(pts[i].edge) - pts[i].offset <= MERGE_DISTANCE]
    pairs.update(itertools.combinations(near_vertex, 2))
    return pairs


@dataclass(frozen=True)
class TransportPlan:
    source: FiniteMeasure
    target: FiniteMeasure
    matrix: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.matrix, dtype=float)
        k, l = len(self.source), len(self.target)
        if T.shape != (k, l):
            raise DomainError("plan shape does not match the supports", shape=list(T.shape))
        if (T < -1e-12).any():
            raise DomainError("plan entries must be nonnegative")
        if self.residual(T) > 1e-9:
            raise DomainError("plan marginals do not match", residual=self.residual(T))
        T = np.clip(T, 0.0, None)
        T.setflags(write=False)
        object.__setattr__(self, "matrix", T)

    def residual(self, T=None) -> float:
        T = self.matrix if T is None else T
        rows = np.abs(T.sum(axis=1) - np.asarray(self.source.weights)).max()
        cols = np.abs(T.sum(axis=0) - np.asarray(self.target.weights)).max()
        return float(max(rows, cols))


def _same_space(mu, nu):
    if mu.space != nu.space:
        raise DomainError("measures live in different spaces")


def cost_matrix(space: Space, xs, ys) -> np.ndarray:
    return np.array([[space.distance(x, y) for y in ys] for x in xs], dtype=float)


def transport_cost(plan: TransportPlan) -> float:
    C = cost_matrix(plan.source.space, plan.source.support, plan.target.support)
    return float((plan.matrix * C).sum())


class Wasserstein(NamedTuple):
    distance: float
    plan: TransportPlan
    potentials: tuple
    exact: Fraction | None = None


def wasserstein(mu: FiniteMeasure, nu: FiniteMeasure, exact: bool | None = None) -> Wasserstein:
    """Wasserstein-1 distance with an optimal plan and dual potentials."""
    _same_space(mu, nu)
    k, l = len(mu), len(nu)
    if max(k, l) > SUPPORT_LIMIT:
        raise BudgetError("support too large", limit=SUPPORT_LIMIT, sizes=[k, l])
    if exact is None:
        exact = max(k, l) <= EXACT_SUPPORT_LIMIT
    C = cost_matrix(mu.space, mu.support, nu.support)
    if exact:
        a = _normalized_fractions(mu.weights)
        b = _normalized_fractions(nu.weights)
        Cq = [[Fraction(c) for c in row] for row in C]
        flow, u, v = transportation_simplex(a, b, Cq)
        value = sum(flow[i][j] * Cq[i][j] for i in range(k) for j in range(l))
        T = np.array([[float(f) for f in row] for row in flow])
        plan = _rescaled_plan(mu, nu, T)
        return Wasserstein(float(value), plan, ([float(x) for x in u], [float(x) for x in v]),
                           value)
    T, u, v = _highs(np.asarray(mu.weights), np.asarray(nu.weights), C)
    plan = _rescaled_plan(mu, nu, T)
    return Wasserstein(transport_cost(plan), plan, (list(u), list(v)), None)


def _normalized_fractions(weights):
    q = [Fraction(w) for w in weights]
    total = sum(q)
    return [x / total for x in q]


def _rescaled_plan(mu, nu, T):
    # exact plans match normalized weights; float rounding is far below 1e-9
    T = np.clip(T, 0.0, None)
    return TransportPlan(mu, nu, T)


def _highs(a, b, C):
    k, l = C.shape
    A = np.zeros((k + l, k * l))
    for i in range(k):
        A[i, i * l:(i + 1) * l] = 1.0
    for j in range(l):
        A[k + j, j::l] = 1.0
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]),
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise ConvergenceError("transport LP failed", status=int(res.status), message=res.message)
    duals = res.eqlin.marginals
    return res.x.reshape(k, l), duals[:k], duals[k:]


def transportation_simplex(a: Sequence[Fraction], b: Sequence[Fraction], C):
    """Exact balanced transportation problem ``min sum C_ij T_ij``.

    Northwest-corner start, MODI potentials, Bland's rule for entering and
    leaving cells.  Returns ``(flow, u, v)`` with ``u_i + v_j <= C_ij`` for
    every cell and equality on the basis.
    """
    k, l = len(a), len(b)
    if sum(a) != sum(b):
        raise DomainError("unbalanced transportation problem")
    flow = [[Fraction(0)] * l for _ in range(k)]
    basis = set()
    ra, rb = list(a), list(b)
    i = j = 0
    while True:
        q = min(ra[i], rb[j])
        flow[i][j] = q
        basis.add((i, j))
        ra[i] -= q
        rb[j] -= q
        if i == k - 1 and j == l - 1:
            break
        if ra[i] == 0 and i < k - 1:
            i += 1
        else:
            j += 1
    for _ in range(10_000):
        u, v = _potentials(basis, C, k, l)
        entering = None
        for i, j in itertools.product(range(k), range(l)):
            if (i, j) not in basis and C[i][j] - u[i] - v[j] < 0:
                entering = (i, j)
                break
        if entering is None:
            return flow, u, v
        cycle = _cycle(basis, entering, k)
        minus = cycle[1::2]
        theta = min(flow[i][j] for i, j in minus)
        leaving = min(c for c in minus if flow[c[0]][c[1]] == theta)
        for pos, (i, j) in enumerate(cycle):
            flow[i][j] += theta if pos % 2 == 0 else -theta
        basis.remove(leaving)
        basis.add(entering)
    raise ConvergenceError("transportation simplex did not terminate")


def _potentials(basis, C, k, l):
    adj = {}
    for i, j in basis:
        adj.setdefault(("r", i), []).append(("c", j))
        adj.setdefault(("c", j), []).append(("r", i))
    u = [None] * k
    v = [None] * l
    u[0] = Fraction(0)
    queue = deque([("r", 0)])
    while queue:
        side, idx = queue.popleft()
        for other in adj.get((side, idx), []):
            _, jdx = other
            if side == "r" and v[jdx] is None:
                v[jdx] = C[idx][jdx] - u[idx]
                queue.append(other)
            elif side == "c" and u[jdx] is None:
                u[jdx] = C[jdx][idx] - v[idx]
                queue.append(other)
    return u, v


def _cycle(basis, entering, k):
    """Cells of the pivot cycle, starting with ``entering`` (alternating +/-)."""
    i0, j0 = entering
    adj = {}
    for i, j in basis:
        adj.setdefault(("r", i), []).append(("c", j))
        adj.setdefault(("c", j), []).append(("r", i))
    start, goal = ("c", j0), ("r", i0)
    prev = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nb in adj.get(node, []):
            if nb not in prev:
                prev[nb] = node
                queue.append(nb)
    path = []
    node = goal
    while node is not None:
        path.append(node)
        node = prev[node]
    # path runs row i0 -> ... -> column j0; consecutive nodes share a basis cell
    cells = [entering]
    for a, b in zip(path, path[1:]):
        r = a[1] if a[0] == "r" else b[1]
        c = a[1] if a[0] == "c" else b[1]
        cells.append((r, c))
    return cells


def dual_certificate_gap(mu, nu, result: Wasserstein) -> tuple[float, float]:
    """``(max dual infeasibility, |primal - dual objective|)`` in floats."""
    C = cost_matrix(mu.space, mu.support, nu.support)
    u, v = (np.asarray(x, dtype=float) for x in result.potentials)
    infeasible = float(np.max(u[:, None] + v[None, :] - C))
    dual = float(np.dot(mu.weights, u) + np.dot(nu.weights, v))
    return max(infeasible, 0.0), abs(dual - result.distance)


def uniform_assignment(space: Space, xs: Sequence, ys: Sequence):
    """``min over permutations of (1/n) sum d(x_i, y_pi(i))`` and an optimal ``pi``."""
    xs = [space.point(p) for p in xs]
    ys = [space.point(p) for p in ys]
    n = len(xs)
    if n != len(ys) or n == 0:
        raise DomainError("tuples must be non-empty and of equal length")
    if n > ASSIGNMENT_LIMIT:
        raise BudgetError("assignment too large", n=n, limit=ASSIGNMENT_LIMIT)
    C = cost_matrix(space, xs, ys)
    rows, cols = linear_sum_assignment(C)
    perm = [int(c) for _, c in sorted(zip(rows, cols))]
    return float(C[rows, cols].sum()) / n, perm


def exhaustive_assignment(space: Space, xs: Sequence, ys: Sequence):
    """Same minimum by enumerating all ``n!`` permutations (``n <= 9``)."""
    n = len(xs)
    if n != len(ys) or n == 0:
        raise DomainError("tuples must be non-empty and of equal length")
    if n > EXHAUSTIVE_LIMIT:
        raise BudgetError("exhaustive assignment is limited", n=n, limit=EXHAUSTIVE_LIMIT)
    C = cost_matrix(space, xs, ys)
    best, best_perm = math.inf, None
    for perm in itertools.permutations(range(n)):
        c = sum(C[i, perm[i]] for i in range(n))
        if c < best:
            best, best_perm = c, list(perm)
    return best / n, best_perm


def same_support_bound(mu: FiniteMeasure, nu: FiniteMeasure):
    """``(d_W(mu, nu), diam(support)/2 * sum |a_i - b_i|)`` for a shared support."""
    _same_space(mu, nu)
    space = mu.space
    keys = {space.key(p): i for i, p in enumerate(nu.support)}
    if len(mu) != len(nu) or any(space.key(p) not in keys for p in mu.support):
        raise DomainError("measures do not share a support")
    b = [nu.weights[keys[space.key(p)]] for p in mu.support]
    dw = wasserstein(mu, nu).distance
    diam = space.diameter(mu.support)
    bound = 0.5 * diam * float(np.abs(np.asarray(mu.weights) - np.asarray(b)).sum())
    return dw, bound
