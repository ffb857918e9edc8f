"""Recursive barycenters in spaces with reversible conical bicombings.

``bar_n`` follows the leave-one-out recursion: replace every entry of the
tuple by the ``(n-1)``-barycenter of the others and repeat until the cloud
has collapsed.  Each round shrinks the diameter by at least ``1/(n-1)``;
the engine asserts that contraction on every round.

Two things keep this tractable at desk scale:

* a linear fast path -- whenever the current cloud sits inside a set the
  space can chart isometrically onto a convex subset of a normed space
  (all of a normed space, or one geodesic segment of a tree), the
  barycenter is the arithmetic mean of the chart coordinates;
* memoization of sub-barycenters on the exact ordered sub-tuple, which
  collapses the repeated work of duplicated tuples ``k * x``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BudgetError, ConvergenceError, DomainError
from .spaces import Space, hull_diameter

_EPS = np.finfo(float).eps
SUBSET_BUDGET = 10**6


@dataclass(frozen=True)
class BarycenterConfig:
    tolerance: float = 1e-10
    max_rounds: int = 200
    k_max: int = 64
    linear_fast_path: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_rounds < 1 or self.k_max < 1:
            raise ValueError("caps must be at least 1")


@dataclass
class BarycenterStats:
    """Diagnostics gathered while evaluating one or more barycenters."""

    rounds_per_level: dict = field(default_factory=dict)
    worst_contraction: dict = field(default_factory=dict)
    recursive_calls: int = 0
    fast_path_hits: int = 0
    memo_hits: int = 0

    def to_dict(self):
        return {
            "rounds_per_level": {str(k): v for k, v in sorted(self.rounds_per_level.items())},
            "worst_contraction": {str(k): v for k, v in sorted(self.worst_contraction.items())},
            "recursive_calls": self.recursive_calls,
            "fast_path_hits": self.fast_path_hits,
            "memo_hits": self.memo_hits,
        }


class _Engine:
    """Evaluates barycenters for one space; memo lives as long as the engine."""

    def __init__(self, space: Space, config: BarycenterConfig, stats: BarycenterStats | None):
        self.space = space
        self.config = config
        self.stats = stats if stats is not None else BarycenterStats()
        self.memo = {}
        self.floor = 0.0

    def set_scale(self, scale):
        # the recursion cannot resolve diameters below a few ulps of the scale
        self.floor = max(self.floor, 64 * _EPS * (1.0 + scale))

    def linear(self, points, weights=None):
        if not self.config.linear_fast_path:
            return None
        chart = self.space.chart(points)
        if chart is None:
            return None
        coords, inverse = chart
        if weights is None:
            mean = coords.mean(axis=0)
        else:
            mean = np.asarray(weights, dtype=float) @ coords
        self.stats.fast_path_hits += 1
        return inverse(mean)

    def bar(self, points, tol):
        n = len(points)
        if n == 1:
            return points[0]
        if n == 2:
            return self.space.geodesic(points[0], points[1], 0.5)
        key = tuple(self.space.key(p) for p in points)
        hit = self.memo.get(key)
        if hit is not None:
            self.stats.memo_hits += 1
            return hit
        self.stats.recursive_calls += 1
        result = self._iterate(list(points), tol)
        self.memo[key] = result
        return result

    def _iterate(self, cur, tol):
        n = len(cur)
        cfg = self.config
        tol = max(tol, self.floor)
        sub_tol = max(tol / (n * cfg.max_rounds), self.floor)
        diam = self.space.diameter(cur)
        slack = 2.0 * sub_tol + self.floor
        rounds = 0
        while diam > tol:
            fast = self.linear(cur)
            if fast is not None:
                return self._record(n, rounds, fast)
            if rounds >= cfg.max_rounds:
                raise ConvergenceError(
                    "barycenter round cap exceeded", n=n, rounds=rounds, diameter=diam
                )
            nxt = [self.bar(cur[:j] + cur[j + 1:], sub_tol) for j in range(n)]
            new_diam = self.space.diameter(nxt)
            bound = diam / (n - 1)
            if new_diam > bound + slack:
                raise ConvergenceError(
                    "leave-one-out round failed to contract by 1/(n-1)",
                    n=n, before=diam, after=new_diam,
                )
            if diam > 1e3 * self.floor:
                # sub-barycenters are only resolved to sub_tol
                ratio = max(new_diam - slack, 0.0) / diam
                self.stats.worst_contraction[n] = max(
                    self.stats.worst_contraction.get(n, 0.0), ratio
                )
            cur, diam = nxt, new_diam
            rounds += 1
        return self._record(n, rounds, cur[0])

    def _record(self, n, rounds, value):
        prev = self.stats.rounds_per_level.get(n, 0)
        self.stats.rounds_per_level[n] = max(prev, rounds)
        return value


def _prepare(space, points, config, stats):
    pts = [space.point(p) for p in points]
    if not pts:
        raise ValueError("barycenter of an empty tuple")
    config = config or BarycenterConfig()
    engine = _Engine(space, config, stats)
    D = space.diameter(pts)
    engine.set_scale(D)
    return pts, engine, config.tolerance * (1.0 + D)


def bar_n(space: Space, points: Sequence, config: BarycenterConfig | None = None,
          stats: BarycenterStats | None = None):
    """Recursive barycenter of the tuple ``points``."""
    pts, engine, tol = _prepare(space, points, config, stats)
    return engine.bar(pts, tol)


def leave_one_out(space: Space, points: Sequence, config: BarycenterConfig | None = None):
    """First-round points ``bar_{n-1}`` of the tuple with entry ``j`` removed."""
    pts, engine, tol = _prepare(space, points, config, None)
    n = len(pts)
    sub = tol / (n * engine.config.max_rounds)
    return [engine.bar(pts[:j] + pts[j + 1:], sub) for j in range(n)]


def duplicate(points: Sequence, k: int) -> list:
    """``k * x``: every entry repeated ``k`` times in place."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return [p for p in points for _ in range(k)]


@dataclass
class BarStarCertificate:
    k: int
    D: float
    bound: float
    target_tolerance: float | None
    fast_path: bool
    successive: list = field(default_factory=list)
    stats: BarycenterStats | None = None

    def to_dict(self):
        out = {
            "k": self.k,
            "D": self.D,
            "bound": self.bound,
            "target_tolerance": self.target_tolerance,
            "fast_path": self.fast_path,
            "successive_differences": self.successive,
        }
        if self.stats is not None:
            out["rounds_per_level"] = self.stats.to_dict()["rounds_per_level"]
        return out


def required_k(D: float, target_tolerance: float) -> int:
    """Smallest ``k >= 1`` with ``D / (2 sqrt(k)) <= target_tolerance``."""
    if not target_tolerance > 0:
        raise ValueError("target tolerance must be positive")
    k = max(1, math.ceil((D / (2.0 * target_tolerance)) ** 2))
    while k > 1 and D / (2.0 * math.sqrt(k - 1)) <= target_tolerance:
        k -= 1
    while D / (2.0 * math.sqrt(k)) > target_tolerance:
        k += 1
    return k


def bar_star(space: Space, points: Sequence, target_tolerance: float | None = None,
             config: BarycenterConfig | None = None, *, k: int | None = None,
             observe: bool = True):
    """Duplication-stabilized barycenter ``bar_{kn}(k * x)``.

    ``k`` is the smallest integer whose a-priori Cauchy bound ``D/(2 sqrt k)``
    meets ``target_tolerance`` (``D`` = diameter of the tuple), unless given
    explicitly.  Returns ``(point, certificate)``.
    """
    config = config or BarycenterConfig()
    pts = [space.point(p) for p in points]
    if not pts:
        raise ValueError("barycenter of an empty tuple")
    D = hull_diameter(space, pts)
    stats = BarycenterStats()
    engine = _Engine(space, config, stats)
    engine.set_scale(D)
    if D == 0.0 or engine.linear(pts) is not None:
        # duplication leaves a linear mean unchanged, so k = 1 is exact
        point = pts[0] if D == 0.0 else engine.linear(pts)
        return point, BarStarCertificate(1, D, 0.0, target_tolerance, D > 0.0, [], stats)
    if k is None:
        if target_tolerance is None:
            k = 1
        else:
            k = required_k(D, target_tolerance)
            if k > config.k_max:
                raise BudgetError(
                    "required duplication exceeds k_max",
                    required_k=k, k_max=config.k_max,
                    achievable_tolerance=D / (2.0 * math.sqrt(config.k_max)),
                )
    elif k < 1:
        raise ValueError("k must be at least 1")
    tol = config.tolerance * (1.0 + D)
    trail = []
    if observe:
        j = 1
        while j < k:
            trail.append(j)
            j *= 2
    trail.append(k)
    values = [engine.bar(duplicate(pts, j), tol) for j in trail]
    successive = [
        {"from_k": a, "to_k": b, "distance": space.distance(va, vb), "bound": D / (2 * math.sqrt(a))}
        for (a, va), (b, vb) in zip(zip(trail, values), zip(trail[1:], values[1:]))
    ]
    cert = BarStarCertificate(k, D, D / (2.0 * math.sqrt(k)), target_tolerance, False,
                              successive, stats)
    return values[-1], cert


def lemma23_gap(space: Space, x, points: Sequence, k: int,
                config: BarycenterConfig | None = None):
    """Both sides of the binomial-average bound for ``d(x, bar_n(points))``.

    Returns ``(lhs, rhs)`` with ``lhs = d(x, bar_n)`` and ``rhs`` the average
    of ``d(x, bar_k(x|_I))`` over all ``k``-subsets ``I`` in lexicographic
    order.
    """
    pts, engine, tol = _prepare(space, points, config, None)
    (x,) = [space.point(x)]
    n = len(pts)
    if not 1 <= k <= n:
        raise DomainError("need 1 <= k <= n", k=k, n=n)
    count = math.comb(n, k)
    if count > SUBSET_BUDGET:
        raise BudgetError("too many subsets", subsets=count, budget=SUBSET_BUDGET)
    lhs = space.distance(x, engine.bar(pts, tol))
    total = 0.0
    for idx in itertools.combinations(range(n), k):
        total += space.distance(x, engine.bar([pts[i] for i in idx], tol))
    return lhs, total / count


def rational_approximation(weights: Sequence[float], cap: int, denominator: int | None = None):
    """Counts ``c_i >= 1`` with common denominator ``m <= cap``.

    Minimizes ``sum |a_i - c_i/m|`` over ``m`` (smallest ``m`` on ties) using
    largest-remainder apportionment for each ``m``.  Returns
    ``(m, counts, l1_error)``.
    """
    a = np.asarray(weights, dtype=float)
    l = len(a)
    if denominator is not None:
        candidates = [denominator]
        if denominator < l:
            raise BudgetError("denominator smaller than support size", m=denominator, support=l)
    else:
        if cap < l:
            raise BudgetError("denominator cap below support size", cap=cap, support=l)
        candidates = range(l, cap + 1)
    best = None
    for m in candidates:
        counts = _apportion(a, m)
        err = float(np.abs(a - counts / m).sum())
        if best is None or err < best[2] - 1e-15:
            best = (m, counts, err)
        if err <= 1e-14:
            break
    m, counts, err = best
    return m, [int(c) for c in counts], err


def _apportion(a, m):
    raw = a * m
    c = np.maximum(np.floor(raw + 1e-12), 1).astype(int)
    diff = m - int(c.sum())
    rem = raw - c
    while diff > 0:
        i = int(np.argmax(rem))
        c[i] += 1
        rem[i] -= 1
        diff -= 1
    while diff < 0:
        eligible = np.where(c > 1, rem, np.inf)
        i = int(np.argmin(eligible))
        c[i] -= 1
        rem[i] += 1
        diff += 1
    return c


@dataclass
class MeasureCertificate:
    denominator: int
    counts: list
    weight_error: float
    approximation_bound: float
    star: BarStarCertificate | None
    slack: float

    def to_dict(self):
        return {
            "denominator": self.denominator,
            "counts": self.counts,
            "weight_l1_error": self.weight_error,
            "approximation_bound": self.approximation_bound,
            "bar_star": None if self.star is None else self.star.to_dict(),
            "slack": self.slack,
        }


def bar_measure(measure, config: BarycenterConfig | None = None, *,
                denominator_cap: int = 64, target_tolerance: float | None = None,
                k: int | None = None, denominator: int | None = None):
    """Barycenter of a finitely supported probability measure.

    Weights are replaced by the closest rationals ``c_i/m`` with ``m`` at
    most ``denominator_cap`` and the result is ``bar_star`` of the tuple with
    ``c_i`` copies of each support point.  ``slack`` in the returned
    certificate bounds the distance to the exact barycenter: the footnote
    transport bound ``diam/2 * sum |a_i - b_i|`` plus the ``bar_star`` bound.
    """
    config = config or BarycenterConfig()
    space = measure.space
    support = list(measure.support)
    weights = np.asarray(measure.weights, dtype=float)
    if len(support) == 1:
        return support[0], MeasureCertificate(1, [1], 0.0, 0.0, None, 0.0)
    if config.linear_fast_path:
        engine = _Engine(space, config, None)
        mean = engine.linear(support, weights)
        if mean is not None:
            # the limit of rational approximations is the exact weighted mean
            return mean, MeasureCertificate(0, [], 0.0, 0.0, None, 0.0)
    m, counts, err = rational_approximation(weights, denominator_cap, denominator)
    approx = 0.5 * space.diameter(support) * err
    tup = [p for p, c in zip(support, counts) for _ in range(c)]
    point, star = bar_star(space, tup, target_tolerance, config, k=k)
    slack = approx + star.bound
    return point, MeasureCertificate(m, counts, err, approx, star, slack)
