"""Symmetric midpoints and bicombings built from midpoint assignments.

A midpoint assignment ``(x, y) -> x#y`` picks a metric midpoint for every
ordered pair.  Alternating ``x_i = x_{i-1} # y_{i-1}``,
``y_i = y_{i-1} # x_{i-1}`` drives both sequences to a common limit, which
is symmetric in ``x`` and ``y``.  Any midpoint assignment also extends to a
full bicombing on dyadic parameters by repeated midpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError, PrecisionError
from .spaces import (
    DEFAULT_TOLERANCE,
    Bicombing,
    MetricTree,
    NormedSpace,
    Space,
    VerificationReport,
    scaled,
)

MAX_DYADIC_DEPTH = 40


@dataclass(frozen=True)
class MidpointAssignment:
    space: Space
    rule: Callable
    name: str = "custom"
    symmetric: bool = False

    def __call__(self, x, y):
        return self.space.point(self.rule(x, y))


def canonical_midpoint(space: Space) -> MidpointAssignment:
    """``sigma_xy(1/2)`` of the canonical bicombing."""
    name = "tree" if isinstance(space, MetricTree) else "linear"
    return MidpointAssignment(space, lambda x, y: space.geodesic(x, y, 0.5), name, True)


def crafted_linf_midpoint(space: NormedSpace) -> MidpointAssignment:
    """Asymmetric midpoint rule on the sup-norm plane.

    For ``|x - y|`` dominated by axis ``i`` the midpoint set is a segment in
    the other axis ``j``.  The rule starts at the linear midpoint and moves
    along axis ``j`` toward ``x`` by half of ``min(|dy_j|, slack)``, where
    ``slack`` is the room left inside the midpoint set.  It is continuous
    and always returns a metric midpoint; whether it is conical is checked
    by :func:`midpoint_check`, never assumed.
    """
    if not (space.dim == 2 and space.p is not None and math.isinf(space.p)):
        raise DomainError("crafted assignment lives on the sup-norm plane")

    def rule(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = x - y
        i = 0 if abs(d[0]) >= abs(d[1]) else 1
        j = 1 - i
        D = abs(d[i])
        slack = 0.5 * (D - abs(d[j]))
        mid = 0.5 * (x + y)
        mid[j] += 0.5 * math.copysign(min(abs(d[j]), slack), d[j]) if d[j] != 0 else 0.0
        return mid

    return MidpointAssignment(space, rule, "crafted-linf", False)


def assignment_from_name(space: Space, name: str) -> MidpointAssignment:
    if name == "linear":
        if not isinstance(space, NormedSpace):
            raise DomainError("linear assignment needs a normed space")
        return canonical_midpoint(space)
    if name == "tree":
        if not isinstance(space, MetricTree):
            raise DomainError("tree assignment needs a tree")
        return canonical_midpoint(space)
    if name == "crafted-linf":
        if not isinstance(space, NormedSpace):
            raise DomainError("crafted-linf assignment needs the sup-norm plane")
        return crafted_linf_midpoint(space)
    raise DomainError("unknown midpoint assignment", assignment=name)


@dataclass
class SymmetricMidpointTrace:
    point: object
    iterations: int
    gaps: list = field(default_factory=list)
    monotone: bool = True
    identity_residual: float = 0.0

    def to_dict(self, space):
        return {
            "point": space.point_to_json(self.point),
            "iterations": self.iterations,
            "gaps": self.gaps[:64],
            "monotone": self.monotone,
            "identity_residual": self.identity_residual,
        }


def symmetric_midpoint(assignment: MidpointAssignment, x, y, tolerance=DEFAULT_TOLERANCE,
                       max_iterations=10**6, trace=False):
    """Common limit of the alternating midpoint sequences.

    Stops once ``d(x_i, y_i) <= tolerance * (1 + d(x, y))`` and returns
    ``x_i``.  With ``trace=True`` returns a :class:`SymmetricMidpointTrace`
    that also records the gap sequence and the largest deviation from
    ``d(x_i, x_j) = d(x_i, y_j) = d(x_i, y_i)/2`` for ``j > i`` (first 64
    iterates).
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    space = assignment.space
    xi, yi = space.point(x), space.point(y)
    tol = scaled(tolerance, space.distance(xi, yi))
    xs, ys = [xi], [yi]
    gap = space.distance(xi, yi)
    gaps = [gap]
    monotone = True
    it = 0
    while gap > tol:
        if it >= max_iterations:
            raise ConvergenceError("symmetric midpoint did not converge", gap=gap, iterations=it)
        xi, yi = assignment(xi, yi), assignment(yi, xi)
        new_gap = space.distance(xi, yi)
        if new_gap > gap + tol:
            monotone = False
        gap = new_gap
        it += 1
        if trace:
            gaps.append(gap)
            if len(xs) < 64:
                xs.append(xi)
                ys.append(yi)
    if not trace:
        return xi
    residual = 0.0
    for i in range(len(xs)):
        half = 0.5 * space.distance(xs[i], ys[i])
        for j in range(i + 1, len(xs)):
            residual = max(
                residual,
                abs(space.distance(xs[i], xs[j]) - half),
                abs(space.distance(xs[i], ys[j]) - half),
            )
    return SymmetricMidpointTrace(xi, it, gaps, monotone, residual)


def symmetrized(assignment: MidpointAssignment, tolerance=DEFAULT_TOLERANCE) -> MidpointAssignment:
    """The symmetric assignment ``x [] y`` derived from ``assignment``."""
    if assignment.symmetric:
        return assignment
    return MidpointAssignment(
        assignment.space,
        lambda x, y: symmetric_midpoint(assignment, x, y, tolerance),
        assignment.name + "-symmetric",
        True,
    )


def _snap(t, depth):
    m = round(t * (1 << depth))
    k = depth
    while k > 0 and m % 2 == 0:
        m //= 2
        k -= 1
    return m, k


def bicombing_from_midpoint(assignment: MidpointAssignment, dyadic_depth: int) -> Bicombing:
    """Extend a midpoint assignment to a bicombing on the dyadic grid.

    ``t`` is snapped to the nearest ``m / 2**dyadic_depth`` and the value is
    built from ``sigma(t) = sigma(t - 2**-k) # sigma(t + 2**-k)``, memoized
    within one evaluation.
    """
    if dyadic_depth < 1:
        raise ValueError("dyadic depth must be at least 1")
    if dyadic_depth > MAX_DYADIC_DEPTH:
        raise PrecisionError("dyadic grid finer than floating-point resolution",
                             depth=dyadic_depth, max_depth=MAX_DYADIC_DEPTH)

    def rule(x, y, t):
        m, k = _snap(t, dyadic_depth)
        cache = {(0, 0): x, (1, 0): y}

        def value(m, k):
            while k > 0 and m % 2 == 0:
                m //= 2
                k -= 1
            hit = cache.get((m, k))
            if hit is None:
                hit = assignment(value(m - 1, k), value(m + 1, k))
                cache[(m, k)] = hit
            return hit

        return value(m, k)

    return Bicombing(assignment.space, rule, assignment.symmetric,
                     f"dyadic[{assignment.name}, depth={dyadic_depth}]")


def midpoint_check(assignment: MidpointAssignment, sample_count=1000,
                   tolerance=DEFAULT_TOLERANCE, seed=0) -> VerificationReport:
    """Sample the midpoint property and the conical midpoint inequality."""
    if sample_count < 1:
        raise ValueError("sample_count must be positive")
    space = assignment.space
    rng = np.random.default_rng(seed)
    violations = []
    worst = 0.0
    for s in range(sample_count):
        x, y, x2, y2 = space.sample_points(rng, 4)
        dxy = space.distance(x, y)
        scale = max(dxy, space.distance(x2, y2), space.distance(x, x2), space.distance(y, y2))
        tol = scaled(tolerance, scale)
        mid = assignment(x, y)
        mid2 = assignment(x2, y2)
        checks = {
            "midpoint_left": abs(space.distance(x, mid) - 0.5 * dxy),
            "midpoint_right": abs(space.distance(mid, y) - 0.5 * dxy),
            "conical": space.distance(mid, mid2)
            - 0.5 * (space.distance(x, x2) + space.distance(y, y2)),
        }
        for name, excess in checks.items():
            worst = max(worst, excess)
            if excess > tol:
                violations.append({"sample": s, "check": name, "excess": float(excess)})
    return VerificationReport(not violations, sample_count, tolerance, float(worst), violations)
