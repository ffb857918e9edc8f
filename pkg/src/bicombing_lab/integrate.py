"""Riemann integrals and ball convolution for maps into bicombed spaces.

The domain is always a box in a :class:`NormedSpace`, with Lebesgue
measure normalized to a probability.  A Riemann sum is the barycenter of
the measure that puts the cell measure on the image of each tag.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .barycenter import BarycenterConfig, bar_measure
from .errors import DomainError
from .spaces import NormedSpace, Space
from .transport import FiniteMeasure


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("BICOMBING_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _evaluate(f, tags):
    workers = max_workers()
    if workers == 1 or len(tags) < 64:
        return [f(t) for t in tags]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map preserves index order, so the result is schedule independent
        return list(pool.map(f, tags))


@dataclass(frozen=True)
class BoxDomain:
    lo: tuple
    hi: tuple
    norm: NormedSpace | None = None

    def __post_init__(self):
        lo = tuple(float(x) for x in np.atleast_1d(self.lo))
        hi = tuple(float(x) for x in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or any(b <= a for a, b in zip(lo, hi)):
            raise DomainError("box needs lo < hi in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.norm is None:
            object.__setattr__(self, "norm", NormedSpace.euclidean(len(lo)))
        elif self.norm.dim != len(lo):
            raise DomainError("domain norm has the wrong dimension")

    @property
    def dim(self):
        return len(self.lo)

    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))


@dataclass
class TaggedPartition:
    """Cells ``[lo_i, hi_i]`` with tags and probability weights."""

    domain: BoxDomain
    lows: np.ndarray
    highs: np.ndarray
    tags: np.ndarray
    weights: np.ndarray
    mesh: float = field(init=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) == 0 or abs(self.weights.sum() - 1.0) > 1e-9:
            raise DomainError("partition weights must sum to the domain measure")
        diam = self.domain.norm.norm(np.asarray(self.highs) - np.asarray(self.lows))
        self.mesh = float(np.max(diam))

    def __len__(self):
        return len(self.weights)


def uniform_partition(domain: BoxDomain, cells_per_axis, tags="center", seed=0) -> TaggedPartition:
    """Product grid; tags at cell centers or uniformly random inside cells."""
    n = domain.dim
    counts = np.broadcast_to(np.atleast_1d(cells_per_axis), (n,)).astype(int)
    edges = [np.linspace(a, b, c + 1) for a, b, c in zip(domain.lo, domain.hi, counts)]
    lows, highs = [], []
    for idx in itertools.product(*(range(c) for c in counts)):
        lows.append([edges[d][i] for d, i in enumerate(idx)])
        highs.append([edges[d][i + 1] for d, i in enumerate(idx)])
    lows, highs = np.array(lows), np.array(highs)
    if tags == "center":
        t = 0.5 * (lows + highs)
    elif tags == "random":
        rng = np.random.default_rng(seed)
        t = lows + rng.uniform(size=lows.shape) * (highs - lows)
    else:
        raise DomainError("tags must be 'center' or 'random'", tags=tags)
    vol = np.prod(highs - lows, axis=1)
    return TaggedPartition(domain, lows, highs, t, vol / vol.sum())


def partition_for_mesh(domain: BoxDomain, mesh: float, tags="center", seed=0) -> TaggedPartition:
    """Uniform partition whose cells have norm-diameter at most ``mesh``."""
    if not mesh > 0:
        raise DomainError("mesh must be positive")
    h = mesh / float(domain.norm.norm(np.ones(domain.dim)))
    counts = np.ceil((np.subtract(domain.hi, domain.lo) / h) - 1e-9).astype(int)
    return uniform_partition(domain, np.maximum(counts, 1), tags, seed)


def halve(partition: TaggedPartition, tags="center", seed=0) -> TaggedPartition:
    """Split every cell into ``2^n`` halves; tags per ``tags``."""
    rng = np.random.default_rng(seed)
    lows, highs = [], []
    for lo, hi in zip(partition.lows, partition.highs):
        mid = 0.5 * (lo + hi)
        for e in itertools.product((0, 1), repeat=len(lo)):
            e = np.array(e)
            lows.append(np.where(e == 0, lo, mid))
            highs.append(np.where(e == 0, mid, hi))
    lows, highs = np.array(lows), np.array(highs)
    t = 0.5 * (lows + highs) if tags == "center" else lows + rng.uniform(size=lows.shape) * (highs - lows)
    vol = np.prod(highs - lows, axis=1)
    return TaggedPartition(partition.domain, lows, highs, t, vol / vol.sum())


def _tag_measure(target: Space, images, weights):
    return FiniteMeasure(target, tuple(images), tuple(float(w) for w in weights))


def riemann_integral(f: Callable, partition: TaggedPartition, target: Space,
                     config: BarycenterConfig | None = None, **bar_options):
    """Barycenter of ``sum_i w_i * delta(f(tag_i))``; returns ``(point, certificate)``.

    ``bar_options`` are passed to :func:`bar_measure` (``k``,
    ``target_tolerance``, ``denominator``, ``denominator_cap``).
    """
    images = [target.point(p) for p in _evaluate(f, list(partition.tags))]
    measure = _tag_measure(target, images, partition.weights)
    return bar_measure(measure, config, **bar_options)


def integral_estimate_gap(f: Callable, g: Callable, partition: TaggedPartition, target: Space,
                          config: BarycenterConfig | None = None, k: int = 1):
    """``(lhs, rhs)`` for comparing the integrals of ``f`` and ``g``.

    ``lhs`` is the distance of the two Riemann integrals, ``rhs`` the
    Riemann sum of ``t -> d(f(t), g(t))``.  Both integrals use the same
    common denominator and duplication ``k`` so they are comparable.
    """
    tags = list(partition.tags)
    fi = [target.point(p) for p in _evaluate(f, tags)]
    gi = [target.point(p) for p in _evaluate(g, tags)]
    w = partition.weights
    rhs = float(sum(wi * target.distance(a, b) for wi, a, b in zip(w, fi, gi)))
    denominator = _common_denominator(w)
    opts = {"k": k, "denominator": denominator} if denominator else {"k": k}
    pf, _ = bar_measure(_tag_measure(target, fi, w), config, **opts)
    pg, _ = bar_measure(_tag_measure(target, gi, w), config, **opts)
    return target.distance(pf, pg), rhs


def _common_denominator(weights, cap=4096):
    # uniform cells give weights c/N; other partitions fall back to per-measure choice
    n = len(weights)
    counts = np.asarray(weights) * n
    if n <= cap and np.allclose(counts, np.round(counts), atol=1e-9):
        return n
    return None


# ---------------------------------------------------------------------------
# grid maps


@dataclass
class GridMap:
    """Samples of a map on ``origin + spacing * Z^n`` over a box of grid points."""

    origin: np.ndarray
    spacing: float
    shape: tuple
    values: dict
    target: Space
    domain_norm: NormedSpace
    lipschitz: float = field(init=False)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.shape = tuple(int(s) for s in self.shape)
        if self.spacing <= 0 or len(self.shape) != len(self.origin) or min(self.shape) < 2:
            raise DomainError("grid needs positive spacing and at least 2 points per axis")
        for idx in itertools.product(*(range(s) for s in self.shape)):
            if idx not in self.values:
                raise DomainError("grid table is not total", missing=list(idx))
            self.values[idx] = self.target.point(self.values[idx])
        self.lipschitz = self._adjacent_ratio()

    @classmethod
    def from_function(cls, f, origin, spacing, shape, target, domain_norm=None):
        origin = np.asarray(origin, dtype=float)
        domain_norm = domain_norm or NormedSpace.euclidean(len(origin))
        values = {
            idx: f(origin + spacing * np.asarray(idx, dtype=float))
            for idx in itertools.product(*(range(s) for s in shape))
        }
        return cls(origin, float(spacing), tuple(shape), values, target, domain_norm)

    @property
    def dim(self):
        return len(self.shape)

    @property
    def lo(self):
        return self.origin

    @property
    def hi(self):
        return self.origin + self.spacing * (np.asarray(self.shape) - 1)

    def _adjacent_ratio(self):
        worst = 0.0
        for axis in range(self.dim):
            step = self.spacing * float(self.domain_norm.norm(np.eye(self.dim)[axis]))
            for idx in itertools.product(*(range(s) for s in self.shape)):
                if idx[axis] + 1 >= self.shape[axis]:
                    continue
                nb = idx[:axis] + (idx[axis] + 1,) + idx[axis + 1:]
                worst = max(worst, self.target.distance(self.values[idx], self.values[nb]) / step)
        return worst

    def extension_lipschitz_bound(self) -> float:
        """Lipschitz bound of the cube extension in the domain norm.

        Moving along axis ``i`` by ``s`` shifts mass ``s / spacing`` between
        adjacent corners, so the corner measures move by at most
        ``sum_i |v_i| ||e_i|| * L`` in transport distance; the barycenter is
        1-Lipschitz for it.  The constant is the largest dual norm of the
        vectors ``(+-||e_i||)``.
        """
        scales = np.array([float(self.domain_norm.norm(e)) for e in np.eye(self.dim)])
        c = max(
            self.domain_norm.dual_norm(np.asarray(s) * scales)
            for s in itertools.product((-1.0, 1.0), repeat=self.dim)
        )
        return self.lipschitz * c

    def to_json(self):
        return {
            "origin": self.origin.tolist(),
            "spacing": self.spacing,
            "shape": list(self.shape),
            "values": [self.target.point_to_json(self.values[idx])
                       for idx in itertools.product(*(range(s) for s in self.shape))],
        }

    @classmethod
    def from_json(cls, obj, target, domain_norm=None):
        shape = tuple(obj["shape"])
        idxs = list(itertools.product(*(range(s) for s in shape)))
        vals = obj["values"]
        if len(vals) != len(idxs):
            raise DomainError("grid table size does not match its shape")
        origin = np.asarray(obj["origin"], dtype=float)
        domain_norm = domain_norm or NormedSpace.euclidean(len(origin))
        values = {idx: target.point_from_json(v) for idx, v in zip(idxs, vals)}
        return cls(origin, float(obj["spacing"]), shape, values, target, domain_norm)


def corner_weights(u: np.ndarray):
    """Multilinear weights ``prod_i (1 - e_i) - (1 - 2 e_i) u_i`` per corner ``e``."""
    out = []
    for e in itertools.product((0, 1), repeat=len(u)):
        w = 1.0
        for ei, ui in zip(e, u):
            w *= (1 - ei) - (1 - 2 * ei) * ui
        out.append((e, w))
    return out


def cube_extend(grid: GridMap, y, config: BarycenterConfig | None = None, cube=None, **bar_options):
    """Value at ``y`` of the barycentric cube extension of ``grid``.

    ``cube`` selects the lower corner index explicitly, which lets callers
    evaluate a shared face from either adjacent cube.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (grid.dim,):
        raise DomainError("point has the wrong dimension for this grid")
    rel = (y - grid.origin) / grid.spacing
    slack = 1e-12 * (1 + np.abs(rel))
    upper = np.asarray(grid.shape) - 1
    if (rel < -slack).any() or (rel > upper + slack).any():
        raise DomainError("point lies outside the grid's cubes", point=y.tolist())
    if cube is None:
        base = np.clip(np.floor(rel), 0, upper - 1).astype(int)
    else:
        base = np.asarray(cube, dtype=int)
        if (base < 0).any() or (base > upper - 1).any():
            raise DomainError("cube index outside the grid", cube=base.tolist())
    u = np.clip(rel - base, 0.0, 1.0)
    if ((rel - base) < -slack).any() or ((rel - base) > 1 + slack).any():
        raise DomainError("point does not lie in the requested cube", cube=base.tolist())
    support, weights = [], []
    for e, w in corner_weights(u):
        if w > 0.0:
            support.append(grid.values[tuple(base + np.asarray(e))])
            weights.append(w)
    total = sum(weights)
    measure = FiniteMeasure(grid.target, tuple(support), tuple(w / total for w in weights))
    point, _ = bar_measure(measure, config, **bar_options)
    return point


def ball_partition(center, radius: float, mesh: float, norm: NormedSpace, subdivision=None):
    """Cells of a grid centered at ``center`` clipped to the closed norm ball.

    Cells fully inside keep their volume; boundary cells get the fraction of
    an ``s^n`` sub-grid of sample centers that fall inside, and the centroid
    of those samples as tag.  Returns ``(lows, highs, tags, weights)`` with
    weights normalized.
    """
    center = np.asarray(center, dtype=float)
    n = len(center)
    if subdivision is None:
        subdivision = {1: 1024, 2: 32, 3: 8}.get(n, 4)
    h = mesh / float(norm.norm(np.ones(n)))
    reach = np.array([norm.dual_norm(e) for e in np.eye(n)]) * radius
    half = np.ceil(reach / h - 1e-12).astype(int)
    axes = [center[d] + h * np.arange(-half[d], half[d]) for d in range(n)]
    lows = np.array(list(itertools.product(*axes))).reshape(-1, n)
    highs = lows + h
    corners = np.array(list(itertools.product((0, 1), repeat=n)))
    tol = 1e-12 * (1 + radius)
    inside_all = np.ones(len(lows), dtype=bool)
    for e in corners:
        pts = np.where(e == 1, highs, lows)
        inside_all &= norm.norm(pts - center) <= radius + tol
    if norm.is_monotone:
        nearest = np.clip(center, lows, highs)
        outside = norm.norm(nearest - center) > radius + tol
    else:
        outside = np.zeros(len(lows), dtype=bool)
    vol = h ** n
    offs = (np.array(list(itertools.product(range(subdivision), repeat=n))) + 0.5) / subdivision
    out_l, out_h, out_t, out_w = [], [], [], []
    for i in range(len(lows)):
        if outside[i]:
            continue
        if inside_all[i]:
            out_l.append(lows[i]); out_h.append(highs[i])
            out_t.append(0.5 * (lows[i] + highs[i])); out_w.append(vol)
            continue
        samples = lows[i] + offs * h
        mask = norm.norm(samples - center) <= radius + tol
        if not mask.any():
            continue
        out_l.append(lows[i]); out_h.append(highs[i])
        out_t.append(samples[mask].mean(axis=0)); out_w.append(vol * mask.mean())
    w = np.array(out_w)
    return np.array(out_l), np.array(out_h), np.array(out_t), w / w.sum()


@dataclass
class ConvolutionCertificate:
    cells: int
    mesh: float
    radius: float
    lipschitz_bound: float
    slack: float

    def to_dict(self):
        return dict(self.__dict__)


def convolve(grid: GridMap, x, radius: float, mesh: float,
             config: BarycenterConfig | None = None, subdivision=None, **bar_options):
    """Average of the cube-extended ``grid`` over the ball ``B(x, radius)``.

    Returns ``(point, certificate)``; the integral uses normalized Lebesgue
    measure on the ball, discretized at ``mesh``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (grid.dim,):
        raise DomainError("center has the wrong dimension for this grid")
    if not (radius > 0 and mesh > 0):
        raise DomainError("radius and mesh must be positive")
    norm = grid.domain_norm
    reach = np.array([norm.dual_norm(e) for e in np.eye(grid.dim)]) * radius
    tol = 1e-12 * (1 + np.abs(x))
    if (x - reach < grid.lo - tol).any() or (x + reach > grid.hi + tol).any():
        raise DomainError("ball is not contained in the extended map's domain",
                          center=x.tolist(), radius=radius)
    _, _, tags, weights = ball_partition(x, radius, mesh, norm, subdivision)
    tags = np.clip(tags, grid.lo, grid.hi)
    images = _evaluate(lambda t: cube_extend(grid, t, config), list(tags))
    measure = _tag_measure(grid.target, images, weights)
    point, cert = bar_measure(measure, config, **bar_options)
    return point, ConvolutionCertificate(len(weights), mesh, radius,
                                         grid.extension_lipschitz_bound(), cert.slack)


def modulus_of_continuity(f: Callable, domain: BoxDomain, target: Space, delta: float,
                          samples=2000, seed=0) -> float:
    """Empirical ``sup d(f(a), f(b))`` over sampled pairs with ``|a - b| <= delta``."""
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(domain.lo), np.asarray(domain.hi)
    worst = 0.0
    for _ in range(samples):
        a = rng.uniform(lo, hi)
        v = rng.normal(size=domain.dim)
        v *= delta / float(domain.norm.norm(v))
        b = np.clip(a + v, lo, hi)
        worst = max(worst, target.distance(target.point(f(a)), target.point(f(b))))
    return worst
