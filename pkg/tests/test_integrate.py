import numpy as np
import pytest

from bicombing_lab.barycenter import BarycenterConfig
from bicombing_lab.errors import DomainError
from bicombing_lab.integrate import (
    BoxDomain,
    GridMap,
    ball_partition,
    convolve,
    corner_weights,
    cube_extend,
    halve,
    integral_estimate_gap,
    modulus_of_continuity,
    partition_for_mesh,
    riemann_integral,
    uniform_partition,
)
from bicombing_lab.spaces import NormedSpace

UNIT = BoxDomain((0.0,), (1.0,))
SQUARE = BoxDomain((0.0, 0.0), (1.0, 1.0))
LINE = NormedSpace.euclidean(1)


def test_partitions():
    p = uniform_partition(SQUARE, 4)
    assert len(p) == 16
    assert p.weights.sum() == pytest.approx(1.0)
    assert p.mesh == pytest.approx(np.sqrt(2) / 4)
    assert len(halve(p)) == 64
    assert halve(p).mesh == pytest.approx(p.mesh / 2)
    q = partition_for_mesh(UNIT, 0.1)
    assert q.mesh <= 0.1 + 1e-12 and len(q) == 10
    r = uniform_partition(SQUARE, (2, 3), tags="random", seed=4)
    assert ((r.tags >= r.lows) & (r.tags <= r.highs)).all()
    with pytest.raises(DomainError):
        BoxDomain((0.0,), (0.0,))
    with pytest.raises(DomainError):
        uniform_partition(UNIT, 3, tags="left")


def test_constant_map(tripod):
    y = tripod.vertex("y")
    p, _ = riemann_integral(lambda t: y, uniform_partition(SQUARE, 3, "random"), tripod)
    assert p == y


def test_identity_on_square(plane):
    p, cert = riemann_integral(lambda t: t, uniform_partition(SQUARE, 4), plane)
    assert p == pytest.approx([0.5, 0.5], abs=1e-12)
    assert cert.slack == 0.0


@pytest.mark.parametrize("cells", [4, 16, 64, 256])
def test_identity_on_interval_random_tags(cells):
    p, _ = riemann_integral(lambda t: t, uniform_partition(UNIT, cells, "random", seed=cells), LINE)
    assert abs(p[0] - 0.5) <= 1.0 / cells


def test_threaded_evaluation_is_deterministic(monkeypatch):
    part = uniform_partition(UNIT, 200, "random", seed=1)
    serial, _ = riemann_integral(lambda t: t ** 2, part, LINE)
    monkeypatch.setenv("BICOMBING_LAB_THREADS", "4")
    threaded, _ = riemann_integral(lambda t: t ** 2, part, LINE)
    assert serial[0] == threaded[0]
    assert serial[0] == pytest.approx(1 / 3, abs=1e-4)


def test_estimate_gap_examples(plane, linf):
    part = uniform_partition(SQUARE, 3, "random", seed=2)
    f = lambda t: np.array([np.sin(3 * t[0]), t[1] ** 2])  # noqa: E731
    assert integral_estimate_gap(f, f, part, plane) == (0.0, 0.0)
    v = np.array([0.3, -0.4])
    lhs, rhs = integral_estimate_gap(f, lambda t: f(t) + v, part, linf)
    assert lhs == pytest.approx(0.4) and rhs == pytest.approx(0.4)


def test_estimate_gap_tree_maps(tripod):
    rng = np.random.default_rng(7)
    palette = [tripod.vertex(v) for v in "xyzm"]
    part = uniform_partition(UNIT, 8)
    for _ in range(5):
        fi, gi = rng.integers(len(palette), size=8), rng.integers(len(palette), size=8)
        f = lambda t, c=fi: palette[c[min(int(t[0] * 8), 7)]]  # noqa: E731
        g = lambda t, c=gi: palette[c[min(int(t[0] * 8), 7)]]  # noqa: E731
        lhs, rhs = integral_estimate_gap(f, g, part, tripod)
        assert lhs <= rhs + 1e-9


def test_corner_weights():
    w = dict(corner_weights(np.array([0.25, 0.5])))
    assert w[(0, 0)] == pytest.approx(0.375)
    assert w[(1, 1)] == pytest.approx(0.125)
    assert sum(w.values()) == pytest.approx(1.0)


def test_cube_extend_examples(plane, tripod):
    grid = GridMap.from_function(lambda t: t * 4.0, [0.0], 1.0, [2], LINE)
    assert cube_extend(grid, [0.25]) == pytest.approx([1.0])
    square = GridMap.from_function(lambda t: np.array([t[0] ** 2, t[0] * t[1]]), [0, 0], 1.0, [3, 3], plane)
    assert cube_extend(square, [1.0, 2.0]) == pytest.approx(square.values[(1, 2)])
    corners = [square.values[(i, j)] for i in (1, 2) for j in (0, 1)]
    assert cube_extend(square, [1.5, 0.5]) == pytest.approx(np.mean(corners, axis=0))
    tgrid = GridMap.from_function(
        lambda t: tripod.vertex("xyzm"[int(round(t[0]))]), [0.0], 1.0, [4], tripod
    )
    mid = cube_extend(tgrid, [0.5])
    assert tripod.distance(mid, tripod.geodesic(tripod.vertex("x"), tripod.vertex("y"), 0.5)) <= 1e-12
    with pytest.raises(DomainError):
        cube_extend(grid, [1.5])


def test_cube_extend_shared_face_agrees(plane):
    grid = GridMap.from_function(lambda t: np.array([t[0] * t[1], t[1]]), [0, 0], 0.5, [3, 3], plane)
    y = [0.5, 0.7]
    a = cube_extend(grid, y, cube=(0, 1))
    b = cube_extend(grid, y, cube=(1, 1))
    assert a == pytest.approx(b)


def test_grid_json_round_trip(tripod):
    grid = GridMap.from_function(lambda t: tripod.vertex("xyz"[int(round(t[0])) % 3]), [0.0], 1.0, [4], tripod)
    again = GridMap.from_json(grid.to_json(), tripod)
    assert again.values == grid.values
    assert again.lipschitz == grid.lipschitz == pytest.approx(3.0)


def test_ball_partition_is_symmetric():
    for norm in (NormedSpace.euclidean(2), NormedSpace.sup(2), NormedSpace.lp(2, 1)):
        lows, highs, tags, w = ball_partition([0.0, 0.0], 1.0, 2.0**-5, norm)
        assert (norm.norm(tags) <= 1.0 + 1e-12).all()
        assert w.sum() == pytest.approx(1.0)
        # symmetric ball: tags average to the center
        assert np.abs((w[:, None] * tags).sum(axis=0)).max() <= 1e-9


def test_convolve_oracles():
    grid = GridMap.from_function(lambda t: np.abs(t), [-2.0], 0.25, [17], LINE)
    p, cert = convolve(grid, [0.0], 1.0, 2.0**-6)
    assert p == pytest.approx([0.5], abs=1e-3)
    assert cert.lipschitz_bound == pytest.approx(1.0)
    const = GridMap.from_function(lambda t: np.array([2.0, -1.0]), [0, 0], 0.5, [5, 5], NormedSpace.euclidean(2))
    q, _ = convolve(const, [1.0, 1.0], 0.5, 2.0**-3)
    assert q == pytest.approx([2.0, -1.0])


def test_convolve_linear_map_sup_norm_ball():
    A = np.array([[1.0, 2.0], [-0.5, 0.25]])
    norm = NormedSpace.sup(2)
    grid = GridMap.from_function(lambda t: A @ t, [-1, -1], 0.5, [5, 5], NormedSpace.euclidean(2), norm)
    x = np.array([0.2, -0.1])
    p, cert = convolve(grid, x, 0.5, 2.0**-4)
    assert p == pytest.approx(A @ x, abs=1e-9)
    assert cert.lipschitz_bound >= grid.lipschitz


def test_convolve_ball_must_fit():
    grid = GridMap.from_function(lambda t: t, [0.0], 1.0, [3], LINE)
    with pytest.raises(DomainError):
        convolve(grid, [0.5], 1.0, 0.1)


def test_convolve_tree_target_moves_little(tripod):
    names = "xmymz"
    grid = GridMap.from_function(lambda t: tripod.vertex(names[int(round(t[0]))]), [0.0], 1.0, [5], tripod)
    x = np.array([2.0])
    p, cert = convolve(grid, x, 0.5, 2.0**-3, BarycenterConfig())
    assert tripod.distance(p, cube_extend(grid, x)) <= cert.lipschitz_bound * 0.5 + cert.slack


def test_modulus_of_continuity():
    omega = modulus_of_continuity(lambda t: 3 * t, UNIT, LINE, 0.1, samples=200)
    assert omega <= 0.3 + 1e-12
    assert omega >= 0.2
