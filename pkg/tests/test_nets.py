import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubbletree.errors import InputError, ResourceCapError, VerificationError
from helpers import all_lipschitz_maps, grid_space
from bubbletree.nets import (
    EXACT_NU_CAP,
    FiberMap,
    FiniteMetricSpace,
    Net,
    ProjPoint,
    exact_nu,
    fibonacci_sphere_points,
    graph_hausdorff,
    greedy_net,
    hausdorff,
    hausdorff_from_matrix,
    mapspace_cover,
    mapspace_distance,
    minimal_net,
    nu_powerset_bound,
    nu_subset_bound,
    nu_union_bound,
    sampled_local_lipschitz,
    scaled_max_metric,
    sphere_distance,
    sphere_net,
    sphere_pairwise,
)

# Frozen sizes of the latitude-band nets at the radii exercised below.
SPHERE_NET_SIZES = {0.5: 60, 1.0: 19, 2.0: 2}


# ---------------------------------------------------------------------------
# independent oracle: geodesic length by numeric integration of the round
# line element 2|dz| / (1 + |z|^2) along the great-circle path
# ---------------------------------------------------------------------------


def _embed(z: complex):
    s = 1.0 + abs(z) ** 2
    return np.array([2.0 * z.real / s, 2.0 * z.imag / s, (2.0 - s) / s])


def _chart(v) -> complex:
    return complex(v[0], v[1]) / (1.0 + v[2])


def integrated_distance(z: complex, w: complex, steps: int = 20000) -> float:
    u, v = _embed(z), _embed(w)
    dot = float(np.clip(np.dot(u, v), -1.0, 1.0))
    omega = math.acos(dot)
    if omega == 0.0:
        return 0.0
    ts = np.linspace(0.0, 1.0, steps + 1)
    arc = (np.sin((1.0 - ts)[:, None] * omega) * u + np.sin(ts[:, None] * omega) * v) / math.sin(omega)
    zs = [_chart(p) for p in arc]
    total = 0.0
    for a, b in zip(zs, zs[1:]):
        mid = (a + b) / 2.0
        total += 2.0 * abs(b - a) / (1.0 + abs(mid) ** 2)
    return total


def brute_hausdorff(a, b, dist):
    d_ab = max(min(dist(x, y) for y in b) for x in a)
    d_ba = max(min(dist(x, y) for x in a) for y in b)
    return max(d_ab, d_ba)


def random_metric_space(rng, n, labels=None):
    # random points in the plane give a genuine metric
    pts = [complex(rng.uniform(-5, 5), rng.uniform(-5, 5)) for _ in range(n)]
    return FiniteMetricSpace.from_points(pts, lambda p, q: abs(p - q))


def test_sphere_distance_antipodal_and_pole():
    assert sphere_distance(ProjPoint(1, 0), ProjPoint(0, 1)) == pytest.approx(math.pi)
    assert sphere_distance(ProjPoint(1, 1), ProjPoint(1, 0)) == pytest.approx(
        math.pi / 2
    )
    assert sphere_distance(ProjPoint(2, 2), ProjPoint(1, 1)) == 0.0


def test_sphere_distance_scale_invariance():
    p = ProjPoint(0.3 + 0.4j, 1.0)
    q = ProjPoint(-1.2, 0.5j)
    for c in (2.0, -3.5j, 0.1 + 0.9j):
        assert sphere_distance(ProjPoint(c * p.x, c * p.y), q) == pytest.approx(
            sphere_distance(p, q), abs=1e-14
        )


def test_sphere_distance_matches_integration_oracle():
    rng = random.Random(7)
    for _ in range(12):
        z = complex(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))
        w = complex(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))
        if abs(z) > 0.9 or abs(w) > 0.9 or abs(z - w) < 1e-3:
            continue
        direct = sphere_distance(ProjPoint.from_affine(z), ProjPoint.from_affine(w))
        assert direct == pytest.approx(integrated_distance(z, w), abs=1e-6)


def test_sphere_distance_triangle_inequality_bulk():
    rng = np.random.default_rng(3)
    raw = rng.normal(size=(10_000, 3, 4))
    for trip in raw:
        pts = [ProjPoint(complex(a, b), complex(c, d)) for a, b, c, d in trip]
        dab = sphere_distance(pts[0], pts[1])
        dbc = sphere_distance(pts[1], pts[2])
        dac = sphere_distance(pts[0], pts[2])
        assert dac <= dab + dbc + 1e-12


def test_projpoint_normalized_form():
    p = ProjPoint(3 + 4j, 1 - 2j).normalized()
    assert max(abs(p.x), abs(p.y)) == pytest.approx(1.0)
    assert p.x == 1.0  # larger-modulus slot becomes exactly one
    q = ProjPoint(1, -5j).normalized()
    assert q.y == 1.0
    with pytest.raises(InputError):
        ProjPoint(0, 0)
    with pytest.raises(InputError):
        ProjPoint(1, 0).to_affine()


@given(
    st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False),
    st.complex_numbers(max_magnitude=1e3, allow_nan=False),
    st.complex_numbers(min_magnitude=1e-2, max_magnitude=1e2, allow_nan=False),
)
def test_projpoint_normalization_scale_invariant(x, y, c):
    p = ProjPoint(x, y).normalized()
    q = ProjPoint(c * x, c * y).normalized()
    assert abs(p.x - q.x) <= 1e-9 * max(1.0, abs(p.x))
    assert abs(p.y - q.y) <= 1e-9 * max(1.0, abs(p.y))


def test_metric_space_validation():
    FiniteMetricSpace([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(InputError):
        FiniteMetricSpace([[0.0, 1.0], [2.0, 0.0]])  # asymmetric
    with pytest.raises(InputError):
        FiniteMetricSpace([[1.0]])  # nonzero diagonal
    with pytest.raises(InputError):
        FiniteMetricSpace([[0.0, -1.0], [-1.0, 0.0]])
    with pytest.raises(InputError):
        # 0-5 at distance 1 through the middle but 5 direct: triangle fails
        FiniteMetricSpace(
            [[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]]
        )
    with pytest.raises(InputError):
        FiniteMetricSpace(np.zeros((0, 0)))


def test_hausdorff_basics():
    line = lambda a, b: abs(a - b)
    assert hausdorff([0.0, 1.0], [0.0, 1.0], line) == 0.0
    assert hausdorff([0.0], [0.0, 3.0], line) == 3.0
    with pytest.raises(InputError):
        hausdorff([], [1.0], line)


def test_hausdorff_matches_bruteforce_oracle():
    rng = random.Random(19)
    space = random_metric_space(rng, 14)
    dist = lambda i, j: space.dist[i, j]
    for _ in range(30):
        a = rng.sample(range(space.n), rng.randint(1, space.n))
        b = rng.sample(range(space.n), rng.randint(1, space.n))
        assert hausdorff(a, b, dist) == brute_hausdorff(a, b, dist)
        d = space.dist[np.ix_(a, b)]
        assert hausdorff_from_matrix(d) == pytest.approx(hausdorff(a, b, dist))


@given(st.integers(0, 2**63), st.integers(2, 10), st.integers(1, 10))
@settings(max_examples=40, deadline=None)
def test_hausdorff_symmetry_and_identity(seed, na, nb):
    rng = random.Random(seed)
    space = random_metric_space(rng, 12)
    dist = lambda i, j: space.dist[i, j]
    a = rng.sample(range(space.n), na)
    b = rng.sample(range(space.n), nb)
    assert hausdorff(a, b, dist) == hausdorff(b, a, dist)
    assert hausdorff(a, a, dist) == 0.0


def test_greedy_net_single_point_when_radius_huge():
    rng = random.Random(5)
    space = random_metric_space(rng, 10)
    net = greedy_net(space, space.diameter() + 1.0)
    assert net.size == 1 and net.indices == (0,)


def test_greedy_net_covers_strictly():
    rng = random.Random(23)
    for _ in range(20):
        space = random_metric_space(rng, rng.randint(2, 18))
        gamma = rng.uniform(0.3, 4.0)
        net = greedy_net(space, gamma)
        # full-scan check of the strict covering property
        cov = max(min(space.dist[i, j] for j in net.indices) for i in range(space.n))
        assert cov < gamma
        assert net.covering_distance() == pytest.approx(cov)


def test_greedy_net_on_sphere_sample_meets_area_bound():
    sample = fibonacci_sphere_points(2000)
    net = greedy_net(sample, 1.0)
    assert net.size <= 25  # area bound floor(8 pi / gamma^2)
    assert net.covering_distance() < 1.0


def test_greedy_at_least_exact():
    rng = random.Random(31)
    for _ in range(10):
        space = random_metric_space(rng, 20)
        gamma = rng.uniform(0.5, 3.0)
        assert greedy_net(space, gamma).size >= exact_nu(space, gamma)


def test_exact_nu_small_cases():
    single = FiniteMetricSpace([[0.0]])
    assert exact_nu(single, 0.5) == 1
    pair = FiniteMetricSpace([[0.0, 5.0], [5.0, 0.0]])
    assert exact_nu(pair, 1.0) == 2
    assert exact_nu(pair, 6.0) == 1
    # strictness: radius equal to the separation still needs one per point
    assert exact_nu(pair, 5.0) == 2


def test_exact_nu_monotone_and_subset_bound():
    rng = random.Random(41)
    for _ in range(8):
        space = random_metric_space(rng, 15)
        g1 = rng.uniform(0.3, 2.0)
        g2 = g1 + rng.uniform(0.1, 2.0)
        assert exact_nu(space, g1) >= exact_nu(space, g2)
        sub = space.subspace(rng.sample(range(space.n), rng.randint(1, space.n)))
        assert exact_nu(sub, 2 * g1) <= exact_nu(space, g1)


def test_exact_nu_cap():
    rng = random.Random(43)
    space = random_metric_space(rng, EXACT_NU_CAP + 1)
    with pytest.raises(ResourceCapError):
        exact_nu(space, 1.0)


def test_minimal_net_is_valid_net():
    rng = random.Random(47)
    space = random_metric_space(rng, 17)
    net = minimal_net(space, 1.2)
    assert net.covering_distance() < 1.2
    assert set(net.indices) <= set(range(space.n))


def test_nu_arithmetic_bounds():
    assert nu_union_bound([3, 4]) == 7
    assert nu_powerset_bound(5) == 32
    assert nu_subset_bound(9) == 9


def test_union_bound_against_exact():
    rng = random.Random(53)
    for _ in range(6):
        space = random_metric_space(rng, 12)
        cut = rng.randint(1, 11)
        left = space.subspace(range(cut))
        right = space.subspace(range(cut, 12))
        gamma = rng.uniform(0.5, 3.0)
        bound = nu_union_bound([exact_nu(left, gamma), exact_nu(right, gamma)])
        assert exact_nu(space, gamma) <= bound


def test_net_rejects_bad_cover():
    space = FiniteMetricSpace([[0.0, 5.0], [5.0, 0.0]])
    with pytest.raises(VerificationError):
        Net(points=(0,), radius=1.0, indices=(0,), base=space)
    with pytest.raises(InputError):
        Net(points=(0,), radius=-1.0, indices=(0,), base=space)


def test_sphere_net_caps_and_coverage():
    sample = fibonacci_sphere_points(10_000)
    for gamma, expected in SPHERE_NET_SIZES.items():
        net = sphere_net(gamma)
        assert net.size == expected
        assert net.size <= math.floor(8.0 * math.pi / gamma**2)
        d = sphere_pairwise(list(net.points), sample)
        assert hausdorff_from_matrix(d) < gamma  # strict, both directions


def test_sphere_net_degenerate_radii():
    assert sphere_net(4.0).size == 1
    assert sphere_net(2.0).size == 2
    with pytest.raises(InputError):
        sphere_net(0.0)


def test_scaled_max_metric_basics():
    flat = lambda a, b: abs(a - b)
    d = scaled_max_metric([flat], flat, 2.0)
    assert d((1.0, 3.0), (1.0, 3.0)) == 0.0
    assert d((0.0, 4.0), (0.0, 0.0)) == 2.0
    assert d((5.0, 4.0), (0.0, 0.0)) == 5.0
    big = scaled_max_metric([flat], flat, 1e9)
    assert big((0.0, 7.0), (0.0, 0.0)) == pytest.approx(7e-9)
    with pytest.raises(InputError):
        scaled_max_metric([flat], flat, 0.0)


def test_graph_hausdorff_constant_offset():
    flat = lambda a, b: abs(a - b)
    rng = random.Random(61)
    for scale in (1.0, 2.0, 10.0):
        zs = [rng.uniform(-3, 3) for _ in range(12)]
        c = rng.uniform(0.01, 0.2)  # offset small so it dominates via z' = z
        ga = [(z, 0.0) for z in zs]
        gb = [(z, c) for z in zs]
        got = graph_hausdorff(ga, gb, flat, flat, scale_cod=scale)
        brute = brute_hausdorff(
            ga, gb, lambda p, q: max(flat(p[0], q[0]), flat(p[1], q[1]) / scale)
        )
        assert got == pytest.approx(brute)
        assert got <= c / scale + 1e-12


def test_graph_hausdorff_empty_graphs():
    flat = lambda a, b: abs(a - b)
    assert graph_hausdorff([], [], flat, flat) == 0.0
    assert graph_hausdorff([], [(0.0, 0.0)], flat, flat) == math.inf


def test_sampled_local_lipschitz():
    flat = lambda a, b: abs(a - b)
    const = [(0.0, 1.0, 5.0, 5.0), (1.0, 2.0, 5.0, 5.0)]
    assert sampled_local_lipschitz(const, 10.0, flat, flat) == 0.0
    iso = [(0.0, 1.0, 2.0, 3.0), (0.0, 0.5, 0.0, 0.5)]
    assert sampled_local_lipschitz(iso, 10.0, flat, flat) == 1.0
    rng = random.Random(67)
    doubling = []
    for _ in range(50):
        a, b = rng.uniform(-2, 2), rng.uniform(-2, 2)
        doubling.append((a, b, 2 * a, 2 * b))
    assert sampled_local_lipschitz(doubling, 10.0, flat, flat) == pytest.approx(
        2.0, abs=1e-12
    )
    # pairs beyond eps are ignored
    far = [(0.0, 5.0, 0.0, 50.0)]
    assert sampled_local_lipschitz(far, 1.0, flat, flat) == 0.0


# ---------------------------------------------------------------------------
# map-space cover: exhaustive oracle over all Lipschitz maps
# ---------------------------------------------------------------------------


def test_mapspace_cover_single_member():
    space_t = FiniteMetricSpace([[0.0]])
    space_z = grid_space([0.0, 1.0])
    space_w = grid_space([0.0, 1.0, 2.0])
    member = FiberMap(t=0, fiber=(0, 1), values=(0, 1))
    cover = mapspace_cover(space_t, space_z, space_w, [member], lam=1.0, delta=0.4)
    assert cover.sets == ((0,),)
    assert mapspace_distance(space_t, space_z, space_w, member, member) == 0.0


def test_mapspace_cover_exhaustive_family():
    lam, delta = 2.0, 0.6
    space_t = FiniteMetricSpace([[0.0]])
    space_z = grid_space([0.0, 0.5, 1.0, 1.5])
    space_w = grid_space([0.0, 1.0, 2.0])
    family = all_lipschitz_maps(space_z, space_w, 0, lam)
    assert len(family) > 1
    cover = mapspace_cover(space_t, space_z, space_w, family, lam=lam, delta=delta)

    everything = set()
    for cell in cover.sets:
        everything |= set(cell)
        for i, j in itertools.combinations(cell, 2):
            d = mapspace_distance(space_t, space_z, space_w, family[i], family[j])
            assert d < 4.0 * delta
    assert everything == set(range(len(family)))
    assert len(cover.sets) <= cover.count_bound
    assert cover.count_bound == cover.net_t.size * (1 + cover.net_w.size) ** (
        cover.net_z.size
    )
    assert 0.0 < cover.gamma < delta


def test_mapspace_cover_varying_base():
    lam, delta = 1.0, 0.7
    space_t = grid_space([0.0, 0.25, 2.0])
    space_z = grid_space([0.0, 1.0])
    space_w = grid_space([0.0, 1.0])
    family = []
    for t in range(space_t.n):
        family.extend(all_lipschitz_maps(space_z, space_w, t, lam))
    cover = mapspace_cover(space_t, space_z, space_w, family, lam=lam, delta=delta)
    for cell in cover.sets:
        for i, j in itertools.combinations(cell, 2):
            d = mapspace_distance(space_t, space_z, space_w, family[i], family[j])
            assert d < 4.0 * delta


def test_mapspace_cover_rejects_non_lipschitz():
    space_t = FiniteMetricSpace([[0.0]])
    space_z = grid_space([0.0, 0.1])
    space_w = grid_space([0.0, 5.0])
    bad = FiberMap(t=0, fiber=(0, 1), values=(0, 1))
    with pytest.raises(VerificationError) as info:
        mapspace_cover(space_t, space_z, space_w, [bad], lam=1.0, delta=0.5)
    assert "(0, 1)" in str(info.value)  # names the violating pair


def test_mapspace_cover_handles_empty_fiber():
    space_t = FiniteMetricSpace([[0.0]])
    space_z = grid_space([0.0, 1.0])
    space_w = grid_space([0.0, 1.0])
    empty = FiberMap(t=0, fiber=(), values=())
    full = FiberMap(t=0, fiber=(0, 1), values=(0, 1))
    cover = mapspace_cover(space_t, space_z, space_w, [empty, full], lam=1.0, delta=0.4)
    for cell in cover.sets:
        assert set(cell) in ({0}, {1})  # never mixed: that would break diameter


def test_fibermap_validation():
    with pytest.raises(InputError):
        FiberMap(t=0, fiber=(0, 0), values=(1, 1))
    with pytest.raises(InputError):
        FiberMap(t=0, fiber=(0, 1), values=(1,))


def test_fibonacci_points_are_spread():
    pts = fibonacci_sphere_points(500)
    d = sphere_pairwise(pts, pts)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 0.05  # no collisions, roughly uniform
