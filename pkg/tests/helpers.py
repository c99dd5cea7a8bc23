"""Shared builders and brute-force oracles for the test suite."""

import cmath
import itertools
import math

from bubbletree.bubbles import BubbleConfiguration, renormalize
from bubbletree.curves import CompactnessParams, ModuliPoint
from bubbletree.nets import FiberMap, FiniteMetricSpace
from bubbletree.trees import RootedTree, Tree


def star_tree(k: int) -> RootedTree:
    """One vertex with the root edge and k external child edges."""
    edges = {j: (1,) for j in range(k + 1)}
    return RootedTree(Tree([1], edges), 0)


def chain_tree(levels: int, leaves: int = 2) -> RootedTree:
    """A path of vertices 1..levels, each padded with leaf edges.

    Vertex i is joined to i+1 by a full edge; every vertex gets enough
    extra external edges to reach degree >= 3.
    """
    boundary: dict[int, tuple[int, ...]] = {0: (1,)}
    nxt = 1
    for i in range(1, levels):
        boundary[nxt] = (i, i + 1)
        nxt += 1
    for i in range(1, levels + 1):
        for _ in range(leaves):
            boundary[nxt] = (i,)
            nxt += 1
    return RootedTree(Tree(list(range(1, levels + 1)), boundary), 0)


def default_params(tree: RootedTree, theta: float = 1 / 8) -> CompactnessParams:
    return CompactnessParams(
        theta=theta, tau=0.5, alpha={v: 1e-6 for v in tree.vertices}
    )


def random_member(
    tree: RootedTree,
    c: CompactnessParams,
    rng,
    zero_edges: tuple[int, ...] = (),
) -> ModuliPoint:
    """A random point satisfying the compact-subset inequalities.

    Child centers go on the circle of radius 0.9 theta with jittered,
    well-separated angles; rho moduli are log-uniform between alpha_v and
    the largest value the sibling-separation inequality allows; gluing
    moduli are uniform in (0, tau] except on the requested zero edges.
    """
    zr = {}
    for v in sorted(tree.vertices):
        kids = tree.child_edges(v)
        k = len(kids)
        centers = {}
        for idx, e in enumerate(kids):
            ang = 2.0 * math.pi * (idx + 0.4 * rng.uniform(-1.0, 1.0)) / k
            centers[e] = 0.9 * c.theta * cmath.exp(1j * ang)
        if k > 1:
            gap = min(
                abs(centers[kids[i]] - centers[kids[j]])
                for i in range(k)
                for j in range(i + 1, k)
            )
            cap = min(2.0 * c.theta, 0.5 * c.tau * gap)
        else:
            cap = 2.0 * c.theta
        for e in kids:
            lo = c.alpha_of(v)
            assert lo < cap, "alpha too large for the sampling ring"
            r = math.exp(rng.uniform(math.log(lo), math.log(cap)))
            phase = cmath.exp(2j * math.pi * rng.random())
            zr[(v, e)] = (centers[e], r * phase)
    gamma = {}
    for e in tree.full_edges:
        if e in zero_edges:
            gamma[e] = 0.0 + 0.0j
        else:
            mod = c.tau * math.exp(rng.uniform(math.log(1e-3), 0.0))
            gamma[e] = mod * cmath.exp(2j * math.pi * rng.random())
    return ModuliPoint(tree, gamma, zr)


# ---------------------------------------------------------------------------
# independent brute-force tree counter: labeled parent arrays + half-edge
# distributions, deduplicated by a locally defined canonical form
# ---------------------------------------------------------------------------


def _compositions(total, mins):
    k = len(mins)
    if k == 0:
        if total == 0:
            yield ()
        return

    def rec(i, rem):
        if i == k - 1:
            if rem >= mins[i]:
                yield (rem,)
            return
        for v in range(mins[i], rem + 1):
            for rest in rec(i + 1, rem - v):
                yield (v,) + rest

    yield from rec(0, total)


def _oracle_canon(children, halves, v):
    return (
        halves[v],
        tuple(sorted(_oracle_canon(children, halves, c) for c in children[v])),
    )


def oracle_count_stable_rooted(n):
    seen = set()
    for k in range(1, n + 1):
        for parents in itertools.product(*[range(i) for i in range(1, k)]):
            children = {v: [] for v in range(k)}
            for i, p in enumerate(parents, start=1):
                children[p].append(i)
            base = {
                v: len(children[v]) + (1 if v > 0 else 0) + (1 if v == 0 else 0)
                for v in range(k)
            }
            mins = [max(0, 3 - base[v]) for v in range(k)]
            if sum(mins) > n:
                continue
            for h in _compositions(n, mins):
                halves = {v: h[v] for v in range(k)}
                seen.add(_oracle_canon(children, halves, 0))
    return len(seen)


# ---------------------------------------------------------------------------
# random bubble configurations
# ---------------------------------------------------------------------------


def unit_cloud(rng, eps, size, head=1.0):
    """Points in the closed unit disc with 0 and a modulus-one point.

    Satellites sit inside the clustering ladder radius 0.4 (4 eps^3)^k of
    their center (in eps-disc units), so the recursion depth of the
    association is driven by the nesting generated here.  head tracks the
    cumulative scale; a level goes flat once nesting would sink satellite
    offsets below float resolution.
    """
    if size == 1:
        return [0j]
    k = min(size, rng.randrange(2, 5))
    ladder = (4.0 * eps**3) ** k / eps
    if size > k and head * 0.2 * ladder < 1e-12:
        k = size
    centers = [0j, cmath.exp(1j * rng.uniform(0.0, 2 * math.pi))]
    while len(centers) < k:
        cand = rng.uniform(0.3, 0.95) * cmath.exp(1j * rng.uniform(0.0, 2 * math.pi))
        if all(abs(cand - c) > 0.28 for c in centers):
            centers.append(cand)
    if k == size:
        return centers
    # the modulus-one point stays unexpanded so the supremum is pinned
    expandable = [i for i in range(k) if i != 1]
    counts = [1] * k
    for _ in range(size - k):
        counts[rng.choice(expandable)] += 1
    out = []
    for c, count in zip(centers, counts):
        if count == 1:
            out.append(c)
            continue
        radius = rng.uniform(0.2, 0.4) * ladder
        out.extend(c + radius * u for u in unit_cloud(rng, eps, count, head * radius))
    return out


def random_standard(rng, eps, size):
    pts = [eps * z for z in unit_cloud(rng, eps, size)]
    radius = {}
    for z in pts:
        gap = min(abs(z - q) for q in pts if q != z)
        radius[z] = rng.uniform(0.0, 0.999) * (eps * eps / 8.0) * gap
    out, _, _ = renormalize(BubbleConfiguration(tuple(pts), radius), eps)
    return out


# ---------------------------------------------------------------------------
# finite metric spaces and exhaustive Lipschitz families
# ---------------------------------------------------------------------------


def grid_space(values):
    return FiniteMetricSpace.from_points(list(values), lambda a, b: abs(a - b))


def all_lipschitz_maps(space_z, space_w, t, lam):
    fiber = tuple(range(space_z.n))
    out = []
    for values in itertools.product(range(space_w.n), repeat=space_z.n):
        ok = all(
            space_w.dist[values[i], values[j]] <= lam * space_z.dist[i, j]
            for i, j in itertools.combinations(fiber, 2)
        )
        if ok:
            out.append(FiberMap(t=t, fiber=fiber, values=values))
    return out
