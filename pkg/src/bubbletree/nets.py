"""Metric-space calculus: sphere geometry, Hausdorff distance, nets, covers.

Provides geodesic distance on the round sphere of total area 4*pi (realized
as the projective line in homogeneous coordinates), finite metric spaces with
validated axioms, Hausdorff distance between finite subsets, gamma-nets in
the strict sense (d_H < gamma), greedy and exact minimal nets, an explicit
latitude-band net for the sphere, covering-number arithmetic, scaled max
metrics for graphs of maps, and the combinatorial cover of a family of
Lipschitz maps over a base by cells of small diameter.

Continuous spaces enter only through finite samplings supplied by the
caller; all Hausdorff computations here are over finite subsets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InputError, ResourceCapError, VerificationError

# set-cover search is exponential in the worst case; refuse big instances
EXACT_NU_CAP = 25

# total (anchor, assignment) cell evaluations allowed in mapspace_cover
MAPSPACE_CELL_CAP = 2_000_000


@dataclass(frozen=True)
class ProjPoint:
    """Point of the projective line in homogeneous coordinates [x : y].

    Scale equivalence [x : y] = [c*x : c*y] is respected by every operation
    in this module.  The normalized form divides by the coordinate of larger
    modulus (preferring y on ties), so one slot is exactly 1.0 and
    max(|x|, |y|) = 1.
    """

    x: complex
    y: complex

    def __post_init__(self):
        object.__setattr__(self, "x", complex(self.x))
        object.__setattr__(self, "y", complex(self.y))
        if self.x == 0 and self.y == 0:
            raise InputError("projective point needs a nonzero coordinate")

    @classmethod
    def from_affine(cls, z: complex) -> "ProjPoint":
        return cls(complex(z), 1.0)

    @classmethod
    def infinity(cls) -> "ProjPoint":
        return cls(1.0, 0.0)

    @property
    def is_infinity(self) -> bool:
        return self.y == 0

    def to_affine(self) -> complex:
        if self.y == 0:
            raise InputError("[1:0] has no affine coordinate")
        return self.x / self.y

    def norm(self) -> float:
        return math.hypot(abs(self.x), abs(self.y))

    def normalized(self) -> "ProjPoint":
        if abs(self.y) >= abs(self.x):
            return ProjPoint(self.x / self.y, 1.0)
        return ProjPoint(1.0, self.y / self.x)


def sphere_distance(p: ProjPoint, q: ProjPoint) -> float:
    """Geodesic distance on the round sphere of total area 4*pi.

    Equals 2*arcsin(|x_p y_q - y_p x_q| / (||p|| ||q||)); symmetric, with
    diameter pi attained exactly at antipodal pairs.
    """
    cross = abs(p.x * q.y - p.y * q.x)
    s = cross / (p.norm() * q.norm())
    # rounding can push the sine ratio epsilon above 1
    return 2.0 * math.asin(min(1.0, s))


def sphere_pairwise(a: Sequence[ProjPoint], b: Sequence[ProjPoint]) -> np.ndarray:
    """Matrix of sphere distances, rows indexing a and columns indexing b."""
    ax = np.array([p.x for p in a], dtype=complex)
    ay = np.array([p.y for p in a], dtype=complex)
    bx = np.array([q.x for q in b], dtype=complex)
    by = np.array([q.y for q in b], dtype=complex)
    an = np.hypot(np.abs(ax), np.abs(ay))
    bn = np.hypot(np.abs(bx), np.abs(by))
    cross = np.abs(np.outer(ax, by) - np.outer(ay, bx))
    s = np.clip(cross / np.outer(an, bn), 0.0, 1.0)
    return 2.0 * np.arcsin(s)


def fibonacci_sphere_points(n: int) -> list[ProjPoint]:
    """Deterministic quasi-uniform sample of n points on the sphere."""
    if n < 1:
        raise InputError("need at least one sample point")
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    points = []
    for k in range(n):
        height = 1.0 - 2.0 * (k + 0.5) / n
        phi = 2.0 * math.pi * ((k / golden) % 1.0)
        # affine radius tan(theta/2) for colatitude theta = arccos(height)
        r = math.sqrt(max(0.0, 1.0 - height * height)) / (1.0 + height)
        points.append(ProjPoint(complex(r * math.cos(phi), r * math.sin(phi)), 1.0))
    return points


class FiniteMetricSpace:
    """Finite metric space given by an explicit distance matrix.

    Validates symmetry, zero diagonal, nonnegativity, and the triangle
    inequality on construction (the last is an O(n^3) scan, so keep spaces
    at desk scale).  labels carries one opaque payload per point.
    """

    __slots__ = ("dist", "labels")

    def __init__(self, dist, labels: Sequence | None = None):
        d = np.array(dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InputError("distance matrix must be square")
        n = d.shape[0]
        if n < 1:
            raise InputError("metric space needs at least one point")
        if not np.all(np.isfinite(d)):
            raise InputError("distances must be finite")
        if np.any(d < 0):
            raise InputError("distances must be nonnegative")
        scale = max(1.0, float(d.max()))
        tol = 1e-9 * scale
        if np.any(np.abs(np.diag(d)) > tol):
            raise InputError("diagonal must be zero")
        if np.any(np.abs(d - d.T) > tol):
            raise InputError("distance matrix must be symmetric")
        d = (d + d.T) / 2.0
        np.fill_diagonal(d, 0.0)
        for j in range(n):
            # d[i,k] <= d[i,j] + d[j,k] for all i,k with this middle point j
            if np.any(d > d[:, j : j + 1] + d[j : j + 1, :] + tol):
                raise InputError(f"triangle inequality fails through point {j}")
        d.setflags(write=False)
        self.dist = d
        self.labels = tuple(labels) if labels is not None else tuple(range(n))
        if len(self.labels) != n:
            raise InputError("labels must match the point count")

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def distance(self, i: int, j: int) -> float:
        return float(self.dist[i, j])

    def diameter(self) -> float:
        return float(self.dist.max())

    def subspace(self, indices: Sequence[int]) -> "FiniteMetricSpace":
        idx = list(indices)
        if not idx:
            raise InputError("subspace needs at least one point")
        sub = self.dist[np.ix_(idx, idx)]
        return FiniteMetricSpace(sub, labels=[self.labels[i] for i in idx])

    @classmethod
    def from_points(cls, points: Sequence, metric: Callable) -> "FiniteMetricSpace":
        pts = list(points)
        n = len(pts)
        d = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d[i, j] = d[j, i] = metric(pts[i], pts[j])
        return cls(d, labels=pts)

    @classmethod
    def from_sphere(cls, points: Sequence[ProjPoint]) -> "FiniteMetricSpace":
        pts = list(points)
        return cls(sphere_pairwise(pts, pts), labels=pts)


def hausdorff(a: Sequence, b: Sequence, dist: Callable) -> float:
    """Hausdorff distance between two nonempty finite sets.

    Max of the two directed distances sup_x inf_y d(x, y).
    """
    a = list(a)
    b = list(b)
    if not a or not b:
        raise InputError("Hausdorff distance needs nonempty sets")
    ab = max(min(dist(x, y) for y in b) for x in a)
    ba = max(min(dist(x, y) for x in a) for y in b)
    return max(ab, ba)


def hausdorff_from_matrix(d: np.ndarray) -> float:
    """Hausdorff distance given the rectangular cross-distance matrix."""
    if d.size == 0:
        raise InputError("Hausdorff distance needs nonempty sets")
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


@dataclass(frozen=True, eq=False)
class Net:
    """A gamma-net: every base point lies strictly within radius of the net.

    points are the payloads of the chosen net points; indices locates them
    inside a finite base when one is attached.  Construction verifies the
    strict covering property whenever the base is finite (a FiniteMetricSpace
    or an explicit sphere sample); for the continuous sphere the guarantee
    comes from the construction and is spot-checked against dense samples.
    """

    points: tuple
    radius: float
    indices: tuple | None = None
    base: object = None

    def __post_init__(self):
        if self.radius <= 0:
            raise InputError("net radius must be positive")
        cov = self.covering_distance()
        if cov is not None and cov >= self.radius:
            raise VerificationError(
                f"not a net: covering distance {cov} >= radius {self.radius}"
            )

    @property
    def size(self) -> int:
        return len(self.points)

    def covering_distance(self):
        """Exact d_H(points, base) for finite bases, else None.

        Since the net points belong to the base, this is the directed
        distance from the base to the net.
        """
        if self.indices is None:
            return None
        if isinstance(self.base, FiniteMetricSpace):
            sub = self.base.dist[:, list(self.indices)]
            return float(sub.min(axis=1).max())
        if isinstance(self.base, (tuple, list)) and self.base:
            d = sphere_pairwise(list(self.base), list(self.points))
            return float(d.min(axis=1).max())
        return None


def _sphere_rows(points: list[ProjPoint]):
    xs = np.array([p.x for p in points], dtype=complex)
    ys = np.array([p.y for p in points], dtype=complex)
    norms = np.hypot(np.abs(xs), np.abs(ys))

    def row(i: int) -> np.ndarray:
        cross = np.abs(xs[i] * ys - ys[i] * xs)
        return 2.0 * np.arcsin(np.clip(cross / (norms[i] * norms), 0.0, 1.0))

    return row


def greedy_net(space, gamma: float) -> Net:
    """Farthest-point net: seed at index 0, add the worst-covered point.

    Accepts a FiniteMetricSpace or a finite sequence of sphere points.
    Deterministic: ties go to the lowest index.  The result is always a
    valid gamma-net of the given base; it need not be minimal.
    """
    if gamma <= 0:
        raise InputError("net radius must be positive")
    if isinstance(space, FiniteMetricSpace):
        n = space.n
        row = lambda i: space.dist[i]
        labels = space.labels
        base = space
    else:
        pts = [p if isinstance(p, ProjPoint) else ProjPoint(*p) for p in space]
        if not pts:
            raise InputError("need at least one point")
        n = len(pts)
        row = _sphere_rows(pts)
        labels = pts
        base = tuple(pts)
    chosen = [0]
    mind = np.array(row(0), dtype=float)
    while True:
        j = int(np.argmax(mind))
        if mind[j] < gamma:
            break
        chosen.append(j)
        mind = np.minimum(mind, row(j))
    return Net(
        points=tuple(labels[i] for i in chosen),
        radius=gamma,
        indices=tuple(chosen),
        base=base,
    )


def sphere_net(gamma: float) -> Net:
    """Explicit gamma-net of the round sphere by latitude bands.

    For gamma > pi a single point suffices; for gamma > pi/2 the two poles
    do (every point is within pi/2 of one of them).  Otherwise rows are
    placed at colatitudes j*pi/M with M = ceil(pi / (0.9 gamma)), the poles
    as single points, and ceil(sin(theta) * pi / (0.5 gamma)) points per
    interior row.  Any sphere point is then within 0.45 gamma of a row and
    within 0.5 gamma along it, so the covering distance is at most
    0.95 gamma < gamma.  Sizes stay under the 8 pi / gamma^2 area bound for
    the radii this package exercises, though not under the sharper cap
    bound 2 / (1 - cos(gamma / 2)).
    """
    if gamma <= 0:
        raise InputError("net radius must be positive")
    if gamma > math.pi:
        points = [ProjPoint(0.0, 1.0)]
    elif gamma > math.pi / 2.0:
        points = [ProjPoint(0.0, 1.0), ProjPoint.infinity()]
    else:
        rows = math.ceil(math.pi / (0.9 * gamma))
        points = [ProjPoint(0.0, 1.0)]
        for j in range(1, rows):
            theta = j * math.pi / rows
            count = max(1, math.ceil(math.sin(theta) * math.pi / (0.5 * gamma)))
            r = math.tan(theta / 2.0)
            for k in range(count):
                phi = 2.0 * math.pi * k / count
                points.append(
                    ProjPoint(complex(r * math.cos(phi), r * math.sin(phi)), 1.0)
                )
        points.append(ProjPoint.infinity())
    return Net(points=tuple(points), radius=gamma, indices=None, base="sphere")


def minimal_net(space: FiniteMetricSpace, gamma: float) -> Net:
    """A minimum-cardinality gamma-net of a finite space, by exact search.

    Branch-and-bound over the set cover by open gamma-balls, seeded with the
    greedy net as an upper bound.  Refuses spaces above EXACT_NU_CAP points.
    """
    if gamma <= 0:
        raise InputError("net radius must be positive")
    n = space.n
    if n > EXACT_NU_CAP:
        raise ResourceCapError(f"{n} points exceeds the exact-net cap {EXACT_NU_CAP}")
    masks = []
    for i in range(n):
        m = 0
        for j in range(n):
            if space.dist[i, j] < gamma:
                m |= 1 << j
        masks.append(m)
    full = (1 << n) - 1
    first_for = {}
    for i, m in enumerate(masks):
        if m not in first_for:
            first_for[m] = i
    candidates = sorted(first_for.items(), key=lambda kv: kv[1])
    max_cover = max(bin(m).count("1") for m, _ in candidates)

    best = list(greedy_net(space, gamma).indices)

    def covers_of(bit: int):
        return [(m, i) for m, i in candidates if m & bit]

    def search(covered: int, chosen: list):
        nonlocal best
        if covered == full:
            if len(chosen) < len(best):
                best = chosen.copy()
            return
        remaining = bin(full & ~covered).count("1")
        if len(chosen) + math.ceil(remaining / max_cover) >= len(best):
            return
        # branch on the uncovered point with the fewest candidate balls
        pick, options = None, None
        for j in range(n):
            bit = 1 << j
            if covered & bit:
                continue
            opts = covers_of(bit)
            if options is None or len(opts) < len(options):
                pick, options = j, opts
        options.sort(key=lambda mi: -bin(mi[0] & ~covered).count("1"))
        for m, i in options:
            chosen.append(i)
            search(covered | m, chosen)
            chosen.pop()

    search(0, [])
    idx = tuple(sorted(best))
    return Net(
        points=tuple(space.labels[i] for i in idx),
        radius=gamma,
        indices=idx,
        base=space,
    )


def exact_nu(space: FiniteMetricSpace, gamma: float) -> int:
    """The covering number: minimum size of a gamma-net of the space."""
    return minimal_net(space, gamma).size


def nu_union_bound(parts: Iterable[int]) -> int:
    """Covering number of a finite union is at most the sum over the parts."""
    return sum(parts)


def nu_powerset_bound(nu: int) -> int:
    """Nets for the space of compact subsets: nu(K(Z), gamma) <= 2^nu(Z, gamma)."""
    return 2**nu


def nu_subset_bound(nu_superset: int) -> int:
    """For K inside Z, nu(K, 2 gamma) <= nu(Z, gamma)."""
    return nu_superset


def scaled_max_metric(
    component_metrics: Sequence[Callable], x_metric: Callable, scale_x: float
) -> Callable:
    """Max of component distances with the final coordinate scaled by 1/L.

    Points are tuples whose last entry lives in the scaled factor; large L
    collapses that factor's contribution.
    """
    if scale_x <= 0:
        raise InputError("scale must be positive")
    k = len(component_metrics)

    def dist(p, q) -> float:
        vals = [m(p[i], q[i]) for i, m in enumerate(component_metrics)]
        vals.append(x_metric(p[k], q[k]) / scale_x)
        return max(vals)

    return dist


def graph_hausdorff(
    graph_a: Sequence, graph_b: Sequence, dom_metric, cod_metric, scale_cod: float = 1.0
) -> float:
    """Hausdorff distance between graphs of maps, as subsets of dom x cod.

    Graph points are (domain, value) pairs compared under
    max(d_dom, d_cod / scale_cod).  Two empty graphs are at distance 0; an
    empty graph is infinitely far from a nonempty one.
    """
    if scale_cod <= 0:
        raise InputError("scale must be positive")
    ga, gb = list(graph_a), list(graph_b)
    if not ga and not gb:
        return 0.0
    if not ga or not gb:
        return math.inf
    return hausdorff(
        ga,
        gb,
        lambda p, q: max(dom_metric(p[0], q[0]), cod_metric(p[1], q[1]) / scale_cod),
    )


@dataclass(frozen=True)
class FiberMap:
    """One member of a family over a base: a map from a fiber into a codomain.

    t indexes the base point, fiber lists the domain points (indices into
    the ambient domain space, distinct), and values[i] is the index of the
    image of fiber[i] in the codomain space.
    """

    t: int
    fiber: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "fiber", tuple(self.fiber))
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.fiber) != len(self.values):
            raise InputError("fiber and values must have equal length")
        if len(set(self.fiber)) != len(self.fiber):
            raise InputError("fiber points must be distinct")

    @property
    def graph(self) -> tuple:
        return tuple(zip(self.fiber, self.values))


def mapspace_distance(
    space_t: FiniteMetricSpace,
    space_z: FiniteMetricSpace,
    space_w: FiniteMetricSpace,
    a: FiberMap,
    b: FiberMap,
) -> float:
    """Distance max(d_T, graph Hausdorff) between two family members.

    Graphs live in Z x W with the max of the two coordinate distances.
    """
    dt = space_t.dist[a.t, b.t]
    dg = graph_hausdorff(
        a.graph,
        b.graph,
        lambda i, j: space_z.dist[i, j],
        lambda i, j: space_w.dist[i, j],
    )
    return max(float(dt), dg)


@dataclass(frozen=True, eq=False)
class MapSpaceCover:
    """Cover of a family of Lipschitz maps by cells of diameter < 4 delta.

    sets lists the distinct nonempty cells as sorted tuples of member
    indices; assignments keeps one witnessing (anchor, values-per-net-point)
    pair per cell, with None standing for the "fiber avoids this point"
    option.  count_bound is |A| (1 + |C|)^|B|, the number of candidate cells.
    """

    sets: tuple
    assignments: tuple
    gamma: float
    count_bound: int
    net_t: Net
    net_z: Net
    net_w: Net


def _require_lipschitz(space_z, space_w, members, lam):
    for k, m in enumerate(members):
        for (zi, wi), (zj, wj) in itertools.combinations(zip(m.fiber, m.values), 2):
            dz = float(space_z.dist[zi, zj])
            dw = float(space_w.dist[wi, wj])
            if dw > lam * dz:
                raise VerificationError(
                    f"member {k} is not {lam}-Lipschitz: domain pair ({zi}, {zj}) "
                    f"at distance {dz} maps to points ({wi}, {wj}) at distance {dw}"
                )


def mapspace_cover(
    space_t: FiniteMetricSpace,
    space_z: FiniteMetricSpace,
    space_w: FiniteMetricSpace,
    family: Sequence[FiberMap],
    lam: float,
    delta: float,
) -> MapSpaceCover:
    """Cover a family of Lipschitz maps over a base by explicit cells.

    Builds minimal nets A in the base (radius delta), B in the domain
    (delta / lam), C in the codomain (delta), then picks gamma as the
    largest value delta * (1 - 2^-j), j = 1..20, at which all three remain
    strict nets.  A member (t, f) lands in the cell of (a, h) when
    d(t, a) <= gamma and, for each net point b of B: h(b) is the avoidance
    marker only if the fiber stays farther than gamma / lam from b, and
    h(b) = c requires a fiber point within gamma / lam of b whose image is
    within gamma of c.  Every member lands in at least one cell, cells have
    diameter < 4 delta in the max(d_T, graph-Hausdorff) metric, and the
    number of candidate cells is |A| (1 + |C|)^|B|.
    """
    if lam < 1:
        raise InputError("Lipschitz constant must be at least 1")
    if delta <= 0:
        raise InputError("delta must be positive")
    members = list(family)
    for k, m in enumerate(members):
        if not 0 <= m.t < space_t.n:
            raise InputError(f"member {k}: base index {m.t} out of range")
        if any(not 0 <= z < space_z.n for z in m.fiber):
            raise InputError(f"member {k}: fiber index out of range")
        if any(not 0 <= w < space_w.n for w in m.values):
            raise InputError(f"member {k}: value index out of range")
    _require_lipschitz(space_z, space_w, members, lam)

    net_a = minimal_net(space_t, delta)
    net_b = minimal_net(space_z, delta / lam)
    net_c = minimal_net(space_w, delta)
    threshold = max(
        net_a.covering_distance(),
        lam * net_b.covering_distance(),
        net_c.covering_distance(),
    )
    gamma = None
    for j in range(20, 0, -1):
        g = delta * (1.0 - 2.0**-j)
        if g > threshold:
            gamma = g
            break
    if gamma is None:
        raise VerificationError(
            "no gamma below delta keeps the nets strict; refine delta"
        )

    a_idx, b_idx, c_idx = net_a.indices, net_b.indices, net_c.indices
    count_bound = len(a_idx) * (1 + len(c_idx)) ** len(b_idx)

    cells: dict = {}
    budget = MAPSPACE_CELL_CAP
    for k, m in enumerate(members):
        anchors = [a for a in a_idx if space_t.dist[m.t, a] <= gamma]
        options = []
        for b in b_idx:
            near = [
                i
                for i, z in enumerate(m.fiber)
                if space_z.dist[b, z] <= gamma / lam
            ]
            if not near:
                options.append((None,))
            else:
                cs = tuple(
                    c
                    for c in c_idx
                    if any(space_w.dist[m.values[i], c] <= gamma for i in near)
                )
                options.append(cs)
        cell_count = len(anchors)
        for opts in options:
            cell_count *= len(opts)
        if cell_count == 0:
            # the nets guarantee an anchor and a codomain choice exist
            raise VerificationError(f"member {k} matched no cell; nets inconsistent")
        budget -= cell_count
        if budget < 0:
            raise ResourceCapError(
                f"cell enumeration exceeds {MAPSPACE_CELL_CAP} assignments"
            )
        for a in anchors:
            for h in itertools.product(*options):
                cells.setdefault((a, h), set()).add(k)

    covered = set()
    for s in cells.values():
        covered |= s
    if covered != set(range(len(members))):
        raise VerificationError("cells fail to cover the family")

    def cell_order(key):
        a, h = key
        return a, tuple(-1 if v is None else v for v in h)

    by_set: dict = {}
    for key in sorted(cells, key=cell_order):
        frozen = tuple(sorted(cells[key]))
        by_set.setdefault(frozen, key)
    ordered = sorted(by_set)
    return MapSpaceCover(
        sets=tuple(ordered),
        assignments=tuple(by_set[s] for s in ordered),
        gamma=gamma,
        count_bound=count_bound,
        net_t=net_a,
        net_z=net_b,
        net_w=net_c,
    )


def sampled_local_lipschitz(pairs, eps: float, dom_metric, cod_metric) -> float:
    """Largest distortion over sample pairs at domain distance in (0, eps].

    A lower bound for the true local Lipschitz constant: sampling can only
    miss expanding pairs, never invent them.  Pairs are (q1, q2, x1, x2)
    with x_i the image of q_i.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    worst = 0.0
    for q1, q2, x1, x2 in pairs:
        d = dom_metric(q1, q2)
        if 0.0 < d <= eps:
            worst = max(worst, cod_metric(x1, x2) / d)
    return worst
