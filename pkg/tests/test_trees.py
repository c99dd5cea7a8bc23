import itertools
import random

import pytest

from bubbletree import trees
from helpers import oracle_count_stable_rooted
from bubbletree.errors import ResourceCapError
from bubbletree.trees import (
    Marking,
    RootedTree,
    Tree,
    TreeError,
    canonical_key,
    edge_counts,
    enumerate_stable_rooted,
    nearest_common_ancestor,
    orient,
    positive_path,
    reglue,
    split,
    tree_count_bound,
)

# Counts for n = 2..8 frozen from the brute-force oracle below.
EXPECTED_COUNTS = {2: 1, 3: 2, 4: 5, 5: 12, 6: 33, 7: 90, 8: 261}


def one_vertex_tree(n_half=3):
    boundary = {e: (0,) for e in range(n_half)}
    return RootedTree(Tree([0], boundary), 0)


def chain_tree():
    # v0 --e1-- v1, root half edge e0 at v0, half edges e2, e3 at v1
    t = Tree([0, 1], {0: (0,), 1: (0, 1), 2: (1,), 3: (1,), 4: (0,)})
    return RootedTree(t, 0)


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def test_enumeration_counts_match_oracle():
    for n in range(2, 8):
        assert len(enumerate_stable_rooted(n)) == oracle_count_stable_rooted(n)


def test_enumeration_counts_frozen():
    for n, expected in EXPECTED_COUNTS.items():
        if n <= 7:
            assert len(enumerate_stable_rooted(n)) == expected


def test_enumeration_outputs_valid():
    for n in range(2, 8):
        ts = enumerate_stable_rooted(n)
        keys = set()
        for t in ts:
            assert t.is_stable()
            assert len(t.half_edges) == n + 1
            keys.add(canonical_key(t))
        assert len(keys) == len(ts)


def test_enumeration_bounds():
    for n in range(2, 8):
        count = len(enumerate_stable_rooted(n))
        cat, closed = tree_count_bound(n)
        assert count <= cat
        assert cat <= closed * (1 + 1e-12)


def test_enumeration_range_errors():
    with pytest.raises(TreeError):
        enumerate_stable_rooted(1)
    with pytest.raises(ResourceCapError):
        enumerate_stable_rooted(trees.ENUMERATION_CAP + 1)


def test_count_bound_values():
    assert tree_count_bound(3)[0] == 10
    assert tree_count_bound(2)[0] == 2
    assert tree_count_bound(6)[0] == 2112


# ---------------------------------------------------------------------------
# edge counts
# ---------------------------------------------------------------------------


def test_edge_count_identities_on_enumerated():
    for n in range(2, 8):
        for t in enumerate_stable_rooted(n):
            rep = edge_counts(t.tree)
            assert rep.n_vertices == rep.n_internal + 1
            assert rep.degree_sum == rep.n_external + 2 * rep.n_internal
            assert rep.chain_holds
            maximal = all(t.degree(v) == 3 for v in t.vertices)
            assert rep.equality_throughout == maximal


def test_edge_count_examples():
    rep = edge_counts(one_vertex_tree(3).tree)
    assert (rep.n_vertices, rep.n_internal, rep.n_external, rep.degree_sum) == (1, 0, 3, 3)
    assert rep.equality_throughout
    rep = edge_counts(chain_tree().tree)
    assert (rep.n_vertices, rep.n_internal, rep.n_external, rep.degree_sum) == (2, 1, 4, 6)
    assert rep.equality_throughout


# ---------------------------------------------------------------------------
# orientation
# ---------------------------------------------------------------------------


def test_orientation_trivial_examples():
    t = one_vertex_tree(1)
    assert orient(t)[0] == {0: +1}

    c = RootedTree(Tree([0, 1], {0: (0,), 1: (0, 1), 2: (1,), 3: (1,)}), 0)
    signs = orient(c)[1]
    assert signs == {0: -1, 1: +1}


def _all_valid_orientations(t: RootedTree):
    """Exhaustive scan over sign assignments, for small trees only."""
    edges = t.edges
    choices = []
    for e in edges:
        ends = t.tree.boundary[e]
        if len(ends) == 1:
            choices.append([{ends[0]: +1}, {ends[0]: -1}])
        else:
            u, v = ends
            choices.append([{u: +1, v: -1}, {u: -1, v: +1}])
    valid = []
    for combo in itertools.product(*choices):
        assign = dict(zip(edges, combo))
        if assign[t.root_edge][t.root_vertex] != +1:
            continue
        ok = True
        for v in t.vertices:
            pos = sum(
                1 for e in edges if v in t.tree.boundary[e] and assign[e][v] == +1
            )
            if pos != 1:
                ok = False
                break
        if ok:
            valid.append(assign)
    return valid


def test_orientation_unique_exhaustive():
    samples = [one_vertex_tree(2), one_vertex_tree(4), chain_tree()]
    samples += [t for t in enumerate_stable_rooted(3)]
    for t in samples:
        assert len(t.edges) <= 5
        valid = _all_valid_orientations(t)
        assert len(valid) == 1
        assert valid[0] == orient(t)


def test_orientation_on_random_tree():
    rng = random.Random(7)
    vertices = list(range(10))
    boundary = {}
    eid = 0
    boundary[eid] = (0,)
    root = eid
    eid += 1
    for v in range(1, 10):
        boundary[eid] = (rng.randrange(v), v)
        eid += 1
    for _ in range(6):
        boundary[eid] = (rng.randrange(10),)
        eid += 1
    t = RootedTree(Tree(vertices, boundary), root)
    for v in t.vertices:
        assert t.parent_edge[v] in t.edges
    signs = orient(t)
    for v in t.vertices:
        pos = [e for e, s in signs.items() if s.get(v) == +1]
        assert len(pos) == 1 and pos[0] == t.parent_edge[v]


# ---------------------------------------------------------------------------
# ancestors and paths
# ---------------------------------------------------------------------------


def test_nca_examples():
    c = chain_tree()
    assert nearest_common_ancestor(c, 1, 1) == 1
    assert nearest_common_ancestor(c, 0, 1) == 0

    # star: root v0 with two full edges to v1, v2
    star = RootedTree(
        Tree(
            [0, 1, 2],
            {0: (0,), 1: (0, 1), 2: (0, 2), 3: (1,), 4: (1,), 5: (2,), 6: (2,), 7: (0,)},
        ),
        0,
    )
    assert nearest_common_ancestor(star, 1, 2) == 0
    assert nearest_common_ancestor(star, 1, 0) == 0


def test_positive_path():
    # chain v0 -> v1 -> v2
    t = RootedTree(
        Tree(
            [0, 1, 2],
            {0: (0,), 1: (0, 1), 2: (1, 2), 3: (0,), 4: (1,), 5: (2,), 6: (2,)},
        ),
        0,
    )
    assert positive_path(t, 0, 0) == (0,)
    assert positive_path(t, 0, 2) == (0, 1, 2)
    assert positive_path(t, 2, 0) is None
    assert trees.path_edges(t, (0, 1, 2)) == (1, 2)


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


def test_split_empty():
    t = chain_tree()
    pieces = split(t, Marking(frozenset()), [])
    assert len(pieces) == 1
    assert canonical_key(pieces[0].tree) == canonical_key(t)


def test_split_chain():
    t = chain_tree()
    pieces = split(t, Marking(frozenset()), [1])
    assert len(pieces) == 2
    by_root_vertex = {p.tree.root_vertex: p for p in pieces}
    assert set(by_root_vertex) == {0, 1}
    # component of the positive endpoint is rooted at the new half edge
    far = by_root_vertex[1]
    assert far.edge_origin[far.tree.root_edge] == (1, 1)
    near = by_root_vertex[0]
    assert near.tree.root_edge == 0
    # both replacement half edges are marked
    for p in pieces:
        new_halves = {e for e, o in p.edge_origin.items() if isinstance(o, tuple)}
        assert new_halves <= p.marking.marked


def test_split_preserves_degrees_and_reglues():
    rng = random.Random(11)
    for n in range(3, 8):
        for t in enumerate_stable_rooted(n):
            full = list(t.full_edges)
            if not full:
                continue
            cut = rng.sample(full, rng.randint(1, len(full)))
            pieces = split(t, Marking(frozenset()), cut)
            assert len(pieces) == len(cut) + 1
            degs = {}
            for p in pieces:
                for v in p.tree.vertices:
                    degs[v] = p.tree.degree(v)
            assert degs == {v: t.degree(v) for v in t.vertices}
            glued = reglue(pieces)
            assert canonical_key(glued) == canonical_key(t)


def test_split_rejects_half_edge():
    t = chain_tree()
    with pytest.raises(TreeError):
        split(t, Marking(frozenset()), [2])


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_tree_validation_errors():
    with pytest.raises(TreeError):
        Tree([0, 1, 2], {0: (0, 1), 1: (1, 2), 2: (2, 0)})  # cycle
    with pytest.raises(TreeError):
        Tree([0, 1], {0: (0,), 1: (1,)})  # disconnected
    with pytest.raises(TreeError):
        Tree([0], {0: (0, 0)})  # loop
    with pytest.raises(TreeError):
        Tree([0], {0: ()})  # no endpoints
    with pytest.raises(TreeError):
        RootedTree(Tree([0, 1], {0: (0, 1), 1: (0,), 2: (1,)}), 0)  # full root


def test_marking_validation():
    t = chain_tree()
    with pytest.raises(TreeError):
        Marking(frozenset({1})).validate(t.tree)
    Marking(frozenset({2, 3})).validate(t.tree)
