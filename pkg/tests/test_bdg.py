import itertools

import numpy as np
import pytest

from cactus.bdg import (
    Variant,
    bdg_construct,
    check_face_degrees,
    chords,
    chords_cross,
    face_degree_profile,
    label_cactus_formula,
    map_distances,
    mobile_to_map,
    path_min_label,
    successors,
    tree_path,
    verify_distance_identity,
)
from cactus.boltzmann import WeightSeq, offspring_laws, sample_mobile_gw
from cactus.errors import InvalidMapError, InvalidMobileError, SizeCapExceeded
from cactus.graph_cactus import build_cactus, cactus_distance, maximin_oracle
from cactus.mobile import FourTypeTree, Mobile, modified_contour, sample_labels_uniform
from cactus.planar_map import CombinatorialMap, MapClass, classify, faces

LAWS = offspring_laws(WeightSeq.from_dict({1: 0.2, 3: 1.0, 4: 0.6, 5: 0.2}))
QUAD = offspring_laws(WeightSeq.from_dict({4: 1.0}))


def random_mobiles(rng, count, root="1", cap=300, laws=LAWS):
    out = []
    while len(out) < count:
        try:
            t = sample_mobile_gw(laws, root, rng, max_vertices=cap)
        except SizeCapExceeded:
            continue
        out.append(sample_labels_uniform(t, rng))
    return out


def two_vertex():
    return Mobile(FourTypeTree.from_children([1, 3], [[1], []]), (0, None))


def three_vertex():
    return Mobile(FourTypeTree.from_children([1, 3, 1], [[1], [2], []]), (0, None, -1))


def test_vertex_mobile_gives_vertex_map():
    m = Mobile(FourTypeTree((1,), (0,)), (0,))
    cm = mobile_to_map(m)
    assert cm.n_vertices == 1 and cm.n_edges == 0
    assert verify_distance_identity(cm, m)


def test_two_vertex_example():
    cm = mobile_to_map(two_vertex())
    assert cm.n_vertices == 2 and cm.n_edges == 1
    assert [d for _, d, _ in faces(cm)] == [2]
    assert verify_distance_identity(cm, two_vertex())


def test_three_vertex_example():
    m = three_vertex()
    res = bdg_construct(m)
    cm = res.map
    assert cm.n_vertices == 3 and cm.n_edges == 2
    assert [d for _, d, _ in faces(cm)] == [4]
    d = cm.distances_from_pointed()
    assert d[res.vertex_of_tree[0]] == 2
    assert d[res.vertex_of_tree[2]] == 1
    assert verify_distance_identity(cm, m)
    # the tree root is the target of the root edge when positive, its origin when negative
    assert cm.root_vertices[1] == res.vertex_of_tree[0]
    assert classify(cm) is MapClass.POSITIVE
    neg = mobile_to_map(m, "negative")
    assert neg.root_vertices[0] == bdg_construct(m, "neg").vertex_of_tree[0]
    assert classify(neg) is MapClass.NEGATIVE


def test_successor_rule():
    assert successors([0, 1, 0, -1]) == [3, 2, 3, -1]
    assert successors([0, 0]) == [-1, -1]
    # cyclic wrap
    assert successors([1, 0, 2]) == [1, -1, 0]


def test_variant_root_type_checked():
    with pytest.raises(InvalidMobileError):
        mobile_to_map(three_vertex(), "null")
    with pytest.raises(InvalidMobileError):
        mobile_to_map(Mobile(three_vertex().tree, (0, None, -2)))
    with pytest.raises(ValueError):
        Variant.parse("sideways")


def test_mismatched_map_rejected():
    with pytest.raises(InvalidMapError):
        verify_distance_identity(CombinatorialMap.vertex_map(), three_vertex())


def test_tree_path_and_label_formula():
    m = three_vertex()
    assert tree_path(m, 0, 2) == [0, 1, 2]
    assert path_min_label(m, 0, 2) == -1
    assert label_cactus_formula(m, 0, 2) == 1
    assert label_cactus_formula(m, 2, 2) == 0


def _check_map(m, variant):
    res = bdg_construct(m, variant)
    cm = res.map
    if m.tree.size == 1:
        assert cm == CombinatorialMap.vertex_map()
        return res
    assert classify(cm).value == variant
    nt1 = sum(1 for x in m.tree.types if x == 1)
    assert cm.euler_characteristic == 2
    assert cm.n_vertices == nt1 + 1
    assert verify_distance_identity(cm, m)
    assert check_face_degrees(res) == []
    odd = [y for y in range(m.tree.size) if m.tree.depth[y] % 2 == 1]
    assert sorted(res.face_of_odd) == odd
    assert len(set(res.face_of_odd.values())) == cm.n_faces == len(odd)
    assert sorted(d for _, d, _ in faces(cm)) == sorted(face_degree_profile(m).elements())
    return res


@pytest.mark.parametrize("variant,root", [("positive", "1"), ("negative", "1"), ("null", "2-pair")])
def test_sampled_mobiles(rng, variant, root):
    for m in random_mobiles(rng, 150, root=root):
        _check_map(m, variant)


def test_quadrangulations_have_degree_four(rng):
    for m in random_mobiles(rng, 50, laws=QUAD):
        if m.tree.size == 1:
            continue
        cm = mobile_to_map(m)
        assert {d for _, d, _ in faces(cm)} <= {4}


def test_chords_never_cross(rng):
    for m in random_mobiles(rng, 60, cap=120):
        ch = chords(m)
        p = len(modified_contour(m.tree)) - 1
        assert not chords_cross(ch, p)


def test_chords_cross_detects_interleaving():
    from cactus.bdg import CornerChord

    assert chords_cross([CornerChord(0, 2), CornerChord(1, 3)], 4)
    assert not chords_cross([CornerChord(0, 3), CornerChord(1, 2)], 4)


def test_deterministic_encoding(rng):
    from cactus.planar_map import encode

    for m in random_mobiles(rng, 20):
        assert encode(mobile_to_map(m)) == encode(mobile_to_map(m))


def _small_mobiles(rng, count, root, max_nv=10):
    out = []
    while len(out) < count:
        for m in random_mobiles(rng, 1, root=root, cap=40):
            if sum(1 for x in m.tree.types if x == 1) + 1 <= max_nv:
                out.append(m)
    return out


def _all_simple_path_maximin(adj, dist, u, v):
    """Brute force: best over all simple paths of the smallest distance to the root."""
    best = -1
    stack = [(u, (u,), dist[u])]
    while stack:
        x, seen, lo = stack.pop()
        if x == v:
            best = max(best, lo)
            continue
        for y in adj[x]:
            if y not in seen:
                stack.append((y, seen + (y,), min(lo, dist[y])))
    return best


@pytest.mark.parametrize("root,variant", [("1", "positive"), ("2-pair", "null")])
def test_path_minimum_bound(rng, root, variant):
    for m in _small_mobiles(rng, 40, root):
        res = bdg_construct(m, variant)
        cm = res.map
        adj = cm.neighbours(cm.n_vertices)
        dist = cm.distances_from_pointed()
        mn = m.min_label()
        for (a, va), (b, vb) in itertools.combinations_with_replacement(res.vertex_of_tree.items(), 2):
            best = _all_simple_path_maximin(adj, dist, va, vb)
            assert best <= path_min_label(m, a, b) - mn + 1


def test_path_maximin_matches_graph_oracle(rng):
    for m in _small_mobiles(rng, 20, "1"):
        cm = mobile_to_map(m)
        g = cm.to_graph()
        adj = cm.neighbours(cm.n_vertices)
        dist = cm.distances_from_pointed()
        for a, b in itertools.combinations(range(cm.n_vertices), 2):
            assert maximin_oracle(g, a, b) == _all_simple_path_maximin(adj, dist, a, b)


@pytest.mark.parametrize("root,variant", [("1", "positive"), ("1", "negative"), ("2-pair", "null")])
def test_cactus_label_sandwich(rng, root, variant):
    for m in random_mobiles(rng, 15, root=root, cap=150):
        res = bdg_construct(m, variant)
        cm = res.map
        D = max(d for _, d, _ in faces(cm))
        cac = build_cactus(cm.to_graph())
        items = list(res.vertex_of_tree.items())
        for (a, va), (b, vb) in itertools.combinations(items, 2):
            gap = cactus_distance(cac, va, vb) - label_cactus_formula(m, a, b)
            assert abs(gap) <= 2 * D + 2


def test_map_distances_match_bfs(rng):
    for m in random_mobiles(rng, 10, cap=100):
        cm = mobile_to_map(m)
        d = map_distances(cm)
        assert (d == d.T).all()
        assert (d[cm.pointed_vertex] == cm.distances_from_pointed()).all()
