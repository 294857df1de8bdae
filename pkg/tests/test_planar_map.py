import numpy as np
import pytest

from cactus.boltzmann import WeightSeq, sample_boltzmann_map
from cactus.errors import InvalidMapError, ParseError
from cactus.planar_map import CombinatorialMap, MapClass, classify, decode, encode, faces


def single_edge():
    return CombinatorialMap((1, 0), (0, 1), 0, 0)


def loop_at_root():
    return CombinatorialMap((1, 0), (1, 0), 0, 0)


def four_cycle_map():
    # edge i joins vertex i (half-edge 2i) and vertex i+1 (half-edge 2i+1)
    opp = [0] * 8
    nxt = [0] * 8
    for i in range(4):
        opp[2 * i], opp[2 * i + 1] = 2 * i + 1, 2 * i
    for v in range(4):
        a, b = 2 * v, (2 * (v - 1) + 1) % 8
        nxt[a], nxt[b] = b, a
    return CombinatorialMap(tuple(opp), tuple(nxt), 0, 0)


def test_vertex_map():
    m = CombinatorialMap.vertex_map()
    assert faces(m) == [(0, 0, ())]
    assert m.n_vertices == 1 and m.n_faces == 1 and m.euler_characteristic == 2
    assert classify(m) is MapClass.POSITIVE


def test_single_edge():
    m = single_edge()
    assert [d for _, d, _ in faces(m)] == [2]
    assert classify(m) is MapClass.POSITIVE
    assert classify(CombinatorialMap((1, 0), (0, 1), 0, 1)) is MapClass.NEGATIVE


def test_loop_is_null():
    assert classify(loop_at_root()) is MapClass.NULL


def test_four_cycle_faces():
    m = four_cycle_map()
    assert sorted(d for _, d, _ in faces(m)) == [4, 4]
    assert m.n_vertices == 4


def test_invalid_maps():
    with pytest.raises(InvalidMapError):
        CombinatorialMap((0, 1), (0, 1), 0, 0)  # opposite has fixed points
    with pytest.raises(InvalidMapError):
        CombinatorialMap((1, 0), (0, 0), 0, 0)  # not a permutation
    with pytest.raises(InvalidMapError):
        # two disjoint edges
        CombinatorialMap((1, 0, 3, 2), (0, 1, 2, 3), 0, 0)
    # a torus-like rotation: one vertex, two loops interleaved
    with pytest.raises(InvalidMapError):
        CombinatorialMap((2, 3, 0, 1), (1, 2, 3, 0), 0, 0)


def test_roundtrip_small():
    for m in (CombinatorialMap.vertex_map(), single_edge(), loop_at_root(), four_cycle_map()):
        assert decode(encode(m)) == m


def test_decode_errors():
    with pytest.raises(ParseError):
        decode("2 0 0\n1\n0 1\n")
    with pytest.raises(ParseError):
        decode("a b c\n")
    with pytest.raises(InvalidMapError):
        decode("2 0 0\n0 1\n0 1\n")


def test_roundtrip_sampled_and_relabel_invariance():
    rng = np.random.default_rng(3)
    qs = [WeightSeq.delta(4), WeightSeq.delta(3), WeightSeq.from_dict({3: 1.0, 4: 0.5})]
    for i in range(500):
        q = qs[i % 3]
        variant = ("positive", "negative", "null")[i % 3] if q.case == "A1" else ("positive", "negative")[i % 2]
        m, _ = sample_boltzmann_map(q, int(rng.integers(3, 30)), variant, rng)
        assert decode(encode(m)) == m
        assert m.euler_characteristic == 2
        assert sum(d for _, d, _ in faces(m)) == 2 * m.n_edges
        if i % 10 == 0:
            perm = rng.permutation(m.n_half_edges).tolist()
            assert classify(m.relabelled(perm)) is classify(m)


def test_angulation_vertex_count():
    rng = np.random.default_rng(5)
    for p in (2, 3):
        for _ in range(10):
            # 2p-angulations need n - 2 divisible by p - 1
            n = (p - 1) * int(rng.integers(1, 20)) + 2
            m, _ = sample_boltzmann_map(WeightSeq.delta(2 * p), n, "positive", rng)
            assert m.n_vertices == (p - 1) * m.n_faces + 2
