import itertools

import numpy as np
import pytest

from cactus.errors import InstanceTooLargeError, InvalidCorrespondenceError
from cactus.graph_cactus import build_cactus
from cactus.metric_gh import FiniteMetricSpace, distortion, gh_exact_small

from conftest import random_connected_graph


def two_point(gap):
    return FiniteMetricSpace(np.array([[0.0, gap], [gap, 0.0]]), 0)


ONE = FiniteMetricSpace(np.zeros((1, 1)), 0)


def test_distortion_examples():
    a = two_point(1.0)
    assert distortion({(0, 0), (1, 1)}, a, a) == 0
    assert distortion({(0, 0), (0, 1)}, ONE, two_point(2.0)) == 2
    assert distortion({(0, 0), (1, 1)}, two_point(1.0), two_point(2.0)) == 1


def test_distortion_rejects_bad_correspondences():
    a = two_point(1.0)
    with pytest.raises(InvalidCorrespondenceError):
        distortion({(0, 0)}, a, a)
    with pytest.raises(InvalidCorrespondenceError):
        distortion({(0, 1), (1, 0)}, a, a)


def test_gh_examples():
    a = two_point(1.0)
    assert gh_exact_small(a, a) == 0
    assert gh_exact_small(ONE, two_point(2.0)) == pytest.approx(1.0, abs=1e-9)
    assert gh_exact_small(two_point(1.0), two_point(2.0)) == pytest.approx(0.5, abs=1e-9)


def test_gh_too_large():
    big = FiniteMetricSpace(np.ones((5, 5)) - np.eye(5), 0)
    with pytest.raises(InstanceTooLargeError):
        gh_exact_small(big, big)


def test_invalid_metric():
    with pytest.raises(ValueError):
        FiniteMetricSpace(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        FiniteMetricSpace(np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float))


def _all_correspondences(a, b):
    pairs = [(i, j) for i in range(a.size) for j in range(b.size)]
    for mask in range(1, 1 << len(pairs)):
        r = {pairs[k] for k in range(len(pairs)) if mask >> k & 1}
        if (a.root, b.root) in r and {i for i, _ in r} == set(range(a.size)) and {j for _, j in r} == set(range(b.size)):
            yield r


def test_gh_symmetry_and_lower_bound(rng):
    for _ in range(25):
        g1 = random_connected_graph(rng, n_max=4)
        g2 = random_connected_graph(rng, n_max=4)
        a, b = FiniteMetricSpace.from_graph(g1), FiniteMetricSpace.from_graph(g2)
        if a.size * b.size > 16:
            continue
        gh = gh_exact_small(a, b)
        assert gh == pytest.approx(gh_exact_small(b, a), abs=1e-9)
        dis = [distortion(r, a, b) for r in _all_correspondences(a, b)]
        assert min(dis) == pytest.approx(2 * gh, abs=1e-9)
        assert all(d >= 2 * gh - 1e-9 for d in dis)


def test_gh_zero_on_isometric(rng):
    for _ in range(10):
        g = random_connected_graph(rng, n_max=4)
        a = FiniteMetricSpace.from_graph(g)
        perm = rng.permutation(a.size)
        inv = np.argsort(perm)
        b = FiniteMetricSpace(a.dist[np.ix_(inv, inv)], int(perm[a.root]))
        assert gh_exact_small(a, b) == pytest.approx(0.0, abs=1e-9)


def test_cactus_lipschitz_with_slack(rng):
    for _ in range(60):
        g1 = random_connected_graph(rng, n_max=4)
        g2 = random_connected_graph(rng, n_max=4)
        a, b = FiniteMetricSpace.from_graph(g1), FiniteMetricSpace.from_graph(g2)
        ca = FiniteMetricSpace.from_cactus(build_cactus(g1))
        cb = FiniteMetricSpace.from_cactus(build_cactus(g2))
        if a.size * b.size > 20 or ca.size * cb.size > 20:
            continue
        assert gh_exact_small(ca, cb) <= 6 * gh_exact_small(a, b) + 14 + 1e-9
