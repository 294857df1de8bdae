"""Finite pointed metric spaces and brute-force Gromov-Hausdorff distance.

Only tiny instances are supported: :func:`gh_exact_small` searches every
relation between the two point sets (product size at most 20), which is
enough to check Lipschitz-type statements about cactuses of small graphs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InstanceTooLargeError, InvalidCorrespondenceError, InvalidVertexError
from .graph_cactus import CactusTree, PointedGraph, graph_distances

TOL = 1e-9
MAX_PRODUCT = 20


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    dist: np.ndarray
    root: int = 0

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise ValueError("distance matrix must be square and non-empty")
        if not 0 <= self.root < d.shape[0]:
            raise InvalidVertexError(f"root {self.root} out of range")
        if (d < -TOL).any() or np.abs(np.diag(d)).max() > TOL or np.abs(d - d.T).max() > TOL:
            raise ValueError("not a distance matrix (sign, diagonal or symmetry)")
        # d[i, j] <= d[i, k] + d[k, j] for all triples
        if (d[:, None, :] > d[:, :, None] + d[None, :, :] + TOL).any():
            raise ValueError("triangle inequality violated")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    @classmethod
    def from_graph(cls, g: PointedGraph) -> "FiniteMetricSpace":
        d = np.array([graph_distances(g, v) for v in range(g.n_vertices)], dtype=float)
        return cls(d, g.root)

    @classmethod
    def from_cactus(cls, t: CactusTree) -> "FiniteMetricSpace":
        k = t.n_classes
        d = np.array([[t.class_distance(a, b) for b in range(k)] for a in range(k)], dtype=float)
        return cls(d, t.root_class)


Correspondence = frozenset  # of (i, j) index pairs


def _check_correspondence(r: Iterable[tuple[int, int]], a: FiniteMetricSpace, b: FiniteMetricSpace):
    pairs = sorted(set(r))
    for i, j in pairs:
        if not (0 <= i < a.size and 0 <= j < b.size):
            raise InvalidCorrespondenceError(f"pair ({i}, {j}) out of range")
    if (a.root, b.root) not in pairs:
        raise InvalidCorrespondenceError("correspondence must contain the root pair")
    if {i for i, _ in pairs} != set(range(a.size)) or {j for _, j in pairs} != set(range(b.size)):
        raise InvalidCorrespondenceError("correspondence must cover both spaces")
    return pairs


def distortion(r: Iterable[tuple[int, int]], a: FiniteMetricSpace, b: FiniteMetricSpace) -> float:
    """Largest ``|d_A(i1, i2) - d_B(j1, j2)|`` over pairs of pairs in ``r``."""
    pairs = _check_correspondence(r, a, b)
    ii = np.array([p[0] for p in pairs])
    jj = np.array([p[1] for p in pairs])
    return float(np.abs(a.dist[np.ix_(ii, ii)] - b.dist[np.ix_(jj, jj)]).max())


def gh_exact_small(a: FiniteMetricSpace, b: FiniteMetricSpace) -> float:
    """Half the minimal distortion over pointed correspondences.

    Depth-first search over all relations containing the root pair; a
    branch is cut only once its distortion already reaches the best value
    found, which never changes the minimum.
    """
    na, nb = a.size, b.size
    if na * nb > MAX_PRODUCT:
        raise InstanceTooLargeError(f"|A|*|B| = {na * nb} exceeds {MAX_PRODUCT}")
    pairs = [(i, j) for i in range(na) for j in range(nb)]
    cost = np.abs(
        a.dist[np.ix_([p[0] for p in pairs], [p[0] for p in pairs])]
        - b.dist[np.ix_([p[1] for p in pairs], [p[1] for p in pairs])]
    )
    root = pairs.index((a.root, b.root))
    others = [k for k in range(len(pairs)) if k != root]
    full_a = (1 << na) - 1
    full_b = (1 << nb) - 1
    best = [np.inf]

    def search(pos: int, chosen: list[int], worst: float, cov_a: int, cov_b: int):
        if worst >= best[0]:
            return
        if pos == len(others):
            if cov_a == full_a and cov_b == full_b:
                best[0] = worst
            return
        k = others[pos]
        i, j = pairs[k]
        w = max(worst, float(cost[k, chosen].max()))
        chosen.append(k)
        search(pos + 1, chosen, w, cov_a | (1 << i), cov_b | (1 << j))
        chosen.pop()
        search(pos + 1, chosen, worst, cov_a, cov_b)

    ra, rb = pairs[root]
    search(0, [root], 0.0, 1 << ra, 1 << rb)
    return best[0] / 2.0
