"""Discrete surrogate of the Brownian tree with Brownian labels.

A uniform plane tree with ``N`` edges comes from a uniform Dyck path
(cycle lemma on a shuffled bridge).  Every edge carries an independent
standard normal increment.  Vertices are numbered in preorder, so
``parent[v] < v``.  Contour time ``i`` (``0 <= i <= 2N``) visits vertex
``contour[i]``; the mass measure puts weight ``1/(2N)`` on each of the
steps ``0..2N-1``.  Heights are reported scaled by ``(2N)**-0.5`` and
labels by ``(2N)**-0.25``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np


def sample_dyck_paths(N: int, count: int, rng) -> np.ndarray:
    """``count`` uniform Dyck paths of length ``2N`` as rows of +1/-1 steps."""
    if N < 1:
        raise ValueError("N must be at least 1")
    keys = rng.random((count, 2 * N + 1))
    # N smallest keys mark the up steps: a uniform arrangement of N ups and N+1 downs
    order = np.argsort(keys, axis=1)
    steps = np.full((count, 2 * N + 1), -1, dtype=np.int8)
    np.put_along_axis(steps, order[:, :N], 1, axis=1)
    walk = np.cumsum(steps, axis=1, dtype=np.int64)
    start = (np.argmin(walk, axis=1) + 1) % (2 * N + 1)
    idx = (start[:, None] + np.arange(2 * N + 1)[None, :]) % (2 * N + 1)
    rotated = np.take_along_axis(steps, idx, axis=1)
    return rotated[:, : 2 * N]


@dataclass(frozen=True, eq=False)
class LabeledTree:
    n_edges: int
    parent: np.ndarray
    depth: np.ndarray
    labels: np.ndarray  # unscaled
    contour: np.ndarray  # vertex at contour time 0..2N
    heights: np.ndarray  # contour heights 0..2N
    first_visit: np.ndarray
    last_visit: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.n_edges + 1

    @property
    def label_scale(self) -> float:
        return (2 * self.n_edges) ** -0.25

    @property
    def height_scale(self) -> float:
        return (2 * self.n_edges) ** -0.5

    @cached_property
    def mass(self) -> np.ndarray:
        """Contour steps per vertex (sums to 2N)."""
        return np.bincount(self.contour[:-1], minlength=self.n_vertices)

    @cached_property
    def subtree_mass(self) -> np.ndarray:
        """Contour steps spent in the subtree of each vertex."""
        out = self.last_visit - self.first_visit + 1
        out[0] = 2 * self.n_edges
        return out

    def summary(self) -> str:
        lab = self.labels * self.label_scale
        return (
            f"edges = {self.n_edges}\n"
            f"vertices = {self.n_vertices}\n"
            f"height = {int(self.depth.max())}\n"
            f"scaled_height = {float(self.depth.max() * self.height_scale)!r}\n"
            f"min_scaled_label = {float(lab.min())!r}\n"
            f"max_scaled_label = {float(lab.max())!r}\n"
            f"argmin_label_vertex = {min_label_vertex(self)}\n"
        )


def tree_from_dyck(steps: np.ndarray, increments: np.ndarray) -> LabeledTree:
    """Build the tree of a Dyck path; ``increments[k]`` labels the edge above vertex ``k+1``."""
    steps = np.asarray(steps, dtype=np.int64)
    two_n = len(steps)
    N = two_n // 2
    H = np.concatenate(([0], np.cumsum(steps)))
    if two_n % 2 or H.min() < 0 or H[-1] != 0:
        raise ValueError("not a Dyck path")
    up = np.flatnonzero(steps == 1) + 1  # time at which each non-root vertex is entered
    # each step sits between levels; sort by (upper level, time) so an up step is
    # immediately followed by its matching down step
    upper = np.maximum(H[:-1], H[1:])
    dt = np.uint16 if upper.max() < 2**16 else np.int64
    order = np.argsort(upper.astype(dt), kind="stable")
    up_of_pair = order[0::2]
    down_of_pair = order[1::2]
    vid = np.empty(two_n + 1, dtype=np.int64)  # vertex entered at an up time
    vid[up] = np.arange(1, N + 1)
    g = np.zeros(two_n, dtype=float)
    pair_vertex = vid[up_of_pair + 1]
    g[up_of_pair] = increments[pair_vertex - 1]
    g[down_of_pair] = -increments[pair_vertex - 1]
    Z = np.concatenate(([0.0], np.cumsum(g)))

    # vertex at each time: the last vertex entered at that level
    width = two_n + 1
    up_keys = H[up] * width + up
    srt = np.argsort(up_keys, kind="stable")
    up_keys = up_keys[srt]
    up_vertices = np.arange(1, N + 1)[srt]
    t_keys = H * width + np.arange(width)
    pos = np.searchsorted(up_keys, t_keys, side="right") - 1
    contour = np.where(H == 0, 0, up_vertices[np.maximum(pos, 0)])

    parent = np.empty(N + 1, dtype=np.int64)
    parent[0] = -1
    parent[1:] = contour[up - 1]
    depth = np.empty(N + 1, dtype=np.int64)
    depth[0] = 0
    depth[1:] = H[up]
    labels = np.empty(N + 1)
    labels[0] = 0.0
    labels[1:] = Z[up]
    first = np.full(N + 1, two_n + 1, dtype=np.int64)
    np.minimum.at(first, contour, np.arange(width))
    last = np.full(N + 1, -1, dtype=np.int64)
    np.maximum.at(last, contour, np.arange(width))
    return LabeledTree(N, parent, depth, labels, contour, H, first, last)


def sample_labeled_tree(N: int, rng) -> LabeledTree:
    steps = sample_dyck_paths(N, 1, rng)[0]
    return tree_from_dyck(steps, rng.standard_normal(N))


def _check(t: LabeledTree, *vs: int) -> None:
    for v in vs:
        if not 0 <= int(v) < t.n_vertices:
            raise IndexError(f"vertex {v} out of range 0..{t.n_vertices - 1}")


def path_vertices(t: LabeledTree, u: int, v: int) -> list[int]:
    _check(t, u, v)
    par, dep = t.parent, t.depth
    left, right = [int(u)], [int(v)]
    while dep[left[-1]] > dep[right[-1]]:
        left.append(int(par[left[-1]]))
    while dep[right[-1]] > dep[left[-1]]:
        right.append(int(par[right[-1]]))
    while left[-1] != right[-1]:
        left.append(int(par[left[-1]]))
        right.append(int(par[right[-1]]))
    return left + right[-2::-1]


def path_argmin(t: LabeledTree, u: int, v: int) -> int:
    """Vertex of smallest label on the tree path (endpoints included)."""
    path = path_vertices(t, u, v)
    return path[int(np.argmin(t.labels[path]))]


def kac_distance(t: LabeledTree, u: int, v: int, scaled: bool = True) -> float:
    lab = t.labels
    b = path_argmin(t, u, v)
    d = lab[u] + lab[v] - 2 * lab[b]
    return float(d * t.label_scale) if scaled else float(d)


def min_label_vertex(t: LabeledTree) -> int:
    # preorder ids, so argmin's first hit is the earliest in contour order
    return int(np.argmin(t.labels))


def sample_mass_vertex(t: LabeledTree, rng) -> int:
    return int(t.contour[rng.integers(2 * t.n_edges)])


@numba.njit(cache=True)
def _distances_from(parent, labels, v0):
    n = len(parent)
    on_anc = np.zeros(n, dtype=np.bool_)
    m = np.empty(n)
    w = v0
    run = labels[v0]
    while w >= 0:
        run = min(run, labels[w])
        m[w] = run
        on_anc[w] = True
        w = parent[w]
    for w in range(1, n):
        if not on_anc[w]:
            m[w] = min(labels[w], m[parent[w]])
    return labels[v0] + labels - 2.0 * m


def distances_from(t: LabeledTree, v: int, scaled: bool = True) -> np.ndarray:
    """``d_KAC(v, w)`` for every vertex ``w``."""
    _check(t, v)
    d = _distances_from(t.parent, t.labels, int(v))
    return d * t.label_scale if scaled else d


def ball_masses(t: LabeledTree, v: int, deltas) -> np.ndarray:
    """Mass of the closed d_KAC ball of scaled radius ``delta`` around ``v``."""
    d = distances_from(t, v)
    deltas = np.asarray(deltas, dtype=float)
    order = np.argsort(d)
    cm = np.concatenate(([0], np.cumsum(t.mass[order])))
    k = np.searchsorted(d[order], deltas, side="right")
    return cm[k] / (2 * t.n_edges)


def _child_towards(t: LabeledTree, anc: int, v: int) -> int:
    par = t.parent
    while par[v] != anc:
        v = int(par[v])
    return v


def _component_mass(t: LabeledTree, beta: int, v: int) -> int:
    """Contour mass of the component of the tree minus ``beta`` containing ``v``."""
    if v == beta:
        return 0
    f, l = t.first_visit, t.last_visit
    if f[beta] <= f[v] and l[v] <= l[beta]:
        return int(t.subtree_mass[_child_towards(t, beta, v)])
    return 2 * t.n_edges - int(t.subtree_mass[beta])


def separating_split(t: LabeledTree, rng) -> tuple[float, float]:
    """Volumes on either side of the label minimum between two mass vertices.

    Whatever lies in neither side's component (``beta`` itself and any
    subtrees hanging off it away from the path) is shared equally.
    """
    if t.n_edges < 4:
        raise ValueError("separating_split needs at least 4 edges")
    while True:
        v1, v2 = sample_mass_vertex(t, rng), sample_mass_vertex(t, rng)
        if v1 != v2:
            break
    beta = path_argmin(t, v1, v2)
    c1 = _component_mass(t, beta, v1)
    c2 = _component_mass(t, beta, v2)
    total = 2 * t.n_edges
    rest = total - c1 - c2
    vol1 = (c1 + rest / 2) / total
    return vol1, 1.0 - vol1


def _crossing_before(H: np.ndarray, s: float, level: float) -> float:
    """Last time <= s at which the linearly interpolated contour equals ``level``."""
    i = int(math.floor(s))
    h_s = H[i] + (s - i) * (H[i + 1] - H[i]) if i < len(H) - 1 else float(H[i])
    if h_s <= level:
        return s
    below = np.flatnonzero(H[: i + 1] <= level)
    j = int(below[-1])
    return j + (level - H[j]) / (H[j + 1] - H[j])


def _crossing_after(H: np.ndarray, s: float, level: float) -> float:
    i = int(math.ceil(s))
    above = np.flatnonzero(H[i:] <= level)
    j = i + int(above[0])
    if j == 0:
        return 0.0
    return j - (level - H[j]) / (H[j - 1] - H[j])


def arc_sine_gap(t: LabeledTree, s: float, depth_drop: float) -> float:
    """Contour-time fraction between the crossings of ``height(s) - depth_drop`` around ``s``."""
    H = t.heights.astype(float)
    i = min(int(math.floor(s)), len(H) - 2)
    h_s = H[i] + (s - i) * (H[i + 1] - H[i])
    level = h_s - depth_drop
    g = _crossing_before(H, s, level)
    d = _crossing_after(H, s, level)
    return (d - g) / (2 * t.n_edges)


def arc_sine_split_oracle(t: LabeledTree, rng) -> float:
    """Gap construction with a uniform time and an arc-sine distributed depth."""
    two_n = 2 * t.n_edges
    s = rng.random() * two_n
    H = t.heights
    i = min(int(s), two_n - 1)
    h_s = H[i] + (s - i) * (H[i + 1] - H[i])
    drop = h_s * math.sin(math.pi * rng.random() / 2) ** 2
    return arc_sine_gap(t, s, drop)


def one_point_statistic(t: LabeledTree, rng) -> float:
    """Scaled label of a mass vertex above the global minimum."""
    v = sample_mass_vertex(t, rng)
    return float((t.labels[v] - t.labels.min()) * t.label_scale)


# ------------------------------------------------------------ metric-tree points
#
# The refined estimators below treat every edge as a unit segment carrying a
# Brownian bridge between the labels of its endpoints.  A point is an edge
# (named by its lower vertex ``w``) and a position ``theta`` in (0, 1)
# measured from the parent end.


def bridge_minimum(a, b, length, rng):
    """Minimum of a Brownian bridge from ``a`` to ``b`` over time ``length``."""
    a, b, length = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, length)))
    u = rng.random(a.shape)
    return (a + b - np.sqrt((a - b) ** 2 - 2.0 * length * np.log1p(-u))) / 2.0


def edge_minima(t: LabeledTree, rng) -> np.ndarray:
    """Bridge minimum along the edge above each vertex (``inf`` at the root)."""
    par = t.parent
    out = np.empty(t.n_vertices)
    out[0] = np.inf
    out[1:] = bridge_minimum(t.labels[par[1:]], t.labels[1:], 1.0, rng)
    return out


def locate_times(t: LabeledTree, s) -> tuple[np.ndarray, np.ndarray]:
    """Edge and position of the contour at real times ``s`` in [0, 2N)."""
    s = np.asarray(s, dtype=float)
    i = np.minimum(np.floor(s).astype(np.int64), 2 * t.n_edges - 1)
    a, b = t.contour[i], t.contour[i + 1]
    ha, hb = t.heights[i], t.heights[i + 1]
    child = np.where(hb > ha, b, a)
    h = ha + (s - i) * (hb - ha)
    theta = h - (t.depth[child] - 1)
    return child, theta


def sample_mass_points(t: LabeledTree, rng, size: int):
    """``size`` points of the normalized length measure with their labels."""
    w, th = locate_times(t, rng.random(size) * (2 * t.n_edges))
    Z, p = t.labels, t.parent[w]
    y = rng.normal(Z[p] + th * (Z[w] - Z[p]), np.sqrt(th * (1 - th)))
    return w, th, y


@numba.njit(cache=True)
def _path_minima(parent, emin, p0, w0, m_up, m_down):
    n = len(parent)
    m = np.empty(n)
    fixed = np.zeros(n, dtype=np.bool_)
    m[p0] = m_up
    fixed[p0] = True
    x = p0
    while parent[x] >= 0:
        m[parent[x]] = min(m[x], emin[x])
        x = parent[x]
        fixed[x] = True
    m[w0] = m_down
    fixed[w0] = True
    for w in range(1, n):
        if not fixed[w]:
            m[w] = min(m[parent[w]], emin[w])
    return m


def pair_distances(t: LabeledTree, rng, partners: int, emin=None) -> np.ndarray:
    """Scaled d_KAC from one mass point to ``partners`` independent mass points."""
    Z, par = t.labels, t.parent
    if emin is None:
        emin = edge_minima(t, rng)
    w0s, th0s, zvs = sample_mass_points(t, rng, 1)
    w0, th0, zv = int(w0s[0]), float(th0s[0]), float(zvs[0])
    p0 = int(par[w0])
    m_up = float(bridge_minimum(Z[p0], zv, th0, rng))
    m_down = float(bridge_minimum(zv, Z[w0], 1.0 - th0, rng))
    m = _path_minima(par, emin, p0, w0, m_up, m_down)

    w, th, y = sample_mass_points(t, rng, partners)
    p = par[w]
    f, l = t.first_visit, t.last_visit
    below = (f[w] <= f[w0]) & (f[w0] <= l[w])  # the anchor sits under this edge
    entry = np.where(below, w, p)
    seg = np.where(below, 1.0 - th, th)
    mm = np.minimum(m[entry], bridge_minimum(Z[entry], y, seg, rng))
    same = np.flatnonzero(w == w0)
    if len(same):
        # partner on the anchor's own edge: resample it given the anchor's label
        ts = th[same]
        lo = ts < th0
        mean = np.where(lo, Z[p0] + (zv - Z[p0]) * ts / th0,
                        zv + (Z[w0] - zv) * (ts - th0) / max(1.0 - th0, 1e-300))
        var = np.where(lo, ts * (th0 - ts) / th0, (ts - th0) * (1 - ts) / max(1.0 - th0, 1e-300))
        ys = rng.normal(mean, np.sqrt(np.maximum(var, 0.0)))
        y[same] = ys
        mm[same] = bridge_minimum(zv, ys, np.abs(ts - th0), rng)
    return (zv + y - 2.0 * mm) * t.label_scale


def pair_ball_probabilities(t: LabeledTree, rng, deltas, anchors: int = 4, partners: int = 4000) -> np.ndarray:
    """Conditional estimate of ``P[d_KAC(V, V') <= delta]`` given the tree."""
    deltas = np.asarray(deltas, dtype=float)
    emin = edge_minima(t, rng)
    acc = np.zeros(len(deltas))
    for _ in range(anchors):
        d = np.sort(pair_distances(t, rng, partners, emin))
        acc += np.searchsorted(d, deltas, side="right") / partners
    return acc / anchors
