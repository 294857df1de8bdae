"""Pointed graphs and their discrete cactus.

The cactus of a pointed graph ``(V, E, root)`` identifies two vertices at
the same height (graph distance to the root) when some path joins them
without ever dipping below that height.  The quotient is a tree whose
nodes are the connected components of the superlevel sets
``{w : d(root, w) >= r}``; :func:`build_cactus` computes it with one
union-find sweep from the top height down to 0.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DisconnectedGraphError, InvalidVertexError, ParseError


@dataclass(frozen=True)
class PointedGraph:
    """Finite connected simple graph with a distinguished root vertex."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    root: int = 0

    def __post_init__(self):
        n = self.n_vertices
        if n < 1:
            raise InvalidVertexError("a pointed graph needs at least one vertex")
        if not 0 <= self.root < n:
            raise InvalidVertexError(f"root {self.root} out of range 0..{n - 1}")
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidVertexError(f"edge ({u}, {v}) has an endpoint out of range")
            if u == v:
                raise InvalidVertexError(f"loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InvalidVertexError(f"edge {key} appears twice")
            seen.add(key)
        dist = _bfs(self.adjacency, self.root, n)
        if (dist < 0).any():
            raise DisconnectedGraphError(
                f"vertex {int(np.flatnonzero(dist < 0)[0])} is not reachable from the root"
            )
        object.__setattr__(self, "_root_dist", dist)

    @classmethod
    def simple(cls, n_vertices: int, edges: Iterable[tuple[int, int]], root: int = 0) -> "PointedGraph":
        """Build from a multigraph edge list: drop loops, collapse parallel edges."""
        keep = sorted({(min(u, v), max(u, v)) for u, v in edges if u != v})
        return cls(n_vertices, tuple(keep), root)

    @cached_property
    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for a in adj:
            a.sort()
        return adj

    @property
    def heights(self) -> np.ndarray:
        """Graph distance from the root to every vertex."""
        return self._root_dist  # type: ignore[attr-defined]

    def check_vertex(self, v: int) -> int:
        if not 0 <= v < self.n_vertices:
            raise InvalidVertexError(f"vertex {v} out of range 0..{self.n_vertices - 1}")
        return int(v)

    # text format: "n m root" then m lines "u v"
    def to_text(self) -> str:
        lines = [f"{self.n_vertices} {len(self.edges)} {self.root}"]
        lines += [f"{u} {v}" for u, v in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PointedGraph":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows:
            raise ParseError("empty graph file")
        try:
            n, m, root = (int(x) for x in rows[0])
            edges = [(int(a), int(b)) for a, b in rows[1:]]
        except ValueError as exc:
            raise ParseError(f"malformed graph file: {exc}") from None
        if len(edges) != m:
            raise ParseError(f"header announces {m} edges, found {len(edges)}")
        return cls.simple(n, edges, root) if _has_multi(edges) else cls(n, tuple(edges), root)


def _has_multi(edges: Sequence[tuple[int, int]]) -> bool:
    keys = [(min(u, v), max(u, v)) for u, v in edges]
    return len(set(keys)) != len(keys) or any(u == v for u, v in edges)


def _bfs(adj: Sequence[Sequence[int]], source: int, n: int) -> np.ndarray:
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for w in adj[u]:
            if dist[w] < 0:
                dist[w] = du
                queue.append(w)
    return dist


def graph_distances(g: PointedGraph, source: int) -> np.ndarray:
    """Breadth-first distances from ``source`` to every vertex."""
    g.check_vertex(source)
    if source == g.root:
        return g.heights.copy()
    dist = _bfs(g.adjacency, source, g.n_vertices)
    if (dist < 0).any():
        raise DisconnectedGraphError("graph is disconnected")
    return dist


def maximin_matrix(g: PointedGraph) -> np.ndarray:
    """All-pairs best bottleneck height.

    Entry ``[v, w]`` is the maximum over paths from v to w of the minimal
    root distance along the path.  Cubic Floyd-Warshall recursion; meant as
    a test oracle for small graphs only.
    """
    n = g.n_vertices
    h = g.heights
    best = np.full((n, n), -1, dtype=np.int64)
    np.fill_diagonal(best, h)
    for u, v in g.edges:
        best[u, v] = best[v, u] = min(h[u], h[v])
    for k in range(n):
        via = np.minimum(best[:, k][:, None], best[k, :][None, :])
        np.maximum(best, via, out=best)
    return best


def maximin_oracle(g: PointedGraph, v: int, w: int) -> int:
    g.check_vertex(v)
    g.check_vertex(w)
    return int(maximin_matrix(g)[v, w])


class _UnionFind:
    __slots__ = ("parent", "rank")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


@dataclass(frozen=True)
class CactusTree:
    """Tree of superlevel-set components.

    ``heights[c]`` is the height of class ``c``, ``parents[c]`` its parent
    class (``-1`` for the root class) and ``class_of[v]`` the class of
    vertex ``v``.
    """

    heights: tuple[int, ...]
    parents: tuple[int, ...]
    class_of: tuple[int, ...]
    root_class: int = field(default=0)

    @property
    def n_classes(self) -> int:
        return len(self.heights)

    def lca(self, a: int, b: int) -> int:
        h, p = self.heights, self.parents
        while h[a] > h[b]:
            a = p[a]
        while h[b] > h[a]:
            b = p[b]
        while a != b:
            a, b = p[a], p[b]
        return a

    def class_distance(self, a: int, b: int) -> int:
        h = self.heights
        return h[a] + h[b] - 2 * h[self.lca(a, b)]

    def to_text(self) -> str:
        lines = [f"{c} {h} {p}" for c, (h, p) in enumerate(zip(self.heights, self.parents))]
        lines.append("")
        lines += [f"{v} {c}" for v, c in enumerate(self.class_of)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CactusTree":
        blocks = text.strip("\n").split("\n\n")
        if len(blocks) != 2:
            raise ParseError("cactus file needs a class block and a vertex block separated by a blank line")
        try:
            classes = [tuple(int(x) for x in ln.split()) for ln in blocks[0].splitlines() if ln.strip()]
            verts = [tuple(int(x) for x in ln.split()) for ln in blocks[1].splitlines() if ln.strip()]
        except ValueError as exc:
            raise ParseError(f"malformed cactus file: {exc}") from None
        if [c for c, _, _ in classes] != list(range(len(classes))):
            raise ParseError("class ids must be 0..k-1 in order")
        if [v for v, _ in verts] != list(range(len(verts))):
            raise ParseError("vertex ids must be 0..n-1 in order")
        heights = tuple(h for _, h, _ in classes)
        parents = tuple(p for _, _, p in classes)
        roots = [c for c, p in enumerate(parents) if p == -1]
        if len(roots) != 1:
            raise ParseError("cactus must have exactly one root class")
        return cls(heights, parents, tuple(c for _, c in verts), roots[0])


def build_cactus(g: PointedGraph) -> CactusTree:
    """Sweep thresholds from the top height down, merging with union-find."""
    n = g.n_vertices
    h = g.heights
    adj = g.adjacency
    top = int(h.max())
    by_height: list[list[int]] = [[] for _ in range(top + 1)]
    for v in range(n):
        by_height[h[v]].append(v)

    uf = _UnionFind(n)
    heights: list[int] = []
    parents: list[int] = []
    class_of = [-1] * n
    prev_level: list[tuple[int, int]] = []  # (class id, representative vertex)

    for r in range(top, -1, -1):
        layer = by_height[r]
        for v in layer:
            for w in adj[v]:
                if h[w] >= r:
                    uf.union(v, w)
        class_at: dict[int, int] = {}
        level: list[tuple[int, int]] = []
        for _, rep in prev_level:
            root = uf.find(rep)
            if root not in class_at:
                class_at[root] = len(heights)
                heights.append(r)
                parents.append(-1)
                level.append((class_at[root], rep))
        for v in layer:
            root = uf.find(v)
            if root not in class_at:
                class_at[root] = len(heights)
                heights.append(r)
                parents.append(-1)
                level.append((class_at[root], v))
            class_of[v] = class_at[root]
        for cid, rep in prev_level:
            parents[cid] = class_at[uf.find(rep)]
        prev_level = level

    # renumber so that the root class is 0 and ids follow a top-down order
    order = list(range(len(heights) - 1, -1, -1))
    new_id = {old: i for i, old in enumerate(order)}
    return CactusTree(
        heights=tuple(heights[o] for o in order),
        parents=tuple(-1 if parents[o] < 0 else new_id[parents[o]] for o in order),
        class_of=tuple(new_id[c] for c in class_of),
        root_class=0,
    )


def cactus_distance(t: CactusTree, v: int, w: int) -> int:
    n = len(t.class_of)
    for x in (v, w):
        if not 0 <= x < n:
            raise InvalidVertexError(f"vertex {x} has no class in this cactus")
    return t.class_distance(t.class_of[v], t.class_of[w])
