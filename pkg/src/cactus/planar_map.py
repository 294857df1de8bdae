"""Rooted pointed planar maps stored as rotation systems.

A map with ``E`` edges has half-edges ``0..2E-1``.  ``opposite`` pairs the
two halves of each edge and ``next_at_vertex`` turns counterclockwise
around the vertex a half-edge is attached to.  Vertices are the orbits of
``next_at_vertex``, numbered by their smallest half-edge; faces are the
orbits of ``h -> next_at_vertex[opposite[h]]``.  Planarity is certified
by Euler's formula.  The vertex map (no edge, one vertex, one face of
degree 0) has ``E = 0`` and no root half-edge.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import InvalidMapError, ParseError
from .graph_cactus import PointedGraph


class MapClass(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NULL = "null"


def _orbits(perm: tuple[int, ...]) -> list[list[int]]:
    seen = [False] * len(perm)
    out = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cyc = []
        h = start
        while not seen[h]:
            seen[h] = True
            cyc.append(h)
            h = perm[h]
        out.append(cyc)
    return out


def vertex_ids(next_at_vertex) -> list[int]:
    """Vertex id per half-edge, orbits numbered by their smallest half-edge."""
    out = [-1] * len(next_at_vertex)
    for vid, orb in enumerate(_orbits(next_at_vertex)):
        for h in orb:
            out[h] = vid
    return out


@dataclass(frozen=True)
class CombinatorialMap:
    opposite: tuple[int, ...]
    next_at_vertex: tuple[int, ...]
    root_half_edge: Optional[int]
    pointed_vertex: int = 0

    def __post_init__(self):
        H = len(self.opposite)
        if len(self.next_at_vertex) != H:
            raise InvalidMapError("opposite and next_at_vertex differ in length")
        if H % 2:
            raise InvalidMapError("odd number of half-edges")
        for h, o in enumerate(self.opposite):
            if not 0 <= o < H or o == h or self.opposite[o] != h:
                raise InvalidMapError(f"opposite is not a fixed-point-free involution at {h}")
        if sorted(self.next_at_vertex) != list(range(H)):
            raise InvalidMapError("next_at_vertex is not a permutation")
        if H == 0:
            if self.root_half_edge is not None or self.pointed_vertex != 0:
                raise InvalidMapError("the vertex map has no root half-edge and a single vertex 0")
            return
        if self.root_half_edge is None or not 0 <= self.root_half_edge < H:
            raise InvalidMapError("root half-edge missing or out of range")
        if not 0 <= self.pointed_vertex < self.n_vertices:
            raise InvalidMapError(f"pointed vertex {self.pointed_vertex} out of range")
        if not self._connected():
            raise InvalidMapError("underlying graph is disconnected")
        if self.euler_characteristic != 2:
            raise InvalidMapError(
                f"Euler check failed: V - E + F = {self.euler_characteristic} (not planar)"
            )

    @classmethod
    def vertex_map(cls) -> "CombinatorialMap":
        return cls((), (), None, 0)

    @property
    def n_half_edges(self) -> int:
        return len(self.opposite)

    @property
    def n_edges(self) -> int:
        return len(self.opposite) // 2

    @cached_property
    def vertex_of(self) -> tuple[int, ...]:
        """Vertex id of every half-edge (orbits numbered by smallest member)."""
        return tuple(vertex_ids(self.next_at_vertex))

    @property
    def n_vertices(self) -> int:
        if self.n_half_edges == 0:
            return 1
        return max(self.vertex_of) + 1

    @cached_property
    def _face_orbits(self) -> list[list[int]]:
        opp, nxt = self.opposite, self.next_at_vertex
        return _orbits(tuple(nxt[opp[h]] for h in range(self.n_half_edges)))

    @property
    def n_faces(self) -> int:
        return 1 if self.n_half_edges == 0 else len(self._face_orbits)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    def _connected(self) -> bool:
        nv = max(self.vertex_of) + 1
        adj = self.neighbours(nv)
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == nv

    def neighbours(self, nv: Optional[int] = None) -> list[list[int]]:
        nv = self.n_vertices if nv is None else nv
        vo = self.vertex_of
        adj: list[list[int]] = [[] for _ in range(nv)]
        for h, o in enumerate(self.opposite):
            adj[vo[h]].append(vo[o])
        return adj

    @property
    def root_vertices(self) -> tuple[int, int]:
        """(origin, target) of the root edge."""
        if self.root_half_edge is None:
            return (0, 0)
        vo = self.vertex_of
        return vo[self.root_half_edge], vo[self.opposite[self.root_half_edge]]

    def distances_from_pointed(self) -> np.ndarray:
        nv = self.n_vertices
        adj = self.neighbours(nv)
        dist = np.full(nv, -1, dtype=np.int64)
        dist[self.pointed_vertex] = 0
        queue = deque([self.pointed_vertex])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return dist

    def to_graph(self) -> PointedGraph:
        """Simple pointed graph: parallel edges collapsed, loops dropped."""
        vo = self.vertex_of
        edges = [(vo[h], vo[self.opposite[h]]) for h in range(self.n_half_edges) if h < self.opposite[h]]
        return PointedGraph.simple(self.n_vertices, edges, self.pointed_vertex)

    def relabelled(self, perm) -> "CombinatorialMap":
        """Same map with half-edge ``h`` renamed ``perm[h]``."""
        H = self.n_half_edges
        opp = [0] * H
        nxt = [0] * H
        for h in range(H):
            opp[perm[h]] = perm[self.opposite[h]]
            nxt[perm[h]] = perm[self.next_at_vertex[h]]
        root = None if self.root_half_edge is None else perm[self.root_half_edge]
        probe = CombinatorialMap(tuple(opp), tuple(nxt), root, 0) if H else self
        # the pointed vertex keeps its identity, not its number
        if H:
            old_h = self.vertex_of.index(self.pointed_vertex)
            pv = probe.vertex_of[perm[old_h]]
            return CombinatorialMap(tuple(opp), tuple(nxt), root, pv)
        return self


def faces(m: CombinatorialMap) -> list[tuple[int, int, tuple[int, ...]]]:
    """``(face id, degree, half-edge cycle)`` for every face."""
    if m.n_half_edges == 0:
        return [(0, 0, ())]
    return [(i, len(orb), tuple(orb)) for i, orb in enumerate(m._face_orbits)]


def classify(m: CombinatorialMap) -> MapClass:
    if m.root_half_edge is None:
        return MapClass.POSITIVE
    d = m.distances_from_pointed()
    minus, plus = m.root_vertices
    diff = d[plus] - d[minus]
    if diff > 0:
        return MapClass.POSITIVE
    if diff < 0:
        return MapClass.NEGATIVE
    return MapClass.NULL


def encode(m: CombinatorialMap) -> str:
    H = m.n_half_edges
    root = -1 if m.root_half_edge is None else m.root_half_edge
    return (
        f"{H} {root} {m.pointed_vertex}\n"
        + " ".join(map(str, m.opposite))
        + "\n"
        + " ".join(map(str, m.next_at_vertex))
        + "\n"
    )


def decode(text: str) -> CombinatorialMap:
    lines = text.split("\n")
    try:
        H, root, pv = (int(x) for x in lines[0].split())
        opp = tuple(int(x) for x in lines[1].split()) if len(lines) > 1 else ()
        nxt = tuple(int(x) for x in lines[2].split()) if len(lines) > 2 else ()
    except ValueError as exc:
        raise ParseError(f"malformed map file: {exc}") from None
    if len(opp) != H or len(nxt) != H:
        raise ParseError(f"expected {H} entries on the permutation lines")
    return CombinatorialMap(opp, nxt, None if root < 0 else root, pv)
