"""From mobiles to rooted pointed planar maps.

Each corner ``i`` of the modified contour (``0 <= i < p``) emits one chord:
to the extra vertex rho when its label is the global minimum, otherwise to
the first later corner (cyclically) whose label is one less.  Chord ``i``
owns two temporary half-edges, ``2i`` at its source corner and ``2i+1``
at its target.

Rotation at a tree vertex: its corners in contour order; within a corner
the incoming chords sorted by increasing backward span, then the outgoing
chord.  At rho the chords come in decreasing corner order.  With this
convention the tree vertex visited just after corner ``c`` lies in the
face of half-edge ``2c+1``, which gives an exact face/odd-vertex
correspondence.  Type-2 vertices are then erased: their two chords are
spliced into one edge joining the two chord targets.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InvalidMapError, InvalidMobileError
from .mobile import Mobile, contour, validate
from .planar_map import CombinatorialMap, MapClass, vertex_ids

RHO = -1


class Variant(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NULL = "null"

    @classmethod
    def parse(cls, s) -> "Variant":
        if isinstance(s, cls):
            return s
        if isinstance(s, MapClass):
            return cls(s.value)
        aliases = {"pos": "positive", "neg": "negative", "+": "positive", "-": "negative", "0": "null"}
        try:
            return cls(aliases.get(str(s).lower(), str(s).lower()))
        except ValueError:
            raise ValueError(f"unknown variant {s!r}; use positive, negative or null") from None


@dataclass(frozen=True)
class CornerChord:
    source: int
    target: Optional[int]  # corner index, or None for rho


@dataclass(frozen=True)
class BDGResult:
    map: CombinatorialMap
    mobile: Mobile
    variant: Variant
    vertex_of_tree: dict  # type-1 tree vertex -> map vertex
    associated: dict  # type-2 tree vertex -> (tree vertex or RHO, tree vertex or RHO)
    face_of_odd: dict  # odd-generation tree vertex -> face index in faces(map)


def successors(labels: list[int]) -> list[int]:
    """Chord target per corner: a corner index, or ``RHO`` at the minimum."""
    p = len(labels)
    mn = min(labels)
    succ = [RHO] * p
    nxt: dict[int, int] = {}
    for idx in range(2 * p - 1, -1, -1):
        lab = labels[idx % p]
        if idx < p and lab != mn:
            succ[idx] = nxt[lab - 1] % p
        nxt[lab] = idx
    return succ


def chords(m: Mobile) -> list[CornerChord]:
    mc = contour(m.tree)[::2]
    p = len(mc) - 1
    if p == 0:
        return []
    succ = successors([m.labels[u] for u in mc[:p]])
    return [CornerChord(i, None if s == RHO else s) for i, s in enumerate(succ)]


def chords_cross(ch: list[CornerChord], p: int) -> bool:
    """Quadratic check that no two corner chords interleave on the contour circle."""
    arcs = [(c.source, (c.target - c.source) % p) for c in ch if c.target is not None]
    for a, la in arcs:
        def inside(x):
            return 0 < (x - a) % p < la

        for c, lc in arcs:
            d = (c + lc) % p
            if c % p in (a, (a + la) % p) or d in (a, (a + la) % p):
                continue
            if inside(c) != inside(d):
                return True
    return False


def bdg_construct(m: Mobile, variant="positive") -> BDGResult:
    variant = Variant.parse(variant)
    bad = validate(m)
    if bad:
        raise InvalidMobileError("; ".join(bad[:5]))
    t = m.tree
    root_type = t.types[0]
    if variant is Variant.NULL and root_type != 2:
        raise InvalidMobileError("the null variant needs a type-2 root")
    if variant is not Variant.NULL and root_type != 1:
        raise InvalidMobileError(f"the {variant.value} variant needs a type-1 root")
    if t.size == 1:
        return BDGResult(CombinatorialMap.vertex_map(), m, variant, {0: 0}, {}, {})

    full = contour(t)
    mc = full[::2]
    p = len(mc) - 1
    labels = [m.labels[u] for u in mc[:p]]
    succ = successors(labels)
    types = t.types

    incoming: list[list[int]] = [[] for _ in range(p)]
    for i, s in enumerate(succ):
        if s != RHO:
            incoming[s].append(i)
    corners: dict[int, list[int]] = {}
    for i in range(p):
        corners.setdefault(mc[i], []).append(i)

    H = 2 * p
    nxt = [-1] * H
    opp = [0] * H
    for i in range(p):
        opp[2 * i] = 2 * i + 1
        opp[2 * i + 1] = 2 * i
    for u, cs in corners.items():
        seq = []
        for c in cs:
            ins = incoming[c]
            if len(ins) > 1:
                ins.sort(key=lambda i: (c - i) % p)
            seq.extend(2 * i + 1 for i in ins)
            seq.append(2 * c)
        for a, b in zip(seq, seq[1:] + seq[:1]):
            nxt[a] = b
    at_rho = [2 * i + 1 for i in range(p - 1, -1, -1) if succ[i] == RHO]
    for a, b in zip(at_rho, at_rho[1:] + at_rho[:1]):
        nxt[a] = b

    def target_vertex(c: int) -> int:
        return RHO if succ[c] == RHO else mc[succ[c]]

    # erase type-2 vertices
    alive = [True] * H
    associated = {}
    for u, cs in corners.items():
        if types[u] != 2:
            continue
        c1, c2 = cs
        h1, h2 = 2 * c1 + 1, 2 * c2 + 1
        opp[h1], opp[h2] = h2, h1
        alive[2 * c1] = alive[2 * c2] = False
        associated[u] = (target_vertex(c1), target_vertex(c2))

    new_id = [-1] * H
    k = 0
    for h in range(H):
        if alive[h]:
            new_id[h] = k
            k += 1
    keep = [h for h in range(H) if alive[h]]
    opp2 = tuple(new_id[opp[h]] for h in keep)
    nxt2 = tuple(new_id[nxt[h]] for h in keep)
    root = new_id[0] if variant is Variant.NEGATIVE else new_id[1]
    vo = vertex_ids(nxt2)
    cmap = CombinatorialMap(opp2, nxt2, root, vo[new_id[at_rho[0]]])

    vertex_of_tree = {u: vo[new_id[2 * cs[0]]] for u, cs in corners.items() if types[u] == 1}

    face_idx = [-1] * len(keep)
    for f, orb in enumerate(cmap._face_orbits):
        for h in orb:
            face_idx[h] = f
    face_of_odd: dict[int, int] = {}
    for c in range(p):
        y = full[2 * c + 1]
        f = face_idx[new_id[2 * c + 1]]
        if face_of_odd.setdefault(y, f) != f:
            raise AssertionError(f"odd vertex {y} touches two faces")
    if len(set(face_of_odd.values())) != len(face_of_odd) or len(face_of_odd) != cmap.n_faces:
        raise AssertionError("faces and odd-generation vertices are not in bijection")
    return BDGResult(cmap, m, variant, vertex_of_tree, associated, face_of_odd)


def mobile_to_map(m: Mobile, variant="positive") -> CombinatorialMap:
    return bdg_construct(m, variant).map


def expected_face_degree(m: Mobile, y: int) -> int:
    """Face degree read off the child profile of odd vertex ``y``."""
    t = m.tree
    kids = [t.types[c] for c in t.children[y]]
    k, k2 = kids.count(1), kids.count(2)
    return (2 if t.types[y] == 3 else 1) + 2 * k + k2


def check_face_degrees(res: BDGResult) -> list[str]:
    from .planar_map import faces

    degs = {f: d for f, d, _ in faces(res.map)}
    out = []
    for y, f in res.face_of_odd.items():
        want = expected_face_degree(res.mobile, y)
        if degs[f] != want:
            out.append(f"face {f} of odd vertex {y}: degree {degs[f]}, expected {want}")
    return out


def face_degree_profile(m: Mobile) -> Counter:
    t = m.tree
    return Counter(expected_face_degree(m, y) for y in range(t.size) if t.depth[y] % 2 == 1)


def verify_distance_identity(cmap: CombinatorialMap, m: Mobile) -> bool:
    """BFS check of d(rho, u) = label(u) - min label + 1 for every type-1 vertex."""
    variant = Variant.NULL if m.tree.types[0] == 2 else Variant.POSITIVE
    res = bdg_construct(m, variant)
    rebuilt = res.map
    same = (
        rebuilt.opposite == cmap.opposite
        and rebuilt.next_at_vertex == cmap.next_at_vertex
        and rebuilt.pointed_vertex == cmap.pointed_vertex
    )
    if not same:
        raise InvalidMapError("map does not match the mobile; vertex correspondence unavailable")
    if cmap.n_half_edges == 0:
        return True
    d = cmap.distances_from_pointed()
    mn = m.min_label()
    return all(d[v] == m.labels[u] - mn + 1 for u, v in res.vertex_of_tree.items())


def tree_path(m: Mobile, u: int, v: int) -> list[int]:
    par, dep = m.tree.parent, m.tree.depth
    left, right = [u], [v]
    while dep[left[-1]] > dep[right[-1]]:
        left.append(par[left[-1]])
    while dep[right[-1]] > dep[left[-1]]:
        right.append(par[right[-1]])
    while left[-1] != right[-1]:
        left.append(par[left[-1]])
        right.append(par[right[-1]])
    return left + right[-2::-1]


def path_min_label(m: Mobile, u: int, v: int) -> int:
    """Minimum label over the even-generation vertices of the tree path from u to v."""
    return min(m.labels[w] for w in tree_path(m, u, v) if m.labels[w] is not None)


def label_cactus_formula(m: Mobile, u: int, v: int) -> int:
    """Label proxy for the cactus distance: l_u + l_v - 2 min over the tree path."""
    return m.labels[u] + m.labels[v] - 2 * path_min_label(m, u, v)


def map_distances(cmap: CombinatorialMap) -> np.ndarray:
    """All-pairs graph distances (small maps only)."""
    nv = cmap.n_vertices
    adj = cmap.neighbours(nv)
    out = np.full((nv, nv), -1, dtype=np.int64)
    for s in range(nv):
        out[s, s] = 0
        q = deque([s])
        while q:
            a = q.popleft()
            for b in adj[a]:
                if out[s, b] < 0:
                    out[s, b] = out[s, a] + 1
                    q.append(b)
    return out
