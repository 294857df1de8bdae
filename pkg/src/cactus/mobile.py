"""Four-type plane trees, admissible labelings and their sampling.

Trees are stored in preorder: vertex 0 is the root and the children of a
vertex are listed left to right.  Labels live on even generations only
(types 1 and 2); odd-generation entries of ``Mobile.labels`` are ``None``.

Uniform admissible labels are drawn around each odd vertex separately.
For an odd vertex with ``k`` children the increment vector
``i_1..i_k`` (child label minus parent label) must satisfy, with
``i_0 = i_{k+1} = 0``, ``i_{j+1} >= i_j - 1`` and ``i_{j+1} >= i_j`` when
the vertex at position ``j+1`` has type 2 (position ``k+1`` is the
parent).  Counting is an exact dynamic program over ``i_j`` in
``[-j, k+1-j]``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidMobileError, ParseError
from .rng import uniform_below

INT64_SAFE = 2**62


@dataclass(frozen=True)
class FourTypeTree:
    types: tuple[int, ...]
    n_children: tuple[int, ...]

    def __post_init__(self):
        if len(self.types) != len(self.n_children) or not self.types:
            raise InvalidMobileError("types and child counts must be non-empty and of equal length")
        if any(c < 0 for c in self.n_children) or sum(self.n_children) != len(self.types) - 1:
            raise InvalidMobileError("child counts do not describe a single plane tree")
        # every prefix must keep at least one open slot until the end
        open_slots = 1
        for i, c in enumerate(self.n_children):
            open_slots += c - 1
            if open_slots == 0 and i != len(self.types) - 1:
                raise InvalidMobileError("child counts close the tree too early")

    @classmethod
    def from_children(cls, types: Sequence[int], children: Sequence[Sequence[int]]) -> "FourTypeTree":
        """Build from arbitrary vertex ids with ``children[v]`` in left-to-right order, root 0."""
        order = []
        stack = [0]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(children[v]))
        if len(order) != len(types):
            raise InvalidMobileError("children lists do not reach every vertex from 0")
        return cls(tuple(types[v] for v in order), tuple(len(children[v]) for v in order))

    @property
    def size(self) -> int:
        return len(self.types)

    @cached_property
    def parent(self) -> tuple[int, ...]:
        par = [-1] * self.size
        stack: list[list[int]] = []  # [vertex, children still to attach]
        for v, c in enumerate(self.n_children):
            if stack:
                par[v] = stack[-1][0]
                stack[-1][1] -= 1
                if stack[-1][1] == 0:
                    stack.pop()
            if c:
                stack.append([v, c])
        return tuple(par)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        ch: list[list[int]] = [[] for _ in range(self.size)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                ch[p].append(v)
        return tuple(tuple(c) for c in ch)

    @cached_property
    def depth(self) -> tuple[int, ...]:
        d = [0] * self.size
        par = self.parent
        for v in range(1, self.size):
            d[v] = d[par[v]] + 1
        return tuple(d)

    def address(self, v: int) -> tuple[int, ...]:
        """Ulam-Harris word of ``v`` (children numbered from 1)."""
        out = []
        par = self.parent
        while par[v] >= 0:
            p = par[v]
            out.append(self.children[p].index(v) + 1)
            v = p
        return tuple(reversed(out))

    def vertex_at(self, address: Sequence[int]) -> int:
        v = 0
        for i in address:
            v = self.children[v][i - 1]
        return v

    def count_type(self, t: int) -> int:
        return self.types.count(t)

    def to_text(self, labels: Optional[Sequence[Optional[int]]] = None) -> str:
        lines = [str(self.size)]
        for v in range(self.size):
            rec = f"{self.types[v]} {self.n_children[v]}"
            if labels is not None and labels[v] is not None:
                rec += f" {labels[v]}"
            lines.append(rec)
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Mobile:
    tree: FourTypeTree
    labels: tuple[Optional[int], ...]

    def __post_init__(self):
        if len(self.labels) != self.tree.size:
            raise InvalidMobileError("one label slot per vertex is required")

    @property
    def root_type(self) -> int:
        return self.tree.types[0]

    def min_label(self) -> int:
        return min(l for l in self.labels if l is not None)

    def to_text(self) -> str:
        return self.tree.to_text(self.labels)

    @classmethod
    def from_text(cls, text: str) -> "Mobile":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        try:
            n = int(rows[0][0])
            recs = [[int(x) for x in r] for r in rows[1:]]
        except (ValueError, IndexError) as exc:
            raise ParseError(f"malformed mobile file: {exc}") from None
        if len(recs) != n or any(len(r) not in (2, 3) for r in recs):
            raise ParseError("mobile file needs n records of 'type child_count [label]'")
        tree = FourTypeTree(tuple(r[0] for r in recs), tuple(r[1] for r in recs))
        labels = tuple(r[2] if len(r) == 3 else None for r in recs)
        return cls(tree, labels)


def check_tree(t: FourTypeTree) -> list[str]:
    """Structural rules (i)-(iv); an empty list means the tree is valid."""
    out = []
    ty, ch = t.types, t.children
    for v, tv in enumerate(ty):
        if tv not in (1, 2, 3, 4):
            out.append(f"vertex {v}: unknown type {tv}")
    if ty[0] not in (1, 2):
        out.append(f"(i) root has type {ty[0]}")
    for v, tv in enumerate(ty):
        kids = [ty[c] for c in ch[v]]
        if tv == 1 and any(k != 3 for k in kids):
            out.append(f"(ii) vertex {v} of type 1 has a child of type other than 3")
        elif tv == 2:
            want = [4, 4] if v == 0 else [4]
            if kids != want:
                out.append(f"(iii) vertex {v} of type 2 has children {kids}, expected {want}")
        elif tv in (3, 4) and any(k not in (1, 2) for k in kids):
            out.append(f"(iv) vertex {v} of type {tv} has a child of type 3 or 4")
    return out


def validate(m: Mobile) -> list[str]:
    """Every violated structural or labeling rule, with the offending vertex."""
    t = m.tree
    out = check_tree(t)
    depth, lab = t.depth, m.labels
    for v in range(t.size):
        even = depth[v] % 2 == 0
        if even and lab[v] is None:
            out.append(f"vertex {v}: even generation but no label")
        if not even and lab[v] is not None:
            out.append(f"vertex {v}: odd generation but carries a label")
    if out:
        return out
    if lab[0] != 0:
        out.append(f"(a) root label is {lab[0]}, not 0")
    for u in range(t.size):
        if depth[u] % 2 == 0:
            continue
        p = t.parent[u]
        ring = [p, *t.children[u], p]
        for a, b in zip(ring, ring[1:]):
            need = lab[a] if t.types[b] == 2 else lab[a] - 1
            if lab[b] < need:
                out.append(
                    f"(b) around vertex {u}: label {lab[b]} at vertex {b} is below {need}"
                )
    return out


def check_mobile(m: Mobile) -> Mobile:
    bad = validate(m)
    if bad:
        raise InvalidMobileError("; ".join(bad[:5]))
    return m


def contour(t: FourTypeTree) -> list[int]:
    """Full contour sequence v_0..v_{2p}."""
    ch = t.children
    out = [0]
    stack = [(0, 0)]
    while stack:
        v, i = stack[-1]
        if i < len(ch[v]):
            stack[-1] = (v, i + 1)
            c = ch[v][i]
            out.append(c)
            stack.append((c, 0))
        else:
            stack.pop()
            if stack:
                out.append(stack[-1][0])
    return out


def modified_contour(t: FourTypeTree) -> list[int]:
    """Every second entry of the contour: u_0..u_p, all of even generation."""
    return contour(t)[::2]


# ---------------------------------------------------------------- shuffling


def shuffle(t: FourTypeTree, rng: np.random.Generator, coins: Optional[Sequence[int]] = None):
    """Reverse the children of each odd-generation vertex with probability 1/2.

    Coins are consumed in preorder over odd vertices (or taken from
    ``coins`` in that order).  Returns ``(new_tree, sigma)`` with
    ``sigma[old_id] = new_id``.
    """
    depth, ch = t.depth, t.children
    odd = [v for v in range(t.size) if depth[v] % 2 == 1]
    if coins is None:
        coins = rng.integers(0, 2, size=len(odd)).tolist() if odd else []
    if len(coins) != len(odd):
        raise ValueError(f"expected {len(odd)} coins, got {len(coins)}")
    flip = dict(zip(odd, coins))
    sigma = [0] * t.size
    types, counts = [], []
    stack = [0]
    while stack:
        v = stack.pop()
        sigma[v] = len(types)
        types.append(t.types[v])
        counts.append(len(ch[v]))
        kids = ch[v][::-1] if flip.get(v, 0) else ch[v]
        stack.extend(reversed(kids))
    return FourTypeTree(tuple(types), tuple(counts)), tuple(sigma)


def shuffle_mobile(m: Mobile, rng: np.random.Generator, coins=None):
    """Shuffle the tree and carry labels along.  The result is generally not admissible."""
    t2, sigma = shuffle(m.tree, rng, coins)
    labels: list[Optional[int]] = [None] * t2.size
    for old, new in enumerate(sigma):
        labels[new] = m.labels[old]
    return t2, tuple(labels), sigma


# --------------------------------------------------------- label sampling


def _bounds(child_types: Sequence[int], parent_type: int) -> tuple[int, ...]:
    """Lower step bound (1 means a step of -1 is allowed) for steps 1..k+1."""
    return tuple(0 if c == 2 else 1 for c in child_types) + (0 if parent_type == 2 else 1,)


@lru_cache(maxsize=4096)
def _completion_counts(bounds: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """``N[j][v + j]`` = number of ways to finish from ``i_j = v`` (exact ints)."""
    k = len(bounds) - 1
    width = k + 2
    N = [[0] * width for _ in range(k + 2)]
    N[k + 1][k + 1] = 1  # i_{k+1} = 0 sits at offset k+1
    for j in range(k, -1, -1):
        nxt = N[j + 1]
        # suffix sums over offsets of step j+1 (value w = off - (j+1))
        suf = [0] * (width + 1)
        for off in range(width - 1, -1, -1):
            suf[off] = suf[off + 1] + nxt[off]
        drop = bounds[j]
        row = N[j]
        for off in range(width):
            v = off - j
            if v > k + 1 - j:
                continue
            lo = v - drop + (j + 1)  # smallest allowed offset at step j+1
            row[off] = suf[max(lo, 0)] if lo < width else 0
    return tuple(tuple(r) for r in N)


def count_increments(child_types: Sequence[int], parent_type: int) -> int:
    """Number of admissible increment vectors around one odd vertex."""
    return _completion_counts(_bounds(child_types, parent_type))[0][0]


def enumerate_increments(child_types: Sequence[int], parent_type: int) -> list[tuple[int, ...]]:
    """Brute-force list of admissible increment vectors (small k only)."""
    bounds = _bounds(child_types, parent_type)
    k = len(child_types)
    out = []

    def rec(prefix, last):
        j = len(prefix)
        if j == k:
            if 0 >= last - bounds[k]:
                out.append(tuple(prefix))
            return
        for w in range(last - bounds[j], k + 2):
            rec(prefix + [w], w)

    rec([], 0)
    return out


def sample_increments(child_types: Sequence[int], parent_type: int, size: int, rng) -> np.ndarray:
    """``size`` independent uniform admissible increment vectors, shape (size, k)."""
    bounds = _bounds(child_types, parent_type)
    k = len(child_types)
    out = np.zeros((size, k), dtype=np.int64)
    if k == 0 or size == 0:
        return out
    N = _completion_counts(bounds)
    if N[0][0] < INT64_SAFE:
        cur = np.zeros(size, dtype=np.int64)
        for j in range(1, k + 1):
            row = np.array(N[j], dtype=np.int64)
            incl = np.cumsum(row)  # incl[off] = sum of row[<= off]
            excl = incl - row
            lo_off = np.maximum(cur - bounds[j - 1] + j, 0)
            total = incl[-1] - excl[lo_off]
            r = rng.integers(0, total)
            target = excl[lo_off] + r
            off = np.searchsorted(incl, target, side="right")
            cur = off - j
            out[:, j - 1] = cur
        return out
    for s in range(size):
        cur = 0
        for j in range(1, k + 1):
            row = N[j]
            lo = max(cur - bounds[j - 1] + j, 0)
            r = uniform_below(rng, sum(row[lo:]))
            off = lo
            while r >= row[off]:
                r -= row[off]
                off += 1
            cur = off - j
            out[s, j - 1] = cur
    return out


def sample_labels_uniform(t: FourTypeTree, rng: np.random.Generator) -> Mobile:
    """Uniform admissible labeling of ``t`` (independent around each odd vertex)."""
    bad = check_tree(t)
    if bad:
        raise InvalidMobileError("; ".join(bad[:5]))
    ty, ch, par, depth = t.types, t.children, t.parent, t.depth
    groups: dict[tuple, list[int]] = defaultdict(list)
    for u in range(t.size):
        if depth[u] % 2 == 1 and ch[u]:
            groups[(tuple(ty[c] for c in ch[u]), ty[par[u]])].append(u)
    incr = [0] * t.size
    for key in sorted(groups):
        us = groups[key]
        draws = sample_increments(key[0], key[1], len(us), rng)
        for u, row in zip(us, draws.tolist()):
            for c, d in zip(ch[u], row):
                incr[c] = d
    labels: list[Optional[int]] = [None] * t.size
    labels[0] = 0
    for v in range(1, t.size):
        if depth[v] % 2 == 0:
            labels[v] = labels[par[par[v]]] + incr[v]
    return Mobile(t, tuple(labels))
