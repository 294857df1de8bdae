"""Boltzmann weight sequences: criticality tuning, offspring laws, sampling.

Generating functions (finite support, so plain polynomials)::

    f_bullet(x, y)  = sum x^k y^k' C(2k+k'+1, k+1) C(k+k', k) q_{2+2k+k'}
    f_diamond(x, y) = sum x^k y^k' C(2k+k', k)   C(k+k', k) q_{1+2k+k'}

and the bipartite ``f(x) = f_bullet(x, 0)``.  The offspring laws use
``z_plus = x`` and ``z_zero = y**2``.

Trees are sampled block by block.  A *block* is a type-1 vertex together
with everything below it down to (but excluding) the next type-1
vertices, which we call its frontier.  Blocks are i.i.d., so the
type-1 vertices form a single-type Galton-Watson tree whose offspring
count is the frontier size ``xi``.  Listing blocks in depth-first order
gives a Lukasiewicz walk with steps ``xi - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import ConvergenceError, LatticeError, ParseError, SamplingBudgetExceeded, SizeCapExceeded
from .mobile import FourTypeTree, sample_labels_uniform

RESIDUAL_TOL = 1e-10
RADIUS_TOL = 1e-8


# ------------------------------------------------------------------ weights


@dataclass(frozen=True)
class WeightSeq:
    """Face weights ``q_1, q_2, ...`` (``q[0]`` is ``q_1``)."""

    q: tuple[float, ...]

    def __post_init__(self):
        q = tuple(float(v) for v in self.q)
        while q and q[-1] == 0.0:
            q = q[:-1]
        if any(not math.isfinite(v) or v < 0 for v in q):
            raise ValueError("weights must be finite and non-negative")
        if not any(v > 0 for v in q[2:]):
            raise ValueError("need q_k > 0 for some k >= 3")
        object.__setattr__(self, "q", q)

    @classmethod
    def from_dict(cls, weights: dict) -> "WeightSeq":
        top = max(weights)
        if min(weights) < 1:
            raise ValueError("weights are indexed from 1")
        return cls(tuple(float(weights.get(k, 0.0)) for k in range(1, top + 1)))

    @classmethod
    def delta(cls, k: int, value: float = 1.0) -> "WeightSeq":
        return cls.from_dict({k: value})

    def __getitem__(self, k: int) -> float:
        return self.q[k - 1] if 1 <= k <= len(self.q) else 0.0

    @property
    def max_degree(self) -> int:
        return len(self.q)

    @property
    def case(self) -> str:
        """``A1`` if some odd degree has positive weight, else ``A2``."""
        return "A1" if any(v > 0 for k, v in enumerate(self.q, 1) if k % 2) else "A2"

    def scaled(self, c: float) -> "WeightSeq":
        return WeightSeq(tuple(c * v for v in self.q))

    def to_text(self) -> str:
        return "".join(f"{k} {v!r}\n" for k, v in enumerate(self.q, 1) if v)

    @classmethod
    def from_text(cls, text: str) -> "WeightSeq":
        weights = {}
        for ln in text.splitlines():
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            parts = ln.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'k q_k', got {ln!r}")
            try:
                k, v = int(parts[0]), float(parts[1])
            except ValueError:
                raise ParseError(f"expected 'k q_k', got {ln!r}") from None
            if k < 1 or k in weights:
                raise ParseError(f"bad or repeated degree {k}")
            weights[k] = v
        if not weights:
            raise ParseError("empty weight file")
        try:
            return cls.from_dict(weights)
        except ValueError as exc:
            raise ParseError(str(exc)) from None


# --------------------------------------------------------- polynomials


@dataclass(frozen=True)
class _Poly:
    k: np.ndarray
    kp: np.ndarray
    c: np.ndarray

    def derivs(self, x: float, y: float):
        """Value, first and second partial derivatives at (x, y)."""
        k, kp, c = self.k, self.kp, self.c
        if len(c) == 0:
            return (0.0,) * 6

        def mono(a, b):
            return np.where(a >= 0, x ** np.maximum(a, 0), 0.0) * np.where(b >= 0, y ** np.maximum(b, 0), 0.0)

        v = float(np.sum(c * mono(k, kp)))
        dx = float(np.sum(c * k * mono(k - 1, kp)))
        dy = float(np.sum(c * kp * mono(k, kp - 1)))
        dxx = float(np.sum(c * k * (k - 1) * mono(k - 2, kp)))
        dxy = float(np.sum(c * k * kp * mono(k - 1, kp - 1)))
        dyy = float(np.sum(c * kp * (kp - 1) * mono(k, kp - 2)))
        return v, dx, dy, dxx, dxy, dyy


def _terms(q: WeightSeq, offset: int, extra: int):
    """(k, k', coefficient) with ``offset + 2k + k' = degree``."""
    ks, kps, cs = [], [], []
    for d in range(1, q.max_degree + 1):
        if q[d] == 0:
            continue
        for k in range(0, (d - offset) // 2 + 1):
            kp = d - offset - 2 * k
            if kp < 0:
                continue
            top = 2 * k + kp + extra
            coef = math.comb(top, k + extra) * math.comb(k + kp, k)
            ks.append(k)
            kps.append(kp)
            cs.append(coef * q[d])
    return _Poly(np.array(ks, dtype=float), np.array(kps, dtype=float), np.array(cs, dtype=float))


@lru_cache(maxsize=256)
def _polys(q: WeightSeq) -> tuple[_Poly, _Poly]:
    return _terms(q, 2, 1), _terms(q, 1, 0)


@dataclass(frozen=True)
class GFValues:
    f_bullet: float
    f_diamond: float
    f_bipartite: float
    d_bullet: tuple[float, float]
    d_diamond: tuple[float, float]
    d_bipartite: float


def eval_generating_functions(q: WeightSeq, x: float, y: float = 0.0) -> GFValues:
    if x < 0 or y < 0:
        raise ValueError("x and y must be non-negative")
    pb, pd = _polys(q)
    b = pb.derivs(x, y)
    d = pd.derivs(x, y)
    b0 = pb.derivs(x, 0.0)
    return GFValues(b[0], d[0], b0[0], (b[1], b[2]), (d[1], d[2]), b0[1])


# ------------------------------------------------------------------ tuning


@dataclass(frozen=True)
class CriticalParams:
    a_c: float
    x: float
    y: float
    z_plus: float
    z_zero: float
    spectral_radius: float
    case: str
    residuals: tuple[float, ...] = field(default=())

    def to_text(self) -> str:
        rows = [
            ("a_c", self.a_c),
            ("x", self.x),
            ("y", self.y),
            ("z_plus", self.z_plus),
            ("z_zero", self.z_zero),
            ("spectral_radius", self.spectral_radius),
            ("case", self.case),
        ]
        rows += [(f"residual_{i}", r) for i, r in enumerate(self.residuals)]
        return "".join(f"{k} = {v!r}\n" if not isinstance(v, str) else f"{k} = {v}\n" for k, v in rows)


def mean_matrix(q: WeightSeq, x: float, y: float, a: float = 1.0) -> np.ndarray:
    """The 3x3 mean matrix M(x, y) for weights ``a*q``.

    At ``y = 0`` no type-2 vertex can occur, so that row and column are
    zeroed (the diagonal entry would otherwise be a spurious eigenvalue).
    """
    pb, pd = _polys(q)
    _, bx, by, *_ = pb.derivs(x, y)
    _, dx, dy, *_ = pd.derivs(x, y)
    bx, by, dx, dy = a * bx, a * by, a * dx, a * dy
    return np.array(
        [
            [0.0, 0.0, x - 1.0],
            [x / y * dx, dy, 0.0] if y > 0 else [0.0, 0.0, 0.0],
            [x * x / (x - 1.0) * bx, x * y / (x - 1.0) * by, 0.0],
        ]
    )


def spectral_radius(m: np.ndarray) -> float:
    """Largest modulus among the roots of the characteristic polynomial."""
    tr = np.trace(m)
    minors = (
        m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
        + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
    )
    det = np.linalg.det(m)
    roots = np.roots([1.0, -tr, minors, -det])
    return float(np.max(np.abs(roots)))


def _gh(q: WeightSeq, a: float, x: float, y: float):
    """G, H, their gradients and the tangency determinant for ``a*q``."""
    pb, pd = _polys(q)
    b = pb.derivs(x, y)
    d = pd.derivs(x, y)
    G = a * b[0] - 1.0 + 1.0 / x
    H = a * d[0] - y
    Gx, Gy = a * b[1] - 1.0 / x**2, a * b[2]
    Hx, Hy = a * d[1], a * d[2] - 1.0
    return G, H, Gx, Gy, Hx, Hy, b, d


def tangency_det(q: WeightSeq, x: float, y: float, a: float = 1.0) -> float:
    """det(grad G, grad H) at (x, y) for weights ``a*q``."""
    _, _, Gx, Gy, Hx, Hy, _, _ = _gh(q, a, x, y)
    return Gx * Hy - Gy * Hx


def solve_branch(q: WeightSeq, a: float, start: tuple[float, float], max_iter: int = 100):
    """Damped Newton for G_a = H_a = 0 with x > 1, y > 0; ``None`` on failure."""
    x, y = start
    G, H, Gx, Gy, Hx, Hy, _, _ = _gh(q, a, x, y)
    res = math.hypot(G, H)
    for _ in range(max_iter):
        if res < 1e-14:
            return x, y
        det = Gx * Hy - Gy * Hx
        if det == 0 or not math.isfinite(det):
            return None
        sx = -(G * Hy - Gy * H) / det
        sy = -(Gx * H - G * Hx) / det
        t = 1.0
        for _ in range(31):
            nx, ny = x + t * sx, y + t * sy
            if nx > 1.0 and ny > 0.0:
                out = _gh(q, a, nx, ny)
                nres = math.hypot(out[0], out[1])
                if nres < res or nres < 1e-14:
                    break
            t *= 0.5
        else:
            return None
        x, y = nx, ny
        G, H, Gx, Gy, Hx, Hy, _, _ = out
        if abs(res - nres) <= 1e-16 * max(1.0, res) and nres > 1e-12:
            return None
        res = nres
    return (x, y) if res < 1e-12 else None


def _monotone_start(q: WeightSeq, a: float, iters: int = 10000):
    """Fixed-point iteration from (1, 0); increases to the smallest solution."""
    pb, pd = _polys(q)
    x, y = 1.0, 0.0
    for _ in range(iters):
        fb = a * pb.derivs(x, y)[0]
        if fb >= 1.0:
            return None
        nx, ny = 1.0 / (1.0 - fb), a * pd.derivs(x, y)[0]
        if abs(nx - x) + abs(ny - y) < 1e-15:
            return nx, ny
        x, y = nx, ny
    return x, y


def _valid(q, a, sol) -> bool:
    return sol is not None and sol[0] > 1 and sol[1] > 0 and tangency_det(q, sol[0], sol[1], a) > 0


def _tune_bipartite(q: WeightSeq) -> CriticalParams:
    pb, _ = _polys(q)

    def f(x):
        v, dv, *_ = pb.derivs(x, 0.0)
        return v, dv

    def g(x):
        v, dv = f(x)
        return v - (x * x - x) * dv

    lo, hi = 1.0, 2.0
    while g(hi) > 0:
        lo, hi = hi, hi * 2
        if hi > 1e12:
            raise ConvergenceError("no tangency point found for the bipartite equation", (lo, hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    v, dv = f(x)
    a = 1.0 / (x * x * dv)
    r1 = a * v - 1.0 + 1.0 / x
    r2 = a * dv - 1.0 / x**2
    rad = spectral_radius(mean_matrix(q, x, 0.0, a))
    return CriticalParams(a, x, 0.0, x, 0.0, rad, "A2", (abs(r1), abs(r2)))


def _tune_general(q: WeightSeq) -> CriticalParams:
    a = (1.0 / max(q.q)) / 16.0
    sol = solve_branch(q, a, (1.1, 0.1))
    tries = 0
    while not _valid(q, a, sol):
        start = _monotone_start(q, a)
        sol = solve_branch(q, a, start) if start else None
        if _valid(q, a, sol):
            break
        a /= 2.0
        tries += 1
        if tries > 60:
            raise ConvergenceError("could not find an admissible starting scale")
        sol = solve_branch(q, a, (1.1, 0.1))

    lo, lo_sol = a, sol
    hi = None
    for _ in range(200):
        cand = solve_branch(q, 2 * lo, lo_sol)
        if _valid(q, 2 * lo, cand):
            lo, lo_sol = 2 * lo, cand
        else:
            hi = 2 * lo
            break
    if hi is None:
        raise ConvergenceError("continuation in a never lost the branch", (lo, math.inf))
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        cand = solve_branch(q, mid, lo_sol)
        if _valid(q, mid, cand):
            lo, lo_sol = mid, cand
        else:
            hi = mid

    a, (x, y) = lo, lo_sol
    a, x, y = _polish_tangency(q, a, x, y, (lo, hi))
    G, H, Gx, Gy, Hx, Hy, _, _ = _gh(q, a, x, y)
    D = Gx * Hy - Gy * Hx
    rad = spectral_radius(mean_matrix(q, x, y, a))
    return CriticalParams(float(a), float(x), float(y), float(x), float(y * y), rad, "A1", (float(abs(G)), float(abs(H)), float(abs(D))))


def _polish_tangency(q: WeightSeq, a, x, y, bracket):
    """Newton on (a, x, y) for G = H = det = 0, started near the fold."""
    pb, pd = _polys(q)
    best = None
    for _ in range(50):
        b = pb.derivs(x, y)
        d = pd.derivs(x, y)
        G = a * b[0] - 1.0 + 1.0 / x
        H = a * d[0] - y
        Gx, Gy = a * b[1] - 1.0 / x**2, a * b[2]
        Hx, Hy = a * d[1], a * d[2] - 1.0
        D = Gx * Hy - Gy * Hx
        res = max(abs(G), abs(H), abs(D))
        if best is None or res < best[0]:
            best = (res, a, x, y)
        if res < 1e-15:
            break
        Da = b[1] * Hy + Gx * d[2] - b[2] * Hx - Gy * d[1]
        Dx = (a * b[3] + 2.0 / x**3) * Hy + Gx * a * d[4] - a * b[4] * Hx - Gy * a * d[3]
        Dy = a * b[4] * Hy + Gx * a * d[5] - a * b[5] * Hx - Gy * a * d[4]
        J = np.array([[b[0], Gx, Gy], [d[0], Hx, Hy], [Da, Dx, Dy]])
        try:
            step = np.linalg.solve(J, -np.array([G, H, D]))
        except np.linalg.LinAlgError:
            break
        a, x, y = a + step[0], x + step[1], y + step[2]
        if not (a > 0 and x > 1 and y > 0):
            raise ConvergenceError("tangency polish left the domain", bracket)
    res, a, x, y = best
    if res > RESIDUAL_TOL:
        raise ConvergenceError(f"tangency polish stalled at residual {res:.3g}", bracket)
    return a, x, y


@lru_cache(maxsize=64)
def tune_critical(q: WeightSeq) -> CriticalParams:
    """Scale ``a_c`` making ``a_c*q`` regular critical, with its (x, y)."""
    p = _tune_bipartite(q) if q.case == "A2" else _tune_general(q)
    if max(p.residuals) > RESIDUAL_TOL:
        raise ConvergenceError(f"residuals {p.residuals} above {RESIDUAL_TOL}")
    if abs(p.spectral_radius - 1.0) > RADIUS_TOL:
        raise ConvergenceError(f"spectral radius {p.spectral_radius!r} is not 1")
    return p


# ----------------------------------------------------------- offspring laws


@dataclass(frozen=True)
class OffspringLaws:
    """Offspring laws of the four-type tree.

    ``nu1_success`` is the success probability of the geometric number of
    type-3 children; ``nu3``/``nu4`` are ``((k, k'), probability)`` tables.
    """

    nu1_success: float
    nu3: tuple[tuple[tuple[int, int], float], ...]
    nu4: tuple[tuple[tuple[int, int], float], ...]
    c_q: float
    c_q_prime: Optional[float]

    def table(self, which: int):
        tab = self.nu3 if which == 3 else self.nu4
        pairs = np.array([p for p, _ in tab], dtype=np.int64).reshape(-1, 2)
        probs = np.array([w for _, w in tab], dtype=float)
        return pairs, probs

    @classmethod
    def custom(cls, nu1_success: float, nu3: dict, nu4: Optional[dict] = None) -> "OffspringLaws":
        """Laws from explicit tables (normalised here); for tests and experiments."""

        def norm(d):
            tot = sum(d.values())
            return tuple(sorted((tuple(k), v / tot) for k, v in d.items() if v > 0))

        return cls(float(nu1_success), norm(nu3), norm(nu4 or {}), 1.0, None)


def offspring_laws(q: WeightSeq, p: Optional[CriticalParams] = None) -> OffspringLaws:
    p = tune_critical(q) if p is None else p
    a, x, y = p.a_c, p.z_plus, math.sqrt(p.z_zero)

    def build(offset: int, extra: int):
        rows = []
        for d in range(1, q.max_degree + 1):
            if q[d] == 0:
                continue
            for k in range(0, (d - offset) // 2 + 1):
                kp = d - offset - 2 * k
                if kp < 0 or (kp > 0 and y == 0):
                    continue
                w = x**k * y**kp * math.comb(2 * k + kp + extra, k + extra) * math.comb(k + kp, k) * a * q[d]
                if w > 0:
                    rows.append(((k, kp), float(w)))
        return rows

    r3 = build(2, 1)
    r4 = build(1, 0)
    if not r3:
        raise ValueError("degenerate type-3 table: parameters inconsistent with q")
    tot3 = sum(w for _, w in r3)
    tot4 = sum(w for _, w in r4)
    nu3 = tuple(sorted((kk, w / tot3) for kk, w in r3))
    nu4 = tuple(sorted((kk, w / tot4) for kk, w in r4)) if r4 else ()
    return OffspringLaws(float(1.0 / x), nu3, nu4, float(1.0 / tot3), float(1.0 / tot4) if r4 else None)


# ------------------------------------------------------------ block growth


@dataclass
class BlockPool:
    """A batch of independent blocks.

    Node arrays are grouped by block; within a block the nodes are in
    breadth-first order and siblings keep their plane order.  Frontier
    nodes (type 1, not a block root) are included and counted by ``xi``;
    ``size`` counts the remaining nodes.
    """

    types: np.ndarray
    local_parent: np.ndarray
    start: np.ndarray  # start[b]..start[b+1] are the nodes of block b
    xi: np.ndarray
    size: np.ndarray

    def __len__(self):
        return len(self.xi)

    def block(self, b: int):
        s, e = int(self.start[b]), int(self.start[b + 1])
        return self.types[s:e].tolist(), self.local_parent[s:e].tolist()


def _categorical(rng, probs: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cum = np.cumsum(probs)
    idx = np.searchsorted(cum, rng.random(n) * cum[-1], side="right")
    return np.minimum(idx, len(probs) - 1)


def _draw_counts(laws: OffspringLaws, lvl_type, first: bool, null_root: bool, rng) -> np.ndarray:
    n = len(lvl_type)
    counts = np.zeros((n, 4), dtype=np.int64)  # children of type 1..4
    if first:
        if null_root:
            counts[:, 3] = 2
        else:
            counts[:, 2] = rng.geometric(laws.nu1_success, size=n) - 1
        return counts
    m3 = lvl_type == 3
    if m3.any():
        p3, w3 = laws.table(3)
        pick = p3[_categorical(rng, w3, int(m3.sum()))]
        counts[m3, 0], counts[m3, 1] = pick[:, 0], pick[:, 1]
    m4 = lvl_type == 4
    if m4.any():
        p4, w4 = laws.table(4)
        if len(w4) == 0:
            raise ValueError("type-4 vertex but the type-4 law is empty")
        pick = p4[_categorical(rng, w4, int(m4.sum()))]
        counts[m4, 0], counts[m4, 1] = pick[:, 0], pick[:, 1]
    counts[lvl_type == 2, 3] = 1
    return counts


@dataclass
class BlockCounts:
    """Offspring numbers of a batch of blocks, level by level, without plane order.

    Level ``l`` lists the non-frontier nodes at depth ``l`` grouped by
    block (block ids are non-decreasing).  Children of a node are listed
    type by type, which is enough to read off ``xi`` and ``size``.
    """

    levels: list  # (types, block, counts) per level
    xi: np.ndarray
    size: np.ndarray


def grow_block_counts(laws: OffspringLaws, count: int, rng, null_root: bool = False) -> BlockCounts:
    lvl_type = np.full(count, 2 if null_root else 1, dtype=np.int8)
    lvl_block = np.arange(count, dtype=np.int64)
    xi = np.zeros(count, dtype=np.int64)
    size = np.zeros(count, dtype=np.int64)
    levels = []
    first = True
    kid_types = np.arange(2, 5, dtype=np.int8)
    while len(lvl_type):
        counts = _draw_counts(laws, lvl_type, first, null_root, rng)
        first = False
        levels.append((lvl_type, lvl_block, counts))
        size += np.bincount(lvl_block, minlength=count)
        if counts[:, 0].any():
            xi += np.bincount(lvl_block, weights=counts[:, 0], minlength=count).astype(np.int64)
        rest = counts[:, 1:]
        tot = rest.sum(axis=1)
        lvl_type = np.repeat(np.tile(kid_types, len(tot)), rest.ravel())
        lvl_block = np.repeat(lvl_block, tot)
    return BlockCounts(levels, xi, size)


def block_structure(bc: BlockCounts, lo: int, hi: int, rng) -> BlockPool:
    """Plane structure of blocks ``lo..hi-1``; siblings are shuffled uniformly."""
    count = hi - lo
    all_type, all_block, all_parent = [], [], []
    out_id = None  # output id of each node of the current level, in level order
    next_id = 0
    pending_parent = None
    for lvl, (types, block, counts) in enumerate(bc.levels):
        a, b = np.searchsorted(block, [lo, hi])
        types, block, counts = types[a:b], block[a:b] - lo, counts[a:b]
        n = len(types)
        if lvl == 0:
            out_id = np.arange(next_id, next_id + n, dtype=np.int64)
            all_type.append(types)
            all_block.append(block)
            all_parent.append(np.full(n, -1, dtype=np.int64))
            next_id += n
        else:
            out_id = pending_parent
            assert len(out_id) == n
        if n == 0:
            break
        tot = counts.sum(axis=1)
        if tot.sum() == 0:
            break
        parent = np.repeat(np.arange(n, dtype=np.int64), tot)
        ctype = np.repeat(np.tile(np.arange(1, 5, dtype=np.int8), n), counts.ravel())
        perm = np.lexsort((rng.random(len(parent)), parent))
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        ids = next_id + inv  # output id of each child, in unshuffled order
        next_id += len(perm)
        all_type.append(ctype[perm])
        all_block.append(np.repeat(block, tot)[perm])
        all_parent.append(out_id[parent[perm]])
        pending_parent = ids[ctype != 1]

    types = np.concatenate(all_type)
    block = np.concatenate(all_block)
    parent = np.concatenate(all_parent)
    order = np.argsort(block, kind="stable")
    start = np.searchsorted(block[order], np.arange(count + 1))
    # position of each node inside its block
    pos = np.empty(len(order), dtype=np.int64)
    pos[order] = np.arange(len(order)) - start[block[order]]
    sorted_parent = parent[order]
    hp = sorted_parent >= 0
    local = np.full(len(order), -1, dtype=np.int64)
    local[hp] = pos[sorted_parent[hp]]
    return BlockPool(types[order], local, start, bc.xi[lo:hi].copy(), bc.size[lo:hi].copy())


def grow_blocks(laws: OffspringLaws, count: int, rng, null_root: bool = False) -> BlockPool:
    """Sample ``count`` blocks (or null root blocks: a type-2 root with two type-4 children)."""
    return block_structure(grow_block_counts(laws, count, rng, null_root), 0, count, rng)


def _assemble(root: tuple[list, list], blocks: Sequence[tuple[list, list]]) -> FourTypeTree:
    """Glue blocks into one preorder tree; frontier slots take blocks in order."""
    types_out: list[int] = []
    counts_out: list[int] = []
    it = iter(blocks)

    def kids_of(b):
        ty, par = b
        ch: list[list[int]] = [[] for _ in ty]
        for j in range(1, len(ty)):
            ch[par[j]].append(j)
        return ty, ch

    stack = [(kids_of(root), 0)]
    while stack:
        (ty, ch), v = stack.pop()
        if v != 0 and ty[v] == 1:
            nb = kids_of(next(it))
            ty, ch, v = nb[0], nb[1], 0
        types_out.append(ty[v])
        counts_out.append(len(ch[v]))
        for c in reversed(ch[v]):
            stack.append(((ty, ch), c))
    return FourTypeTree(tuple(types_out), tuple(counts_out))


def _walk_forest(laws, rng, need: int, cap_blocks: int, cap_vertices: int, used_vertices: int):
    """Draw blocks until a forest of ``need`` trees is complete.

    Returns the list of blocks, or ``None`` if more than ``cap_blocks``
    blocks or ``cap_vertices`` vertices would be needed.
    """
    out = []
    chunk = 16
    while need > 0:
        pool = grow_blocks(laws, chunk, rng)
        steps = pool.xi - 1
        walk = need + np.cumsum(steps)
        hit = np.flatnonzero(walk == 0)
        stop = int(hit[0]) + 1 if len(hit) else chunk
        sizes = np.cumsum(pool.size[:stop]) + used_vertices
        over = np.flatnonzero(sizes > cap_vertices)
        if len(over) or len(out) + stop > cap_blocks:
            return None
        used_vertices = int(sizes[-1])
        out.extend(pool.block(b) for b in range(stop))
        need = int(walk[stop - 1])
        chunk = min(chunk * 2, 1 << 16)
    return out


def sample_mobile_gw(laws: OffspringLaws, root_type="1", rng=None, max_vertices: int = 10**6) -> FourTypeTree:
    """Unconditioned four-type Galton-Watson tree.

    ``root_type`` is ``"1"`` or ``"2-pair"`` (type-2 root with two type-4
    children, the tree of a null map).  Raises :class:`SizeCapExceeded`
    past ``max_vertices``.
    """
    null = str(root_type) in ("2", "2-pair", "null")
    root_pool = grow_blocks(laws, 1, rng, null_root=null)
    root = root_pool.block(0)
    used = int(root_pool.size[0])
    if used > max_vertices:
        raise SizeCapExceeded(f"tree exceeds {max_vertices} vertices")
    blocks = _walk_forest(laws, rng, int(root_pool.xi[0]), max_vertices, max_vertices, used)
    if blocks is None:
        raise SizeCapExceeded(f"tree exceeds {max_vertices} vertices")
    return _assemble(root, blocks)


# ----------------------------------------------------------- conditioning


def _shift_or(bits: int, s: int, mask: int) -> int:
    return (bits << s) & mask


def _sumset(a: int, b: int, mask: int) -> int:
    out = 0
    i = 0
    while b >> i:
        if (b >> i) & 1:
            out |= _shift_or(a, i, mask)
        i += 1
    return out


def _power_sumset(a: int, k: int, mask: int) -> int:
    out = 1
    for _ in range(k):
        out = _sumset(out, a, mask)
    return out


@lru_cache(maxsize=64)
def attainable(laws: OffspringLaws, bound: int) -> tuple[int, int]:
    """Bitsets (up to ``bound``) of attainable frontier sizes.

    Returns ``(S, R)``: ``S`` for an ordinary block (an additive monoid
    because the number of type-3 children is unbounded) and ``R`` for the
    null root block.
    """
    mask = (1 << (bound + 1)) - 1
    c4 = 0
    while True:
        new = 0
        for (k, kp), _ in laws.nu4:
            if k <= bound:
                new |= _shift_or(_power_sumset(c4, kp, mask), k, mask)
        new |= c4
        if new == c4:
            break
        c4 = new
    t = 0
    for (k, kp), _ in laws.nu3:
        if k <= bound:
            t |= _shift_or(_power_sumset(c4, kp, mask), k, mask)
    s = 1
    while True:
        new = s | _sumset(s, t, mask)
        if new == s:
            break
        s = new
    return s, _sumset(c4, c4, mask)


def check_lattice(laws: OffspringLaws, n: int, null: bool = False) -> None:
    """Raise :class:`LatticeError` unless trees with ``n - 1`` type-1 vertices exist."""
    m = n - 1
    if m < 0 or (not null and m < 1):
        raise LatticeError(f"no tree has {m} type-1 vertices")
    s, r = attainable(laws, max(m, 1))
    if not null:
        if not (s >> (m - 1)) & 1:
            raise LatticeError(f"n = {n} is not attainable for these offspring laws")
        return
    ok = any((r >> rr) & 1 and (s >> (m - rr)) & 1 for rr in range(1, m + 1)) or (m == 0 and r & 1)
    if not ok:
        raise LatticeError(f"n = {n} is not attainable for null trees with these offspring laws")


def _valid_rotation_start(steps: np.ndarray) -> int:
    """Unique rotation of a walk with total -1 that first hits -1 at the end."""
    s = np.cumsum(steps)
    return (int(np.argmin(s)) + 1) % len(steps)


def sample_conditioned(
    laws: OffspringLaws,
    n: int,
    rng,
    max_tries: int = 10**7,
    method: str = "cycle",
    root_type="1",
    window: int = 0,
    return_tries: bool = False,
):
    """Tree with exactly ``n - 1`` type-1 vertices (maps with ``n`` vertices).

    ``method="cycle"`` draws ``n - 1`` i.i.d. blocks, keeps the draw when
    the frontier sizes sum to ``n - 2`` and rotates it with the cycle
    lemma; this is the exact conditional law.  ``method="rejection"``
    draws whole trees until one has the right size and is the only option
    for null trees.  ``window > 0`` (rejection only) accepts sizes within
    ``n - 1 +/- window``; this changes the law and is off by default.
    """
    null = str(root_type) in ("2", "2-pair", "null")
    if window < 0:
        raise ValueError("window must be non-negative")
    if window == 0:
        check_lattice(laws, n, null)
    m = n - 1
    if method == "cycle" and not null and window == 0:
        groups = max(1, min(4096, 200_000 // max(m, 1)))
        tries = 0
        while tries < max_tries:
            g = min(groups, max_tries - tries)
            bc = grow_block_counts(laws, g * m, rng)
            sums = bc.xi.reshape(g, m).sum(axis=1)
            hit = np.flatnonzero(sums == m - 1)
            if len(hit):
                tries += int(hit[0]) + 1
                base = int(hit[0]) * m
                pool = block_structure(bc, base, base + m, rng)
                st = _valid_rotation_start(pool.xi - 1)
                seq = [pool.block((st + i) % m) for i in range(m)]
                tree = _assemble(seq[0], seq[1:])
                return (tree, tries) if return_tries else tree
            tries += g
        raise SamplingBudgetExceeded(f"no tree of size {n} after {max_tries} tries")
    if method not in ("cycle", "rejection"):
        raise ValueError(f"unknown method {method!r}")
    lo, hi = m - window, m + window
    for tries in range(1, max_tries + 1):
        root_pool = grow_blocks(laws, 1, rng, null_root=null)
        root = root_pool.block(0)
        own = 0 if null else 1
        r = int(root_pool.xi[0])
        blocks = _walk_forest(laws, rng, r, hi - own, 10**12, 0)
        if blocks is None:
            continue
        k = own + len(blocks)
        if lo <= k <= hi:
            tree = _assemble(root, blocks)
            return (tree, tries) if return_tries else tree
    raise SamplingBudgetExceeded(f"no tree of size {n} after {max_tries} tries")


def sample_boltzmann_map(q: WeightSeq, n: int, variant="positive", rng=None, max_tries: int = 10**7):
    """Random pointed rooted map with ``n`` vertices under the critical Boltzmann law."""
    from .bdg import Variant, mobile_to_map

    variant = Variant.parse(variant)
    params = tune_critical(q)
    laws = offspring_laws(q, params)
    if variant is Variant.NULL:
        if q.case == "A2":
            raise LatticeError("bipartite weights give no null maps")
        tree = sample_conditioned(laws, n, rng, max_tries, method="rejection", root_type="2-pair")
    else:
        tree = sample_conditioned(laws, n, rng, max_tries)
    mob = sample_labels_uniform(tree, rng)
    return mobile_to_map(mob, variant), mob
