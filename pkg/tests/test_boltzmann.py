import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq, fsolve

from cactus.bdg import verify_distance_identity
from cactus.boltzmann import (
    OffspringLaws,
    WeightSeq,
    eval_generating_functions,
    grow_block_counts,
    grow_blocks,
    mean_matrix,
    offspring_laws,
    sample_boltzmann_map,
    sample_conditioned,
    sample_mobile_gw,
    solve_branch,
    spectral_radius,
    tangency_det,
    tune_critical,
)
from cactus.errors import LatticeError, ParseError, SamplingBudgetExceeded, SizeCapExceeded
from cactus.planar_map import faces

DELTA4 = WeightSeq.delta(4)
DELTA3 = WeightSeq.delta(3)
MIXED = WeightSeq.from_dict({1: 0.3, 3: 1.0, 4: 0.5, 6: 0.2})


def test_weight_seq_validation():
    with pytest.raises(ValueError):
        WeightSeq((1.0, 1.0))
    with pytest.raises(ValueError):
        WeightSeq((0.0, 0.0, -1.0))
    assert WeightSeq((0, 0, 0, 1.0, 0, 0)).q == (0.0, 0.0, 0.0, 1.0)
    assert DELTA4.case == "A2" and DELTA3.case == "A1"


def test_weight_text_round_trip():
    assert WeightSeq.from_text(MIXED.to_text()) == MIXED
    assert WeightSeq.from_text("# quads\n4 1\n") == DELTA4
    for bad in ("", "4\n", "4 1\n4 2\n", "x 1\n", "2 1\n"):
        with pytest.raises(ParseError):
            WeightSeq.from_text(bad)


def test_generating_functions_quadrangulations():
    g = eval_generating_functions(WeightSeq.delta(4, 1 / 12), 2.0)
    assert g.f_bipartite == pytest.approx(0.5, abs=1e-15)
    assert g.f_bipartite == pytest.approx(1 - 1 / 2, abs=1e-15)
    assert g.d_bipartite == pytest.approx(0.25, abs=1e-15)
    # with y = 0 only the k' = 0 terms survive, which is the bipartite series
    g2 = eval_generating_functions(DELTA4, 1.7, 0.0)
    assert g2.f_bullet == pytest.approx(g2.f_bipartite, rel=1e-15)
    with pytest.raises(ValueError):
        eval_generating_functions(DELTA4, -1.0)


def test_generating_functions_triangulations():
    # q_3 only: f_bullet = 2y, f_diamond = 2x + y^2
    x, y = 1.3, 0.4
    g = eval_generating_functions(DELTA3, x, y)
    assert g.f_bullet == pytest.approx(2 * y, rel=1e-15)
    assert g.f_diamond == pytest.approx(2 * x + y * y, rel=1e-15)
    assert g.d_bullet == pytest.approx((0.0, 2.0))
    assert g.d_diamond == pytest.approx((2.0, 2 * y))


def test_tune_quadrangulations():
    p = tune_critical(DELTA4)
    assert abs(p.a_c - 1 / 12) < 1e-10
    assert abs(p.x - 2) < 1e-10
    assert p.y == 0 and p.z_zero == 0 and p.z_plus == p.x
    assert abs(p.spectral_radius - 1) < 1e-8
    assert p.case == "A2"


def _triangulation_oracle():
    """Independent route for q_3 = 1.

    With q_3 only, G = 0 gives x = 1/(1 - 2ay) and H = 0 becomes
    phi(y) = a (2/(1 - 2ay) + y^2) - y = 0.  Criticality is a double root
    of phi: scan a grid for the sign change of min phi in a, then solve
    phi = phi' = 0 jointly.
    """

    def phi(a, y):
        return a * (2 / (1 - 2 * a * y) + y * y) - y

    def dphi(a, y):
        return a * (4 * a / (1 - 2 * a * y) ** 2 + 2 * y) - 1

    def min_phi(a):
        ys = np.linspace(1e-6, 1 / (2 * a) - 1e-6, 200001)
        return phi(a, ys).min()

    grid = np.linspace(0.01, 0.5, 491)
    vals = [min_phi(a) for a in grid]
    i = next(j for j in range(len(vals) - 1) if vals[j] < 0 <= vals[j + 1])
    a0 = brentq(min_phi, grid[i], grid[i + 1], xtol=1e-14)
    ys = np.linspace(1e-6, 1 / (2 * a0) - 1e-6, 200001)
    y0 = ys[np.argmin(phi(a0, ys))]
    a, y = fsolve(lambda v: [phi(v[0], v[1]), dphi(v[0], v[1])], [a0, y0], xtol=1e-15)
    return a, 1 / (1 - 2 * a * y), y


def test_tune_triangulations_against_oracle():
    a, x, y = _triangulation_oracle()
    p = tune_critical(DELTA3)
    assert p.case == "A1"
    assert abs(p.a_c - a) < 1e-8
    assert abs(p.x - x) < 1e-8
    assert abs(p.y - y) < 1e-8
    assert abs(p.spectral_radius - 1) < 1e-8
    assert max(p.residuals) < 1e-10


@pytest.mark.parametrize("q", [DELTA4, DELTA3, MIXED, WeightSeq.from_dict({3: 0.5, 5: 1.0}), WeightSeq.from_dict({4: 1, 6: 1})])
def test_tuned_params_solve_the_system(q):
    p = tune_critical(q)
    g = eval_generating_functions(q, p.x, p.y)
    if p.case == "A2":
        assert abs(p.a_c * g.f_bipartite - (1 - 1 / p.x)) < 1e-10
    else:
        assert abs(p.a_c * g.f_bullet - (1 - 1 / p.x)) < 1e-10
        assert abs(p.a_c * g.f_diamond - p.y) < 1e-10
        assert abs(tangency_det(q, p.x, p.y, p.a_c)) < 1e-7
    assert p.z_plus == p.x and p.z_zero == pytest.approx(p.y**2, rel=1e-15)
    assert abs(spectral_radius(mean_matrix(q, p.x, p.y, p.a_c)) - 1) < 1e-8


weights = st.dictionaries(st.integers(1, 7), st.floats(0.05, 2.0), min_size=1, max_size=4).filter(
    lambda d: any(k >= 3 for k in d)
)


@settings(max_examples=100, deadline=None)
@given(weights, st.floats(1.01, 4.0), st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_determinant_identity(w, x, y, a):
    # the mean matrix carries a 1/y entry, so the identity lives on y > 0
    q = WeightSeq.from_dict(w)
    lhs = np.linalg.det(np.eye(3) - mean_matrix(q, x, y, a))
    rhs = x * x * tangency_det(q, x, y, a)
    assert abs(lhs - rhs) <= 1e-9 * max(abs(rhs), 1.0)


@pytest.mark.parametrize("c", [0.001, 0.37, 5.0, 1234.5])
@pytest.mark.parametrize("q", [DELTA4, DELTA3, MIXED])
def test_homogeneity(q, c):
    p = tune_critical(q)
    pc = tune_critical(q.scaled(c))
    assert abs(pc.a_c * c - p.a_c) <= 1e-10 * max(1.0, p.a_c)
    assert pc.x == pytest.approx(p.x, abs=1e-9)
    assert pc.y == pytest.approx(p.y, abs=1e-9)


def test_no_solution_for_large_scale():
    p = tune_critical(MIXED)
    for a in (2 * p.a_c, 10 * p.a_c, 100 * p.a_c):
        for start in ((1.1, 0.1), (p.x, p.y), (3.0, 1.0)):
            sol = solve_branch(MIXED, a, start)
            assert sol is None or not (sol[0] > 1 and sol[1] >= 0)


def test_laws_quadrangulations():
    laws = offspring_laws(DELTA4)
    assert laws.nu1_success == pytest.approx(0.5, abs=1e-12)
    assert laws.nu3 == (((1, 0), 1.0),)
    assert laws.nu4 == ()


@pytest.mark.parametrize("q", [DELTA3, MIXED])
def test_laws_tables_normalised(q):
    laws = offspring_laws(q)
    for tab, off in ((laws.nu3, 2), (laws.nu4, 1)):
        assert abs(sum(w for _, w in tab) - 1) < 1e-12
        for (k, kp), w in tab:
            assert w > 0 and q[off + 2 * k + kp] > 0


def test_laws_match_formula():
    q = MIXED
    p = tune_critical(q)
    laws = offspring_laws(q, p)
    y = math.sqrt(p.z_zero)
    for (k, kp), w in laws.nu3:
        want = laws.c_q * p.z_plus**k * y**kp * math.comb(2 * k + kp + 1, k + 1) * math.comb(k + kp, k) * p.a_c * q[2 + 2 * k + kp]
        assert w == pytest.approx(want, rel=1e-12)
    for (k, kp), w in laws.nu4:
        want = laws.c_q_prime * p.z_plus**k * y**kp * math.comb(2 * k + kp, k) * math.comb(k + kp, k) * p.a_c * q[1 + 2 * k + kp]
        assert w == pytest.approx(want, rel=1e-12)


def test_degenerate_law_gives_single_vertex(rng):
    laws = OffspringLaws.custom(1.0, {(1, 0): 1.0})
    for _ in range(20):
        assert sample_mobile_gw(laws, "1", rng).size == 1


def test_size_cap(rng):
    laws = offspring_laws(MIXED)
    hit = 0
    for _ in range(200):
        try:
            t = sample_mobile_gw(laws, "1", rng, max_vertices=30)
            assert t.size <= 30
        except SizeCapExceeded:
            hit += 1
    assert hit > 0


def _children(pool):
    """Global parent array and per-node child type counts of a block pool."""
    n = len(pool.types)
    blk = np.repeat(np.arange(len(pool)), np.diff(pool.start))
    parent = np.where(pool.local_parent >= 0, pool.local_parent + pool.start[blk], -1)
    cnt = np.zeros((n, 4), dtype=np.int64)
    has = parent >= 0
    np.add.at(cnt, (parent[has], pool.types[has] - 1), 1)
    return parent, cnt


def test_quadrangulation_type3_has_one_type1_child(rng):
    pool = grow_blocks(offspring_laws(DELTA4), 2000, rng)
    _, cnt = _children(pool)
    t3 = pool.types == 3
    assert (cnt[t3] == [1, 0, 0, 0]).all()


@pytest.mark.slow
def test_offspring_frequencies_and_criticality(rng):
    laws = offspring_laws(MIXED)
    tables = {3: dict(laws.nu3), 4: dict(laws.nu4)}
    seen = {3: {}, 4: {}}
    n_draws = {3: 0, 4: 0}
    sums = np.zeros((4, 4))
    nodes = np.zeros(4)
    geo = []
    order = [0, 0]
    while n_draws[3] < 10**6:
        pool = grow_blocks(laws, 200_000, rng)
        parent, cnt = _children(pool)
        is_root = pool.local_parent < 0
        expanded = (pool.types != 1) | is_root
        for ty in (1, 2, 3, 4):
            m = expanded & (pool.types == ty)
            sums[ty - 1] += cnt[m].sum(axis=0)
            nodes[ty - 1] += m.sum()
        geo.append(cnt[is_root, 2])
        for ty in (3, 4):
            m = pool.types == ty
            pairs, c = np.unique(cnt[m][:, :2], axis=0, return_counts=True)
            for (k, kp), v in zip(pairs.tolist(), c.tolist()):
                seen[ty][(k, kp)] = seen[ty].get((k, kp), 0) + v
            n_draws[ty] += int(m.sum())
        # sibling order: with a (1, 2) profile the type-1 child is first a third of the time
        m = (pool.types == 3) & (cnt[:, 0] == 1) & (cnt[:, 1] == 2)
        kids = np.flatnonzero(parent >= 0)
        first = np.full(len(pool.types), len(pool.types))
        np.minimum.at(first, parent[kids], kids)
        order[0] += int((pool.types[first[m]] == 1).sum())
        order[1] += int(m.sum())
    for ty in (3, 4):
        assert set(seen[ty]) <= set(tables[ty])
        for key, prob in tables[ty].items():
            obs = seen[ty].get(key, 0) / n_draws[ty]
            se = math.sqrt(prob * (1 - prob) / n_draws[ty])
            assert abs(obs - prob) <= 4 * se + 1e-12, (ty, key, obs, prob)
    g = np.concatenate(geo)
    mean_geo = (1 - laws.nu1_success) / laws.nu1_success
    assert abs(g.mean() - mean_geo) <= 4 * g.std() / math.sqrt(len(g))
    M = sums / nodes[:, None]
    assert abs(max(abs(np.linalg.eigvals(M))) - 1) < 2e-2
    k, n = order
    assert n > 1000
    assert abs(k / n - 1 / 3) <= 4 * math.sqrt(2 / 9 / n)


def test_lattice_errors():
    laws = offspring_laws(WeightSeq.delta(6))
    # hexangulations: (n - 2) must be a multiple of 2
    with pytest.raises(LatticeError):
        sample_conditioned(laws, 5, np.random.default_rng(0))
    with pytest.raises(LatticeError):
        sample_conditioned(offspring_laws(DELTA3), 2, np.random.default_rng(0), method="rejection", root_type="2-pair")
    with pytest.raises(LatticeError):
        sample_boltzmann_map(DELTA4, 10, "null", np.random.default_rng(0))


def test_budget_exhaustion():
    with pytest.raises(SamplingBudgetExceeded):
        sample_conditioned(offspring_laws(MIXED), 5000, np.random.default_rng(0), max_tries=1)


def test_smallest_quadrangulation_tree(rng):
    for _ in range(20):
        assert sample_conditioned(offspring_laws(DELTA4), 2, rng).size == 1


@pytest.mark.parametrize("method", ["cycle", "rejection"])
def test_conditioned_size(rng, method):
    laws = offspring_laws(MIXED)
    for n in (2, 3, 7, 30):
        t = sample_conditioned(laws, n, rng, method=method)
        assert sum(1 for x in t.types if x == 1) == n - 1


def test_cycle_and_rejection_agree_on_small_trees(rng):
    # both samplers must give the same law on the finitely many trees with n = 3
    laws = offspring_laws(MIXED)
    R = 1500
    a = [sample_conditioned(laws, 3, rng).to_text() for _ in range(R)]
    b = [sample_conditioned(laws, 3, rng, method="rejection").to_text() for _ in range(R)]
    from collections import Counter

    ca, cb = Counter(a), Counter(b)
    for key in set(ca) | set(cb):
        pa, pb = ca[key] / R, cb[key] / R
        se = math.sqrt((pa * (1 - pa) + pb * (1 - pb)) / R) + 1e-9
        assert abs(pa - pb) <= 4.5 * se + 2 / R, key


def test_acceptance_rate_order(rng):
    laws = offspring_laws(DELTA4)
    n = 1000
    m = n - 1
    tries = [sample_conditioned(laws, n, rng, return_tries=True)[1] for _ in range(200)]
    rate = len(tries) / sum(tries) / m  # exact chance that a free tree has m type-1 vertices
    xi = grow_block_counts(laws, 10**6, rng).xi
    c = 1 / (xi.std() * math.sqrt(2 * math.pi))
    want = c * n**-1.5
    assert want / 5 < rate < want * 5


@pytest.mark.parametrize(
    "q,n,variant",
    [(DELTA4, 50, "positive"), (DELTA4, 41, "negative"), (DELTA3, 40, "positive"), (DELTA3, 30, "null"), (MIXED, 60, "null")],
)
def test_boltzmann_maps(rng, q, n, variant):
    for _ in range(5):
        cm, mob = sample_boltzmann_map(q, n, variant, rng)
        assert cm.n_vertices == n
        assert cm.euler_characteristic == 2
        assert verify_distance_identity(cm, mob)
        if q is DELTA4:
            assert {d for _, d, _ in faces(cm)} == {4}
        if q is DELTA3:
            assert {d for _, d, _ in faces(cm)} == {3}
