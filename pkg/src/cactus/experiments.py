"""Monte Carlo experiments on labeled trees and Boltzmann maps.

Every experiment takes an :class:`ExperimentConfig` and returns a
:class:`StatReport`.  Replica ``i`` draws from its own generator
``replica_rng(seed, i, stream)``, so reports do not depend on how replicas
are spread over worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gamma

from . import brownian
from .boltzmann import WeightSeq, sample_boltzmann_map
from .errors import ConvergenceError, InputError, ParseError
from .graph_cactus import build_cactus, cactus_distance
from .rng import GENERATOR_NAME, SEED_DERIVATION, check_seed, replica_rng

EXPERIMENTS = ("volume-growth", "ball-exponent", "separating-cycle", "convergence")

# leading constant of P[d <= delta] ~ C delta^3
VOLUME_CONSTANT = 2 ** 1.25 * gamma(0.25) / (3 * math.sqrt(math.pi))
BETA_QUARTER_NORMALIZER = gamma(0.5) / gamma(0.25) ** 2


# ------------------------------------------------------------ config


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.replace(",", " ").split())


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.replace(",", " ").split())


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "volume-growth"
    seed: int = 0
    replicas: int = 1000
    tree_size: int = 10**5
    deltas: tuple[float, ...] = (0.05, 0.1, 0.2)
    estimator: str = "bridge"  # or "vertex"
    anchors: int = 4
    partners: int = 4000
    quadrature_panels: int = 64
    weights: str = "delta4"
    map_sizes: tuple[int, ...] = (1000, 4000)
    points: int = 100
    reference_size: int = 10**5
    reference_trees: int = 1000
    reference_points: int = 100
    ks_threshold: float = 0.05
    raw: bool = False
    workers: int = 1

    _PARSERS = {
        "experiment": str,
        "seed": int,
        "replicas": int,
        "tree_size": int,
        "deltas": _floats,
        "estimator": str,
        "anchors": int,
        "partners": int,
        "quadrature_panels": int,
        "weights": str,
        "map_sizes": _ints,
        "points": int,
        "reference_size": int,
        "reference_trees": int,
        "reference_points": int,
        "ks_threshold": float,
        "raw": _bool,
        "workers": int,
    }

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InputError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        try:
            check_seed(self.seed)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        for name in ("replicas", "tree_size", "anchors", "partners", "points", "workers",
                     "reference_size", "reference_trees", "reference_points", "quadrature_panels"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be positive")
        if self.estimator not in ("bridge", "vertex"):
            raise InputError("estimator must be 'bridge' or 'vertex'")
        if any(d < 0 for d in self.deltas) or not self.deltas:
            raise InputError("deltas must be a non-empty list of non-negative radii")
        if not self.map_sizes or min(self.map_sizes) < 3:
            raise InputError("map_sizes must list sizes >= 3")

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        kwargs = {}
        for key, raw in values.items():
            if key not in cls._PARSERS:
                raise ParseError(f"unknown config key {key!r}")
            try:
                kwargs[key] = cls._PARSERS[key](raw) if isinstance(raw, str) else raw
            except ValueError as exc:
                raise ParseError(f"bad value for {key}: {exc}") from None
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        values = parse_config(text)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    def replace(self, **changes) -> "ExperimentConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}
        d.update(changes)
        return ExperimentConfig(**d)

    def echo(self) -> dict:
        """Config as reported; the worker count is left out on purpose."""
        d = {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}
        d.pop("workers")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            if f.name.startswith("_"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"


def parse_config(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(f"line {lineno}: empty key")
        if key in out:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


# ------------------------------------------------------------ reports


@dataclass(frozen=True)
class StatRow:
    name: str
    estimate: float
    se: Optional[float]
    reference: Optional[float]
    provenance: str


def _num(x) -> str:
    return "" if x is None else repr(float(x))


@dataclass
class StatReport:
    experiment: str
    config: dict
    rows: list[StatRow]
    code_version: str
    generator: str = GENERATOR_NAME
    raw: dict = field(default_factory=dict)

    def row(self, name: str) -> StatRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "estimate", "se", "reference", "provenance"])
        for r in self.rows:
            w.writerow([r.name, _num(r.estimate), _num(r.se), _num(r.reference), r.provenance])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "experiment": self.experiment,
            "code_version": self.code_version,
            "generator": self.generator,
            "seed_derivation": SEED_DERIVATION,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def raw_json(self) -> str:
        return json.dumps({k: np.asarray(v).tolist() for k, v in self.raw.items()}, sort_keys=True) + "\n"


def _version() -> str:
    from . import __version__

    return __version__


# ------------------------------------------------------------ statistics


def _sample(xs, name: str) -> np.ndarray:
    a = np.asarray(xs, dtype=float).ravel()
    if a.size == 0:
        raise InputError(f"{name} is empty")
    return a


def ks_two_sample(xs, ys) -> float:
    a = np.sort(_sample(xs, "first sample"))
    b = np.sort(_sample(ys, "second sample"))
    z = np.concatenate([a, b])
    fa = np.searchsorted(a, z, side="right") / len(a)
    fb = np.searchsorted(b, z, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def ks_vs_cdf(xs, cdf: Callable) -> float:
    a = np.sort(_sample(xs, "sample"))
    n = len(a)
    F = np.asarray(cdf(a), dtype=float)
    hi = np.arange(1, n + 1) / n - F
    lo = F - np.arange(n) / n
    return float(max(hi.max(), lo.max()))


def mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float(v.mean()), float("nan")
    return float(v.mean(axis=0)), float(v.std(axis=0, ddof=1) / math.sqrt(len(v)))


def _gauss_legendre(a, b, nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = (b - a) / 2
    return a + half * (x + 1), half * w


def beta_quarter_cdf(x, nodes: int = 48) -> np.ndarray:
    """CDF of the density ``c (t(1-t))**-0.75`` on [0, 1].

    With ``t = u^4 / (u^4 + (1-u)^4)`` the integrand becomes
    ``4 c (u^4 + (1-u)^4)**-0.5``, which is smooth on [0, 1].
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def integral(n):
        inner = x < 1
        r = (np.where(inner, x, 0.0) / np.where(inner, 1 - x, 1.0)) ** 0.25
        upper = np.where(inner, r / (1 + r), 1.0)
        u, w = _gauss_legendre(np.zeros_like(upper), upper, n)
        return 4 * BETA_QUARTER_NORMALIZER * np.sum(w / np.sqrt(u**4 + (1 - u) ** 4), axis=-1)

    a, b = integral(nodes), integral(2 * nodes)
    if np.max(np.abs(a - b), initial=0.0) > 1e-12:
        raise ConvergenceError("beta CDF quadrature did not converge", (float(np.max(np.abs(a - b))), 1e-12))
    return b


def _ball_inner(u: np.ndarray, panels: int, nodes: int = 10) -> np.ndarray:
    # I(u) = int_0^inf l^-1/2 exp(-2 l^2 - u^2/(2l)) dl, with l = w^2.
    # Panels are graded towards w = 0, where the factor exp(-u^2/(2w^2)) turns on.
    edges = 4.0 * np.linspace(0.0, 1.0, panels + 1) ** 2
    w, wt = _gauss_legendre(edges[:-1], edges[1:], nodes)
    w, wt = w.ravel(), wt.ravel()
    with np.errstate(divide="ignore", over="ignore"):
        e = np.exp(-2 * w[None, :] ** 4 - u[:, None] ** 2 / (2 * w[None, :] ** 2))
    return 2 * (e * wt[None, :]).sum(axis=1)


def volume_reference(delta: float, panels: int = 64) -> float:
    """``4 sqrt(2/pi) int_0^delta u^2 I(u) du`` by composite Gauss-Legendre."""
    if delta < 0:
        raise InputError("delta must be non-negative")
    if delta == 0:
        return 0.0
    edges = np.linspace(0.0, delta, panels + 1)
    u, wt = _gauss_legendre(edges[:-1], edges[1:], 10)
    u, wt = u.ravel(), wt.ravel()
    return float(4 * math.sqrt(2 / math.pi) * np.sum(wt * u**2 * _ball_inner(u, panels)))


# ------------------------------------------------------------ replica plumbing


def _run_chunk(task):
    fn, cfg, lo, hi, stream = task
    return [fn(cfg, i, replica_rng(cfg.seed, i, stream)) for i in range(lo, hi)]


def run_replicas(fn, cfg: ExperimentConfig, count: int, stream: int, workers: Optional[int] = None) -> list:
    """``[fn(cfg, i, rng_i) for i in range(count)]``, possibly spread over processes."""
    workers = cfg.workers if workers is None else workers
    if workers <= 1 or count < 2:
        return _run_chunk((fn, cfg, 0, count, stream))
    chunk = max(1, min(64, count // (4 * workers) or 1))
    tasks = [(fn, cfg, lo, min(count, lo + chunk), stream) for lo in range(0, count, chunk)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for part in ex.map(_run_chunk, tasks):
            out.extend(part)
    return out


# ------------------------------------------------------------ volume growth


def _volume_replica(cfg: ExperimentConfig, i: int, rng) -> np.ndarray:
    t = brownian.sample_labeled_tree(cfg.tree_size, rng)
    if cfg.estimator == "vertex":
        return brownian.ball_masses(t, brownian.sample_mass_vertex(t, rng), cfg.deltas)
    return brownian.pair_ball_probabilities(t, rng, cfg.deltas, cfg.anchors, cfg.partners)


def volume_growth(cfg: ExperimentConfig) -> StatReport:
    vals = np.array(run_replicas(_volume_replica, cfg, cfg.replicas, stream=1))
    rows = []
    for j, d in enumerate(cfg.deltas):
        est, se = mean_se(vals[:, j])
        rows.append(StatRow(f"p_ball[delta={d!r}]", est, se, volume_reference(d, cfg.quadrature_panels),
                            "quadrature of the exact finite-delta integral"))
        rows.append(StatRow(f"p_ball_cubic[delta={d!r}]", est, se, VOLUME_CONSTANT * d**3,
                            "small-delta law C*delta^3"))
    rep = StatReport("volume-growth", cfg.echo(), rows, _version())
    if cfg.raw:
        rep.raw["p_ball"] = vals
    return rep


# ------------------------------------------------------------ ball exponent


def _ball_replica(cfg: ExperimentConfig, i: int, rng) -> np.ndarray:
    t = brownian.sample_labeled_tree(cfg.tree_size, rng)
    if cfg.estimator == "vertex":
        return brownian.ball_masses(t, brownian.sample_mass_vertex(t, rng), cfg.deltas)
    d = np.sort(brownian.pair_distances(t, rng, cfg.partners))
    return np.searchsorted(d, cfg.deltas, side="right") / cfg.partners


def _slope(deltas, values) -> float:
    ok = (np.asarray(values) > 0) & (np.asarray(deltas) > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(deltas)[ok]), np.log(np.asarray(values)[ok]), 1)[0])


def _spread(xs) -> float:
    xs = np.asarray(xs, dtype=float)
    xs = xs[~np.isnan(xs)]
    return float(xs.std()) if len(xs) else float("nan")


def ball_exponent(cfg: ExperimentConfig) -> StatReport:
    vals = np.array(run_replicas(_ball_replica, cfg, cfg.replicas, stream=2))
    deltas = np.asarray(cfg.deltas)
    rows = []
    for j, d in enumerate(cfg.deltas):
        est, se = mean_se(vals[:, j])
        rows.append(StatRow(f"mean_ball[delta={d!r}]", est, se, None, "exploratory"))
        rows.append(StatRow(f"median_ball[delta={d!r}]", float(np.median(vals[:, j])), None, None, "exploratory"))
    # replica bootstrap for the slopes, on its own stream
    boot = replica_rng(cfg.seed, 0, 99)
    sm, sd = [], []
    for _ in range(200):
        pick = vals[boot.integers(len(vals), size=len(vals))]
        sm.append(_slope(deltas, pick.mean(axis=0)))
        sd.append(_slope(deltas, np.median(pick, axis=0)))
    rows.append(StatRow("slope_mean", _slope(deltas, vals.mean(axis=0)), _spread(sm), 3.0,
                        "exponent of the mean ball volume"))
    rows.append(StatRow("slope_median", _slope(deltas, np.median(vals, axis=0)), _spread(sd), 4.0,
                        "almost-sure exponent 4 - epsilon; exploratory"))
    rep = StatReport("ball-exponent", cfg.echo(), rows, _version())
    if cfg.raw:
        rep.raw["ball"] = vals
    return rep


# ------------------------------------------------------------ separating cycle


def _split_replica(cfg: ExperimentConfig, i: int, rng) -> tuple[float, float]:
    t = brownian.sample_labeled_tree(cfg.tree_size, rng)
    vol1, _ = brownian.separating_split(t, rng)
    t2 = brownian.sample_labeled_tree(cfg.tree_size, rng)
    return vol1, brownian.arc_sine_split_oracle(t2, rng)


def separating_cycle(cfg: ExperimentConfig) -> StatReport:
    vals = np.array(run_replicas(_split_replica, cfg, cfg.replicas, stream=3))
    vol, arc = vals[:, 0], vals[:, 1]
    est, se = mean_se(vol)
    rows = [
        StatRow("ks_beta", ks_vs_cdf(vol, beta_quarter_cdf), None, 0.0, "Beta(1/4,1/4) CDF by quadrature"),
        StatRow("mean_vol1", est, se, 0.5, "exchangeability of the two points"),
        StatRow("ks_arc_sine", ks_two_sample(vol, arc), None, 0.0, "two-sample KS against the arc-sine gap construction"),
        StatRow("ks_arc_sine_beta", ks_vs_cdf(arc, beta_quarter_cdf), None, 0.0, "Beta(1/4,1/4) CDF by quadrature"),
        StatRow("beta_cdf[0.5]", float(beta_quarter_cdf(0.5)), None, 0.5, "symmetry of the density"),
    ]
    rep = StatReport("separating-cycle", cfg.echo(), rows, _version())
    if cfg.raw:
        rep.raw["vol1"] = vol
        rep.raw["arc_sine"] = arc
    return rep


# ------------------------------------------------------------ cactus convergence


@lru_cache(maxsize=None)
def load_weights(spec: str) -> WeightSeq:
    """``deltaK`` for a single face degree, otherwise a weight file path."""
    s = spec.strip()
    if s.lower().startswith("delta") and s[5:].isdigit():
        return WeightSeq.delta(int(s[5:]))
    try:
        with open(s, encoding="utf-8") as fh:
            return WeightSeq.from_text(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read weight file {s!r}: {exc.strerror}") from None


def angulation_half_degree(q: WeightSeq) -> Optional[int]:
    """``p`` when ``q`` charges faces of degree ``2p`` only."""
    support = [k for k in range(1, q.max_degree + 1) if q[k] > 0]
    if len(support) == 1 and support[0] % 2 == 0 and support[0] >= 4:
        return support[0] // 2
    return None


def _reference_replica(cfg: ExperimentConfig, i: int, rng):
    t = brownian.sample_labeled_tree(cfg.reference_size, rng)
    k = cfg.reference_points
    vs = t.contour[rng.integers(2 * t.n_edges, size=k)]
    one = (t.labels[vs] - t.labels.min()) * t.label_scale
    anchor = brownian.sample_mass_vertex(t, rng)
    two = brownian.distances_from(t, anchor)[t.contour[rng.integers(2 * t.n_edges, size=k)]]
    return one, two


def _map_replica(cfg: ExperimentConfig, i: int, rng, n: int):
    q = load_weights(cfg.weights)
    m, _ = sample_boltzmann_map(q, n, "positive", rng)
    c = build_cactus(m.to_graph())
    h = np.asarray(c.heights)[np.asarray(c.class_of)]
    nv = m.n_vertices
    one = h[rng.integers(nv, size=cfg.points)].astype(float)
    us = rng.integers(nv, size=cfg.points)
    vs = rng.integers(nv, size=cfg.points)
    two = np.array([cactus_distance(c, int(u), int(v)) for u, v in zip(us, vs)], dtype=float)
    return one, two, m.n_faces


class _MapTask:
    """Picklable replica function for one map size."""

    def __init__(self, n: int):
        self.n = n

    def __call__(self, cfg, i, rng):
        return _map_replica(cfg, i, rng, self.n)


def cactus_convergence(cfg: ExperimentConfig) -> StatReport:
    q = load_weights(cfg.weights)
    p = angulation_half_degree(q)
    ref = run_replicas(_reference_replica, cfg, cfg.reference_trees, stream=4)
    ref_one = np.concatenate([r[0] for r in ref])
    ref_two = np.concatenate([r[1] for r in ref])
    rows = [
        StatRow("reference_one_point_median", float(np.median(ref_one)), None, None, "labeled-tree reference"),
        StatRow("reference_two_point_median", float(np.median(ref_two)), None, None, "labeled-tree reference"),
    ]
    raw = {"reference_one_point": ref_one, "reference_two_point": ref_two}
    for j, n in enumerate(cfg.map_sizes):
        res = run_replicas(_MapTask(n), cfg, cfg.replicas, stream=10 + j)
        one = np.concatenate([r[0] for r in res])
        two = np.concatenate([r[1] for r in res])
        if p is not None:
            faces = np.array([r[2] for r in res], dtype=float)
            map_scale = (9 / (4 * p * (p - 1))) ** 0.25 * faces**-0.25
            prov = f"2p-angulation constant with p = {p}"
        else:
            b = float(np.median(ref_one) / np.median(one * n**-0.25))
            map_scale = np.full(len(res), b * n**-0.25)
            rows.append(StatRow(f"fitted_scale[n={n}]", b, None, None, "one-point median match"))
            prov = "fitted scale"
        scale = np.repeat(map_scale, cfg.points)
        one, two = one * scale, two * scale
        rows.append(StatRow(f"ks_one_point[n={n}]", ks_two_sample(one, ref_one), None, 0.0, prov))
        rows.append(StatRow(f"ks_two_point[n={n}]", ks_two_sample(two, ref_two), None, 0.0, prov))
        est, se = mean_se(np.array([r[0].mean() for r in res]) * map_scale)
        rows.append(StatRow(f"mean_one_point[n={n}]", est, se, float(ref_one.mean()), prov))
        raw[f"one_point[n={n}]"] = one
        raw[f"two_point[n={n}]"] = two
    rep = StatReport("convergence", cfg.echo(), rows, _version())
    if cfg.raw:
        rep.raw = raw
    return rep


RUNNERS = {
    "volume-growth": volume_growth,
    "ball-exponent": ball_exponent,
    "separating-cycle": separating_cycle,
    "convergence": cactus_convergence,
}


def run_experiment(cfg: ExperimentConfig) -> StatReport:
    return RUNNERS[cfg.experiment](cfg)


def write_report(rep: StatReport, out_dir: str, stem: Optional[str] = None) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or rep.experiment
    paths = [os.path.join(out_dir, f"{stem}.csv"), os.path.join(out_dir, f"{stem}.json")]
    with open(paths[0], "w", encoding="utf-8", newline="") as fh:
        fh.write(rep.to_csv())
    with open(paths[1], "w", encoding="utf-8") as fh:
        fh.write(rep.to_json())
    if rep.raw:
        paths.append(os.path.join(out_dir, f"{stem}.raw.json"))
        with open(paths[-1], "w", encoding="utf-8") as fh:
            fh.write(rep.raw_json())
    return paths
