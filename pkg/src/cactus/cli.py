"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 bad input, 4 numerical
non-convergence, 5 sampling budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .errors import ConvergenceError, InputError, SamplingBudgetExceeded

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_CONVERGENCE = 4
EXIT_BUDGET = 5

VARIANTS = {"pos": "positive", "neg": "negative", "null": "null",
            "positive": "positive", "negative": "negative"}


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str, text: str) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_manifest(out_dir: str, command: str, config: dict, seed: Optional[int], outputs: Sequence[str]) -> str:
    from .rng import GENERATOR_NAME, SEED_DERIVATION

    doc = {
        "command": command,
        "config": config,
        "code_version": __version__,
        "seed": seed,
        "generator": GENERATOR_NAME,
        "seed_derivation": SEED_DERIVATION,
        "outputs": [os.path.basename(p) for p in outputs],
    }
    path = os.path.join(out_dir, "manifest.json")
    _write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _seed(value: str) -> int:
    from .rng import check_seed

    try:
        return check_seed(int(value))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(value: str) -> int:
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


# ------------------------------------------------------------ subcommands


def cmd_tune(args) -> int:
    from .boltzmann import WeightSeq, tune_critical

    q = WeightSeq.from_text(_read(args.weights))
    p = tune_critical(q)
    print(p.to_text(), end="")
    for k, v in enumerate(q.q, 1):
        if v:
            print(f"tuned_q{k} = {p.a_c * v!r}")
    return EXIT_OK


def cmd_sample_map(args) -> int:
    from .boltzmann import WeightSeq, sample_boltzmann_map
    from .planar_map import encode
    from .rng import make_rng

    q = WeightSeq.from_text(_read(args.q))
    variant = VARIANTS[args.variant]
    rng = make_rng(args.seed)
    m, mob = sample_boltzmann_map(q, args.n, variant, rng, max_tries=args.max_tries)
    os.makedirs(args.out, exist_ok=True)
    map_path = os.path.join(args.out, "map.txt")
    mob_path = os.path.join(args.out, "mobile.txt")
    _write(map_path, encode(m))
    _write(mob_path, mob.to_text())
    config = {"q": q.to_text(), "n": args.n, "variant": variant, "max_tries": args.max_tries}
    write_manifest(args.out, "sample-map", config, args.seed, [map_path, mob_path])
    print(f"map: {m.n_vertices} vertices, {m.n_edges} edges, {m.n_faces} faces -> {map_path}")
    return EXIT_OK


def cmd_cactus(args) -> int:
    from .graph_cactus import PointedGraph, build_cactus

    g = PointedGraph.from_text(_read(args.graph))
    c = build_cactus(g)
    out = args.out or (os.path.splitext(args.graph)[0] + ".cactus.txt")
    _write(out, c.to_text())
    print(f"cactus: {c.n_classes} classes -> {out}")
    return EXIT_OK


def cmd_sample_tree(args) -> int:
    from .brownian import sample_labeled_tree
    from .rng import make_rng

    t = sample_labeled_tree(args.edges, make_rng(args.seed))
    text = t.summary()
    if args.out:
        path = os.path.join(args.out, "tree.txt")
        _write(path, text)
        write_manifest(args.out, "sample-tree", {"edges": args.edges}, args.seed, [path])
    print(text, end="")
    return EXIT_OK


def cmd_exp(args) -> int:
    from .experiments import ExperimentConfig, run_experiment, write_report

    text = _read(args.config) if args.config else ""
    cfg = ExperimentConfig.from_text(text, experiment=args.name, seed=args.seed, workers=args.workers)
    rep = run_experiment(cfg)
    paths = write_report(rep, args.out, cfg.experiment)
    write_manifest(args.out, f"exp {cfg.experiment}", cfg.echo(), cfg.seed, paths)
    for r in rep.rows:
        ref = "" if r.reference is None else f"  (reference {r.reference:.6g})"
        se = "" if r.se is None else f" +- {r.se:.3g}"
        print(f"{r.name}: {r.estimate:.6g}{se}{ref}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cactus", description="Cactus of random planar maps and its Brownian limit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", help="critical parameters of a weight sequence")
    p.add_argument("weights", help="file with 'k q_k' lines")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("sample-map", help="sample a critical Boltzmann map")
    p.add_argument("--q", required=True, help="weight file")
    p.add_argument("--n", required=True, type=_positive, help="number of vertices")
    p.add_argument("--variant", default="pos", choices=["pos", "neg", "null", "positive", "negative"])
    p.add_argument("--seed", required=True, type=_seed)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--max-tries", type=_positive, default=10**7)
    p.set_defaults(func=cmd_sample_map)

    p = sub.add_parser("cactus", help="cactus of a pointed graph")
    p.add_argument("graph")
    p.add_argument("--out", help="output file (default: <graph>.cactus.txt)")
    p.set_defaults(func=cmd_cactus)

    p = sub.add_parser("sample-tree", help="labeled uniform plane tree summary")
    p.add_argument("--edges", required=True, type=_positive)
    p.add_argument("--seed", required=True, type=_seed)
    p.add_argument("--out", help="also write tree.txt and a manifest here")
    p.set_defaults(func=cmd_sample_tree)

    p = sub.add_parser("exp", help="run an experiment")
    p.add_argument("name", choices=["volume-growth", "separating-cycle", "ball-exponent", "convergence"])
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--seed", type=_seed, help="overrides the config seed")
    p.add_argument("--workers", type=_positive, help="worker processes (results do not depend on it)")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_exp)
    return ap


def run(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except SamplingBudgetExceeded as exc:
        print(f"sampling budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET


def main() -> None:
    sys.exit(run())
