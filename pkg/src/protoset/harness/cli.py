"""Command line entry point: ``protoset {gen,coreset,solve,project,eval,validate}``.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..coreset import sample_coreset, sensitivities, validate_coreset, weighted_objective
from ..errors import ConfigError, DataError, NumericalError, ProtosetError
from ..matching import GroundMetric, Pattern, verify_match_triangle
from ..prototype import Prototype, alternating_minimize, objective, pick_init
from ..reduce import jl_project, target_dim
from .experiment import ExperimentConfig, load_dataset, read_config, run_experiment
from .io import atomic_write, read_coreset, read_patterns, write_coreset, write_patterns, write_prototypes

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _add_common(p, *names):
    opts = {
        "seed": lambda: p.add_argument("--seed", type=_seed, default=None, help="unsigned 64-bit seed"),
        "metric": lambda: p.add_argument("--metric", choices=[m.value for m in GroundMetric], default=None),
        "fraction": lambda: p.add_argument("--fraction", type=float, action="append", default=None,
                                           help="coreset size as a fraction of n (repeatable for eval)"),
        "eps": lambda: p.add_argument("--eps", type=float, default=None, help="JL distortion target"),
        "alpha": lambda: p.add_argument("--alpha", type=float, default=None),
        "trials": lambda: p.add_argument("--trials", type=int, default=None, help="pivot candidates"),
        "cost-mode": lambda: p.add_argument("--cost-mode", choices=["exact", "approx"], default=None),
        "jl": lambda: p.add_argument("--jl", default=None, help="target dimension, auto, or off"),
        "out": lambda: p.add_argument("--out", default=None, help="output path"),
        "config": lambda: p.add_argument("--config", default=None, help="JSON experiment config"),
        "data": lambda: p.add_argument("--data", default=None, help="pattern file (JSON Lines)"),
    }
    for name in names:
        opts[name]()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="protoset", description="Coresets for geometric prototypes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset and write it as a pattern file")
    _add_common(p, "config", "seed", "out")
    p.add_argument("--kind", choices=["gaussian", "ensemble", "blobs", "images"], default=None)
    p.add_argument("--set", dest="params", type=_param, action="append", default=[], metavar="KEY=VALUE",
                   help="generator parameter, e.g. n=200")

    p = sub.add_parser("coreset", help="compute sensitivities and sample a coreset")
    _add_common(p, "data", "seed", "metric", "fraction", "alpha", "trials", "cost-mode", "out")
    p.add_argument("--size", type=int, default=None, help="sample size r (overrides --fraction)")

    p = sub.add_parser("solve", help="solve for a prototype on a pattern file or a coreset of it")
    _add_common(p, "data", "seed", "metric", "trials", "out")
    p.add_argument("--coreset", default=None, help="coreset sidecar to solve on")
    p.add_argument("--max-rounds", type=int, default=100)

    p = sub.add_parser("project", help="random projection of a pattern file")
    _add_common(p, "data", "seed", "metric", "eps", "jl", "out")

    p = sub.add_parser("eval", help="run a baseline-versus-coreset experiment")
    _add_common(p, "config", "seed", "metric", "fraction", "eps", "alpha", "trials", "cost-mode", "jl", "out")
    p.add_argument("--no-timing", action="store_true", help="leave the wall-clock columns empty")

    p = sub.add_parser("validate", help="run the inequality and estimator checks")
    _add_common(p, "data", "seed", "metric", "fraction", "alpha")
    p.add_argument("--suite", choices=["triangle", "estimator", "coreset", "all"], default="all")
    p.add_argument("--count", type=int, default=1000, help="random triples or estimator draws")
    return parser


def _require(args, name):
    value = getattr(args, name)
    if value is None:
        raise ConfigError(f"--{name.replace('_', '-')} is required for {args.command}")
    return value


def _metric(args, default="sq") -> GroundMetric:
    return GroundMetric.parse(args.metric or default)


def _default_metric(inst) -> str:
    return "emd2" if inst.weighted else "sq"


def cmd_gen(args) -> int:
    if args.config:
        raw = read_config(args.config)
        spec, seed = dict(raw.get("dataset", {})), raw.get("seed") if args.seed is None else args.seed
        if seed is None:
            raise ConfigError("a seed is required (config or --seed)")
    else:
        spec, seed = {"kind": _require(args, "kind")}, _require(args, "seed")
    if args.kind:
        spec["kind"] = args.kind
    spec.update(dict(args.params))
    inst, truth = load_dataset(spec, np.random.default_rng(seed))
    out = Path(_require(args, "out"))
    write_patterns(out, inst)
    if truth is not None:
        atomic_write(out.with_suffix(".truth.json"), json.dumps({"truth": truth.tolist()}) + "\n")
    print(f"wrote {inst.n} patterns (k={inst.k}, d={inst.d}) to {out} fingerprint={inst.fingerprint}")
    return EXIT_OK


def cmd_coreset(args) -> int:
    inst = read_patterns(_require(args, "data"))
    metric = _metric(args, _default_metric(inst))
    seed = _require(args, "seed")
    rng = np.random.default_rng(seed)
    if args.size is not None:
        r = args.size
    else:
        frac = _require(args, "fraction")[-1]
        if not 0 < frac <= 1:
            raise ConfigError("--fraction must lie in (0, 1]")
        r = max(1, int(round(frac * inst.n)))
    pivot = pick_init(inst, args.trials or 3, rng, metric)
    mode = args.cost_mode or "exact"
    prof = sensitivities(inst, pivot.index, args.alpha or 3.0, mode, metric,
                         costs=pivot.costs if mode == "exact" else None)
    cs = sample_coreset(prof, r, rng, seed=seed)
    write_coreset(_require(args, "out"), cs)
    print(f"coreset r={r} T={prof.t_sum!r} pivot={pivot.index} delta={prof.delta_tilde!r}")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = read_patterns(_require(args, "data"))
    metric = _metric(args, _default_metric(inst))
    work = inst
    if args.coreset:
        cs = read_coreset(args.coreset)
        if cs.fingerprint != inst.fingerprint:
            raise DataError("coreset fingerprint does not match the pattern file")
        work = cs.as_instance(inst)
    rng = np.random.default_rng(_require(args, "seed"))
    choice = pick_init(work, args.trials or 3, rng, metric)
    rep = alternating_minimize(work, Prototype.from_pattern(work.pattern(choice.index)), metric, args.max_rounds)
    full = objective(inst, rep.prototype, metric)
    meta = {"metric": metric.value, "rounds": rep.rounds, "converged": rep.converged, "fingerprint": inst.fingerprint}
    if args.out:
        write_prototypes(args.out, [({"objective": full}, rep.prototype)], meta)
    print(f"objective={full!r} rounds={rep.rounds} converged={rep.converged}")
    return EXIT_OK


def cmd_project(args) -> int:
    inst = read_patterns(_require(args, "data"))
    metric = _metric(args, _default_metric(inst))
    jl = args.jl or "auto"
    if jl == "off":
        raise ConfigError("project needs --jl auto or a dimension")
    m = target_dim(inst.n, inst.k, args.eps or 0.3, d=inst.d) if jl == "auto" else int(jl)
    low, proj = jl_project(inst, m, np.random.default_rng(_require(args, "seed")), metric)
    write_patterns(_require(args, "out"), low)
    print(f"projected d={inst.d} -> m={proj.target_dim}")
    return EXIT_OK


def cmd_eval(args) -> int:
    raw = read_config(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "metric": args.metric,
        "fractions": args.fraction,
        "eps": args.eps,
        "alpha": args.alpha,
        "trials": args.trials,
        "cost_mode": args.cost_mode,
        "jl": args.jl,
        "output": args.out,
    }
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_timing:
        raw["timing"] = False
    cfg = ExperimentConfig.from_dict(raw)
    result = run_experiment(cfg)
    for row in result.rows:
        print(",".join(row.csv_fields()))
    return EXIT_OK


def _random_triple(rng, metric: GroundMetric):
    k, d = int(rng.integers(1, 8)), int(rng.integers(1, 6))
    if metric.weighted:
        k, W = int(rng.integers(1, 5)), int(rng.integers(1, 7))
        return [Pattern(rng.random((k, d)), rng.multinomial(W, np.ones(k) / k)) for _ in range(3)]
    return [Pattern(rng.random((k, d))) for _ in range(3)]


def cmd_validate(args) -> int:
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    failures = 0
    if args.suite in ("triangle", "all"):
        metrics = [GroundMetric.parse(args.metric)] if args.metric else list(GroundMetric)
        for metric in metrics:
            bad = sum(
                not verify_match_triangle(*_random_triple(rng, metric), eps, metric)
                for _ in range(args.count)
                for eps in (0.1, 0.5, 1.0)
            )
            print(f"triangle {metric.value}: {bad} violations in {3 * args.count} checks")
            failures += bad
    if args.suite in ("estimator", "coreset", "all"):
        if args.data:
            inst = read_patterns(args.data)
        else:
            inst = load_dataset({"kind": "gaussian", "n": 50, "k": 5, "d": 4}, rng)[0]
        metric = _metric(args, _default_metric(inst))
        prof = sensitivities(inst, pick_init(inst, 3, rng, metric).index, args.alpha or 3.0, metric=metric)
        if args.suite in ("estimator", "all"):
            q = Prototype.from_pattern(inst.pattern(int(rng.integers(inst.n))))
            q = Prototype(q.points + rng.normal(scale=0.5, size=q.points.shape), q.weights)
            full = objective(inst, q, metric)
            draws = np.array([weighted_objective(inst, sample_coreset(prof, 1, rng), q, metric) for _ in range(args.count)])
            mean, se = float(draws.mean()), float(draws.std(ddof=1) / np.sqrt(len(draws)))
            ok = abs(mean - full) <= 3 * se
            print(f"estimator: mean={mean!r} exact={full!r} se={se!r} {'ok' if ok else 'FAIL'}")
            failures += not ok
        if args.suite in ("coreset", "all"):
            frac = (args.fraction or [0.1])[-1]
            cs = sample_coreset(prof, max(1, int(round(frac * inst.n))), rng)
            err = validate_coreset(inst, cs, probes=100, rng=rng, metric=metric)
            print(f"coreset: max relative error {err!r} over 100 probes")
    if failures:
        raise NumericalError(f"{failures} check(s) failed")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "coreset": cmd_coreset,
    "solve": cmd_solve,
    "project": cmd_project,
    "eval": cmd_eval,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ProtosetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
