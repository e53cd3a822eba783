"""Command-line driver.

Exit codes: 0 ok, 2 bad arguments, 3 infeasible size, 4 attack failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import adversary_bound as adv
from . import classical_attacks, experiments, permutation_oracle, quantum_cost_model, quantum_simulator
from .errors import AmbiguousKey, InfeasibleSearch, NoKeyFound, ParameterError, SizeLimitError, Undefined

EXIT_OK, EXIT_ARGS, EXIT_SIZE, EXIT_ATTACK = 0, 2, 3, 4
FORMATS = ("csv", "table", "json", "svg")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (tuple, set, frozenset)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, default=_jsonable, sort_keys=True) + "\n"


def _destination(args, default_format: str) -> tuple[str, Path | None]:
    """Resolve ``--out``/``--format``. A bare format name given to ``--out`` means stdout in that format."""
    fmt = getattr(args, "format", None)
    out = args.out
    if out in FORMATS and fmt is None:
        return out, None
    if out in (None, "-"):
        return fmt or default_format, None
    return fmt or default_format, Path(out)


def _write(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


# --- commands -----------------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.out in (None, "-"):
        raise ParameterError("gen needs --out <file>")
    if args.keys is not None:
        family = permutation_oracle.generate_family(args.seed, args.n, args.m or args.n)
        rng = np.random.default_rng([args.seed, 2])
        m = family.block_space
        plaintexts = rng.choice(m, size=args.pairs, replace=False).tolist()
        inst = permutation_oracle.plant_instance(family, args.depth, args.keys, plaintexts)
    else:
        inst = permutation_oracle.random_instance(args.seed, args.n, args.m or args.n, args.depth, args.pairs)
    binary, meta = permutation_oracle.save(inst, args.out, seed=args.seed)
    sys.stdout.write(_dump({"instance": str(binary), "descriptor": str(meta)}))
    return EXIT_OK


def cmd_attack(args) -> int:
    obj = permutation_oracle.load(args.instance)
    if not isinstance(obj, permutation_oracle.Instance):
        raise ParameterError(f"{args.instance} holds a family without a planted instance")
    result = classical_attacks.ATTACKS[args.algo](obj)
    fmt, path = _destination(args, "json")
    _write(_dump(result.to_json()), path)
    return EXIT_OK


def cmd_cost(args) -> int:
    if args.attack == "ke2":
        est = quantum_cost_model.ke2_quantum_cost(args.n)
    elif args.attack == "ke4":
        est = quantum_cost_model.ke4_quantum_cost(args.n, args.m)
    else:
        space = args.m if args.m is not None else args.n
        est = quantum_cost_model.grover_cost(space, args.marked)
    out = {
        "attack": args.attack,
        "N": args.n,
        "M": args.m,
        "queries": est.queries,
        "time_units": est.time_units,
        "memory_units": est.memory_units,
        "time_exp": est.time_exp,
        "space_exp": est.space_exp,
        "time_space_exp": est.time_space_exp,
    }
    _, path = _destination(args, "json")
    _write(_dump(out), path)
    return EXIT_OK


def cmd_gains(args) -> int:
    fmt, path = _destination(args, "table")
    if fmt == "table":
        text = experiments.gains_table(args.depth)
    elif fmt == "csv":
        text = experiments.rows_to_csv(experiments.gains_rows(args.depth))
    elif fmt == "json":
        text = _dump(experiments.gains_rows(args.depth))
    else:
        raise ParameterError(f"gains cannot be rendered as {fmt}")
    _write(text, path)
    return EXIT_OK


def cmd_walk(args) -> int:
    op = quantum_simulator.build_johnson_walk(args.n, args.r, None if args.unmarked else (0, 1))
    steps = args.steps if args.steps is not None else quantum_simulator.amplification_steps(args.n, args.r)
    rep = quantum_simulator.szegedy_walk_simulate(op, steps)
    rows = [{"step": 0, "marked_mass": rep.stationary_marked_mass}]
    rows += [{"step": i + 1, "marked_mass": v} for i, v in enumerate(rep.trace)]
    fmt, path = _destination(args, "csv")
    meta = {"N": args.n, "r": args.r, "steps": steps, "stationary_marked_mass": rep.stationary_marked_mass,
            "max_norm_drift": rep.max_norm_drift}
    if fmt == "csv":
        text = experiments.rows_to_csv(rows, meta)
    elif fmt == "table":
        text = experiments.format_table(rows)
    elif fmt == "json":
        text = _dump({**meta, "peak_marked_mass": rep.peak_marked_probability, "peak_step": rep.peak_step, "rows": rows})
    else:
        raise ParameterError(f"walk cannot be rendered as {fmt}")
    _write(text, path)
    return EXIT_OK


def cmd_grover(args) -> int:
    if args.marked < 1:
        raise InfeasibleSearch("nothing marked, Grover search cannot succeed")
    rng = np.random.default_rng(args.seed)
    marked = sorted(rng.choice(args.m, size=args.marked, replace=False).tolist())
    rep = quantum_simulator.grover_simulate(args.m, marked, args.k)
    out = {
        "M": args.m,
        "marked": marked,
        "k": args.k,
        "probability": rep.marked_probability,
        "closed_form": quantum_simulator.grover_closed_form(args.m, args.marked, args.k),
        "max_norm_drift": rep.max_norm_drift,
    }
    _, path = _destination(args, "json")
    _write(_dump(out), path)
    return EXIT_OK


def cmd_adv(args) -> int:
    if args.adv_command == "verify":
        rep = adv.verify_lift(args.n, args.m, args.p, args.c, args.domain)
        red = rep.reduction
        out = {
            "N": rep.n_keys, "M": rep.block_space, "P": rep.p, "C": rep.c, "domain": rep.domain,
            "counts_ke2": rep.counts_ke2, "counts_cf": rep.counts_cf,
            "D": rep.d, "fiber_sizes": rep.fiber_sizes,
            "norm_cf": rep.norm_cf, "norm_ke2": rep.norm_ke2,
            "norm_relation": rep.norm_relation,
            "tensor_check": "pass" if rep.tensor else "fail",
            "query_reduction": "n/a" if red is None else ("pass" if red.passed else "fail"),
            "max_all_queries": None if red is None else red.max_all,
            "max_query_set": None if red is None else red.max_query_set,
            "max_query_set_conjugated": None if red is None else red.max_query_set_conjugated,
            "passed": rep.passed,
        }
    else:
        if args.problem == "or2":
            enum = adv.or2_enumeration()
        else:
            enum = adv.enumerate_inputs(args.problem, args.n, args.m, args.p, args.c, args.domain)
        gamma = adv.uniform_adversary(enum)
        if args.optimize:
            gamma = adv.optimize_adversary(enum, iterations=args.iterations, seed=args.seed)
        out = {
            "problem": args.problem,
            "inputs": len(enum),
            "counts": enum.counts,
            "matrix": "optimized" if args.optimize else "uniform",
            "adv_value": adv.adv_value(gamma, adv.all_masks(enum)),
        }
    _, path = _destination(args, "json")
    _write(_dump(out), path)
    return EXIT_OK


def cmd_scaling(args) -> int:
    if args.config:
        config = experiments.ExperimentConfig.load(args.config)
    else:
        sizes = args.sizes or [2**k for k in range(6, 13)]
        config = experiments.ExperimentConfig(
            seed=args.seed, algorithm=args.algo, sizes=sizes, m_rule=args.m_rule,
            trials=args.trials, pairs=args.pairs, metric=args.metric,
        )
    series = experiments.run_scaling(config)
    for kind, target in sorted(config.outputs.items()):
        target = Path(target)
        target.parent.mkdir(parents=True, exist_ok=True)
        experiments.emit_report(series, kind, target)
    fmt, path = _destination(args, "csv")
    if fmt == "json":
        _write(_dump(asdict(series)), path)
    else:
        _write(experiments.emit_report(series, fmt), path)
    return EXIT_OK


# --- parser -------------------------------------------------------------------------------


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file, '-' for stdout, or a format name for stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmitm", description="Classical and quantum attacks on iterated ideal ciphers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a permutation family and plant an instance")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None, help="block space size (default N)")
    p.add_argument("--depth", type=int, choices=(2, 4), default=2)
    p.add_argument("--pairs", type=int, default=3)
    p.add_argument("--keys", type=int, nargs="+", default=None, help="plant these keys instead of random ones")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("attack", help="run a classical attack on a saved instance")
    _common(p)
    p.add_argument("--algo", choices=sorted(classical_attacks.ATTACKS), required=True)
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("cost", help="closed-form quantum cost")
    _common(p)
    p.add_argument("--attack", choices=("ke2", "ke4", "grover"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--marked", type=int, default=1)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("gains", help="gain table for 2- or 4-encryption")
    _common(p)
    p.add_argument("--depth", type=int, choices=(2, 4), required=True)
    p.add_argument("--format", choices=("csv", "table", "json"), default=None)
    p.set_defaults(func=cmd_gains)

    p = sub.add_parser("walk", help="simulate the Szegedy walk on J(N, r)")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--steps", type=int, default=None, help="default ceil(3/sqrt(delta*eps))")
    p.add_argument("--unmarked", action="store_true", help="no collision pair")
    p.add_argument("--format", choices=("csv", "table", "json"), default=None)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("grover", help="statevector Grover search")
    _common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--marked", type=int, default=1)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_grover)

    p = sub.add_parser("adv", help="adversary-bound numerics")
    asub = p.add_subparsers(dest="adv_command", required=True, parser_class=_Parser)
    for name in ("verify", "value"):
        q = asub.add_parser(name)
        _common(q)
        q.add_argument("--n", type=int, default=2)
        q.add_argument("--m", type=int, default=3)
        q.add_argument("--p", type=int, default=0)
        q.add_argument("--c", type=int, default=1)
        q.add_argument("--domain", choices=adv.DOMAINS, default="generic")
        if name == "value":
            q.add_argument("--problem", choices=("or2", "cf", "ke2"), required=True)
            q.add_argument("--optimize", action="store_true")
            q.add_argument("--iterations", type=int, default=300)
        q.set_defaults(func=cmd_adv)

    p = sub.add_parser("scaling", help="scaling sweep with a log-log exponent fit")
    _common(p)
    p.add_argument("--config", default=None, help="JSON experiment config (overrides the flags below)")
    p.add_argument("--algo", choices=experiments.ALGORITHMS, default="mitm2")
    p.add_argument("--sizes", type=int, nargs="+", default=None)
    p.add_argument("--m-rule", default="N")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--pairs", type=int, default=None)
    p.add_argument("--metric", choices=experiments.METRICS, default="time_units")
    p.add_argument("--format", choices=("csv", "table", "svg", "json"), default=None)
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SizeLimitError as exc:
        code, msg = EXIT_SIZE, str(exc)
    except (NoKeyFound, AmbiguousKey) as exc:
        code, msg = EXIT_ATTACK, str(exc)
    except (ParameterError, InfeasibleSearch, Undefined, ValueError) as exc:
        code, msg = EXIT_ARGS, str(exc)
    except OSError as exc:
        code, msg = EXIT_ARGS, f"{exc.strerror or exc}: {exc.filename}" if exc.filename else str(exc)
    print(f"qmitm: error: {msg}".splitlines()[0], file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
