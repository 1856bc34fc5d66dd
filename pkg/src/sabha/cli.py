"""Command-line front end.

Exit codes: 0 success, 2 invalid input or usage, 3 solver did not converge.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io as sio
from .complexity import complexity_report
from .errors import ConvergenceError, InvalidInputError
from .optim import AdmmConfig
from .procedures import MethodConfig, WeightVector, bh, sabha, storey_bh, verify_weight_constraint
from .simulation import DEFAULT_METHODS, DEFAULT_MU_SIGS, run_trials
from .structures import Graph, Grouping, StructureSpec, Variant
from .weights import estimate_weights, sign_grouping

EXIT_OK, EXIT_INVALID, EXIT_CONVERGENCE = 0, 2, 3
STRUCTURE_ALIASES = {"ordered": "ordered-step", "tv": "tv-l1"}
STRUCTURES = [v.value for v in Variant] + list(STRUCTURE_ALIASES)

log = logging.getLogger("sabha")


def _seed(args):
    env = os.environ.get("SABHA_SEED")
    if env is not None and env.strip() != "":
        try:
            return int(env)
        except ValueError:
            raise InvalidInputError(f"SABHA_SEED must be an integer, got {env!r}") from None
    return args.seed


def _floats(text):
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _add_structure(p, need_n=False):
    p.add_argument("--structure", choices=STRUCTURES, help="weight class")
    p.add_argument("--epsilon", type=float, default=0.1, help="lower bound on weights (default 0.1)")
    p.add_argument("--m", type=float, help="total-variation budget for tv classes")
    p.add_argument("--groups", type=Path, help="CSV index,group (1-based)")
    p.add_argument("--edges", type=Path, help="CSV i,j edge list (1-based)")
    p.add_argument("--grid", type=int, metavar="SIDE", help="use a SIDE x SIDE lattice graph instead of --edges")
    p.add_argument("--max-iter", type=int, default=5000, help="ADMM iteration cap")


def _build_spec(args, n, grouping=None):
    name = STRUCTURE_ALIASES.get(args.structure, args.structure)
    variant = Variant(name)
    graph = None
    if variant.family == "tv":
        if args.grid:
            graph = Graph.grid(args.grid)
        elif args.edges:
            graph = sio.read_edges(args.edges, n)
    if grouping is None and args.groups:
        grouping = sio.read_grouping(args.groups, n)
    if variant is Variant.CONSTANT:
        grouping = grouping or Grouping.single(n)
    spec = StructureSpec(variant, args.epsilon, grouping, graph, args.m)
    spec.check_size(n)
    return spec


def _load_inputs(args):
    """p-values, plus the sign grouping when statistics are supplied."""
    if args.statistics is not None:
        grouping, p = sign_grouping(sio.read_statistics(args.statistics))
        return p, grouping
    if args.pvalues is None:
        raise InvalidInputError("give a p-value file (or --statistics for sign-split)")
    return sio.read_pvalues(args.pvalues), None


def _fit(args, p, sign_groups):
    spec = _build_spec(args, p.size, sign_groups if args.structure == "sign-split" else None)
    return estimate_weights(p, args.tau, spec, AdmmConfig(max_iter=args.max_iter)), spec


def cmd_adjust(args):
    t0 = time.perf_counter()
    seed = _seed(args)
    p, sign_groups = _load_inputs(args)
    weights = None
    if args.method == "bh":
        result = bh(p, args.alpha)
    elif args.method == "storey":
        result = storey_bh(p, MethodConfig(args.alpha, args.tau))
    else:
        cfg = MethodConfig(args.alpha, args.tau)
        if args.weights is not None:
            q = sio.read_weights(args.weights)
            if q.size != p.size:
                raise InvalidInputError(f"weights file has {q.size} entries, p-values {p.size}")
            weights = WeightVector(q, verify_weight_constraint(p, q, args.tau), "file")
            if not weights.constraint_satisfied:
                log.warning("supplied weights violate the censoring constraint; FDR guarantee does not apply")
        elif args.structure is None:
            raise InvalidInputError("sabha needs --structure or --weights")
        else:
            weights, _ = _fit(args, p, sign_groups)
        result = sabha(p, cfg, weights, "sabha")
    config = {
        "method": args.method, "alpha": args.alpha, "tau": args.tau,
        "structure": args.structure, "epsilon": args.epsilon, "m": args.m, "seed": seed,
        "pvalues": None if args.pvalues is None else str(args.pvalues),
        "pvalues_sha256": None if args.pvalues is None else sio.file_digest(args.pvalues),
    }
    record = sio.RunRecord.build(config, result, weights, time.perf_counter() - t0)
    if args.record:
        args.record.write_text(record.to_json() + "\n")
    csv_text = sio.rejections_csv(result, p)
    if args.rejections:
        args.rejections.write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_weights(args):
    p, sign_groups = _load_inputs(args)
    if args.structure is None:
        raise InvalidInputError("--structure is required")
    weights, _ = _fit(args, p, sign_groups)
    if args.out:
        sio.write_weights(args.out, weights)
    else:
        sys.stdout.write("index,q\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(weights.q.tolist(), 1)))
    return EXIT_OK


def cmd_simulate(args):
    seed = _seed(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    table = run_trials(args.mu_sig, methods, args.trials, args.alpha, seed,
                       tau=args.tau, epsilon=args.epsilon, workers=args.workers)
    text = table.to_csv()
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    if args.json:
        args.json.write_text(table.to_json() + "\n")
    if args.svg:
        power, fdp = sio.summary_svgs(table, args.alpha)
        stem = args.svg.with_suffix("")
        Path(f"{stem}_power.svg").write_text(power)
        Path(f"{stem}_fdp.svg").write_text(fdp)
    return EXIT_OK


def cmd_bounds(args):
    if args.structure is None:
        raise InvalidInputError("--structure is required")
    if args.n is None or args.n < 1:
        raise InvalidInputError("--n must be a positive integer")
    spec = _build_spec(args, args.n)
    report = complexity_report(spec, args.n, args.samples, _seed(args), args.workers)
    out = report.to_json() + "\n"
    if args.out:
        args.out.write_text(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="sabha", description="Structure-adaptive BH multiple testing.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--alpha", type=float, default=0.1, help="target FDR level")
        p.add_argument("--tau", type=float, default=0.5, help="censoring threshold")
        p.add_argument("--seed", type=int, default=0, help="RNG seed (SABHA_SEED overrides)")

    a = sub.add_parser("adjust", help="run BH, Storey-BH or SABHA on a p-value file")
    a.add_argument("pvalues", type=Path, nargs="?", help="CSV index,pvalue or one column")
    a.add_argument("--method", choices=["bh", "storey", "sabha"], default="sabha")
    a.add_argument("--statistics", type=Path, help="test statistics for sign-split (two-sided normal)")
    a.add_argument("--weights", type=Path, help="precomputed weights CSV index,q")
    a.add_argument("--record", type=Path, help="write the run record JSON here")
    a.add_argument("--rejections", type=Path, help="write the rejections CSV here (default stdout)")
    common(a)
    _add_structure(a)
    a.set_defaults(func=cmd_adjust)

    w = sub.add_parser("weights", help="estimate weights and emit them as CSV")
    w.add_argument("pvalues", type=Path, nargs="?")
    w.add_argument("--statistics", type=Path)
    w.add_argument("--out", type=Path)
    common(w)
    _add_structure(w)
    w.set_defaults(func=cmd_weights)

    s = sub.add_parser("simulate", help="grid experiment: mean FDP and power per method")
    s.add_argument("--mu-sig", type=_floats, default=list(DEFAULT_MU_SIGS), help="signal strengths, comma separated")
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--methods", default=",".join(DEFAULT_METHODS),
                   help="comma separated: bh, storey-bh, oracle, sabha-m<budget>")
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", type=Path, help="summary CSV (default stdout)")
    s.add_argument("--json", type=Path, help="also write the summary as JSON")
    s.add_argument("--svg", type=Path, help="write <stem>_power.svg and <stem>_fdp.svg")
    common(s)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", help="Rademacher complexity bound (and optional Monte Carlo estimate)")
    b.add_argument("--n", type=int)
    b.add_argument("--samples", type=int, default=0, help="Monte Carlo draws (0 = bound only)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", type=Path)
    _add_structure(b)
    b.set_defaults(func=cmd_bounds)
    return ap


def run_cli(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
