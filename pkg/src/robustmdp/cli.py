"""Command-line front end: ``robustmdp {gen,solve,eval,bench,oracle-check}``.

Exit status: 0 on success, 1 on invalid input (including usage errors and a
failed oracle check), 2 when an iteration does not converge.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .bench import load_bench_spec, run_bench, write_csv
from .errors import ConvergenceError, InvalidConfig, RobustMDPError, ValidationError
from .mdp import (
    NormIndex,
    Rect,
    UncertaintySpec,
    instance_to_dict,
    load_instance,
    random_instance,
    save_instance,
)
from .solver import SolveConfig, evaluate_policy, q_value_iteration_sa, value_iteration

log = logging.getLogger("robustmdp")

EXIT_OK, EXIT_INVALID, EXIT_NO_CONVERGENCE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def resolve_threads(flag) -> int:
    """``--threads`` wins over ``ROBUSTMDP_THREADS``, which wins over 1."""
    if flag is not None:
        n = flag
    else:
        env = os.environ.get("ROBUSTMDP_THREADS")
        if env is None or env.strip() == "":
            return 1
        try:
            n = int(env)
        except ValueError as exc:
            raise InvalidConfig(f"ROBUSTMDP_THREADS must be an integer, got {env!r}") from exc
    if n < 1:
        raise InvalidConfig(f"thread count must be >= 1, got {n}")
    return n


def _norm(text):
    try:
        return NormIndex.parse(text)
    except (ValueError, ValidationError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _add_uncertainty_args(sp):
    sp.add_argument("--rect", choices=[r.value for r in Rect], default="none",
                    help="rectangularity of the uncertainty set")
    sp.add_argument("--p", type=_norm, default=NormIndex(2.0),
                    help="noise norm index (1, 2, inf or any real > 1)")
    sp.add_argument("--alpha", type=float, default=0.0, help="reward radius")
    sp.add_argument("--beta", type=float, default=0.0, help="kernel radius")
    sp.add_argument("--forbid-zeros", action="store_true",
                    help="keep zero-probability transitions at zero under noise")


def _add_solver_args(sp):
    sp.add_argument("--epsilon", type=float, default=1e-6)
    sp.add_argument("--max-iters", type=_positive_int, default=10_000)
    sp.add_argument("--inner-tol", type=float, default=None)
    sp.add_argument("--threads", type=_positive_int, default=None)


@contextlib.contextmanager
def _output(path, mode="w"):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, mode, newline="" if path.endswith(".csv") else None) as fh:
            yield fh


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="robustmdp", description="Robust MDP value iteration toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a random instance as JSON")
    g.add_argument("--S", type=_positive_int, required=True)
    g.add_argument("--A", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--reward-scale", type=float, default=1.0)
    g.add_argument("--gamma", type=float, default=0.9)
    g.add_argument("-o", "--output", default=None)

    s = sub.add_parser("solve", help="robust value iteration on an instance file")
    s.add_argument("instance")
    _add_uncertainty_args(s)
    _add_solver_args(s)
    s.add_argument("--method", choices=["vi", "qvi"], default="vi",
                   help="value iteration or sa-rectangular Q-value iteration")
    s.add_argument("-o", "--output", default=None)

    e = sub.add_parser("eval", help="robust value of a fixed policy")
    e.add_argument("instance")
    e.add_argument("policy", help="JSON file holding a policy matrix or {'policy': ...}")
    _add_uncertainty_args(e)
    _add_solver_args(e)
    e.add_argument("-o", "--output", default=None)

    b = sub.add_parser("bench", help="relative-cost benchmark from a TOML spec")
    b.add_argument("spec")
    b.add_argument("--threads", type=_positive_int, default=None)
    b.add_argument("-o", "--output", default=None)

    o = sub.add_parser("oracle-check", help="compare solvers with brute-force oracles")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--cases", type=_positive_int, default=20)
    o.add_argument("--tols", default="1e-4,1e-6,1e-8,1e-10",
                   help="comma-separated inner tolerances to sweep")
    o.add_argument("--grid-step", type=float, default=1e-3)
    o.add_argument("--samples", type=_positive_int, default=10_000)
    o.add_argument("-o", "--output", default=None)
    return parser


def _uncertainty(inst, args) -> UncertaintySpec:
    return UncertaintySpec.uniform(inst, args.rect, args.p, args.alpha, args.beta,
                                   forbid_zeros=args.forbid_zeros)


def _config(args) -> SolveConfig:
    return SolveConfig(epsilon=args.epsilon, max_iters=args.max_iters,
                       inner_tol=args.inner_tol, workers=resolve_threads(args.threads))


def _report_json(inst, report) -> dict:
    return {
        "value": report.value.tolist(),
        "policy": report.policy.tolist(),
        "objective": float(inst.mu @ report.value),
        "iterations": report.iterations,
        "converged": report.converged,
        "residual": report.residuals[-1] if report.residuals else None,
        "chi": [int(c) for c in report.chi_per_state],
    }


def _cmd_gen(args):
    inst = random_instance(args.S, args.A, seed=args.seed, reward_scale=args.reward_scale,
                           gamma=args.gamma)
    if args.output is None:
        json.dump(instance_to_dict(inst), sys.stdout)
        sys.stdout.write("\n")
    else:
        save_instance(inst, args.output)
    return EXIT_OK


def _cmd_solve(args):
    inst = load_instance(args.instance)
    unc = _uncertainty(inst, args)
    cfg = _config(args)
    if args.method == "qvi":
        report = q_value_iteration_sa(inst, unc, cfg)
    else:
        report = value_iteration(inst, unc, cfg)
    with _output(args.output) as fh:
        json.dump(_report_json(inst, report), fh)
        fh.write("\n")
    return EXIT_OK


def _load_policy(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(data, dict):
        if "policy" not in data:
            raise ValidationError(f"{path}: missing 'policy' field")
        data = data["policy"]
    try:
        return np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed policy ({exc})") from exc


def _cmd_eval(args):
    inst = load_instance(args.instance)
    unc = _uncertainty(inst, args)
    report = evaluate_policy(inst, unc, _load_policy(args.policy), _config(args))
    out = _report_json(inst, report)
    del out["chi"]
    with _output(args.output) as fh:
        json.dump(out, fh)
        fh.write("\n")
    return EXIT_OK


def _cmd_bench(args):
    spec = load_bench_spec(args.spec)
    if args.threads is not None or os.environ.get("ROBUSTMDP_THREADS"):
        spec.threads = resolve_threads(args.threads)
    rows = run_bench(spec, progress=log.info)
    with _output(args.output) as fh:
        write_csv(rows, fh)
    return EXIT_OK


def _cmd_oracle_check(args):
    from .checks import ORACLE_CSV_HEADER, run_oracle_checks

    try:
        tols = [float(t) for t in args.tols.split(",") if t.strip()]
    except ValueError as exc:
        raise InvalidConfig(f"bad --tols value {args.tols!r}") from exc
    if not tols or any(not t > 0 for t in tols):
        raise InvalidConfig("--tols needs positive tolerances")
    rows = run_oracle_checks(seed=args.seed, cases=args.cases, tols=tols,
                             grid_step=args.grid_step, samples=args.samples)
    with _output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ORACLE_CSV_HEADER)
        for r in rows:
            w.writerow(r.as_csv())
    return EXIT_OK if all(r.passed for r in rows) else EXIT_INVALID


_COMMANDS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "oracle-check": _cmd_oracle_check,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConvergenceError as exc:
        print(f"robustmdp: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (RobustMDPError, OSError, ValueError) as exc:
        print(f"robustmdp: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(cli_main())
