"""Command-line entry point: ``stochastic-chaining <subcommand> ...``.

Exit status is 0 on success, 2 on bad arguments and 1 when a module reports a
numerical or invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass

from stochastic_chaining import estimators, gaussian_mean, phase_retrieval, vc_chain
from stochastic_chaining.chain_core import ChainDomainError, ChainInvariantError

DEFAULT_SEED = 20210531

log = logging.getLogger("stochastic_chaining")


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int
    out: str | None
    fmt: str  # "json" or "csv"


def _fmt(x) -> str:
    return f"{x:.12g}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _float_pair(text):
    try:
        lo, hi = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return lo, hi


def _int_list(text):
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers separated by commas, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochastic-chaining", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, randomized=True):
        p.add_argument("--out", help="write to this file instead of stdout")
        if randomized:
            p.add_argument("--trials", type=int)
            p.add_argument("--seed", type=int, default=DEFAULT_SEED)
            p.add_argument("--threads", type=int, help=f"worker threads (default ${estimators.THREADS_ENV} or 1)")

    p = sub.add_parser("gaussian", help="Gaussian mean estimation bounds")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mu", type=float, default=0.0)
    common(p)

    p = sub.add_parser("phase", help="phase retrieval bounds")
    p.add_argument("--epsilon", type=float)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, default=phase_retrieval.DEFAULT_GAMMA)
    g.add_argument("--optimize", action="store_true", help="minimize the bound over gamma")
    p.add_argument("--bracket", type=_float_pair, default=(1.5, 10.0), metavar="LO,HI")
    p.add_argument("--baseline", action="store_true", help="include the partition-chaining baseline")
    p.add_argument("--true", dest="true_value", action="store_true", help="include the exact E[X_W]")
    p.add_argument("--chord", action="store_true", help="use chord instead of arc link lengths")
    p.add_argument("--table1", action="store_true", help="emit the full epsilon table as CSV")
    common(p)

    p = sub.add_parser("table1", help="phase retrieval comparison table as CSV")
    common(p, randomized=False)

    p = sub.add_parser("vc", help="covering-number chain for a finite binary class")
    p.add_argument("--class", dest="class_spec", default="thresholds", help="thresholds, intervals or custom:PATH")
    p.add_argument("--m", type=int, default=16, help="instance count for the built-in classes")
    p.add_argument("--n", type=_int_list, required=True, metavar="N[,N...]")
    p.add_argument("--noise", type=float, default=0.2)
    common(p)

    p = sub.add_parser("validate", help="Monte Carlo validation suites")
    p.add_argument("--suite", choices=estimators.SUITES, required=True)
    p.add_argument("--example", choices=estimators.EXAMPLES, required=True)
    common(p)
    return parser


def _table1_csv():
    rows = phase_retrieval.table1()
    return _csv(["epsilon", "baseline", "stochastic_375", "true_value"], rows)


def cmd_gaussian(args):
    params = gaussian_mean.GaussianParams(args.mu, args.sigma, args.n)
    result = {
        "seed": args.seed,
        "thm1": gaussian_mean.bound_thm1(params).to_dict(),
        "thm2": gaussian_mean.bound_thm2(params).to_dict() if params.n >= 2 else None,
        "true_value": gaussian_mean.true_generalization(params),
    }
    if args.trials:
        est = estimators.mc_generalization(
            estimators.GaussianMeanSampler(args.mu, args.sigma, args.n), args.trials, args.seed, args.threads
        )
        result["mc"] = {"value": est.value, "std_error": est.std_error, "trials": est.trials, "seed": est.seed}
    return _json(result)


def cmd_phase(args):
    if args.table1:
        return _table1_csv()
    if args.epsilon is None:
        raise ChainDomainError("--epsilon is required unless --table1 is given")
    eps = args.epsilon
    result = {"epsilon": eps, "seed": args.seed}
    if args.optimize:
        g_star, b_star = phase_retrieval.optimize_gamma(eps, args.bracket, chord=args.chord)
        result["gamma_star"] = g_star
        result["bound_at_star"] = b_star
        gamma = g_star
    else:
        gamma = args.gamma
    result["bound"] = phase_retrieval.bound(phase_retrieval.PhaseParams(eps, gamma), chord=args.chord).to_dict()
    if args.baseline:
        result["baseline"] = phase_retrieval.baseline_bound(eps)
    if args.true_value:
        result["true_value"] = phase_retrieval.true_value(eps)
    if args.trials:
        est = estimators.mc_generalization(estimators.PhaseRetrievalSampler(eps, gamma), args.trials, args.seed, args.threads)
        result["mc"] = {"value": est.value, "std_error": est.std_error, "trials": est.trials, "seed": est.seed}
    return _json(result)


def _load_class(spec, m):
    if spec == "thresholds":
        return vc_chain.FiniteClass.thresholds(m)
    if spec == "intervals":
        return vc_chain.FiniteClass.intervals(m)
    if spec.startswith("custom:"):
        return vc_chain.FiniteClass.from_file(spec[len("custom:"):])
    raise ChainDomainError(f"unknown class {spec!r}")


def cmd_vc(args):
    cls_ = _load_class(args.class_spec, args.m)
    trials = args.trials or 200
    rows = [vc_chain.vc_experiment(cls_, n, trials, args.seed, args.noise) for n in args.n]
    header = ["n", "covering_bound_over_sqrt_n", "mc_gen_estimate", "mc_std_error"]
    body = [(r.n, r.covering_bound_over_sqrt_n, r.mc_gen_estimate, r.mc_std_error) for r in rows]
    return f"# seed={args.seed}\n" + _csv(header, body)


def cmd_validate(args):
    if args.threads:
        os.environ[estimators.THREADS_ENV] = str(args.threads)
    return _json(estimators.run_suite(args.suite, args.example, args.trials, args.seed))


COMMANDS = {
    "gaussian": (cmd_gaussian, "json"),
    "phase": (cmd_phase, "json"),
    "table1": (lambda args: _table1_csv(), "csv"),
    "vc": (cmd_vc, "csv"),
    "validate": (cmd_validate, "json"),
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    handler, fmt = COMMANDS[args.command]
    config = RunConfig(args.command, getattr(args, "seed", DEFAULT_SEED), args.out, fmt)
    log.info("running %s", config)
    try:
        text = handler(args)
    except (ChainDomainError, ChainInvariantError, AssertionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if config.out:
        with open(config.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
