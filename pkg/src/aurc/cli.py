"""Command-line entry point: ``aurc {evaluate,bias,mse,converge,counterexample}``.

Exit codes: 0 success, 1 internal error, 2 invalid usage or input.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .dataio import DataFormat, DatasetError, dump_report, load_dataset, report_payload, write_report
from .estimators import NAIVE_MAX_N, EstimatorKind, evaluate
from .harness import (
    DEFAULT_SIZES,
    LossModel,
    counterexample_demo,
    dataset_convergence,
    generate_population,
    population_convergence,
)
from .losses import CSFKind, LossKind, compute_losses, confidence_score
from .ranking import TiePolicy, WeightKind
from .special import make_rng
from .stat_props import bias_curve, bound_curve, mse_curve, rank_for_beta

log = logging.getLogger("aurc")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2

_ESTIMATOR_ALIASES = {
    "alpha": EstimatorKind.PLUGIN_ALPHA_HAT,
    "alpha-hat": EstimatorKind.PLUGIN_ALPHA_HAT,
    "alpha-prime": EstimatorKind.PLUGIN_ALPHA_PRIME,
    "sele": EstimatorKind.SELE,
    "sele2": EstimatorKind.SELE_TIMES_TWO,
    "2sele": EstimatorKind.SELE_TIMES_TWO,
    "naive": EstimatorKind.NAIVE_EMPIRICAL,
}
_WEIGHT_ALIASES = {
    "alpha": WeightKind.ALPHA_HAT,
    "alpha-hat": WeightKind.ALPHA_HAT,
    "alpha-prime": WeightKind.ALPHA_PRIME,
    "sele": WeightKind.SELE,
}
_LOSS_ALIASES = {"01": LossKind.ZERO_ONE, "0/1": LossKind.ZERO_ONE, "ce": LossKind.CROSS_ENTROPY}


class UsageError(Exception):
    pass


def _lookup(value: str, aliases: dict, enum_cls):
    key = value.strip().lower()
    if key in aliases:
        return aliases[key]
    try:
        return enum_cls(key.replace("-", "_"))
    except ValueError:
        choices = sorted(set(aliases) | {e.value for e in enum_cls})
        raise argparse.ArgumentTypeError(f"invalid choice {value!r} (choose from {', '.join(choices)})")


def _list_of(aliases, enum_cls):
    def parse(text: str):
        items = [_lookup(t, aliases, enum_cls) for t in text.split(",") if t.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return list(dict.fromkeys(items))
    return parse


def _loss_kind(text: str) -> LossKind:
    return _lookup(text, _LOSS_ALIASES, LossKind)


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _beta_grid(text: str) -> np.ndarray:
    """``0.1,0.5,0.9`` or ``start:stop:step`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            count = int(round((stop - start) / step)) + 1
            grid = np.round(start + step * np.arange(count), 12)
        else:
            grid = np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad beta grid {text!r}")
    if grid.size == 0 or np.any(grid < 0) or np.any(grid >= 1):
        raise argparse.ArgumentTypeError("betas must lie in [0, 1)")
    return grid


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", help="report path (default: stdout)")
    p.add_argument("--output-format", choices=["csv", "json"],
                   help="report format (default: from --output suffix, else csv)")


def _add_scoring(p: argparse.ArgumentParser) -> None:
    p.add_argument("--loss", type=_loss_kind, default=LossKind.ZERO_ONE,
                   help="zero_one (01) or cross_entropy (ce); default zero_one")
    p.add_argument("--csf", type=lambda t: _lookup(t, {}, CSFKind), default=CSFKind.MSP,
                   help="confidence score: " + ", ".join(c.value for c in CSFKind) + " (default msp)")
    p.add_argument("--p", type=_positive_float, default=2.0, help="norm order for max_logit_p_norm (default 2)")
    p.add_argument("--tie", choices=[t.value for t in TiePolicy], default=TiePolicy.STABLE.value,
                   help="tie policy for equal scores (default stable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aurc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="AURC estimators on a logits+labels file")
    p.add_argument("--input", "-i", required=True, help="JSONL or CSV dataset")
    p.add_argument("--format", choices=[f.value for f in DataFormat], help="input format (default: from suffix)")
    _add_scoring(p)
    p.add_argument("--weights", "--estimators", dest="estimators",
                   type=_list_of(_ESTIMATOR_ALIASES, EstimatorKind),
                   default=[EstimatorKind.PLUGIN_ALPHA_HAT, EstimatorKind.PLUGIN_ALPHA_PRIME,
                            EstimatorKind.SELE, EstimatorKind.SELE_TIMES_TWO],
                   help="comma list of alpha, alpha-prime, sele, sele2, naive")
    p.add_argument("--seed", type=int, default=42, help="recorded in the report (default 42)")
    _add_output(p)

    p = sub.add_parser("bias", help="closed-form (and Monte Carlo) bias curves of the weights")
    p.add_argument("--n", type=_int_list, default=list(DEFAULT_SIZES), help="sample sizes (default 8,...,1024)")
    p.add_argument("--betas", type=_beta_grid, default=_beta_grid("0.05:0.95:0.05"),
                   help="percentile grid, list or start:stop:step (default 0.05:0.95:0.05)")
    p.add_argument("--weights", type=_list_of(_WEIGHT_ALIASES, WeightKind),
                   default=list(WeightKind), help="comma list of alpha, alpha-prime, sele")
    p.add_argument("--mc", type=int, default=0, help="Monte Carlo repetitions per point (0 = none)")
    p.add_argument("--seed", type=int, default=42)
    _add_output(p)

    p = sub.add_parser("mse", help="closed-form (and Monte Carlo) MSE of the weights, plus the bound")
    p.add_argument("--n", type=_int_list, default=list(DEFAULT_SIZES), help="sample sizes (default 8,...,1024)")
    p.add_argument("--betas", type=_beta_grid, default=_beta_grid("0.05:0.95:0.05"),
                   help="percentile grid; MSE rows use rank round(beta*(n+1))")
    p.add_argument("--all-ranks", action="store_true", help="MSE rows for every rank 1..n instead")
    p.add_argument("--weights", type=_list_of(_WEIGHT_ALIASES, WeightKind),
                   default=[WeightKind.ALPHA_HAT, WeightKind.ALPHA_PRIME], help="alpha and/or alpha-prime")
    p.add_argument("--mc", type=int, default=0, help="Monte Carlo repetitions per point (0 = none)")
    p.add_argument("--seed", type=int, default=42)
    _add_output(p)

    p = sub.add_parser("converge", help="batch-size sweep of estimator error against a reference")
    p.add_argument("--input", "-i", help="dataset file; omit for a synthetic population")
    p.add_argument("--format", choices=[f.value for f in DataFormat])
    _add_scoring(p)
    p.add_argument("--model", choices=[m.value for m in list(LossModel)[:2]], default=LossModel.BERNOULLI_DECREASING.value,
                   help="synthetic loss model (default bernoulli_decreasing)")
    p.add_argument("--gamma", type=_positive_float, default=1.0, help="P(error) = 1 - beta**gamma")
    p.add_argument("--threshold", type=float, default=0.5, help="deterministic_threshold cut-off")
    p.add_argument("--population-size", type=int, default=2**17, help="synthetic N (default 131072)")
    p.add_argument("--sizes", type=_int_list, default=list(DEFAULT_SIZES), help="batch sizes (default 8,...,1024)")
    p.add_argument("--estimators", type=_list_of(_ESTIMATOR_ALIASES, EstimatorKind),
                   default=[EstimatorKind.PLUGIN_ALPHA_HAT, EstimatorKind.PLUGIN_ALPHA_PRIME,
                            EstimatorKind.SELE, EstimatorKind.SELE_TIMES_TWO])
    p.add_argument("--reps", type=int, default=5, help="random splits per batch size (default 5)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads (default: available cores); results do not depend on it")
    _add_output(p)

    p = sub.add_parser("counterexample", help="five-point case where AURC exceeds 2 x SELE")
    p.add_argument("--loss-value", type=float, default=1.0, help="loss of the most confident sample")
    _add_output(p)
    return parser


def _config(args: argparse.Namespace) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in ("output", "output_format", "verbose", "threads"):
            continue
        if isinstance(value, np.ndarray):
            value = value.tolist()
        elif isinstance(value, list):
            value = [getattr(v, "value", v) for v in value]
        out[key] = getattr(value, "value", value)
    return out


def _emit(report, args) -> None:
    fmt = args.output_format
    if args.output:
        if fmt is None:
            fmt = "json" if args.output.lower().endswith(".json") else "csv"
        write_report(report, args.output, fmt, config=_config(args))
        log.info("wrote %s", args.output)
    else:
        dump_report(report_payload(report, _config(args)), sys.stdout, fmt or "csv")


def _losses_and_scores(args):
    ds = load_dataset(args.input, args.format)
    losses = compute_losses(ds.logits, ds.labels, args.loss)
    scores = confidence_score(ds.logits, args.csf, args.p)
    return losses, scores


def cmd_evaluate(args) -> int:
    losses, scores = _losses_and_scores(args)
    if EstimatorKind.NAIVE_EMPIRICAL in args.estimators and losses.size > NAIVE_MAX_N:
        raise UsageError(f"naive estimator is capped at n <= {NAIVE_MAX_N}; file has {losses.size} samples")
    meta = {"loss_kind": args.loss.value, "csf_kind": args.csf.value, "seed": args.seed}
    reports = [evaluate(losses, scores, e, TiePolicy(args.tie), **meta) for e in args.estimators]
    _emit(reports, args)
    return EXIT_OK


def cmd_bias(args) -> int:
    if args.mc < 0:
        raise UsageError("--mc must be non-negative")
    curves = [bias_curve(n, args.betas, w, args.mc, args.seed) for n in args.n for w in args.weights]
    _emit(curves, args)
    return EXIT_OK


def cmd_mse(args) -> int:
    if args.mc < 0:
        raise UsageError("--mc must be non-negative")
    if WeightKind.SELE in args.weights:
        raise UsageError("closed-form MSE is available for alpha and alpha-prime only")
    curves = []
    for n in args.n:
        if args.all_ranks:
            ranks = np.arange(1, n + 1)
        else:
            ranks = np.unique([rank_for_beta(n, b) for b in args.betas])
        curves.extend(mse_curve(n, ranks, w, args.mc, args.seed) for w in args.weights)
        curves.append(bound_curve(n, args.betas))
    _emit(curves, args)
    return EXIT_OK


def cmd_converge(args) -> int:
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    kwargs = dict(sizes=args.sizes, estimators=args.estimators, reps=args.reps,
                  seed=args.seed, threads=max(1, args.threads))
    if args.input:
        losses, scores = _losses_and_scores(args)
        if max(args.sizes) > losses.size:
            raise UsageError(f"batch size {max(args.sizes)} exceeds dataset size {losses.size}")
        table = dataset_convergence(losses, scores, **kwargs)
    else:
        if args.population_size < max(args.sizes):
            raise UsageError("--population-size must be at least the largest batch size")
        pop = generate_population(args.population_size, make_rng(args.seed, 2**31), args.model,
                                  gamma=args.gamma, threshold=args.threshold, seed=args.seed)
        table = population_convergence(pop, **kwargs)
    _emit(table, args)
    return EXIT_OK


def cmd_counterexample(args) -> int:
    if args.loss_value < 0:
        raise UsageError("--loss-value must be non-negative")
    report = counterexample_demo(args.loss_value)
    if args.output:
        _emit(report, args)
    else:
        print(f"top weight H_5 - H_0     = {report.top_weight:.6f}")
        print(f"plug-in AURC (alpha_hat) = {report.plugin_alpha_hat:.6f}")
        print(f"2 x SELE                 = {report.sele_times_two:.6f}")
        verdict = "holds" if report.holds else "does not hold"
        print(f"AURC > 2 x SELE: {verdict}")
    return EXIT_OK if report.holds else EXIT_INTERNAL


COMMANDS = {
    "evaluate": cmd_evaluate,
    "bias": cmd_bias,
    "mse": cmd_mse,
    "converge": cmd_converge,
    "counterexample": cmd_counterexample,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DatasetError) as exc:
        print(f"aurc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"aurc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"aurc: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
