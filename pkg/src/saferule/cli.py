"""Command-line entry point: ``saferule {train,predict,enumerate,verify,compare-rules}``.

Exit status is 0 on success, 1 for problems with the user's input or flags
and 2 for internal failures (including a failed ``verify``).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time

import numpy as np

from . import oracle, path
from .discretize import DataError, DiscretizationSpec, discretize
from .encoding import ProblemEncoding, Task
from .model import Model, load_csv, read_table, training_metadata
from .rules import count_all_rules, format_segment, similarity
from .screening import SurvivorOverflow
from .solver import SolverConfig
from .tree import enumerate_all, enumerate_segments

log = logging.getLogger("saferule")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UsageError(Exception):
    """Bad flags or inconsistent inputs detected after argument parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _spec(text):
    try:
        return DiscretizationSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _criterion(text):
    try:
        return path.parse_criterion(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="saferule", description="Sparse linear models over hyperrectangle rules.")
    p.add_argument("--seed", type=int, default=0, help="seed for CV folds and spot checks")
    p.add_argument("--stats", action="store_true", help="log per-step screening statistics to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="fit a model along a regularization path")
    t.add_argument("csv")
    t.add_argument("--label", required=True, help="name of the label column")
    t.add_argument("--task", choices=[k.value for k in Task], default="regression")
    t.add_argument("--out", "-o", required=True, help="where to write the model file")
    t.add_argument("--categorical", action="append", default=[], metavar="COLUMN",
                   help="treat COLUMN as categorical (repeatable)")
    t.add_argument("--no-normalize", action="store_true", help="skip z-scoring features and labels")
    t.add_argument("--discretize", type=_spec, default=DiscretizationSpec("quantile", 5),
                   help="quantile:M or interval:DELTA (default quantile:5)")
    t.add_argument("--lambda", dest="lam", type=_positive_float,
                   help="fit at this lambda instead of selecting along a path")
    t.add_argument("--rho", type=float, help="fixed penalty on linear terms (default: tied to lambda)")
    t.add_argument("--path-steps", type=_positive_int, default=30)
    t.add_argument("--lambda-min-ratio", type=float, default=0.05)
    t.add_argument("--max-rule-features", type=_positive_int)
    t.add_argument("--no-rules", action="store_true", help="linear terms only")
    t.add_argument("--tol", type=_positive_float, default=1e-6, help="duality gap tolerance")
    t.add_argument("--select", type=_criterion, default=path.CrossValidation(5),
                   help="cv:K, count:N or lambda:V (default cv:5)")
    t.add_argument("--path-log", help="write one JSON line per path step to this file")

    pr = sub.add_parser("predict", help="score a CSV with a saved model")
    pr.add_argument("model")
    pr.add_argument("csv")
    pr.add_argument("--out", "-o", help="write predictions here instead of stdout")

    e = sub.add_parser("enumerate", help="stream every rule segment in tree order")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--sizes", help="comma-separated alphabet sizes, e.g. 3,3")
    src.add_argument("--data", help="CSV whose discretized columns define the tree")
    e.add_argument("--label", help="column of --data to leave out")
    e.add_argument("--discretize", type=_spec, default=DiscretizationSpec("quantile", 5))
    e.add_argument("--max-rule-features", type=_positive_int)
    e.add_argument("--count-only", action="store_true")

    v = sub.add_parser("verify", help="check the screened solver against brute force")
    v.add_argument("--instances", type=_positive_int, default=20)
    v.add_argument("--tol", type=_positive_float, default=1e-10)

    c = sub.add_parser("compare-rules", help="similarity of the rule sets of two models")
    c.add_argument("model_a")
    c.add_argument("model_b")
    return p


# --- subcommands -------------------------------------------------------------


def cmd_train(args) -> int:
    task = Task(args.task)
    data = load_csv(args.csv, args.label, task, args.categorical, not args.no_normalize)
    ds = discretize(data.X, args.discretize, data.pre.features)
    enc = ProblemEncoding(task, data.X, ds.xbar, ds.s, data.y,
                          max_features=args.max_rule_features, use_rules=not args.no_rules)
    scfg = SolverConfig(gap_tol=args.tol)
    t0 = time.perf_counter()

    if args.lam is not None:
        step = path.fit(enc, args.lam, scfg=scfg, rho=args.rho)
        result = None
        how = f"lambda:{args.lam}"
    else:
        pcfg = path.PathConfig(n_steps=args.path_steps, lambda_min_ratio=args.lambda_min_ratio,
                               rho=args.rho, log_stats=args.stats)
        result = path.run_path(enc, pcfg, scfg)
        if isinstance(args.select, path.CrossValidation):
            args.select = path.CrossValidation(args.select.folds, args.seed)
        step = path.select_model(result, args.select, enc, scfg, args.rho)
        how = _criterion_text(args.select)
        if args.path_log:
            with open(args.path_log, "w") as fh:
                result.write_jsonl(fh)
        if args.stats:
            for k, st in enumerate(result.steps):
                d = st.to_dict()
                print(f"step {k:3d}  lambda={d['lambda']:.6g}  rules={d['active_rules']}  "
                      f"survivors={d['survivors']}  visited={d['nodes_visited']}/{result.tree_size}  "
                      f"gap={d['gap']:.2e}", file=sys.stderr)

    if step.error:
        log.warning("selected step reports: %s", step.error)
    model = Model.from_fit(data, ds, step.state, training_metadata(
        step, selection=how, n_samples=enc.n, seconds=round(time.perf_counter() - t0, 3),
        lambda_max=None if result is None else result.lambda_max,
    ))
    model.save(args.out)
    print(f"wrote {args.out}: lambda={step.lam:.6g} linear={int(np.count_nonzero(model.eta))} "
          f"rules={len(model.rules)} gap={step.state.gap:.2e}")
    return EXIT_OK


def _criterion_text(c) -> str:
    if isinstance(c, path.CrossValidation):
        return f"cv:{c.folds}"
    if isinstance(c, path.ActiveRuleCount):
        return f"count:{c.k}"
    return f"lambda:{c.value}"


def cmd_predict(args) -> int:
    model = Model.load(args.model)
    table = read_table(args.csv)
    out = model.predict_table(table)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        cols = list(out)
        w.writerow(cols)
        for row in zip(*(out[c] for c in cols)):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if args.sizes:
        try:
            s = tuple(int(v) for v in args.sizes.split(","))
        except ValueError:
            raise UsageError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
        if not s or min(s) < 1:
            raise UsageError("alphabet sizes must be >= 1")
        stream = enumerate_segments(s, args.max_rule_features)
    else:
        data = load_csv(args.data, args.label)
        ds = discretize(data.X, args.discretize, data.pre.features)
        s = ds.s
        stream = (node.seg for node in enumerate_all(ds, args.max_rule_features))
    if args.count_only:
        if args.max_rule_features is None:
            print(count_all_rules(s) + 1)
        else:
            print(sum(1 for _ in stream))
        return EXIT_OK
    out = sys.stdout
    for seg in stream:
        out.write(format_segment(seg, s) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    failed = 0
    for rec in oracle.verify_suite(args.instances, args.seed, args.tol):
        coef = {None: "n/a (optimum not unique)", True: "ok", False: "MISMATCH"}[rec.coefficients_ok]
        status = "PASS" if rec.passed else "FAIL"
        failed += not rec.passed
        print(f"{status} instance {rec.index:3d} {rec.task:14s} s={rec.s} lambda={rec.lam:.4g} "
              f"safe={rec.safe} objective={rec.objective_ok} coefficients={coef} "
              f"lambda_max={rec.lambda_max_ok}")
    print(f"{args.instances - failed}/{args.instances} instances passed")
    return EXIT_OK if failed == 0 else EXIT_INTERNAL


def cmd_compare(args) -> int:
    a, b = Model.load(args.model_a), Model.load(args.model_b)
    if a.disc.s != b.disc.s:
        raise UsageError(f"models use different level alphabets {a.disc.s} and {b.disc.s}")
    if not a.rules:
        raise UsageError(f"{args.model_a} has no rules to compare")
    sim = similarity(list(a.rules), list(b.rules))
    print(f"similarity {float(sim):.6f} ({sim})")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "enumerate": cmd_enumerate,
    "verify": cmd_verify,
    "compare-rules": cmd_compare,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.stats else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DataError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"saferule: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except SurvivorOverflow as exc:
        print(f"saferule: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except BrokenPipeError:
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        log.debug("internal error", exc_info=True)
        print(f"saferule: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
