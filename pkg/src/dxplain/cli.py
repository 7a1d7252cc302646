"""Command-line front end.

Explanation records go to stdout as single JSON lines with no timing
fields, so identical runs produce identical bytes; wall-clock timing
goes to stderr.  Exit codes: 0 on success, 1 on any error, 2 when no
adversarial example exists within the requested distance.
"""

import argparse
import contextlib
import json
import sys

from .core import (ExplanationError, ExplanationProblem, NoAdvExample, Norm,
                   is_minimal_axp, is_minimal_cxp, validate_epsilon)
from .enumeration import ffa_scores, marco_enumerate
from .explain import (deletion_cxp, dichotomic_cxp, extract_axp,
                      order_features, swift_cxp)
from .mincxp import smallest_cxp
from .models import load_instance, load_model
from .oracles import ExhaustiveOracle, LatencyOracle, auto_oracle

NO_CXP_MESSAGE = "epsilon too small: no d-CXp; d-AXp = {}"


def _emit(record):
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")


def _note(text):
    sys.stderr.write(text + "\n")


def _add_common(sp):
    sp.add_argument("--model", required=True, help="model JSON document")
    sp.add_argument("--instance", required=True, help="instance JSON document")
    sp.add_argument("--epsilon", required=True, type=float,
                    help="distance bound (integer for l0)")
    sp.add_argument("--norm", required=True,
                    choices=["l0", "l1", "l2", "linf"])
    sp.add_argument("--oracle", default="auto",
                    help="auto | exhaustive | linear | external:<cmd>")
    sp.add_argument("--order", default="natural",
                    help="natural | sensitivity | file=<path to JSON list>")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--no-verify", action="store_true",
                    help="skip the exhaustive minimality check")


def _add_search(sp):
    sp.add_argument("--algo", default="dicho",
                    choices=["linear", "dicho", "swift"])
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--delta", type=float, default=0.9)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dxplain",
        description="distance-restricted explanations for classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("cxp", help="one subset-minimal contrastive explanation")
    _add_common(sp)
    _add_search(sp)

    sp = sub.add_parser("axp", help="one subset-minimal abductive explanation")
    _add_common(sp)

    sp = sub.add_parser("enumerate", help="all explanations of both kinds")
    _add_common(sp)
    sp.add_argument("--limit", default=None,
                    help="stop early: N, cxp:N, or axp:N")

    sp = sub.add_parser("min-cxp", help="globally smallest contrastive explanation")
    _add_common(sp)

    sp = sub.add_parser("ffa", help="feature attribution over all CXps")
    _add_common(sp)
    sp.add_argument("--shape", default=None,
                    help="HxW heatmap layout, row-major from feature 1")
    sp.add_argument("--output", default=None, help="write a P2 PGM heatmap here")

    sp = sub.add_parser("bench", help="dichotomic vs parallel search timings")
    _add_common(sp)
    sp.add_argument("--workers", type=int, default=16)
    sp.add_argument("--delta", type=float, default=0.9)
    sp.add_argument("--delay", type=float, default=0.05,
                    help="simulated per-call oracle latency in seconds")
    return parser


def _load_problem(args):
    model, space = load_model(args.model)
    instance = load_instance(args.instance)
    problem = ExplanationProblem(model, space, instance)
    norm = Norm.parse(args.norm)
    epsilon = validate_epsilon(args.epsilon, norm)
    return problem, epsilon, norm


@contextlib.contextmanager
def _oracle_for(problem, spec):
    # external oracles own a child process; close it when the command ends
    oracle = auto_oracle(problem, spec)
    try:
        yield oracle
    finally:
        oracle.close()


def _resolve_order(problem, args, epsilon, norm):
    spec = args.order
    if spec == "natural":
        return order_features(problem, "natural")
    if spec == "sensitivity":
        return order_features(problem, "sensitivity", epsilon, norm)
    if spec.startswith("file="):
        with open(spec[len("file="):], encoding="utf-8") as fh:
            perm = json.load(fh)
        return order_features(problem, "file", permutation=perm)
    raise ValueError("unknown order %r" % (spec,))


def _verify(problem, explanation, args):
    """Recheck minimality against a fresh exhaustive oracle when possible."""
    if args.no_verify or not problem.space.all_finite:
        return None
    checker = is_minimal_cxp if explanation.kind == "cxp" else is_minimal_axp
    with ExhaustiveOracle(problem).session() as session:
        return checker(problem, session, explanation.features,
                       explanation.epsilon, explanation.norm)


def _report(explanation, args, extra=None):
    record = {
        "kind": explanation.kind,
        "features": list(explanation.features),
        "epsilon": explanation.epsilon,
        "norm": explanation.norm.value,
        "calls": explanation.stats.calls,
    }
    if extra:
        record.update(extra)
    _emit(record)
    _note("elapsed %.3fs, %d oracle calls"
          % (explanation.stats.elapsed, explanation.stats.calls))


def _finish_explanation(problem, explanation, args, extra=None):
    verified = _verify(problem, explanation, args)
    record_extra = dict(extra or {})
    if verified is not None:
        record_extra["verified"] = verified
    _report(explanation, args, record_extra)
    if verified is False:
        _note("error: result failed the exhaustive minimality check")
        return 1
    return 0


def _cmd_cxp(args):
    problem, epsilon, norm = _load_problem(args)
    order = _resolve_order(problem, args, epsilon, norm)
    with _oracle_for(problem, args.oracle) as oracle:
        if args.algo == "linear":
            explanation = deletion_cxp(problem, oracle, epsilon, norm, order)
        elif args.algo == "dicho":
            explanation = dichotomic_cxp(problem, oracle, epsilon, norm, order)
        else:
            explanation = swift_cxp(problem, oracle, epsilon, norm, order,
                                    workers=args.workers, delta=args.delta,
                                    seed=args.seed)
    return _finish_explanation(problem, explanation, args,
                               {"algo": args.algo})


def _cmd_axp(args):
    problem, epsilon, norm = _load_problem(args)
    order = _resolve_order(problem, args, epsilon, norm)
    with _oracle_for(problem, args.oracle) as oracle:
        explanation = extract_axp(problem, oracle, epsilon, norm, order=order)
    return _finish_explanation(problem, explanation, args)


def _parse_limit(spec):
    if spec is None:
        return None, None, None
    if spec.startswith("cxp:"):
        return None, int(spec[4:]), None
    if spec.startswith("axp:"):
        return None, None, int(spec[4:])
    return int(spec), None, None


def _cmd_enumerate(args):
    problem, epsilon, norm = _load_problem(args)
    order = _resolve_order(problem, args, epsilon, norm)
    limit, cxp_limit, axp_limit = _parse_limit(args.limit)
    with _oracle_for(problem, args.oracle) as oracle:
        sets = marco_enumerate(
            problem, oracle, epsilon, norm, limit=limit, cxp_limit=cxp_limit,
            axp_limit=axp_limit, order=order,
            callback=lambda kind, fs: _emit({"kind": kind, "features": list(fs)}))
    _emit({"kind": "summary", "axps": len(sets.axps), "cxps": len(sets.cxps),
           "complete": sets.complete, "calls": sets.stats.calls})
    _note("elapsed %.3fs, %d oracle calls"
          % (sets.stats.elapsed, sets.stats.calls))
    return 0


def _cmd_min_cxp(args):
    problem, epsilon, norm = _load_problem(args)
    order = _resolve_order(problem, args, epsilon, norm)
    with _oracle_for(problem, args.oracle) as oracle:
        explanation, cert = smallest_cxp(problem, oracle, epsilon, norm, order)
    return _finish_explanation(problem, explanation, args, {
        "size": len(explanation.features),
        "lower_bound": cert.lower_bound,
        "iterations": cert.iterations,
    })


def _parse_shape(spec, m):
    try:
        h, w = (int(part) for part in spec.lower().split("x"))
    except ValueError:
        raise ValueError("shape must look like 28x28") from None
    if h < 1 or w < 1 or h * w != m:
        raise ValueError("shape %dx%d does not cover %d features" % (h, w, m))
    return h, w


def _write_pgm(path, scores, shape):
    h, w = shape
    pixels = [int(255 * s + 0.5) for s in scores]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("P2\n%d %d\n255\n" % (w, h))
        for r in range(h):
            fh.write(" ".join(str(p) for p in pixels[r * w:(r + 1) * w]) + "\n")


def _cmd_ffa(args):
    problem, epsilon, norm = _load_problem(args)
    order = _resolve_order(problem, args, epsilon, norm)
    with _oracle_for(problem, args.oracle) as oracle:
        sets = marco_enumerate(problem, oracle, epsilon, norm, order=order)
    if not sets.cxps:
        raise NoAdvExample(epsilon, norm)
    scores = ffa_scores(sets.cxps, problem.m)
    sys.stdout.write("feature,score\n")
    for i, score in enumerate(scores, start=1):
        sys.stdout.write("%d,%r\n" % (i, score))
    if args.output is not None:
        if args.shape is None:
            raise ValueError("--output needs --shape")
        _write_pgm(args.output, scores, _parse_shape(args.shape, problem.m))
    _note("elapsed %.3fs, %d oracle calls over %d CXps"
          % (sets.stats.elapsed, sets.stats.calls, len(sets.cxps)))
    return 0


def _cmd_bench(args):
    problem, epsilon, norm = _load_problem(args)
    order = _resolve_order(problem, args, epsilon, norm)
    with _oracle_for(problem, args.oracle) as inner:
        slow = LatencyOracle(inner, args.delay)
        dicho = dichotomic_cxp(problem, slow, epsilon, norm, order)
        swift = swift_cxp(problem, slow, epsilon, norm, order,
                          workers=args.workers, delta=args.delta, seed=args.seed)
    _emit({"kind": "bench",
           "dicho": {"features": list(dicho.features),
                     "calls": dicho.stats.calls},
           "swift": {"features": list(swift.features),
                     "calls": swift.stats.calls},
           "identical": list(dicho.features) == list(swift.features)})
    _note("dicho %.3fs (%d calls), swift %.3fs (%d calls, %d workers), speedup %.2fx"
          % (dicho.stats.elapsed, dicho.stats.calls, swift.stats.elapsed,
             swift.stats.calls, args.workers,
             dicho.stats.elapsed / max(swift.stats.elapsed, 1e-9)))
    return 0


_COMMANDS = {
    "cxp": _cmd_cxp,
    "axp": _cmd_axp,
    "enumerate": _cmd_enumerate,
    "min-cxp": _cmd_min_cxp,
    "ffa": _cmd_ffa,
    "bench": _cmd_bench,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for "no CXp"
        return 0 if not exc.code else 1
    try:
        return _COMMANDS[args.command](args)
    except NoAdvExample:
        sys.stdout.write(NO_CXP_MESSAGE + "\n")
        return 2
    except (ExplanationError, ValueError, OSError) as exc:
        _note("error: %s" % (exc,))
        return 1


def console():
    return main()


if __name__ == "__main__":
    sys.exit(console())
