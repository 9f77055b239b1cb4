"""``mllc`` command line: train, evaluate, verify-bounds, bench-grad, precompute.

Exit codes: 0 success, 1 usage, 2 unreadable or inconsistent input,
3 consistency-bound violation, 4 divergence or non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time

import numpy as np

from .errors import DimensionError, MLLCError, ParseError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_VIOLATION = 3
EXIT_NUMERIC = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x: float) -> str:
    return "%.17g" % x


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _targets(values):
    from .labels import parse_targets

    out = []
    for v in values:
        out += parse_targets(v)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    from .labels import parse_target
    from .surrogates import parse_surrogate
    from .trainer import TrainConfig, load_dataset, save_model, train

    target = parse_target(args.target)
    spec = parse_surrogate(args.surrogate, target)
    cfg = TrainConfig(spec, lr=args.lr, schedule=args.schedule, decay=args.decay, epochs=args.epochs,
                      seed=args.seed, grad=args.grad, use_wfa=args.wfa)
    from .trainer import resolve_grad_mode

    resolve_grad_mode(cfg, args.l)
    data = load_dataset(args.data, args.l)
    model, history = train(data, cfg)
    for epoch, loss in enumerate(history, 1):
        print(f"epoch={epoch} loss={_fmt(loss)}")
    save_model(model, args.model_out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .trainer import evaluate, load_dataset, load_model

    targets = _targets(args.targets)
    model = load_model(args.model)
    data = load_dataset(args.data, model.l)
    if data.d > model.d:
        raise DimensionError(f"data has feature dimension {data.d}, model has {model.d}")
    report = evaluate(model, data, targets)
    for t in targets:
        print(f"target={t.name} mean={_fmt(report.means[t.name])}")
    return EXIT_OK


def _surrogate_tag(args) -> str:
    tag = args.surrogate
    if ":" in tag or tag == "ml-logistic":
        return tag
    if tag == "comp-sum":
        psi = args.psi or "log"
        if psi == "gce" and args.q is not None:
            psi = f"gce:{args.q:g}"
        return f"comp-sum:{psi}"
    if tag in ("constrained", "binary-relevance"):
        phi = args.phi or ("exp" if tag == "constrained" else "logistic")
        if phi == "rho-margin" and args.rho is not None:
            phi = f"rho-margin:{args.rho:g}"
        return f"{tag}:{phi}"
    return tag


def cmd_verify_bounds(args) -> int:
    from .lab import BoundSpec, MinimizerOptions, SweepConfig, sweep
    from .surrogates import BinaryRelevance, parse_surrogate

    tag = _surrogate_tag(args)
    if tag.startswith("binary-relevance"):
        bounds = [BoundSpec(parse_surrogate(tag), gamma_scale=args.gamma_scale)]
    else:
        bounds = [BoundSpec(parse_surrogate(tag, t), gamma_scale=args.gamma_scale) for t in _targets(args.target)]
    cfg = SweepConfig(
        bounds=bounds,
        l_list=args.l_list,
        trials=args.trials,
        seed=args.seed,
        tol=args.tol,
        score_scale=args.score_scale,
        concentration=args.concentration,
        minimizer=MinimizerOptions(restarts=args.restarts, seed=args.seed),
        out=args.out,
    )
    s = sweep(cfg)
    print(f"pairs={s.pairs} violations={s.violations} flagged={s.flagged} nonconverged={s.nonconverged}")
    if s.violations:
        return EXIT_VIOLATION
    if s.convex_nonconvergence_rate > 0.01:
        return EXIT_NUMERIC
    return EXIT_OK


def bench_fast_gradient(l_list, nnz=256, trials=100, seed=0, backend="auto"):
    """Median and 90th-percentile nanoseconds of one fast gradient per ``l``."""
    from . import kernels
    from .fastgrad import precompute_sums
    from .labels import Hamming

    kern = kernels.get_backend(backend)
    rows = []
    for l in l_list:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, l])))
        d = 2 * nnz
        W = 0.01 * rng.standard_normal((l, d))
        idx = np.sort(rng.choice(d, size=nnz, replace=False)).astype(np.int64)
        vals = rng.standard_normal(nnz)
        pre = precompute_sums(Hamming(), rng.choice(np.array([-1, 1], dtype=np.int8), size=l), "closed_form")
        kern.mllog_sparse_grad(W, idx, vals, pre.l1, pre.l2, False)
        times = np.empty(trials)
        for k in range(trials):
            t0 = time.perf_counter_ns()
            kern.mllog_sparse_grad(W, idx, vals, pre.l1, pre.l2, False)
            times[k] = time.perf_counter_ns() - t0
        rows.append((l, float(np.median(times)), float(np.percentile(times, 90))))
    return rows


def loglog_slope(rows):
    if len(rows) < 2:
        return None
    x = np.log([r[0] for r in rows])
    y = np.log([r[1] for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def cmd_bench_grad(args) -> int:
    rows = bench_fast_gradient(args.l_list, args.nnz, args.trials, args.seed, args.backend)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["l", "median_ns", "p90_ns"])
        for l, med, p90 in rows:
            w.writerow([l, _fmt(med), _fmt(p90)])
    for l, med, p90 in rows:
        print(f"l={l} median_ns={_fmt(med)} p90_ns={_fmt(p90)}")
    slope = loglog_slope(rows)
    if slope is not None:
        print(f"slope={slope:.4f}")
    return EXIT_OK


def cmd_precompute(args) -> int:
    from .fastgrad import precompute_sums
    from .labels import LabelVector, parse_target

    target = parse_target(args.target)
    pre = precompute_sums(target, LabelVector(args.l, args.anchor), args.mode)
    print(f"L1={_fmt(pre.l1)}")
    print("L2=" + ",".join(_fmt(v) for v in pre.l2))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mllc", description="Multi-label surrogate losses: training and consistency checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a linear model with SGD")
    t.add_argument("--data", required=True)
    t.add_argument("--l", type=int, required=True)
    t.add_argument("--surrogate", default="ml-logistic")
    t.add_argument("--target", default="hamming")
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--schedule", choices=["constant", "inverse"], default="constant")
    t.add_argument("--decay", type=float, default=0.0)
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--grad", choices=["auto", "fast", "naive"], default="auto")
    t.add_argument("--wfa", action="store_true", help="marginals by forward-backward instead of tanh")
    t.add_argument("--model-out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="mean target losses of a model on a dataset")
    e.add_argument("--data", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--targets", nargs="+", default=["hamming"])
    e.set_defaults(func=cmd_evaluate)

    v = sub.add_parser("verify-bounds", help="check a consistency bound on random conditional draws")
    v.add_argument("--surrogate", default="ml-logistic",
                   help="ml-logistic, comp-sum, constrained, binary-relevance, or a full tag")
    v.add_argument("--psi", help="log, sum-exp, gce[:q], mae")
    v.add_argument("--phi", help="exp, sq-hinge, hinge, rho-margin[:rho], logistic")
    v.add_argument("--q", type=float)
    v.add_argument("--rho", type=float)
    v.add_argument("--target", nargs="+", default=["hamming"])
    v.add_argument("--l-list", type=_int_list, default=[1, 2, 3])
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-6)
    v.add_argument("--gamma-scale", type=float, default=1.0)
    v.add_argument("--score-scale", type=float, default=2.0)
    v.add_argument("--concentration", type=float, default=1.0)
    v.add_argument("--restarts", type=int, default=8)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_verify_bounds)

    b = sub.add_parser("bench-grad", help="time the fast gradient across label counts")
    b.add_argument("--l-list", type=_int_list, default=[64, 128, 256, 512, 1024])
    b.add_argument("--nnz", type=int, default=256)
    b.add_argument("--trials", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--backend", choices=["auto", "python", "compiled"], default="auto")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench_grad)

    c = sub.add_parser("precompute", help="print the loss sums for one anchor labeling")
    c.add_argument("--target", required=True)
    c.add_argument("--l", type=int, required=True)
    c.add_argument("--anchor", type=lambda s: int(s, 0), required=True, help="bitmask, e.g. 0b101")
    c.add_argument("--mode", choices=["auto", "closed_form", "brute"], default="auto")
    c.set_defaults(func=cmd_precompute)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "trials", 1) < 0 or getattr(args, "epochs", 1) < 1:
            parser.error("trials must be >= 0 and epochs >= 1")
        if args.command == "bench-grad" and (args.trials < 1 or args.nnz < 1):
            parser.error("bench-grad needs trials >= 1 and nnz >= 1")
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except MLLCError as exc:
        print(f"mllc: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"mllc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
