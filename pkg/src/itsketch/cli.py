"""Experiment runner CLI.

Subcommands reproduce the stability experiments as CSV files (no in-process
plotting): solve, convergence, bad, compare, dims, kernel, sparsebench.
Exit codes: 0 ok, 1 solver divergence, 2 I/O or parse error, 64 bad flags.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .embed import choose_dim, default_distortion
from .linalg import householder_qr_econ, tri_solve_upper
from .problems import (
    CsvParseError,
    KernelConfig,
    gen_randsvd,
    gen_sparse,
    kernel_problem,
    load_csv,
    save_csv,
)
from .solvers import (
    SolverConfig,
    bad_variant,
    iterative_sketching,
    sketch_and_precondition,
    theoretical_bound_curve,
)

SCHEMA_LINE = "# schema=v1"

EXIT_OK = 0
EXIT_DIVERGED = 1
EXIT_IO = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse defaults to exit 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def qr_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Householder-QR reference solution (backward stable baseline)."""
    qr = householder_qr_econ(a)
    return tri_solve_upper(qr.r, qr.q.T @ b)


def _write_csv(path: str, header: str, rows: list[list]) -> None:
    rows = sorted(rows, key=lambda r: [str(v) for v in r])
    with open(path, "w") as f:
        f.write(SCHEMA_LINE + "\n")
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _thread_count() -> int:
    env = os.environ.get("RLS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map_trials(fn, items: list):
    workers = min(_thread_count(), len(items)) if items else 1
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _resolve_d(args, n: int, variant: str = "basic") -> int:
    if args.d == "auto":
        return choose_dim(args.m, n, args.accuracy, variant)
    return int(args.d)


def _solver_cfg(args, n: int, variant: str | None = None, seed: int | None = None,
                init: str = "sketch_and_solve") -> SolverConfig:
    variant = variant or args.variant
    return SolverConfig(
        d=_resolve_d(args, n, variant),
        zeta=args.zeta,
        variant=variant,
        init=init,
        max_iters=args.max_iters,
        rng_seed=args.seed[0] if seed is None else seed,
        track_be=(args.metrics == "full"),
    )


def cmd_solve(args) -> int:
    prob = gen_randsvd(args.m, args.n, args.cond, args.resnorm, args.seed[0])
    cfg = _solver_cfg(args, args.n)
    res = iterative_sketching(prob.a, prob.b, cfg, prob.truth)
    save_csv(args.out, ["x"], np.asarray(res.solution)[:, None])
    t = res.trace
    summary_path = args.summary or (args.out + ".summary.csv")
    fe = t.fe[-1] if t.fe else float("nan")
    re = t.re[-1] if t.re else float("nan")
    be = t.be[-1] if t.be else float("nan")
    _write_csv(
        summary_path,
        "iters,stop_reason,fe,re,be",
        [[res.iterations, t.stop_reason, fe, re, be]],
    )
    return EXIT_DIVERGED if t.stop_reason == "diverged" else EXIT_OK


def _trace_rows(method: str, kappa: float, beta: float, res, bounds=None) -> list[list]:
    t = res.trace
    rows = []
    for i in range(len(t.iterates)):
        fe = t.fe[i] if t.fe else float("nan")
        re = t.re[i] if t.re else float("nan")
        be = t.be[i] if i < len(t.be) else float("nan")
        chg = t.residual_changes[i - 1] if i >= 1 else float("nan")
        bf, br = (float("nan"), float("nan"))
        if bounds is not None and i < len(bounds[0]):
            bf, br = float(bounds[0][i]), float(bounds[1][i])
        rows.append([method, kappa, beta, i, fe, re, be, chg, bf, br])
    return rows


def cmd_convergence(args) -> int:
    rows: list[list] = []

    def one(task):
        kappa, beta, seed = task
        prob = gen_randsvd(args.m, args.n, kappa, beta, seed)
        cfg = _solver_cfg(args, args.n, seed=seed)
        res = iterative_sketching(prob.a, prob.b, cfg, prob.truth)
        eps = default_distortion(args.n, cfg.d)
        bounds = None
        if args.variant == "basic" and eps < 1 - 1 / math.sqrt(2):
            bounds = theoretical_bound_curve(
                "basic", eps, prob.truth.kappa, 1.0, prob.truth.beta, len(res.trace.iterates)
            )
            # bounds are absolute; traces are relative
            bounds = (bounds[0] / np.linalg.norm(prob.truth.x),
                      bounds[1] / max(prob.truth.beta, np.finfo(float).tiny))
        out = _trace_rows(f"is_{args.variant}", kappa, beta, res, bounds)
        xqr = qr_solve(prob.a, prob.b)
        fe = float(np.linalg.norm(prob.truth.x - xqr))
        rqr = prob.b - prob.a @ xqr
        re = float(np.linalg.norm(prob.truth.r - rqr) / max(prob.truth.beta, np.finfo(float).tiny))
        be = float("nan")
        if args.metrics == "full":
            from .metrics import backward_error

            be = backward_error(prob.a, prob.b, xqr)
        out.append(["householder_qr", kappa, beta, -1, fe, re, be,
                    float("nan"), float("nan"), float("nan")])
        return out

    tasks = [(k, r, s) for k in args.cond for r in args.resnorm for s in args.seed]
    for chunk in _map_trials(one, tasks):
        rows.extend(chunk)
    _write_csv(args.out, "method,kappa,resnorm,iter,fe,re,be,res_change,bound_fe,bound_re", rows)
    return EXIT_OK


def cmd_bad(args) -> int:
    prob = gen_randsvd(args.m, args.n, args.cond, args.resnorm, args.seed[0])
    rows: list[list] = []
    cfg = _solver_cfg(args, args.n)
    stable = iterative_sketching(prob.a, prob.b, cfg, prob.truth)
    rows += _trace_rows("stable", args.cond, args.resnorm, stable)
    diverged = False
    for kind in ("bad_matrix", "bad_residual", "bad_init"):
        res = bad_variant(prob.a, prob.b, cfg, kind, prob.truth)
        diverged |= res.trace.stop_reason == "diverged"
        rows += _trace_rows(kind, args.cond, args.resnorm, res)
    _write_csv(args.out, "method,kappa,resnorm,iter,fe,re,be,res_change,bound_fe,bound_re", rows)
    return EXIT_OK  # divergence of the bad baselines is the expected result


def cmd_compare(args) -> int:
    prob = gen_randsvd(args.m, args.n, args.cond, args.resnorm, args.seed[0])
    rows: list[list] = []
    for variant in ("basic", "damped", "momentum"):
        cfg = _solver_cfg(args, args.n, variant=variant)
        res = iterative_sketching(prob.a, prob.b, cfg, prob.truth)
        rows += _trace_rows(f"is_{variant}", args.cond, args.resnorm, res)
    for init in ("zero", "sketch_and_solve"):
        cfg = _solver_cfg(args, args.n, variant="basic", init=init)
        res = sketch_and_precondition(prob.a, prob.b, cfg, prob.truth)
        rows += _trace_rows(f"sp_{init}", args.cond, args.resnorm, res)
    _write_csv(args.out, "method,kappa,resnorm,iter,fe,re,be,res_change,bound_fe,bound_re", rows)
    return EXIT_OK


def cmd_dims(args) -> int:
    rows = []
    for variant in ("basic", "damped", "momentum"):
        d = choose_dim(args.m, args.n, args.accuracy, variant)
        rows.append([variant, args.m, args.n, args.accuracy, d])
    _write_csv(args.out, "variant,m,n,accuracy,d", rows)
    return EXIT_OK


def _synthetic_mixture_csv(path: str, rows: int, seed: int) -> None:
    """Gaussian-mixture regression data: 4 features, 3 clusters, noisy target."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=3.0, size=(3, 4))
    labels = rng.integers(0, 3, size=rows)
    pts = centers[labels] + rng.standard_normal((rows, 4))
    target = np.sin(pts[:, 0]) + 0.5 * pts[:, 1] + 0.1 * rng.standard_normal(rows)
    save_csv(path, ["f0", "f1", "f2", "f3", "y"], np.column_stack([pts, target]))


def cmd_kernel(args) -> int:
    if args.data is None:
        data_path = args.out + ".data.csv"
        _synthetic_mixture_csv(data_path, args.synthetic_rows, args.seed[0])
    else:
        data_path = args.data
    points, targets = load_csv(data_path, args.target)
    rows = []
    for n in args.centers:
        kc = KernelConfig(bandwidth=args.bandwidth, subset_size=n, seed=args.seed[0])
        prob = kernel_problem(points, targets, kc)
        if args.d == "auto":
            d = choose_dim(points.shape[0], n, args.accuracy, args.variant)
        else:
            d = int(args.d)
        cfg = SolverConfig(
            d=d, zeta=args.zeta, variant=args.variant,
            max_iters=args.max_iters, rng_seed=args.seed[0],
        )
        times_is, times_qr = [], []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            res = iterative_sketching(prob.a, prob.b, cfg)
            times_is.append(1e3 * (time.perf_counter() - t0))
            t0 = time.perf_counter()
            xqr = qr_solve(prob.a, prob.b)
            times_qr.append(1e3 * (time.perf_counter() - t0))
        rel_diff = float(
            np.linalg.norm(res.solution - xqr) / max(np.linalg.norm(xqr), np.finfo(float).tiny)
        )
        rows.append([n, "iterative_sketching", float(np.median(times_is)),
                     res.iterations, rel_diff])
        rows.append([n, "householder_qr", float(np.median(times_qr)), 0, 0.0])
    _write_csv(args.out, "n,method,time_ms,iters,rel_diff_vs_qr", rows)
    return EXIT_OK


def cmd_sparsebench(args) -> int:
    rows = []
    for m in args.rows:
        prob = gen_sparse(m, args.n, args.seed[0])
        d = 30 * args.n if args.d == "auto" else int(args.d)
        cfg = SolverConfig(d=d, zeta=args.zeta, max_iters=args.max_iters,
                           rng_seed=args.seed[0])
        times = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            res = iterative_sketching(prob.a, prob.b, cfg)
            times.append(1e3 * (time.perf_counter() - t0))
        resnorm = float(np.linalg.norm(prob.b - prob.a @ res.solution))
        rows.append([m, args.n, d, float(np.median(times)), res.iterations, resnorm])
    _write_csv(args.out, "m,n,d,time_ms,iters,final_resnorm", rows)
    return EXIT_OK


def _add_problem_flags(p: _Parser, need_cond: bool = True) -> None:
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    if need_cond:
        p.add_argument("--cond", type=float, required=True)
        p.add_argument("--resnorm", type=float, required=True)


def _add_solver_flags(p: _Parser) -> None:
    p.add_argument("--d", default="auto", help='embedding dimension or "auto"')
    p.add_argument("--zeta", type=int, default=8)
    p.add_argument("--variant", choices=["basic", "damped", "momentum"], default="basic")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--seed", type=int, nargs="+", default=[0])
    p.add_argument("--accuracy", type=float, default=2.0**-53,
                   help="accuracy level fed to the dimension formula when --d auto")
    p.add_argument("--metrics", choices=["cheap", "full"], default="cheap")
    p.add_argument("--out", required=True)


def build_parser() -> _Parser:
    parser = _Parser(prog="itsketch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one generated instance")
    _add_problem_flags(p)
    _add_solver_flags(p)
    p.add_argument("--summary", default=None)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("convergence", help="per-iteration error traces vs QR reference")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--cond", type=float, nargs="+", required=True)
    p.add_argument("--resnorm", type=float, nargs="+", required=True)
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_convergence)

    p = sub.add_parser("bad", help="stable implementation vs the three bad baselines")
    _add_problem_flags(p)
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_bad)

    p = sub.add_parser("compare", help="iterative sketching variants vs sketch-and-precondition")
    _add_problem_flags(p)
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("dims", help="embedding-dimension table")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--accuracy", type=float, default=2.0**-53)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_dims)

    p = sub.add_parser("kernel", help="kernel regression benchmark (CSV data or synthetic)")
    p.add_argument("--data", default=None, help="numeric CSV; synthetic data generated if omitted")
    p.add_argument("--target", default="y")
    p.add_argument("--synthetic-rows", type=int, default=10_000)
    p.add_argument("--bandwidth", type=float, default=4.0)
    p.add_argument("--centers", type=int, nargs="+", default=[50])
    p.add_argument("--repeats", type=int, default=3)
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_kernel)

    p = sub.add_parser("sparsebench", help="sparse problem timing scan")
    p.add_argument("--rows", type=int, nargs="+", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--repeats", type=int, default=3)
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_sparsebench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CsvParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
