"""Batch command-line front end.

Subcommands: ``gen`` (instance generation), ``solve`` (single solve with
a JSON report), ``selftest`` (statistical property suites), ``bench``
(method/instance sweeps to CSV).  Human logs go to stderr; ``solve``
prints nothing on stdout except the report path.  Exit codes: 0 success,
2 validation error, 3 solver failure (the failing seed is recorded in
the report).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io as mio
from .apps import solve_matrix_game, solve_meb, solve_smooth_max, subgradient_baseline
from .errors import (
    GradientCallbackFailed,
    InvalidParams,
    IterationCapExceeded,
    MaxminError,
    NormBoundViolated,
    RejectionStall,
)
from .geometry import Kind, ball_setup, simplex_setup
from .problems import MatrixGameInstance, MebInstance
from .selftests import run_selftest

log = logging.getLogger("maxmin")

_SOLVER_FAILURES = (RejectionStall, IterationCapExceeded, GradientCallbackFailed)


def _gen_payload(kind: str, n: int, d: int, setup: str, seed: int) -> tuple[str, np.ndarray]:
    rng = np.random.Generator(np.random.Philox(seed))
    if kind == "game":
        a = rng.standard_normal((d, n))
        if setup == "l1l1":
            a /= np.max(np.abs(a))
            file_kind = "game_l1l1"
        else:
            a /= np.linalg.norm(a, axis=0, keepdims=True)
            file_kind = "game_l2l1"
        return file_kind, a.T  # rows are the columns a_i
    if kind == "meb":
        pts = rng.standard_normal((n, d))
        pts -= pts[0]
        nrm = float(np.max(np.linalg.norm(pts, axis=1)))
        if nrm > 0.0:
            pts /= nrm
        return "meb", pts
    if kind == "quadratics":
        centers = rng.standard_normal((n, d))
        centers *= 0.9 / max(1.0, float(np.max(np.linalg.norm(centers, axis=1))))
        offsets = rng.random(n) * 0.1
        return "quadratics", np.column_stack([centers, offsets])
    raise InvalidParams(f"unknown generator kind {kind!r}")


def cmd_gen(args) -> int:
    file_kind, rows = _gen_payload(args.kind, args.n, args.d, args.setup, args.seed)
    if args.binary:
        mio.save_instance_binary(args.out, file_kind, rows)
    else:
        mio.save_instance_text(args.out, file_kind, rows)
    log.info("wrote %s instance (%d x %d) to %s", file_kind, *rows.shape, args.out)
    print(args.out)
    return 0


def _report_base(args, seed: int) -> dict:
    return {
        "config": {
            "command": "solve",
            "in": str(args.infile),
            "eps": args.eps,
            "seed": seed,
            "profile": args.profile,
            "setup": args.setup,
        },
        "seed": seed,
    }


def cmd_solve(args) -> int:
    kind, rows = mio.load_instance(args.infile)
    doc = _report_base(args, args.seed)
    t0 = time.perf_counter()
    try:
        if kind.startswith("game"):
            inst = MatrixGameInstance(rows.T, kind.removeprefix("game_"))
            x, report = solve_matrix_game(inst, args.eps, seed=args.seed, profile=args.profile)
            doc["result"] = {
                "value": report.f_max_value,
                "gap": report.extras["gap"],
                "point": x.tolist(),
            }
        elif kind == "meb":
            center, radius, report = solve_meb(
                MebInstance(rows), args.eps, seed=args.seed, profile=args.profile
            )
            doc["result"] = {"center": center.tolist(), "radius": radius}
        elif kind == "quadratics":
            problem = mio.instance_from_payload(kind, rows)
            report = solve_smooth_max(
                problem, args.eps, seed=args.seed, profile=args.profile, kind=Kind.BALL
            )
            doc["result"] = {"value": report.f_max_value, "point": report.x.tolist()}
        else:
            raise InvalidParams(f"cannot solve instances of kind {kind!r}")
    except _SOLVER_FAILURES as exc:
        doc["status"] = "failed"
        doc["error"] = f"{type(exc).__name__}: {exc}"
        doc["wall_time"] = time.perf_counter() - t0
        mio.write_report(args.out, doc)
        log.error("solver failed (seed %d): %s", args.seed, exc)
        print(args.out)
        return 3

    doc["status"] = "ok"
    doc["counters"] = report.counters_dict()
    doc["wall_time"] = time.perf_counter() - t0
    doc["t_eval"] = report.t_eval
    doc["t_md"] = report.t_md
    mio.write_report(args.out, doc)
    print(args.out)
    return 0


def cmd_selftest(args) -> int:
    rows = []
    ok = True
    for which in args.which.split(","):
        results = run_selftest(which.strip(), seed=args.seed, scale=args.scale)
        for res in results:
            print(res.row(), file=sys.stderr)
            rows.append(
                {"name": res.name, "passed": res.passed, "observed": res.observed,
                 "bound": res.bound}
            )
            ok = ok and res.passed
    if args.out:
        Path(args.out).write_text(json.dumps({"checks": rows, "seed": args.seed}, indent=1))
        print(args.out)
    return 0 if ok else 1


def _bench_cell(kind, rows, method, eps, seed, profile, r_value):
    t0 = time.perf_counter()
    gap = float("nan")
    evals = 0
    if kind.startswith("game"):
        inst = MatrixGameInstance(rows.T, kind.removeprefix("game_"))
        if method == "proposed":
            if r_value is None:
                _, rep = solve_matrix_game(inst, eps, seed=seed, profile=profile)
            else:
                rep = solve_smooth_max(
                    inst.problem(), eps, seed=seed, profile=profile,
                    kind=Kind.BALL if inst.is_ball else Kind.TRUNCATED_SIMPLEX,
                    nu=None if inst.is_ball else eps / (4.0 * inst.d), r=r_value,
                )
            value = rep.f_max_value
            gap = rep.extras.get("gap", float("nan"))
            evals = rep.func_evals + rep.grad_evals
            iters = rep.outer_iterations
        else:
            problem = inst.problem()
            setup = ball_setup(inst.d) if inst.is_ball else simplex_setup(inst.d, 0.0)
            steps = max(1000, int(4.0 / eps**2))
            rep = subgradient_baseline(problem, setup, steps, seed=seed)
            value = rep.f_max_value
            evals = rep.func_evals
            iters = rep.outer_iterations
    elif kind == "meb":
        inst = MebInstance(rows)
        base = mio.instance_from_payload(
            "quadratics", np.column_stack([inst.points, np.zeros(inst.n)])
        )
        if method == "proposed":
            center, _, rep = solve_meb(inst, eps, seed=seed, profile=profile)
            value = base.f_max((center - inst.shift) / inst.scale)
        else:
            steps = max(1000, int(4.0 / eps**2))
            rep = subgradient_baseline(base, ball_setup(inst.d), steps, seed=seed)
            value = rep.f_max_value
        evals = rep.func_evals + rep.grad_evals
        iters = rep.outer_iterations
    else:
        problem = mio.instance_from_payload(kind, rows)
        if method == "proposed":
            rep = solve_smooth_max(problem, eps, seed=seed, profile=profile, kind=Kind.BALL)
        else:
            steps = max(1000, int(4.0 / eps**2))
            rep = subgradient_baseline(problem, ball_setup(problem.d), steps, seed=seed)
        value = rep.f_max_value
        evals = rep.func_evals + rep.grad_evals
        iters = rep.outer_iterations
    wall = time.perf_counter() - t0
    return {
        "method": method,
        "r": "" if r_value is None else r_value,
        "seed": seed,
        "value": value,
        "gap": gap,
        "evaluations": evals,
        "iterations": iters,
        "wall_time": wall,
    }


def cmd_bench(args) -> int:
    kind, rows = mio.load_instance(args.infile)
    methods = [m.strip() for m in args.method.split(",")]
    sweep = [None]
    if args.r_sweep:
        sweep = [float(v) for v in args.r_sweep.split(",")]
    seeds = [args.seed + i for i in range(args.repeats)]
    cells = [
        (kind, rows, m, args.eps, s, args.profile, r)
        for m in methods
        for r in sweep
        for s in seeds
    ]
    workers = max(1, int(os.environ.get("MAXMIN_THREADS", "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _bench_cell(*c), cells))
    else:
        results = [_bench_cell(*c) for c in cells]
    fields = ["instance", "method", "r", "seed", "value", "gap", "evaluations",
              "iterations", "wall_time"]
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in results:
            row["instance"] = str(args.infile)
            writer.writerow(row)
    log.info("wrote %d bench rows to %s", len(results), args.out)
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxmin", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance file")
    gen.add_argument("--kind", choices=["game", "meb", "quadratics"], required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--d", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--setup", choices=["l2l1", "l1l1"], default="l2l1")
    gen.add_argument("--out", required=True)
    gen.add_argument("--binary", action="store_true")
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="solve one instance, write a JSON report")
    solve.add_argument("--in", dest="infile", required=True)
    solve.add_argument("--eps", type=float, required=True)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--profile", choices=["practical", "theory"], default="practical")
    solve.add_argument("--setup", choices=["l2l1", "l1l1"], default="l2l1")
    solve.add_argument("--out", required=True)
    solve.set_defaults(func=cmd_solve)

    selftest = sub.add_parser("selftest", help="run statistical property suites")
    selftest.add_argument("--which", default="mve,mvm,sampler,geometry")
    selftest.add_argument("--seed", type=int, default=0)
    selftest.add_argument("--scale", type=float, default=1.0)
    selftest.add_argument("--out", default="")
    selftest.set_defaults(func=cmd_selftest)

    bench = sub.add_parser("bench", help="sweep methods/radii over an instance")
    bench.add_argument("--in", dest="infile", required=True)
    bench.add_argument("--eps", type=float, required=True)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--repeats", type=int, default=1)
    bench.add_argument("--method", default="proposed,subgradient")
    bench.add_argument("--r-sweep", default="")
    bench.add_argument("--profile", choices=["practical", "theory"], default="practical")
    bench.add_argument("--out", required=True)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MaxminError as exc:
        log.error("invalid input: %s", exc)
        return 2
    except OSError as exc:
        log.error("io error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
