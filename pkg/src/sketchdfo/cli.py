"""Benchmark harness.

``sketchdfo bench`` runs (problem x sketch variant x seed) solves and writes
per-iteration traces, timing breakdowns and a one-line summary per run.
``sketchdfo scaling`` times generalized Rosenbrock over a list of
dimensions with a 3(d+1) evaluation budget and writes the per-task split.

Exit codes: 0 success, 1 usage or validation error, 2 solver failure.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import json
import math
from pathlib import Path
import re
import sys

import numpy as np

from .instrument import TASKS
from .problems import LINKS, dataset_problem, gen_rosenbrock, random_nlls
from .sketch import KINDS, SketchConfig
from .solver import SolverConfig, run

TRACE_COLUMNS = ("k", "n_evals", "wall_time_s", "f_best", "delta", "rho", "step_norm")
TIMING_KEYS = TASKS + ("total",)
PROBLEMS = ("rosenbrock", "random", "dataset")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def resolve_sketch_size(expr, d):
    """Sketch rows from an integer or a multiple of d such as ``d``, ``2d``, ``0.5d``."""
    text = str(expr).strip().lower()
    m = re.fullmatch(r"(\d+(?:\.\d*)?)?\s*\*?\s*d", text)
    if m:
        k = float(m.group(1)) if m.group(1) else 1.0
        size = int(round(k * d))
    elif re.fullmatch(r"\d+", text):
        size = int(text)
    else:
        raise UsageError(f"--sketch-size: cannot parse {expr!r}; use an integer or '<k>d'")
    if size < 1:
        raise UsageError(f"--sketch-size: {expr!r} resolves to m={size}, need m >= 1")
    return size


def build_problem(opts):
    if opts["problem"] == "rosenbrock":
        return gen_rosenbrock(opts["dim"])
    if opts["problem"] == "random":
        n = opts["residuals"] if opts["residuals"] is not None else 10 * opts["dim"]
        return random_nlls(opts["dim"], n, seed=opts["problem_seed"])
    return dataset_problem(opts["dataset"], link=opts["link"], intercept=opts["intercept"])


def variant_label(kind, m, hash_nnz):
    if kind == "none":
        return "none"
    if kind == "hashing":
        return f"hashing-s{hash_nnz}-m{m}"
    return f"{kind}-m{m}"


def trace_rows(result):
    return [
        {
            "k": rec.k,
            "n_evals": rec.n_evals,
            "wall_time_s": rec.wall_time,
            "f_best": rec.f_best,
            "delta": rec.delta,
            "rho": rec.rho,
            "step_norm": rec.step_norm,
        }
        for rec in result.trace
    ]


def write_trace_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in TRACE_COLUMNS])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            {c: (int(row[c]) if c in ("k", "n_evals") else float(row[c])) for c in TRACE_COLUMNS}
            for row in reader
        ]


def mean_trace(traces):
    """Mean/min/max of f_best across runs on the union of evaluation counts.

    Each run contributes the best value reached with at most that many
    evaluations; counts before a run's first record are skipped for it.
    """
    grid = sorted({row["n_evals"] for rows in traces for row in rows})
    out = []
    for e in grid:
        vals = []
        for rows in traces:
            best = [r["f_best"] for r in rows if r["n_evals"] <= e]
            if best:
                vals.append(best[-1])
        out.append(
            {
                "n_evals": e,
                "f_best_mean": float(np.mean(vals)),
                "f_best_min": float(np.min(vals)),
                "f_best_max": float(np.max(vals)),
                "n_runs": len(vals),
            }
        )
    return out


def _solve_one(job):
    """Worker entry point; job is a plain dict so it pickles."""
    problem = build_problem(job["problem_opts"])
    sketch = SketchConfig(job["kind"], m=job["m"], hash_nnz=job["hash_nnz"], seed=job["seed"])
    config = SolverConfig(
        max_evals=job["budget"] * (problem.d + 1),
        max_time=job["max_time"],
        sketch=sketch,
        seed=job["seed"],
    )
    result = run(problem, config)
    return {
        "problem": problem.name,
        "d": problem.d,
        "n": problem.n,
        "label": job["label"],
        "kind": job["kind"],
        "m": job["m"],
        "seed": job["seed"],
        "status": result.status,
        "n_evals": result.n_evals,
        "f_final": result.f_final,
        "timings": result.timings,
        "trace": trace_rows(result),
    }


def _run_jobs(jobs, n_workers):
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(_solve_one, jobs))
    return [_solve_one(job) for job in jobs]


def _suffixed(path, tag):
    path = Path(path)
    return path.with_name(f"{path.stem}-{tag}{path.suffix}")


def _summary_line(res):
    m = "-" if res["kind"] == "none" else str(res["m"])
    return (
        f"{res['problem']}\t{res['label']}\tm={m}\tevals={res['n_evals']}\t"
        f"time={res['timings']['total']:.4f}s\tf_final={res['f_final']:.6e}\tstatus={res['status']}"
    )


def _problem_opts(args):
    if args.problem not in PROBLEMS:
        raise UsageError(f"--problem: unknown problem {args.problem!r}; choose from {PROBLEMS}")
    if args.problem == "dataset":
        if not args.dataset:
            raise UsageError("--dataset: required with --problem dataset")
        if not Path(args.dataset).is_file():
            raise UsageError(f"--dataset: cannot read {args.dataset!r}")
    elif args.dim is None:
        raise UsageError("--dim: required for built-in problems")
    return {
        "problem": args.problem,
        "dim": args.dim,
        "residuals": args.residuals,
        "problem_seed": args.problem_seed,
        "dataset": args.dataset,
        "link": args.link,
        "intercept": args.intercept,
    }


def _validate_sketch_args(args):
    for kind in args.sketch:
        if kind not in KINDS:
            raise UsageError(f"--sketch: unknown sketch {kind!r}; choose from {KINDS}")
    if args.hash_nnz < 1:
        raise UsageError(f"--hash-nnz: must be >= 1, got {args.hash_nnz}")
    if args.budget <= 0:
        raise UsageError(f"--budget: must be positive, got {args.budget}")


def run_bench(args):
    _validate_sketch_args(args)
    if args.repeats < 1:
        raise UsageError(f"--repeats: must be >= 1, got {args.repeats}")
    popts = _problem_opts(args)
    try:
        probe = build_problem(popts)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc

    jobs = []
    for kind in args.sketch:
        m = resolve_sketch_size(args.sketch_size, probe.d) if kind != "none" else probe.n
        if kind == "hashing" and args.hash_nnz > m:
            raise UsageError(f"--hash-nnz: {args.hash_nnz} exceeds sketch size m={m}")
        label = variant_label(kind, m, args.hash_nnz)
        for rep in range(args.repeats):
            jobs.append(
                {
                    "problem_opts": popts,
                    "kind": kind,
                    "m": m,
                    "hash_nnz": args.hash_nnz,
                    "seed": args.seed + rep,
                    "budget": args.budget,
                    "max_time": args.max_time,
                    "label": label,
                }
            )
    results = _run_jobs(jobs, args.jobs)

    single = len(results) == 1
    by_label = {}
    for res in results:
        by_label.setdefault(res["label"], []).append(res)
        tag = f"{res['label']}-seed{res['seed']}"
        trace_path = Path(args.out) if single else _suffixed(args.out, tag)
        timing_path = Path(args.timings_out) if single else _suffixed(args.timings_out, tag)
        write_trace_csv(trace_path, res["trace"])
        with open(timing_path, "w") as fh:
            json.dump({k: res["timings"][k] for k in TIMING_KEYS}, fh, indent=2)
        print(_summary_line(res))
    if args.repeats > 1:
        for label, group in by_label.items():
            rows = mean_trace([res["trace"] for res in group])
            path = _suffixed(args.out, f"{label}-mean")
            with open(path, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
                writer.writeheader()
                writer.writerows(rows)
    if any(res["status"] == "eval_failure" for res in results):
        return EXIT_SOLVER
    return EXIT_OK


def scaling_rows(dims, variants, budget=3, seed=0):
    """Run Rosenbrock for each d and variant; one timing row per pair.

    ``variants`` holds (kind, size_expr, hash_nnz) triples.
    """
    rows = []
    for d in dims:
        problem = gen_rosenbrock(d)
        for kind, size_expr, hash_nnz in variants:
            m = resolve_sketch_size(size_expr, d) if kind != "none" else problem.n
            sketch = SketchConfig(kind, m=m, hash_nnz=hash_nnz, seed=seed)
            config = SolverConfig(max_evals=budget * (d + 1), sketch=sketch, seed=seed)
            result = run(problem, config)
            t = result.timings
            row = {"d": d, "variant": variant_label(kind, m, hash_nnz), "total_s": t["total"]}
            row.update({k: t[k] for k in TASKS})
            row["model_fraction"] = (t["interp_solve"] + t["model_build"]) / t["total"]
            row["f_final"] = result.f_final
            rows.append(row)
    return rows


def scaling_report(args):
    _validate_sketch_args(args)
    try:
        dims = [int(x) for x in args.dims.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--dims: expected comma-separated integers, got {args.dims!r}") from None
    if not dims or min(dims) < 2:
        raise UsageError("--dims: need at least one dimension, each >= 2")
    for d in dims:
        for kind in args.sketch:
            if kind != "none":
                m = resolve_sketch_size(args.sketch_size, d)
                if kind == "hashing" and args.hash_nnz > m:
                    raise UsageError(f"--hash-nnz: {args.hash_nnz} exceeds sketch size m={m} at d={d}")
    variants = [(kind, args.sketch_size, args.hash_nnz) for kind in args.sketch]
    rows = scaling_rows(dims, variants, budget=args.budget, seed=args.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    for row in rows:
        print(
            f"d={row['d']}\t{row['variant']}\ttotal={row['total_s']:.4f}s\t"
            f"model_fraction={row['model_fraction']:.3f}"
        )
    return EXIT_OK


def _sketch_flags(p, budget_default):
    p.add_argument("--sketch", nargs="+", default=["none"], metavar="KIND",
                   help=f"one or more of {', '.join(KINDS)}")
    p.add_argument("--sketch-size", default="d", help="integer or '<k>d' (default: d)")
    p.add_argument("--hash-nnz", type=int, default=1, help="nonzeros per column for hashing")
    p.add_argument("--budget", type=float, default=budget_default,
                   help=f"evaluation budget as a multiple of d+1 (default: {budget_default})")
    p.add_argument("--seed", type=int, default=0)


def make_parser():
    parser = _Parser(prog="sketchdfo", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    bench = sub.add_parser("bench", help="run solves and write traces")
    bench.add_argument("--problem", default="rosenbrock", help=f"one of {', '.join(PROBLEMS)}")
    bench.add_argument("--dim", type=int, help="problem dimension d")
    bench.add_argument("--residuals", type=int, help="residual count n for --problem random (default 10d)")
    bench.add_argument("--problem-seed", type=int, default=0, help="data seed for --problem random")
    bench.add_argument("--dataset", help="CSV file for --problem dataset")
    bench.add_argument("--link", default="linear", choices=LINKS)
    bench.add_argument("--intercept", action="store_true")
    _sketch_flags(bench, 2)
    bench.add_argument("--max-time", type=float, default=math.inf, help="seconds per solve")
    bench.add_argument("--repeats", type=int, default=1, help="independent seeds seed, seed+1, ...")
    bench.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    bench.add_argument("--out", default="trace.csv")
    bench.add_argument("--timings-out", default="timings.json")
    bench.set_defaults(func=run_bench)

    scaling = sub.add_parser("scaling", help="per-task runtime split over dimensions")
    scaling.add_argument("--dims", default="50,100,200,400")
    _sketch_flags(scaling, 3)
    scaling.add_argument("--out", default="scaling.csv")
    scaling.set_defaults(func=scaling_report)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sketchdfo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
