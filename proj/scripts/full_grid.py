#!/usr/bin/env python3
"""Full structure-recovery study over the complete size/density grid.

Runs the gclm command-line tool over model sizes 10..100, edge densities
k in {1,2,3,4}, and 100 repetitions per cell (N = 1000 observations each),
in both the direct scenario and the marginal scenario where only the first
10 coordinates are observed.  Each repetition fits every method's solution
path and scores it against the generating graph; per-run metrics land in
results.csv and summary.csv averages them over repetitions and densities
for each (scenario, size, method).

The full grid is multiple core-days of compute, which is why the CI suite
only exercises a reduced version.  The run is resumable: completed rows in
results.csv are skipped on restart.  Use --sizes/--densities/--reps for a
smaller sweep.

Example (small smoke sweep):
  scripts/full_grid.py --gclm build/gclm --out-dir /tmp/grid \
      --sizes 10,20 --densities 2 --reps 5 --jobs 4
"""

import argparse
import csv
import json
import multiprocessing
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

METRICS = ("maxacc", "maxf1", "auroc", "aupr")
PATH_METHODS = ("mloglik-inf", "mloglik-0.01", "frob-inf")
ALL_METHODS = PATH_METHODS + ("lasso", "covthr")


def parse_args(argv):
    ap = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    ap.add_argument("--gclm", required=True, help="path to the gclm binary")
    ap.add_argument("--out-dir", default="grid_results", help="output directory")
    ap.add_argument(
        "--sizes",
        default="10,20,30,40,50,60,70,80,90,100",
        help="comma-separated model sizes",
    )
    ap.add_argument(
        "--densities",
        default="1,2,3,4",
        help="comma-separated k values; edge probability is k/p",
    )
    ap.add_argument("--reps", type=int, default=100, help="repetitions per cell")
    ap.add_argument("--n", type=int, default=1000, help="sample size per repetition")
    ap.add_argument(
        "--keep", type=int, default=10, help="observed coordinates in the marginal scenario"
    )
    ap.add_argument(
        "--scenarios",
        default="direct,marginal",
        help="comma-separated subset of {direct,marginal}",
    )
    ap.add_argument(
        "--methods",
        default=",".join(ALL_METHODS),
        help="comma-separated subset of " + ", ".join(ALL_METHODS),
    )
    ap.add_argument(
        "--tol-mode",
        default="rel",
        choices=("rel", "abs"),
        help="convergence test for the penalized-likelihood paths",
    )
    ap.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    ap.add_argument(
        "--keep-files",
        action="store_true",
        help="keep per-run model/data/path files instead of deleting them",
    )
    ap.add_argument(
        "--aggregate-only",
        action="store_true",
        help="recompute summary.csv from an existing results.csv and exit",
    )
    args = ap.parse_args(argv)

    args.sizes = [int(tok) for tok in args.sizes.split(",") if tok]
    args.densities = [int(tok) for tok in args.densities.split(",") if tok]
    args.scenarios = [tok for tok in args.scenarios.split(",") if tok]
    args.methods = [tok for tok in args.methods.split(",") if tok]
    for sc in args.scenarios:
        if sc not in ("direct", "marginal"):
            ap.error(f"unknown scenario {sc!r}")
    for m in args.methods:
        if m not in ALL_METHODS:
            ap.error(f"unknown method {m!r}")
    return args


def task_seed(scenario, p, k, rep):
    """Deterministic, collision-free seed for one repetition."""
    return ((p * 10 + k) * 1000 + rep) * 2 + (1 if scenario == "marginal" else 0)


def run_tool(cmd):
    proc = subprocess.run(
        cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True
    )
    if proc.returncode != 0:
        raise RuntimeError(
            f"{' '.join(str(c) for c in cmd)} -> exit {proc.returncode}: "
            + proc.stderr.strip()
        )


def run_repetition(job):
    """Simulate one model, fit every requested method, score each path.

    Returns a list of result rows; a method that fails contributes a row
    with empty metrics so the failure stays visible in results.csv.
    """
    cfg, scenario, p, k, rep = job
    seed = task_seed(scenario, p, k, rep)
    work = Path(tempfile.mkdtemp(prefix=f"{scenario}_p{p}_k{k}_r{rep}_",
                                 dir=cfg["run_dir"]))
    rows = []
    try:
        prefix = str(work) + "/"
        sim = [cfg["gclm"], "simulate", "--p", str(p), "--k", str(k),
               "--n", str(cfg["n"]), "--seed", str(seed),
               "--out-prefix", prefix]
        truth = work / "graph.json"
        if scenario == "marginal":
            sim += ["--keep", str(cfg["keep"])]
            truth = work / "graph_kept.json"
        run_tool(sim)

        data = work / "data.csv"
        for method in cfg["methods"]:
            out_path = work / f"path_{method}.json"
            if method in PATH_METHODS:
                fit_cmd = [cfg["gclm"], "path", "--data", str(data),
                           "--preset", method, "--tol-mode", cfg["tol_mode"],
                           "--out", str(out_path)]
            elif method == "lasso":
                fit_cmd = [cfg["gclm"], "lasso-path", "--data", str(data),
                           "--out", str(out_path)]
            else:
                fit_cmd = [cfg["gclm"], "covthr", "--data", str(data),
                           "--out", str(out_path)]
            row = {"scenario": scenario, "p": p, "k": k, "rep": rep,
                   "seed": seed, "method": method}
            try:
                run_tool(fit_cmd)
                eval_out = work / f"eval_{method}.json"
                run_tool([cfg["gclm"], "evaluate", "--path", str(out_path),
                          "--truth", str(truth), "--out", str(eval_out)])
                report = json.loads(eval_out.read_text())
                for metric in METRICS:
                    row[metric] = repr(report[metric])
            except RuntimeError as err:
                print(f"warning: {scenario} p={p} k={k} rep={rep} "
                      f"{method}: {err}", file=sys.stderr)
                for metric in METRICS:
                    row[metric] = ""
            rows.append(row)
    finally:
        if not cfg["keep_files"]:
            shutil.rmtree(work, ignore_errors=True)
    return rows


def load_done(results_path):
    done = set()
    if not results_path.exists():
        return done
    with results_path.open() as handle:
        for row in csv.DictReader(handle):
            done.add((row["scenario"], int(row["p"]), int(row["k"]),
                      int(row["rep"]), row["method"]))
    return done


def aggregate(results_path, summary_path):
    """Average each metric over repetitions and densities per (scenario, p, method)."""
    groups = {}
    with results_path.open() as handle:
        for row in csv.DictReader(handle):
            key = (row["scenario"], int(row["p"]), row["method"])
            bucket = groups.setdefault(
                key, {m: [] for m in METRICS} | {"failed": 0})
            if any(row[m] == "" for m in METRICS):
                bucket["failed"] += 1
                continue
            for metric in METRICS:
                bucket[metric].append(float(row[metric]))
    with summary_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["scenario", "p", "method", *METRICS,
                         "n_runs", "n_failed"])
        for key in sorted(groups):
            bucket = groups[key]
            count = len(bucket[METRICS[0]])
            means = [f"{sum(bucket[m]) / count:.6f}" if count else ""
                     for m in METRICS]
            writer.writerow([*key, *means, count, bucket["failed"]])
    print(f"wrote {summary_path}")


def main(argv=None):
    args = parse_args(argv)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    summary_path = out_dir / "summary.csv"

    if args.aggregate_only:
        aggregate(results_path, summary_path)
        return 0

    gclm = shutil.which(args.gclm) or str(Path(args.gclm).resolve())
    if not Path(gclm).exists():
        print(f"error: gclm binary not found at {args.gclm}", file=sys.stderr)
        return 2

    run_dir = out_dir / "runs"
    run_dir.mkdir(exist_ok=True)
    cfg = {"gclm": gclm, "n": args.n, "keep": args.keep,
           "methods": args.methods, "tol_mode": args.tol_mode,
           "keep_files": args.keep_files, "run_dir": str(run_dir)}

    done = load_done(results_path)
    jobs = []
    for scenario in args.scenarios:
        for p in args.sizes:
            if scenario == "marginal" and p < args.keep:
                continue
            for k in args.densities:
                for rep in range(args.reps):
                    pending = [m for m in args.methods
                               if (scenario, p, k, rep, m) not in done]
                    if pending:
                        jobs.append((cfg, scenario, p, k, rep))
    print(f"{len(jobs)} repetitions to run ({len(done)} result rows found)")

    header = ["scenario", "p", "k", "rep", "seed", "method", *METRICS]
    new_file = not results_path.exists()
    with results_path.open("a", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=header)
        if new_file:
            writer.writeheader()
        completed = 0

        def emit(rows):
            nonlocal completed
            for row in rows:
                key = (row["scenario"], row["p"], row["k"], row["rep"],
                       row["method"])
                if (key[0], key[1], key[2], key[3], key[4]) in done:
                    continue
                writer.writerow(row)
            handle.flush()
            completed += 1
            if completed % 25 == 0 or completed == len(jobs):
                print(f"  {completed}/{len(jobs)} repetitions done")

        if args.jobs > 1:
            with multiprocessing.Pool(args.jobs) as pool:
                for rows in pool.imap(run_repetition, jobs):
                    emit(rows)
        else:
            for job in jobs:
                emit(run_repetition(job))

    aggregate(results_path, summary_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
