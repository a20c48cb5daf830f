"""Produce the cached training results the acceptance tests read.

Runs every (problem, method, seed) combination the acceptance suite
scores, plus the separation sweep, writing one result directory per
run under results/acceptance/.  Finished runs are skipped, so the
script can be interrupted and rerun; progress goes to
results/acceptance/status.json after every run.

Run:  python3 scripts/run_acceptance_training.py [--only PREFIX]
"""

import argparse
import json
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from dspinn import harness  # noqa: E402

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..",
                    "results", "acceptance")
PROBLEMS = ["ex1", "ex4", "ex5", "ex3"]   # cheapest-per-eval problems first
METHODS = ["nds", "ds", "std"]
SEEDS = [0, 1, 2, 3, 4]
SWEEP_D = [1e-3, 0.1, 50.0]
SWEEP_REPEATS = 5


def run_dir(problem, method, seed):
    return os.path.join(ROOT, f"{problem}_{method}_s{seed}")


def done(path):
    return os.path.exists(os.path.join(path, "metrics.json"))


def write_status(status):
    status["updated"] = time.strftime("%Y-%m-%d %H:%M:%S")
    tmp = os.path.join(ROOT, "status.json.tmp")
    with open(tmp, "w") as f:
        json.dump(status, f, indent=2)
    os.replace(tmp, os.path.join(ROOT, "status.json"))


def train_one(problem, method, seed):
    out = run_dir(problem, method, seed)
    if done(out):
        return None
    cfg = harness.apply_profile(
        harness.TrainConfig(problem, method, seed=seed), "full")
    t0 = time.time()
    name = os.path.basename(out)

    def progress(phase, k, f, ginf):
        print(f"{name} {phase} {k} f={f:.4e} |g|={ginf:.2e}", flush=True)

    res = harness.train(cfg, progress=progress)
    harness.emit_artifacts(out, res)
    return {"run": os.path.basename(out),
            "rel_l2": res.metrics["rel_l2"],
            "final_loss": res.metrics["final_loss"],
            "lbfgs_iters": res.metrics["lbfgs"]["iterations"],
            "lbfgs_term": res.metrics["lbfgs"]["termination"],
            "minutes": round((time.time() - t0) / 60, 1)}


def run_sweep():
    out = os.path.join(ROOT, "sweep_ex1_nds")
    csv_path = os.path.join(out, "sweep.csv")
    if os.path.exists(csv_path):
        return None
    os.makedirs(out, exist_ok=True)
    base = harness.apply_profile(harness.TrainConfig("ex1", "nds", seed=100),
                                 "ci")
    t0 = time.time()
    rows = harness.sweep_d(base, SWEEP_D, SWEEP_REPEATS)
    harness.write_sweep_csv(csv_path, rows)
    with open(os.path.join(out, "rows.json"), "w") as f:
        json.dump(rows, f, indent=2)
    return {"run": "sweep_ex1_nds", "rows": rows,
            "minutes": round((time.time() - t0) / 60, 1)}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--only", default="", help="run only jobs whose name "
                    "starts with this prefix")
    args = ap.parse_args()

    os.makedirs(ROOT, exist_ok=True)
    jobs = [(p, m, s) for p in PROBLEMS for m in METHODS for s in SEEDS]
    log = []
    status = {"total": len(jobs) + 1, "done": 0, "log": log}

    for p, m, s in jobs:
        name = f"{p}_{m}_s{s}"
        if args.only and not name.startswith(args.only):
            continue
        try:
            entry = train_one(p, m, s)
        except Exception as e:  # record and continue with the rest
            entry = {"run": name, "error": repr(e)}
        if entry is not None:
            log.append(entry)
            print(json.dumps(entry), flush=True)
        status["done"] = sum(
            done(run_dir(pp, mm, ss)) for pp, mm, ss in jobs)
        write_status(status)

    if not args.only or "sweep".startswith(args.only):
        entry = run_sweep()
        if entry is not None:
            log.append(entry)
            print(json.dumps(entry), flush=True)
        status["done"] += 1
        write_status(status)
    print("all done")


if __name__ == "__main__":
    main()
