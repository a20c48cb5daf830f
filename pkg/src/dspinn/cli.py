"""Command-line entry points.

Three subcommands: ``train`` runs one configuration and writes its
artifacts, ``eval`` re-scores a saved checkpoint, ``sweep`` trains
repeatedly across separation distances and writes the summary table.

Settings resolve in three layers: built-in defaults, then a JSON
config file (--config), then explicit flags, later layers winning.
The config file mirrors TrainConfig fields, with nested "adam",
"lbfgs", and "weights" sections.
"""

import argparse
import dataclasses
import json
import os
import sys

from . import harness, problems

_PROBLEM_CHOICES = [p for p in problems.available_problems()]


def _load_config_file(path):
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _build_config(args, require_problem=True):
    layers = {}
    if args.config:
        layers.update(_load_config_file(args.config))
    for key in ("problem", "method", "d", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            layers[key] = val
    if require_problem and "problem" not in layers:
        raise SystemExit("error: no problem named (use --problem or a config file)")
    profile = layers.pop("profile", None)
    if getattr(args, "profile", None) is not None:
        profile = args.profile
    cfg = harness.TrainConfig.from_dict(layers)
    if profile is not None:
        cfg = harness.apply_profile(cfg, profile)
    return cfg


def _progress_printer(every_line=True):
    def cb(phase, k, f, ginf):
        print(f"  {phase:6s} iter {k:6d}   loss {f:.6e}   grad {ginf:.3e}",
              flush=True)
    return cb if every_line else None


def _cmd_train(args):
    cfg = _build_config(args)
    print(f"training {cfg.problem} / {cfg.method} (seed {cfg.seed})")
    res = harness.train(cfg, progress=None if args.quiet else _progress_printer())
    harness.emit_artifacts(args.out, res)
    import math

    m = res.metrics
    rel = m.get("rel_l2", float("nan"))
    print(f"done: final loss {m['final_loss']:.3e}"
          + ("" if math.isnan(rel) else f", relative l2 error {rel:.3e}")
          + f", artifacts in {args.out}")
    return 0


def _cmd_eval(args):
    import math

    params, prob, cfg_dict = harness.load_for_eval(args.checkpoint)
    ev = harness.evaluate(params, prob)
    metrics = {
        "checkpoint": os.path.abspath(args.checkpoint),
        "problem": prob.name,
        "d": prob.d,
        "method": cfg_dict.get("method"),
        "rel_l2": ev.rel_l2,
        "grid": ev.n,
    }
    cfg = harness.TrainConfig.from_dict(
        {k: v for k, v in cfg_dict.items() if k != "d_effective"})
    harness.emit_artifacts(args.out, harness.TrainResult(
        params, cfg, prob, metrics, []), ev)
    if not math.isnan(ev.rel_l2):
        print(f"relative l2 error: {ev.rel_l2:.6e}")
    print(f"artifacts in {args.out}")
    return 0


def _cmd_sweep(args):
    cfg = _build_config(args)
    d_list = [float(tok) for tok in args.d_list.split(",") if tok.strip()]
    if not d_list:
        raise SystemExit("error: empty --d-list")

    def prog(d, r, rel):
        if not args.quiet:
            print(f"  d={d:g} run {r}: rel_l2 {rel:.3e}", flush=True)

    rows = harness.sweep_d(cfg, d_list, args.repeats, progress=prog)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    harness.write_sweep_csv(path, rows)
    for row in rows:
        if row["n_runs"] == 0:
            print(f"  d={row['d']:g}: rejected ({row.get('error', 'invalid')})")
        else:
            print(f"  d={row['d']:g}: mean rel_l2 {row['mean_rel_l2']:.3e} "
                  f"over {row['n_runs']} runs")
    print(f"wrote {path}")
    return 0


def make_parser():
    ap = argparse.ArgumentParser(
        prog="dspinn",
        description="train and evaluate interface-aware diffusion solvers")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_problem=True):
        p.add_argument("--config", help="JSON config file")
        if with_problem:
            p.add_argument("--problem", choices=_PROBLEM_CHOICES)
            p.add_argument("--method", choices=["std", "ds", "nds"])
            p.add_argument("--d", type=float,
                           help="separation distance (default: per problem)")
            p.add_argument("--seed", type=int)
            p.add_argument("--profile", choices=["full", "ci"])
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--quiet", action="store_true")

    p_train = sub.add_parser("train", help="train one configuration")
    common(p_train)
    p_train.set_defaults(fn=_cmd_train)

    p_eval = sub.add_parser("eval", help="re-evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    common(p_eval, with_problem=False)
    p_eval.set_defaults(fn=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="error versus separation distance")
    common(p_sweep)
    p_sweep.add_argument("--d-list", required=True,
                         help="comma-separated separation values")
    p_sweep.add_argument("--repeats", type=int, default=1)
    p_sweep.set_defaults(fn=_cmd_sweep)
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
