"""Training, evaluation, and sweep drivers.

One TrainConfig fully determines a run: the parameter init and the
collocation sampling derive from independent child streams of the
seed, the optimizers are deterministic, and the kernels reduce in a
fixed order, so rerunning a config reproduces its metrics bit for bit
on the same build.
"""

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import kernels, loss, net, optimize, problems

DEFAULT_LAYERS = (2, 50, 50, 50, 50, 50, 1)


@dataclass
class TrainConfig:
    problem: str
    method: str = "nds"
    d: float = None              # None -> the problem's default separation
    seed: int = 0
    layer_sizes: tuple = DEFAULT_LAYERS
    n_interior: int = 5000       # per subdomain
    n_boundary: int = 500        # per boundary edge
    n_interface: int = 2000      # per interface
    adam: optimize.AdamConfig = field(default_factory=optimize.AdamConfig)
    lbfgs: optimize.LbfgsConfig = field(default_factory=optimize.LbfgsConfig)
    weights: loss.LossWeights = field(default_factory=loss.LossWeights)
    dtype: str = "float64"
    exclusion_band: float = 1e-6  # residual points this close to an
    # interface are resampled in the unseparated baseline
    log_every: int = 100

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["layer_sizes"] = list(self.layer_sizes)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        for key, typ in (("adam", optimize.AdamConfig),
                         ("lbfgs", optimize.LbfgsConfig),
                         ("weights", loss.LossWeights)):
            if key in data and isinstance(data[key], dict):
                data[key] = typ(**data[key])
        if "layer_sizes" in data:
            data["layer_sizes"] = tuple(data["layer_sizes"])
        return cls(**data)


def apply_profile(cfg, profile):
    """Return a copy adjusted for the named run profile.

    "full" is the batch-experiment protocol: reference sample counts
    with the second stage capped at the budget the convergence study
    settled on (the gradient never reaches its tolerance on these
    problems, so the cap is what ends the run).  The baseline method
    hits its representation floor long before the separated ones, so
    it gets a shorter budget.  "ci" shrinks the interior sampling and
    the cap further so a run finishes in minutes.  An unprofiled
    TrainConfig keeps the larger run-until-converged default.
    """
    if profile == "full":
        cap = 3000 if cfg.method == "std" else 8000
        lb = dataclasses.replace(cfg.lbfgs, max_iterations=cap)
        return dataclasses.replace(cfg, lbfgs=lb)
    if profile == "ci":
        lb = dataclasses.replace(cfg.lbfgs, max_iterations=5000)
        return dataclasses.replace(cfg, n_interior=2000, lbfgs=lb)
    raise ValueError(f"unknown profile {profile!r}")


@dataclass
class TrainResult:
    params: net.NetworkParams
    config: TrainConfig
    problem: object
    metrics: dict
    history: list   # (phase, iteration, loss, grad_inf)


def _resolve(cfg):
    """Problem instance plus effective separation for a config."""
    if cfg.method == "std":
        d_eff = 0.0
    elif cfg.d is not None:
        d_eff = float(cfg.d)
    else:
        d_eff = None
    prob = problems.builtin(cfg.problem, d=d_eff)
    return prob, prob.d


def build_for_config(cfg):
    """Sample the collocation sets a config trains on."""
    prob, _ = _resolve(cfg)
    _, sample_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    rng = np.random.default_rng(sample_ss)
    if cfg.method == "std":
        counts = geo.SampleCounts(cfg.n_interior, cfg.n_boundary, 0)
        ts = geo.build_training_set(prob, counts, rng,
                                    include_interface=False,
                                    exclusion_band=cfg.exclusion_band)
    else:
        counts = geo.SampleCounts(cfg.n_interior, cfg.n_boundary,
                                  cfg.n_interface)
        ts = geo.build_training_set(prob, counts, rng)
    return prob, ts


def train(cfg, progress=None, backend=None):
    """Run the two-stage optimization for one config."""
    t_start = time.perf_counter()
    init_ss, _ = np.random.SeedSequence(cfg.seed).spawn(2)
    prob, ts = build_for_config(cfg)
    params = net.init_params(cfg.layer_sizes, np.random.default_rng(init_ss))

    normalizers = None
    if cfg.method == "nds":
        normalizers = loss.compute_normalizers(ts, prob)
    ev = loss.LossEvaluator(cfg.layer_sizes, cfg.method, ts, prob,
                            weights=cfg.weights, normalizers=normalizers,
                            dtype=np.dtype(cfg.dtype), backend=backend)

    history = []

    def recorder(phase):
        def cb(k, f, ginf):
            if k % cfg.log_every == 0 or k == 1:
                history.append((phase, k, f, ginf))
                if progress is not None:
                    progress(phase, k, f, ginf)
        return cb

    theta = net.flatten(params).astype(np.float64)
    theta, adam_rep = optimize.adam_run(ev, theta, cfg.adam,
                                        callback=recorder("adam"))
    theta, lbfgs_rep = optimize.lbfgs_run(ev, theta, cfg.lbfgs,
                                          callback=recorder("lbfgs"))
    history.append(("lbfgs", lbfgs_rep.iterations, lbfgs_rep.f_final,
                    lbfgs_rep.grad_inf_norm))

    up = net.unflatten(cfg.layer_sizes, theta)
    final = net.NetworkParams(cfg.layer_sizes,
                              [w.copy() for w in up.weights],
                              [b.copy() for b in up.biases])
    bd = ev.breakdown(theta)
    wall = time.perf_counter() - t_start

    metrics = {
        "problem": cfg.problem,
        "method": cfg.method,
        "d": prob.d,
        "seed": cfg.seed,
        "dtype": cfg.dtype,
        "backend": (backend or kernels.get_backend()).BACKEND_NAME,
        "n_params": params.n_params,
        "points": {"interior": ts.n_interior, "boundary": ts.n_boundary,
                   "interface": ts.n_interface},
        "final_loss": bd.total,
        "loss_terms": {"boundary": bd.L_b, "residual": bd.L_r,
                       "interface": bd.L_gamma},
        "adam": dataclasses.asdict(adam_rep),
        "lbfgs": dataclasses.asdict(lbfgs_rep),
        "n_loss_evals": ev.n_evals,
        "wall_time_s": wall,
    }
    if normalizers is not None:
        metrics["normalizers"] = dataclasses.asdict(normalizers)
    metrics["rel_l2"] = evaluate(final, prob).rel_l2
    return TrainResult(final, cfg, prob, metrics, history)


# ---------------------------------------------------------------------------
# evaluation on a fixed grid


@dataclass
class EvalResult:
    points: np.ndarray      # (n*n, 2) cell centers in original coordinates
    pred: np.ndarray
    exact: np.ndarray       # None without a reference solution
    rel_l2: float
    n: int


def domain_bbox(problem):
    los = np.array([s.shape.bbox[:2] for s in problem.subdomains])
    his = np.array([s.shape.bbox[2:] for s in problem.subdomains])
    return (*los.min(axis=0), *his.max(axis=0))


def evaluation_grid(problem, n=100):
    """Cell-centered n-by-n grid covering the original domain."""
    xlo, ylo, xhi, yhi = domain_bbox(problem)
    xs = xlo + (np.arange(n) + 0.5) * (xhi - xlo) / n
    ys = ylo + (np.arange(n) + 0.5) * (yhi - ylo) / n
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([gx.ravel(), gy.ravel()])


def relative_l2(pred, ref):
    denom = float(np.linalg.norm(ref))
    if denom == 0.0:
        raise ValueError("reference field is identically zero")
    return float(np.linalg.norm(pred - ref) / denom)


def predict(params, problem, pts):
    """Network prediction in original coordinates: shift each point by
    its subdomain offset, then evaluate."""
    ids = geo.locate(pts, problem.subdomains)
    offsets = np.array([s.offset for s in problem.subdomains])
    return net.forward(params, pts + offsets[ids])


def evaluate(params, problem, n=100):
    pts = evaluation_grid(problem, n)
    pred = predict(params, problem, pts)
    if not problem.has_exact:
        return EvalResult(pts, pred, None, float("nan"), n)
    exact = problem.eval_exact(pts)
    return EvalResult(pts, pred, exact, relative_l2(pred, exact), n)


# ---------------------------------------------------------------------------
# artifacts


_RAMP = np.array([
    (0.001462, 0.000466, 0.013866),
    (0.316654, 0.071690, 0.485380),
    (0.716387, 0.214982, 0.475290),
    (0.986700, 0.535582, 0.382210),
    (0.988362, 0.998364, 0.644924),
])


def _colorize(norm):
    """Map [0,1] values through a dark-to-light color ramp."""
    t = np.clip(norm, 0.0, 1.0) * (len(_RAMP) - 1)
    i = np.minimum(t.astype(int), len(_RAMP) - 2)
    frac = (t - i)[..., None]
    rgb = _RAMP[i] * (1 - frac) + _RAMP[i + 1] * frac
    return (rgb * 255).astype(np.uint8)


def write_heatmap(path, values, n, scale=4):
    """Binary PPM raster of a scalar field given on the n-by-n grid.

    Row 0 of the image is the top of the domain, and each grid cell
    becomes a scale-by-scale pixel block.
    """
    img = np.asarray(values, float).reshape(n, n)
    vmax = np.nanmax(np.abs(img))
    norm = np.abs(img) / vmax if vmax > 0 else np.zeros_like(img)
    rgb = _colorize(norm[::-1])  # grid rows run bottom-up
    rgb = np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)
    with open(path, "wb") as f:
        f.write(f"P6 {rgb.shape[1]} {rgb.shape[0]} 255\n".encode())
        f.write(rgb.tobytes())


def emit_artifacts(out_dir, result, eval_result=None):
    """Write checkpoint, metrics, prediction table, and error raster."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    cfg = result.config
    if eval_result is None:
        eval_result = evaluate(result.params, result.problem)

    ckpt_cfg = cfg.to_dict()
    ckpt_cfg["d_effective"] = result.problem.d
    net.save_checkpoint(os.path.join(out_dir, "checkpoint.npz"),
                        result.params, config=ckpt_cfg)

    metrics = dict(result.metrics)
    metrics["history_tail"] = [list(h) for h in result.history[-20:]]
    with open(os.path.join(out_dir, "metrics.json"), "w") as f:
        json.dump(metrics, f, indent=2, default=float)
        f.write("\n")

    has_exact = eval_result.exact is not None
    with open(os.path.join(out_dir, "prediction.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "pred"] + (["exact", "abs_err"] if has_exact else []))
        for i, (x, y) in enumerate(eval_result.points):
            row = [f"{x:.10g}", f"{y:.10g}", f"{eval_result.pred[i]:.10g}"]
            if has_exact:
                err = abs(eval_result.pred[i] - eval_result.exact[i])
                row += [f"{eval_result.exact[i]:.10g}", f"{err:.6g}"]
            w.writerow(row)

    if has_exact:
        err = np.abs(eval_result.pred - eval_result.exact)
        write_heatmap(os.path.join(out_dir, "error_heatmap.ppm"),
                      err, eval_result.n)
    return eval_result


def load_for_eval(checkpoint_path):
    """Rebuild the network and its problem from a checkpoint."""
    params, cfg = net.load_checkpoint(checkpoint_path)
    if cfg is None or "problem" not in cfg:
        raise ValueError("checkpoint carries no training configuration")
    prob = problems.builtin(cfg["problem"], d=cfg.get("d_effective"))
    return params, prob, cfg


# ---------------------------------------------------------------------------
# separation sweep


def sweep_d(cfg, d_list, repeats, progress=None, backend=None):
    """Train `repeats` times per separation value; run r uses seed
    cfg.seed + r.  Returns one summary row per d, with n_runs 0 marking
    separations the geometry rejects."""
    if cfg.method == "std":
        raise ValueError("the separation sweep needs a separated method")
    rows = []
    for d in d_list:
        try:
            probe = dataclasses.replace(cfg, d=float(d))
            build_for_config(probe)
        except ValueError as e:
            rows.append({"d": float(d), "mean_rel_l2": float("nan"),
                         "std_rel_l2": float("nan"), "n_runs": 0,
                         "error": str(e)})
            continue
        vals = []
        for r in range(repeats):
            run_cfg = dataclasses.replace(cfg, d=float(d), seed=cfg.seed + r)
            res = train(run_cfg, backend=backend)
            vals.append(res.metrics["rel_l2"])
            if progress is not None:
                progress(d, r, vals[-1])
        vals = np.asarray(vals)
        rows.append({"d": float(d), "mean_rel_l2": float(vals.mean()),
                     "std_rel_l2": float(vals.std()), "n_runs": repeats,
                     "values": [float(v) for v in vals]})
    return rows


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["d", "mean_rel_l2", "std_rel_l2", "n_runs"])
        for row in rows:
            w.writerow([f"{row['d']:.10g}", f"{row['mean_rel_l2']:.10g}",
                        f"{row['std_rel_l2']:.10g}", row["n_runs"]])
