"""Full-batch optimizers used for training: Adam and L-BFGS.

Both work on a flat float64 parameter vector and an objective
``fun(x) -> (f, grad)``.  The objective may reuse its gradient buffer
between calls; anything the optimizers keep is copied.

The L-BFGS direction uses the standard two-loop recursion with the
gamma = s.y / y.y initial scaling, and step lengths come from a strong
Wolfe line search (bracket plus zoom with cubic interpolation, after
Nocedal & Wright, Numerical Optimization, Algorithms 3.5/3.6).
Non-finite objective probes are treated as sufficient-decrease failures
so the search backs away from invalid regions instead of propagating
NaNs.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["AdamConfig", "LbfgsConfig", "OptimizeReport", "adam_run",
           "lbfgs_run", "wolfe_line_search"]


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    iterations: int = 2000


@dataclass
class LbfgsConfig:
    memory: int = 50
    c1: float = 1e-4
    c2: float = 0.9
    grad_tol: float = 1e-9          # on the gradient infinity norm
    rel_reduction_tol: float = 1e-14  # on |f_k - f_{k+1}| / max(1, |f_k|)
    max_iterations: int = 50000
    max_line_search_steps: int = 50
    # iterations during which an accepted Wolfe step may spend one extra
    # evaluation on a cubic refinement toward the line minimizer.  Early
    # on this compensates for a cold inverse-Hessian model (and makes
    # the search exact on quadratics); once the model has warmed, unit
    # steps are good enough that the probe mostly wastes an evaluation.
    refine_iterations: int = 500


@dataclass
class OptimizeReport:
    iterations: int
    n_evals: int
    f_final: float
    grad_inf_norm: float
    termination: str  # grad_tol | rel_reduction | max_iter | line_search_failure


def adam_run(fun, x0, cfg, callback=None):
    """Run a fixed number of Adam iterations with bias correction."""
    x = np.asarray(x0, np.float64).copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    f = np.inf
    ginf = np.inf
    for k in range(1, cfg.iterations + 1):
        f, g = fun(x)
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * np.square(g)
        mhat = m / (1.0 - cfg.beta1**k)
        vhat = v / (1.0 - cfg.beta2**k)
        x -= cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)
        ginf = float(np.max(np.abs(g)))
        if callback is not None:
            callback(k, float(f), ginf)
    return x, OptimizeReport(cfg.iterations, cfg.iterations, float(f), ginf,
                             "max_iter")


def _cubic_interpolate(x1, f1, g1, x2, f2, g2, bounds=None):
    """Minimizer of the cubic through two points with derivatives."""
    if bounds is not None:
        xmin, xmax = bounds
    else:
        xmin, xmax = (x1, x2) if x1 <= x2 else (x2, x1)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2)
        d2_square = d1 * d1 - g1 * g2
        if d2_square >= 0.0:
            d2 = np.sqrt(d2_square)
            if x1 <= x2:
                pos = x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
            else:
                pos = x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
            if np.isfinite(pos):
                return min(max(pos, xmin), xmax)
    return (xmin + xmax) / 2.0


def _strong_wolfe(phi, t, f0, gtd0, c1, c2, max_ls, bracket_tol=1e-10,
                  refine_ratio=0.1):
    """Line search for a step satisfying the strong Wolfe conditions.

    phi(t) returns (f, g, gtd) for the point x + t d.  Returns
    (f, g, gtd, t, n_evals, satisfied); on failure the best bracketed
    point is returned with satisfied False.

    When the first acceptable point still has a steep directional
    derivative (|phi'| above refine_ratio of |phi'(0)|) one extra cubic
    probe toward the 1-D stationary point is taken and the better Wolfe
    point kept.  The cubic is exact on quadratics, so there the search
    returns the exact line minimizer; this is what gives the outer
    iteration its finite-termination behavior on quadratic objectives.
    """

    def armijo_fail(ft, tt):
        return not np.isfinite(ft) or ft > f0 + c1 * tt * gtd0

    f_new, g_new, gtd_new = phi(t)
    evals = 1
    t_prev, f_prev, g_prev, gtd_prev = 0.0, f0, None, gtd0
    done = False
    bracket = None
    while evals < max_ls:
        if armijo_fail(f_new, t) or (evals > 1 and f_new >= f_prev):
            bracket = [t_prev, t]
            bracket_f = [f_prev, f_new]
            bracket_g = [g_prev, g_new]
            bracket_gtd = [gtd_prev, gtd_new]
            break
        if abs(gtd_new) <= -c2 * gtd0:
            if abs(gtd_new) > refine_ratio * abs(gtd0) and evals < max_ls:
                if gtd_new > 0.0:
                    t_c = _cubic_interpolate(t_prev, f_prev, gtd_prev,
                                             t, f_new, gtd_new)
                else:
                    t_c = _cubic_interpolate(t_prev, f_prev, gtd_prev,
                                             t, f_new, gtd_new,
                                             bounds=(1.01 * t, 10.0 * t))
                f_c, g_c, gtd_c = phi(t_c)
                evals += 1
                if (not armijo_fail(f_c, t_c) and f_c <= f_new
                        and abs(gtd_c) <= -c2 * gtd0):
                    t, f_new, g_new, gtd_new = t_c, f_c, g_c, gtd_c
            done = True
            bracket = [t, t]
            bracket_f = [f_new, f_new]
            bracket_g = [g_new, g_new]
            bracket_gtd = [gtd_new, gtd_new]
            break
        if gtd_new >= 0.0:
            bracket = [t_prev, t]
            bracket_f = [f_prev, f_new]
            bracket_g = [g_prev, g_new]
            bracket_gtd = [gtd_prev, gtd_new]
            break
        min_step = t + 0.01 * (t - t_prev)
        max_step = t * 10.0
        t_next = _cubic_interpolate(t_prev, f_prev, gtd_prev, t, f_new, gtd_new,
                                    bounds=(min_step, max_step))
        t_prev, f_prev, g_prev, gtd_prev = t, f_new, g_new, gtd_new
        t = t_next
        f_new, g_new, gtd_new = phi(t)
        evals += 1
    if bracket is None:
        bracket = [0.0, t]
        bracket_f = [f0, f_new]
        bracket_g = [None, g_new]
        bracket_gtd = [gtd0, gtd_new]

    # zoom: shrink the bracket until strong Wolfe holds or it collapses
    low, high = (0, 1) if bracket_f[0] <= bracket_f[1] else (1, 0)
    insufficient = False
    while not done and evals < max_ls:
        if abs(bracket[1] - bracket[0]) < bracket_tol * max(1.0, abs(bracket[1])):
            break
        t = _cubic_interpolate(bracket[0], bracket_f[0], bracket_gtd[0],
                               bracket[1], bracket_f[1], bracket_gtd[1])
        # keep probes a fraction away from the endpoints, alternating with
        # plain acceptance, the usual guard against stagnating cubic steps
        eps = 0.1 * (max(bracket) - min(bracket))
        if min(max(bracket) - t, t - min(bracket)) < eps:
            if insufficient or t >= max(bracket) or t <= min(bracket):
                if abs(t - max(bracket)) < abs(t - min(bracket)):
                    t = max(bracket) - eps
                else:
                    t = min(bracket) + eps
                insufficient = False
            else:
                insufficient = True
        else:
            insufficient = False
        f_new, g_new, gtd_new = phi(t)
        evals += 1
        if armijo_fail(f_new, t) or f_new >= bracket_f[low]:
            bracket[high] = t
            bracket_f[high] = f_new
            bracket_g[high] = g_new
            bracket_gtd[high] = gtd_new
            low, high = (0, 1) if bracket_f[0] <= bracket_f[1] else (1, 0)
        else:
            if abs(gtd_new) <= -c2 * gtd0:
                done = True
            elif gtd_new * (bracket[high] - bracket[low]) >= 0.0:
                bracket[high] = bracket[low]
                bracket_f[high] = bracket_f[low]
                bracket_g[high] = bracket_g[low]
                bracket_gtd[high] = bracket_gtd[low]
            bracket[low] = t
            bracket_f[low] = f_new
            bracket_g[low] = g_new
            bracket_gtd[low] = gtd_new

    low, high = (0, 1) if bracket_f[0] <= bracket_f[1] else (1, 0)
    return (bracket_f[low], bracket_g[low], bracket_gtd[low], bracket[low],
            evals, done)


def wolfe_line_search(fun, x, direction, initial_step=1.0, c1=1e-4, c2=0.9,
                      max_line_search_steps=50):
    """Search along a descent direction for a strong Wolfe step.

    Returns (step, satisfied).  Raises ValueError when the direction is
    not a descent direction at x.
    """
    x = np.asarray(x, np.float64)
    direction = np.asarray(direction, np.float64)
    f0, g0 = fun(x)
    gtd0 = float(np.asarray(g0) @ direction)
    if gtd0 >= 0.0:
        raise ValueError("direction is not a descent direction")

    def phi(t):
        ft, gt = fun(x + t * direction)
        return float(ft), gt, float(np.asarray(gt) @ direction)

    _, _, _, t, _, done = _strong_wolfe(phi, float(initial_step), float(f0),
                                        gtd0, c1, c2, max_line_search_steps)
    return t, done


def lbfgs_run(fun, x0, cfg, callback=None):
    """Minimize fun from x0; returns (x, OptimizeReport)."""
    x = np.asarray(x0, np.float64).copy()
    f, g = fun(x)
    f = float(f)
    g = np.asarray(g, np.float64).copy()
    evals = 1
    ginf = float(np.max(np.abs(g))) if g.size else 0.0
    if ginf <= cfg.grad_tol:
        return x, OptimizeReport(0, evals, f, ginf, "grad_tol")

    s_hist, y_hist, rho_hist = [], [], []
    gamma = 1.0
    termination = "max_iter"
    it = 0
    while it < cfg.max_iterations:
        it += 1
        # two-loop recursion for d = -H g
        q = -g
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist),
                             reversed(rho_hist)):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        q *= gamma
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist),
                                  reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        d = q
        gtd = float(g @ d)
        if not np.isfinite(gtd) or gtd >= 0.0:
            # fall back to steepest descent if curvature noise ruined
            # the direction
            s_hist, y_hist, rho_hist = [], [], []
            gamma = 1.0
            d = -g
            gtd = -float(g @ g)

        def phi(t, _d=d):
            ft, gt = fun(x + t * _d)
            # snapshot: the objective may reuse its gradient buffer
            gt = np.array(gt, np.float64)
            return float(ft), gt, float(gt @ _d)

        t0 = min(1.0, 1.0 / float(np.abs(g).sum())) if it == 1 else 1.0
        ratio = 0.1 if it <= cfg.refine_iterations else np.inf
        f_new, g_new, _, t, ls_evals, wolfe_ok = _strong_wolfe(
            phi, t0, f, gtd, cfg.c1, cfg.c2, cfg.max_line_search_steps,
            refine_ratio=ratio)
        evals += ls_evals
        if t <= 0.0 or g_new is None or not np.isfinite(f_new) or f_new > f:
            termination = "line_search_failure"
            it -= 1
            break

        s = t * d
        y = np.asarray(g_new, np.float64) - g
        x += s
        delta = f - f_new
        f_prev_abs = abs(f)
        f = f_new
        g = np.asarray(g_new, np.float64).copy()
        ginf = float(np.max(np.abs(g)))

        sy = float(s @ y)
        if wolfe_ok and sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > cfg.memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
            gamma = sy / float(y @ y)

        if callback is not None:
            callback(it, f, ginf)
        if ginf <= cfg.grad_tol:
            termination = "grad_tol"
            break
        if delta <= cfg.rel_reduction_tol * max(1.0, f_prev_abs):
            termination = "rel_reduction"
            break

    return x, OptimizeReport(it, evals, f, ginf, termination)
