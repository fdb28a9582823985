"""Bound-constrained truncated-Newton solver.

Each outer iteration solves the Newton system ``H d = -grad`` inexactly with
a preconditioned conjugate-gradient loop restricted to the coordinates that
are free of their bounds, using finite-difference Hessian-vector products,
then takes a backtracking step along the projection arc
``x -> max(x + alpha d, lower_bounds)``.  Negative curvature or a
non-descent direction falls back to (preconditioned) steepest descent.

Convergence is declared on the infinity norm of the projected gradient
(the raw gradient on free coordinates, its negative part on coordinates
sitting at a bound), which is the stationarity measure for the constrained
problem and coincides with the plain gradient norm at interior optima.
"""

import time
from dataclasses import dataclass, field

import numpy as np

_SQRT_EPS = float(np.sqrt(np.finfo(float).eps))


@dataclass
class SolverConfig:
    grad_tol: float = 1e-5
    max_outer: int = 500
    max_inner: int = 50
    cg_forcing: float | None = None  # None -> min(0.5, sqrt(|grad|_inf))
    armijo_c: float = 1e-4
    fd_step_scale: float = 1.0
    max_halvings: int = 40

    def __post_init__(self):
        if self.grad_tol <= 0 or self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("solver config entries must be positive")
        if self.armijo_c <= 0 or self.fd_step_scale <= 0 or self.max_halvings < 1:
            raise ValueError("solver config entries must be positive")


@dataclass
class IterationRecord:
    iteration: int
    value: float
    grad_inf_norm: float
    inner_iterations: int
    step_length: float
    probes: int
    fg_evals: int
    wall_ms: float


@dataclass
class SolverReport:
    x: np.ndarray
    value: float
    grad_inf_norm: float
    termination: str
    n_outer: int
    fg_evals: int
    iterates: list = field(default_factory=list)


def projected_gradient_norm(grad, x, lower_bounds):
    """Infinity norm of the gradient projected onto the feasible directions."""
    pg = np.where((x <= lower_bounds) & (grad > 0), 0.0, grad)
    return float(np.abs(pg).max()) if pg.size else 0.0


def fd_hessian_vec(objective, x, d, gradient_at_x, fd_step_scale=1.0):
    """Forward-difference Hessian-vector product (grad(x + t d) - grad(x)) / t."""
    dinf = float(np.abs(d).max())
    if dinf == 0.0:
        raise ValueError("direction must be nonzero")
    t = fd_step_scale * _SQRT_EPS * (1.0 + float(np.abs(x).max())) / dinf
    return (objective(x + t * d).gradient - gradient_at_x) / t


def ppcg(hessian_vec, grad, preconditioner, active_set, cfg, forcing=None):
    """Preconditioned CG on the free coordinates of ``H d = -grad``.

    Stops on the forcing relative-residual tolerance, the inner iteration
    cap, or detected non-positive curvature (returning the current iterate,
    or the preconditioned steepest-descent direction if that happens on the
    first iteration).  The returned direction always satisfies
    ``d . grad < 0`` for a nonzero projected gradient.

    Returns (direction, inner_iterations).
    """
    g = np.where(active_set, 0.0, grad)
    if forcing is None:
        gi = float(np.abs(g).max()) if g.size else 0.0
        forcing = min(0.5, np.sqrt(gi))
    m = np.asarray(preconditioner, dtype=float)
    d = np.zeros_like(g)
    r = -g
    z = r / m
    p = z.copy()
    rz = float(r @ z)
    r0 = float(np.linalg.norm(r))
    tol = forcing * r0
    n_iter = 0
    for i in range(cfg.max_inner):
        if np.linalg.norm(r) <= tol:
            break
        hp = hessian_vec(p)
        hp = np.where(active_set, 0.0, hp)
        curv = float(p @ hp) if np.all(np.isfinite(hp)) else -1.0
        n_iter += 1
        if curv <= 0.0:
            if i == 0:
                d = z.copy()
            break
        alpha = rz / curv
        d += alpha * p
        r -= alpha * hp
        z = r / m
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if float(d @ grad) >= 0.0:
        # Degenerate inner solve; use preconditioned steepest descent.
        d = -g / m
    return d, n_iter


def projected_line_search(d, x, objective, lower_bounds, cfg, value_at_x, grad_at_x):
    """Backtracking search along the projection arc from alpha = 1.

    Accepts the first alpha with
    ``phi(P(x + alpha d)) <= phi(x) + c * grad(x) . (P(x + alpha d) - x)``.

    Returns (alpha, x_new, report_new, probes); alpha is None when no step
    in ``max_halvings`` halvings is acceptable.
    """
    alpha = 1.0
    probes = 0
    for _ in range(cfg.max_halvings):
        xt = np.maximum(x + alpha * d, lower_bounds)
        step = xt - x
        if np.any(step != 0.0):
            rep = objective(xt)
            probes += 1
            decrease = cfg.armijo_c * float(grad_at_x @ step)
            if np.isfinite(rep.value) and rep.value <= value_at_x + decrease:
                return alpha, xt, rep, probes
        alpha *= 0.5
    return None, x, None, probes


def tn_minimize(objective, x0, lower_bounds, cfg=None, preconditioner=None,
                callback=None):
    """Minimize a smooth objective subject to per-coordinate lower bounds.

    ``objective`` maps a stacked variable vector to an ObjectiveReport.
    ``preconditioner`` is an optional positive diagonal for the inner CG
    (identity when omitted).  ``callback(record, x)`` runs after every
    accepted outer iteration.
    """
    cfg = cfg or SolverConfig()
    lb = np.broadcast_to(np.asarray(lower_bounds, dtype=float), x0.shape).copy()
    x = np.maximum(np.asarray(x0, dtype=float).copy(), lb)
    m = (
        np.ones_like(x)
        if preconditioner is None
        else np.asarray(preconditioner, dtype=float)
    )
    if np.any(m <= 0):
        raise ValueError("preconditioner must be strictly positive")

    evals = 0
    t_start = time.perf_counter()

    def run(xv):
        nonlocal evals
        evals += 1
        return objective(xv)

    rep = run(x)
    if not np.isfinite(rep.value):
        return SolverReport(
            x=x, value=rep.value, grad_inf_norm=np.inf,
            termination="non-finite-objective", n_outer=0, fg_evals=evals,
        )

    records = []
    termination = "max-outer-iterations"
    pg_inf = projected_gradient_norm(rep.gradient, x, lb)
    n_outer = 0
    for k in range(1, cfg.max_outer + 1):
        if pg_inf <= cfg.grad_tol:
            termination = "gradient-tolerance"
            break
        grad = rep.gradient
        active = (x <= lb) & (grad > 0.0)
        forcing = cfg.cg_forcing if cfg.cg_forcing is not None else min(
            0.5, float(np.sqrt(pg_inf))
        )
        d, n_inner = ppcg(
            lambda v: fd_hessian_vec(run, x, v, grad, cfg.fd_step_scale),
            grad, m, active, cfg, forcing=forcing,
        )
        alpha, x_new, rep_new, probes = projected_line_search(
            d, x, run, lb, cfg, rep.value, grad
        )
        if alpha is None:
            termination = "line-search-failure"
            break
        x, rep = x_new, rep_new
        pg_inf = projected_gradient_norm(rep.gradient, x, lb)
        n_outer = k
        record = IterationRecord(
            iteration=k, value=rep.value, grad_inf_norm=pg_inf,
            inner_iterations=n_inner, step_length=alpha, probes=probes,
            fg_evals=evals, wall_ms=1e3 * (time.perf_counter() - t_start),
        )
        records.append(record)
        if callback is not None:
            callback(record, x)
    else:
        termination = "max-outer-iterations"
    if pg_inf <= cfg.grad_tol:
        termination = "gradient-tolerance"

    return SolverReport(
        x=x, value=rep.value, grad_inf_norm=pg_inf, termination=termination,
        n_outer=n_outer, fg_evals=evals, iterates=records,
    )
