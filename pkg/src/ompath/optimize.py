"""Most probable transition paths between fixed endpoints.

Two independent routes to the same object:

* :func:`minimize_om` descends the discrete action directly over the
  interior nodes (Polak-Ribiere conjugate gradient with restarts, or plain
  gradient descent), endpoints pinned.
* :func:`solve_el_bvp` solves the second-order Euler-Lagrange equation as
  a boundary value problem by shooting (RK4 plus a safeguarded secant on
  the initial slope); :func:`solve_el_relaxation` solves the same problem
  by damped Newton iteration on the finite-difference system for the cases
  where no shooting trajectory survives.

Agreement between the two routes is the main correctness check for both;
the bridge is :func:`euler_lagrange_residual`, which measures how well any
discrete path satisfies the stationarity condition of the discrete
action.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .model import (
    ContractViolation,
    DiscretePath,
    SdeModel,
    diffusion_on_grid,
    drift_on_grid,
    jacobian_on_grid,
    linear_path,
    uniform_grid,
)
from .om import (
    OmEvaluation,
    _om_total_fast,
    _trace_gradient,
    checked_diffusion_grid,
    discrete_velocity,
    om_functional,
    om_value_and_gradient,
)

__all__ = [
    "NoConvergence",
    "OptimizerConfig",
    "OptimizeResult",
    "minimize_om",
    "solve_el_bvp",
    "solve_el_relaxation",
    "euler_lagrange_residual",
    "euler_lagrange_rhs_example1",
]

ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
MAX_BACKTRACKS = 60
STEP_LIMIT_FACTOR = 0.5


class NoConvergence(RuntimeError):
    """An iterative solver exhausted its budget without meeting tolerance."""

    def __init__(self, message: str, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message} (iterations = {iterations}, residual = {residual:.3e})")


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for :func:`minimize_om`.

    ``steps`` is the number of grid intervals N (at least 8),
    ``gradient_tolerance`` the max-norm convergence threshold, and
    ``initial_path`` an optional starting guess on the same grid; the
    default start is linear interpolation between the endpoints.  The
    backtracking line search halves the step until the decrease is at
    least ``sufficient_decrease`` times the directional derivative.
    """

    max_iters: int = 5000
    gradient_tolerance: float = 1e-8
    steps: int = 200
    initial_path: Optional[DiscretePath] = None
    method: str = "cg"
    shrink: float = ARMIJO_SHRINK
    sufficient_decrease: float = ARMIJO_C

    def __post_init__(self):
        if self.max_iters < 1:
            raise ContractViolation(f"max_iters must be >= 1, got {self.max_iters}")
        if not (self.gradient_tolerance > 0.0):
            raise ContractViolation("gradient_tolerance must be positive")
        if self.steps < 8:
            raise ContractViolation(f"steps must be >= 8, got {self.steps}")
        if self.method not in ("cg", "gd"):
            raise ContractViolation(f"method must be 'cg' or 'gd', got {self.method!r}")
        if not (0.0 < self.shrink < 1.0):
            raise ContractViolation("shrink must lie in (0, 1)")
        if not (0.0 < self.sufficient_decrease < 1.0):
            raise ContractViolation("sufficient_decrease must lie in (0, 1)")


@dataclass(frozen=True)
class OptimizeResult:
    """Outcome of a direct action minimization.

    ``converged`` is True exactly when the final gradient max-norm is at
    or below the configured tolerance; a budget overrun reports False here
    instead of raising.  ``el_residual`` is the stationarity mismatch of
    the returned path (see :func:`euler_lagrange_residual`) and ``values``
    the non-increasing action sequence at the accepted iterates.
    """

    path: DiscretePath
    om: OmEvaluation
    iterations: int
    converged: bool
    el_residual: float
    grad_max: float
    method: str
    values: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# direct minimization
# ---------------------------------------------------------------------------


def _line_search(value_only, theta, d, f0, m, a0, cfg, a_cap=np.inf):
    """Armijo-safeguarded step along d with quadratic-model refinement.

    m is the (negative) directional derivative at 0.  Two value
    evaluations are typical: the warm-started trial plus the minimizer of
    the parabola through (0, f0), slope m, and the trial.  On a locally
    quadratic objective that lands essentially on the line minimum, which
    is what keeps conjugate directions effective.  Steps never exceed
    a_cap; actions that are unbounded below away from the wanted basin
    stay minimizable because the iterates cannot jump the ridge in one
    accepted step.  Returns (step, value) or (None, None) when no
    acceptable step exists.
    """
    c = cfg.sufficient_decrease
    a = min(a0, a_cap)
    v = value_only(theta + a * d)
    if np.isfinite(v) and v <= f0 + c * a * m:
        best_a, best_v = a, v
        denom = v - f0 - m * a
        if denom > 0.0:
            aq = -0.5 * m * a * a / denom
            if 0.0 < aq < 100.0 * a and aq <= a_cap and not np.isclose(aq, a, rtol=1e-12):
                vq = value_only(theta + aq * d)
                if np.isfinite(vq) and vq <= f0 + c * aq * m and vq < best_v:
                    best_a, best_v = aq, vq
        else:
            # the parabola is non-convex along d: grow geometrically
            for _ in range(MAX_BACKTRACKS):
                a2 = best_a / cfg.shrink
                if a2 > a_cap:
                    break
                v2 = value_only(theta + a2 * d)
                if np.isfinite(v2) and v2 <= f0 + c * a2 * m and v2 < best_v:
                    best_a, best_v = a2, v2
                else:
                    break
        return best_a, best_v
    for _ in range(MAX_BACKTRACKS):
        denom = v - f0 - m * a
        if np.isfinite(v) and denom > 0.0:
            aq = -0.5 * m * a * a / denom
            a = min(max(aq, 0.1 * a), cfg.shrink * a)
        else:
            a = cfg.shrink * a
        v = value_only(theta + a * d)
        if np.isfinite(v) and v <= f0 + c * a * m:
            return a, v
    return None, None


def minimize_om(
    model: SdeModel,
    x_start,
    x_end,
    config: Optional[OptimizerConfig] = None,
) -> OptimizeResult:
    """Minimize the discrete action over paths with pinned endpoints.

    Moves only the interior nodes; the endpoint rows of every iterate
    equal ``x_start`` and ``x_end`` exactly.  Steps are accepted under an
    Armijo condition, so the action value never increases across accepted
    iterates.  Search directions are Polak-Ribiere conjugate (restarted
    whenever they stop being descent directions) or plain steepest descent
    per ``config.method``.
    """
    cfg = config if config is not None else OptimizerConfig()
    steps = cfg.steps
    n = model.dimension
    x0 = np.broadcast_to(np.atleast_1d(np.asarray(x_start, dtype=float)), (n,)).copy()
    x1 = np.broadcast_to(np.atleast_1d(np.asarray(x_end, dtype=float)), (n,)).copy()
    grid = uniform_grid(steps)
    gs = checked_diffusion_grid(model, grid)

    if cfg.initial_path is None:
        base = linear_path(x0, x1, steps).values.copy()
    else:
        initial = cfg.initial_path
        if initial.n_steps != steps or initial.dim != n:
            raise ContractViolation("initial_path must match config.steps and model dimension")
        base = initial.values.copy()
    base[0] = x0
    base[-1] = x1

    def assemble(theta: np.ndarray) -> DiscretePath:
        xs = base.copy()
        xs[1:-1] = theta.reshape(steps - 1, n)
        return DiscretePath(grid, xs)

    def value_only(theta: np.ndarray) -> float:
        return _om_total_fast(model, assemble(theta), gs=gs)

    def value_and_grad(theta: np.ndarray):
        v, g = om_value_and_gradient(model, assemble(theta), gs=gs)
        return v, g.ravel()

    theta = base[1:-1].ravel().copy()
    f, g = value_and_grad(theta)
    history = [f]
    d = -g
    alpha = 1.0
    m_prev = None
    restart_period = max(theta.size, 10)
    # trust length: one accepted step moves no node coordinate further
    # than this fraction of the endpoint separation
    step_limit = STEP_LIMIT_FACTOR * max(1.0, float(np.max(np.abs(x1 - x0))))
    iterations = 0

    while iterations < cfg.max_iters:
        gmax = float(np.max(np.abs(g))) if g.size else 0.0
        if gmax <= cfg.gradient_tolerance:
            break
        iterations += 1

        m = float(d @ g)
        if m >= 0.0 or (cfg.method == "cg" and iterations % restart_period == 0):
            d = -g
            m = float(d @ g)
        if m == 0.0:
            break

        # Shanno-Phua scaling carries the accepted step across iterations
        if m_prev is not None:
            alpha = float(np.clip(alpha * m_prev / m, 1e-14, 1e14))
        dinf = float(np.max(np.abs(d)))
        a_cap = step_limit / dinf if dinf > 0.0 else np.inf
        a, f_new = _line_search(value_only, theta, d, f, m, alpha, cfg, a_cap)
        if a is None:
            if np.array_equal(d, -g):
                break  # no descent along steepest direction: stagnated
            d = -g
            m_prev = None
            alpha = 1.0
            continue

        theta = theta + a * d
        alpha = a
        m_prev = m
        f, g_new = value_and_grad(theta)
        history.append(f)
        if cfg.method == "cg":
            denom = float(g @ g)
            beta = max(0.0, float(g_new @ (g_new - g)) / denom) if denom > 0 else 0.0
            d = -g_new + beta * d
        else:
            d = -g_new
        g = g_new

    gmax = float(np.max(np.abs(g))) if g.size else 0.0
    path = assemble(theta)
    return OptimizeResult(
        path=path,
        om=om_functional(model, path, gs=gs),
        iterations=iterations,
        converged=gmax <= cfg.gradient_tolerance,
        el_residual=euler_lagrange_residual(model, path),
        grad_max=gmax,
        method=cfg.method,
        values=np.asarray(history),
    )


# ---------------------------------------------------------------------------
# Euler-Lagrange boundary value problem (scalar paths)
# ---------------------------------------------------------------------------


def euler_lagrange_rhs_example1(t, y, ydot):
    """Stationarity equation of the double-well model, solved for y''.

    For drift t(4y - y^3) and noise amplitude t + 1 the extremal paths of
    the action satisfy y'' = F(t, y, y') with, writing u = y' - t(4y - y^3),

        F = (4y - y^3) + t(4 - 3y^2) y' + 2u/(1+t)
            - t u (4 - 3y^2) - 3 t y (1+t)^2.
    """
    u = ydot - t * (4.0 * y - y**3)
    return (
        (4.0 * y - y**3)
        + t * (4.0 - 3.0 * y**2) * ydot
        + 2.0 * u / (1.0 + t)
        - t * u * (4.0 - 3.0 * y**2)
        - 3.0 * t * y * (1.0 + t) ** 2
    )


_BLOWUP = 1e8


def _rk4_shoot(rhs: Callable, y0: float, slope: float, steps: int):
    """Integrate [y, v]' = [v, rhs] with classical RK4; returns y-array or None."""
    h = 1.0 / steps
    ys = np.empty(steps + 1)
    ys[0] = y0
    y, v = float(y0), float(slope)
    for k in range(steps):
        t = k * h

        k1y, k1v = v, rhs(t, y, v)
        k2y = v + 0.5 * h * k1v
        k2v = rhs(t + 0.5 * h, y + 0.5 * h * k1y, k2y)
        k3y = v + 0.5 * h * k2v
        k3v = rhs(t + 0.5 * h, y + 0.5 * h * k2y, k3y)
        k4y = v + h * k3v
        k4v = rhs(t + h, y + h * k3y, k4y)

        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (abs(y) < _BLOWUP and abs(v) < _BLOWUP):
            return None
        ys[k + 1] = y
    return ys


def solve_el_bvp(
    rhs: Callable,
    y_start: float,
    y_end: float,
    steps: int,
    slope_bracket=(-20.0, 20.0),
    n_seeds: int = 8,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> DiscretePath:
    """Solve y'' = rhs(t, y, y') on [0, 1] with fixed ends by shooting.

    RK4 integrates the slope family; ``n_seeds`` trial slopes across
    ``slope_bracket`` look for a sign change of y(1) - y_end, then a
    secant iteration (falling back to bisection whenever the secant step
    leaves the bracket) drives the boundary mismatch below ``tol``.
    Trajectories that blow up past 1e8 are discarded as seeds.  Raises
    :class:`NoConvergence` when no shooting trajectory reaches the far
    boundary; stiff problems that defeat shooting entirely are usually
    still solvable by :func:`solve_el_relaxation`, which the error message
    points to.
    """
    if steps < 2:
        raise ContractViolation(f"steps must be >= 2, got {steps}")
    grid = uniform_grid(steps)
    lo, hi = map(float, slope_bracket)
    if not lo < hi:
        raise ContractViolation(f"slope_bracket must be increasing, got {slope_bracket}")

    seeds = np.linspace(lo, hi, n_seeds)
    evals = []
    for s in seeds:
        ys = _rk4_shoot(rhs, y_start, float(s), steps)
        if ys is not None:
            evals.append((float(s), ys[-1] - y_end))
    evals.sort(key=lambda e: e[0])

    bracket = None
    for (s_a, r_a), (s_b, r_b) in zip(evals, evals[1:]):
        if r_a == 0.0 or np.sign(r_a) != np.sign(r_b):
            bracket = (s_a, r_a, s_b, r_b)
            break
    if evals and bracket is None:
        # no sign change among the survivors: polish the closest seed anyway
        s_a, r_a = min(evals, key=lambda e: abs(e[1]))
        s_b = s_a + 1e-3 * (hi - lo)
        ys = _rk4_shoot(rhs, y_start, s_b, steps)
        if ys is not None:
            bracket = (s_a, r_a, s_b, ys[-1] - y_end)

    iterations = 0
    best_res = np.inf
    if bracket is not None:
        s_a, r_a, s_b, r_b = bracket
        have_bracket = np.sign(r_a) != np.sign(r_b)
        s_prev, r_prev, s_cur, r_cur = s_a, r_a, s_b, r_b
        for iterations in range(1, max_iter + 1):
            if abs(r_cur) <= tol:
                break
            if r_cur != r_prev:
                s_next = s_cur - r_cur * (s_cur - s_prev) / (r_cur - r_prev)
            else:
                s_next = 0.5 * (s_prev + s_cur)
            if have_bracket:
                b_lo, b_hi = (s_a, s_b) if s_a < s_b else (s_b, s_a)
                if not (b_lo < s_next < b_hi):
                    s_next = 0.5 * (b_lo + b_hi)
            ys_next = _rk4_shoot(rhs, y_start, s_next, steps)
            if ys_next is None:
                if have_bracket:
                    s_next = 0.5 * (min(s_a, s_b) + max(s_a, s_b))
                    ys_next = _rk4_shoot(rhs, y_start, s_next, steps)
                if ys_next is None:
                    break
            r_next = ys_next[-1] - y_end
            if have_bracket:
                if np.sign(r_next) == np.sign(r_a):
                    s_a, r_a = s_next, r_next
                else:
                    s_b, r_b = s_next, r_next
            s_prev, r_prev = s_cur, r_cur
            s_cur, r_cur = s_next, r_next
        best_res = abs(r_cur)
        if best_res <= tol:
            return DiscretePath(grid, _rk4_shoot(rhs, y_start, s_cur, steps))

    raise NoConvergence(
        "shooting failed to meet the boundary tolerance; "
        "solve_el_relaxation solves the same boundary value problem by a "
        "damped Newton iteration and usually survives stiffness that kills "
        "shooting trajectories",
        iterations,
        float(best_res),
    )


def _thomas(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve the tridiagonal system in O(n); works on defensive copies."""
    n = diag.size
    c = upper.copy()
    d = diag.copy()
    b = rhs.copy()
    for i in range(1, n):
        w = lower[i - 1] / d[i - 1]
        d[i] -= w * c[i - 1]
        b[i] -= w * b[i - 1]
    x = np.empty(n)
    x[-1] = b[-1] / d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = (b[i] - c[i] * x[i + 1]) / d[i]
    return x


def solve_el_relaxation(
    rhs: Callable,
    y_start: float,
    y_end: float,
    steps: int,
    max_iter: int = 50,
    tol: float = 1e-10,
) -> DiscretePath:
    """Solve y'' = rhs(t, y, y') with fixed ends by damped Newton relaxation.

    Discretizes with central differences, starts from the straight line,
    and iterates Newton steps on the tridiagonal linearization (Thomas
    solve) with step halving until the residual max-norm drops below
    ``tol``.  Raises :class:`NoConvergence` when damping cannot find a
    residual decrease.
    """
    if steps < 2:
        raise ContractViolation(f"steps must be >= 2, got {steps}")
    h = 1.0 / steps
    grid = uniform_grid(steps)
    ts = grid[1:-1]
    y = np.linspace(float(y_start), float(y_end), steps + 1)

    def residual(yv: np.ndarray) -> np.ndarray:
        v = (yv[2:] - yv[:-2]) / (2.0 * h)
        return (yv[2:] - 2.0 * yv[1:-1] + yv[:-2]) / h**2 - rhs(ts, yv[1:-1], v)

    G = residual(y)
    norm = float(np.max(np.abs(G)))
    for it in range(1, max_iter + 1):
        if norm <= tol:
            return DiscretePath(grid, y)
        v = (y[2:] - y[:-2]) / (2.0 * h)
        dy = 1e-6 * np.maximum(1.0, np.abs(y[1:-1]))
        dv = 1e-6 * np.maximum(1.0, np.abs(v))
        ry = (rhs(ts, y[1:-1] + dy, v) - rhs(ts, y[1:-1] - dy, v)) / (2.0 * dy)
        rv = (rhs(ts, y[1:-1], v + dv) - rhs(ts, y[1:-1], v - dv)) / (2.0 * dv)
        diag = -2.0 / h**2 - ry
        upper = 1.0 / h**2 - rv[:-1] / (2.0 * h)
        lower = 1.0 / h**2 + rv[1:] / (2.0 * h)
        delta = _thomas(lower, diag, upper, -G)
        if not np.all(np.isfinite(delta)):
            raise NoConvergence("relaxation linearization became singular", it, norm)
        lam = 1.0
        for _ in range(30):
            trial = y.copy()
            trial[1:-1] += lam * delta
            G_trial = residual(trial)
            if np.all(np.isfinite(G_trial)) and np.max(np.abs(G_trial)) < norm:
                y, G = trial, G_trial
                norm = float(np.max(np.abs(G)))
                break
            lam *= 0.5
        else:
            raise NoConvergence("relaxation damping found no residual decrease", it, norm)
    if norm <= tol:
        return DiscretePath(grid, y)
    raise NoConvergence("relaxation ran out of iterations", max_iter, norm)


# ---------------------------------------------------------------------------
# stationarity residual of the discrete action
# ---------------------------------------------------------------------------


def euler_lagrange_residual(model: SdeModel, path: DiscretePath) -> float:
    """Max-norm violation of the discrete Euler-Lagrange condition.

    With p = dL/d(velocity) = 2 g^{-T} g^{-1} (y' - f), the condition at
    interior node k reads dL/dy(t_k) = (p_{k+1} - p_{k-1})/(2h).  Every
    derivative here is a centered difference, so the mismatch is taken
    over the nodes 2..N-2 where the full stencil fits; one-sided end
    estimates would divide their truncation error by h and swamp the
    result.  Near-zero values certify a path as extremal independently
    of how it was produced.  Works for any state dimension.
    """
    if path.dim != model.dimension:
        raise ContractViolation(
            f"path dimension {path.dim} does not match model dimension {model.dimension}"
        )
    if path.n_steps < 4:
        raise ContractViolation("residual needs at least 4 steps")
    ts, xs, h = path.grid, path.values, path.step
    ti, xi = ts[1:-1], xs[1:-1]
    gs = diffusion_on_grid(model, ti)
    d = (xs[2:] - xs[:-2]) / (2.0 * h)
    u = d - drift_on_grid(model, ti, xi)
    z = np.linalg.solve(gs, u[..., None])[..., 0]
    p = 2.0 * np.linalg.solve(np.swapaxes(gs, -1, -2), z[..., None])[..., 0]
    jac = jacobian_on_grid(model, ti, xi)
    dLdy = -np.einsum("kji,kj->ki", jac, p) + _trace_gradient(model, ti, xi)
    dpdt = (p[2:] - p[:-2]) / (2.0 * h)
    return float(np.max(np.abs(dLdy[1:-1] - dpdt)))
