"""SDE models with time-dependent additive noise, and discrete paths.

A model describes the system

    dX_t = f(t, X_t) dt + g(t) dW_t,    t in [0, 1],

with drift ``f`` and an n x n diffusion matrix ``g`` that depends on time
only.  Built-in models (a 1-D double well with growing noise, a two-scale
volatility system, and linear/zero test models) come with analytic
Jacobians; user models may omit the Jacobian and fall back to central
finite differences.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Tuple

import numpy as np

__all__ = [
    "SdeModel",
    "DiscretePath",
    "ContractViolation",
    "eval_drift",
    "eval_drift_jacobian",
    "eval_diffusion",
    "builtin_model",
    "check_model",
    "uniform_grid",
    "linear_path",
    "BUILTIN_MODEL_NAMES",
]

#: finite-difference step for Jacobian fallback, per coordinate j:
#: h_fd = FD_STEP * max(1, |x_j|)
FD_STEP = 1e-6

GRID_UNIFORMITY_TOL = 1e-12


class ContractViolation(ValueError):
    """An argument violates an operation's stated preconditions."""


@dataclass(frozen=True)
class SdeModel:
    """An additive-noise SDE ``dX = f(t, X) dt + g(t) dW`` on [0, 1].

    Parameters
    ----------
    dimension : int
        State dimension n.
    drift : callable
        ``drift(t, x) -> n-vector``.  Built-in models also broadcast over
        arrays (``t`` of shape ``(...,)`` with ``x`` of shape ``(..., n)``);
        user drifts need not.
    diffusion : callable
        ``diffusion(t) -> (n, n) matrix``; time-dependent, state-free.
    drift_jacobian : callable, optional
        ``drift_jacobian(t, x) -> (n, n) matrix`` with entry (i, j) equal
        to d f_i / d x_j.  When absent, central finite differences with
        step ``max(1e-6, 1e-6 |x_j|)`` are used.
    lipschitz_bound : float, optional
        Lipschitz constant of ``f`` in x, if known.
    det_bounds : (float, float), optional
        Bounds ``0 < m < M`` with ``m <= |det g(t)| <= M`` on [0, 1].
    name : str
        Registry name for built-ins, "custom" otherwise.
    params : mapping
        Parameters the model was built with (for diagnostics output).
    """

    dimension: int
    drift: Callable
    diffusion: Callable
    drift_jacobian: Optional[Callable] = None
    lipschitz_bound: Optional[float] = None
    det_bounds: Optional[Tuple[float, float]] = None
    name: str = "custom"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise ContractViolation(f"dimension must be >= 1, got {self.dimension}")
        if self.lipschitz_bound is not None and self.lipschitz_bound <= 0:
            raise ContractViolation("lipschitz_bound must be positive")
        if self.det_bounds is not None:
            m, M = self.det_bounds
            if not (0 < m < M):
                raise ContractViolation(f"det_bounds must satisfy 0 < m < M, got {self.det_bounds}")


def _check_time(t) -> None:
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-12) or np.any(t > 1 + 1e-12):
        raise ContractViolation(f"time must lie in [0, 1], got {t!r}")


def _check_state(model: SdeModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (model.dimension,):
        if model.dimension == 1 and x.ndim == 0:
            x = x.reshape(1)
        else:
            raise ContractViolation(
                f"state has trailing shape {x.shape}, expected (..., {model.dimension})"
            )
    return x


def eval_drift(model: SdeModel, t: float, x) -> np.ndarray:
    """Evaluate the drift f(t, x), validating shapes and the time domain."""
    _check_time(t)
    x = _check_state(model, x)
    out = np.asarray(model.drift(t, x), dtype=float)
    if out.shape != x.shape:
        raise ContractViolation(
            f"drift returned shape {out.shape}, expected {x.shape}"
        )
    return out


def eval_diffusion(model: SdeModel, t: float) -> np.ndarray:
    """Evaluate the diffusion matrix g(t) as an (n, n) array."""
    _check_time(t)
    n = model.dimension
    g = np.asarray(model.diffusion(t), dtype=float)
    if g.shape == () and n == 1:
        g = g.reshape(1, 1)
    if g.shape != (n, n):
        raise ContractViolation(f"diffusion returned shape {g.shape}, expected {(n, n)}")
    return g


def _fd_jacobian(drift: Callable, t, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of the drift, step max(1e-6, 1e-6 |x_j|)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    cols = []
    for j in range(n):
        hj = FD_STEP * np.maximum(1.0, np.abs(x[..., j]))
        e = np.zeros_like(x)
        e[..., j] = hj
        fp = np.asarray(drift(t, x + e), dtype=float)
        fm = np.asarray(drift(t, x - e), dtype=float)
        cols.append((fp - fm) / (2.0 * hj[..., None]))
    return np.stack(cols, axis=-1)


def eval_drift_jacobian(model: SdeModel, t: float, x) -> np.ndarray:
    """Jacobian of the drift in x: analytic when supplied, else central FD."""
    _check_time(t)
    x = _check_state(model, x)
    n = model.dimension
    if model.drift_jacobian is not None:
        J = np.asarray(model.drift_jacobian(t, x), dtype=float)
    else:
        J = _fd_jacobian(model.drift, t, x)
    if J.shape != x.shape + (n,):
        raise ContractViolation(
            f"drift jacobian has shape {J.shape}, expected {x.shape + (n,)}"
        )
    return J


# ---------------------------------------------------------------------------
# batched evaluation on a grid
#
# The simulators and the functional evaluator call the drift many times with
# one state per grid node (or per Monte Carlo sample).  Built-in models
# broadcast, so a single vectorized call suffices; arbitrary user callables
# are probed once and fall back to a row loop if they do not broadcast.
# ---------------------------------------------------------------------------


def _supports_batch(fn: Callable, t_row, x_rows: np.ndarray, expect_shape) -> bool:
    try:
        out = np.asarray(fn(t_row, x_rows), dtype=float)
    except Exception:
        return False
    if out.shape != expect_shape:
        return False
    ref = np.asarray(fn(float(np.asarray(t_row).ravel()[0]), x_rows[0]), dtype=float)
    return bool(np.allclose(out[0], ref, rtol=1e-13, atol=0.0))


def row_drift_evaluator(model: SdeModel, probe_t: np.ndarray, probe_x: np.ndarray) -> Callable:
    """A (ts, xs) -> (K, n) drift evaluator, probing broadcast support once.

    For hot loops that call the drift on many batches of the same width:
    the probe from :func:`drift_on_grid` runs a single time instead of per
    call.
    """
    if _supports_batch(model.drift, probe_t, probe_x, probe_x.shape):
        return lambda ts, xs: np.asarray(model.drift(ts, xs), dtype=float)

    def rowwise(ts, xs):
        out = np.empty_like(xs)
        for k in range(xs.shape[0]):
            out[k] = np.asarray(model.drift(float(ts[k]), xs[k]), dtype=float)
        return out

    return rowwise


def drift_on_grid(model: SdeModel, ts: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """f(ts[k], xs[k]) for all rows k, shape (K, n)."""
    ts = np.asarray(ts, dtype=float)
    xs = np.asarray(xs, dtype=float)
    K, n = xs.shape
    if _supports_batch(model.drift, ts, xs, (K, n)):
        return np.asarray(model.drift(ts, xs), dtype=float)
    out = np.empty((K, n))
    for k in range(K):
        out[k] = np.asarray(model.drift(float(ts[k]), xs[k]), dtype=float)
    return out


def jacobian_on_grid(model: SdeModel, ts: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Drift Jacobians along a grid, shape (K, n, n)."""
    ts = np.asarray(ts, dtype=float)
    xs = np.asarray(xs, dtype=float)
    K, n = xs.shape
    if model.drift_jacobian is not None:
        if _supports_batch(model.drift_jacobian, ts, xs, (K, n, n)):
            return np.asarray(model.drift_jacobian(ts, xs), dtype=float)
        out = np.empty((K, n, n))
        for k in range(K):
            out[k] = np.asarray(model.drift_jacobian(float(ts[k]), xs[k]), dtype=float)
        return out
    if _supports_batch(model.drift, ts, xs, (K, n)):
        return _fd_jacobian(model.drift, ts, xs)
    out = np.empty((K, n, n))
    for k in range(K):
        out[k] = _fd_jacobian(model.drift, float(ts[k]), xs[k])
    return out


def diffusion_on_grid(model: SdeModel, ts: np.ndarray) -> np.ndarray:
    """g(ts[k]) for all k, shape (K, n, n)."""
    return np.stack([eval_diffusion(model, float(t)) for t in np.asarray(ts, dtype=float)])


# ---------------------------------------------------------------------------
# discrete paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscretePath:
    """Samples of a path on a uniform grid over [0, 1].

    ``grid`` holds N+1 strictly increasing times t_0 = 0 < ... < t_N = 1
    with uniform step h = 1/N (to 1e-12); ``values`` is an (N+1, n) array.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if grid.ndim != 1 or grid.size < 2:
            raise ContractViolation("grid must be 1-D with at least two nodes")
        N = grid.size - 1
        if abs(grid[0]) > GRID_UNIFORMITY_TOL or abs(grid[-1] - 1.0) > GRID_UNIFORMITY_TOL:
            raise ContractViolation("grid must span [0, 1]")
        h = (grid[-1] - grid[0]) / N
        if np.max(np.abs(np.diff(grid) - h)) > GRID_UNIFORMITY_TOL:
            raise ContractViolation("grid must be uniform to 1e-12")
        if values.shape[0] != N + 1:
            raise ContractViolation(
                f"values has {values.shape[0]} rows for a grid of {N + 1} nodes"
            )
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.grid.size - 1

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def step(self) -> float:
        return (self.grid[-1] - self.grid[0]) / self.n_steps


def uniform_grid(steps: int) -> np.ndarray:
    """The uniform grid t_k = k/N on [0, 1], N = ``steps``."""
    if steps < 1:
        raise ContractViolation(f"steps must be >= 1, got {steps}")
    return np.linspace(0.0, 1.0, steps + 1)


def linear_path(x_start, x_end, steps: int) -> DiscretePath:
    """Straight-line interpolation between two states on a uniform grid."""
    x0 = np.atleast_1d(np.asarray(x_start, dtype=float))
    x1 = np.atleast_1d(np.asarray(x_end, dtype=float))
    if x0.shape != x1.shape:
        raise ContractViolation("endpoints must have the same dimension")
    grid = uniform_grid(steps)
    values = x0[None, :] + grid[:, None] * (x1 - x0)[None, :]
    return DiscretePath(grid, values)


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------


def _example1() -> SdeModel:
    # dX = t (4X - X^3) dt + (t + 1) dW; metastable states at x = -2 and 2.
    def drift(t, x):
        t = np.asarray(t, dtype=float)
        return t[..., None] * (4.0 * x - x**3)

    def jac(t, x):
        t = np.asarray(t, dtype=float)
        return (t[..., None] * (4.0 - 3.0 * x**2))[..., None]

    return SdeModel(
        dimension=1,
        drift=drift,
        diffusion=lambda t: np.array([[t + 1.0]]),
        drift_jacobian=jac,
        det_bounds=(1.0, 2.0),
        name="example1",
    )


def _example2(a: float, b: float) -> SdeModel:
    # Two-scale system: fast factor scaled by a^2, slow factor by b^2, with
    # diffusion 0.4 diag(a (1+t), b (2+t)); metastable states (-2,-2), (2,2).
    if a <= 0 or b <= 0:
        raise ContractViolation(f"example2 requires a > 0 and b > 0, got a={a}, b={b}")
    a2, b2 = a * a, b * b

    def drift(t, x):
        x1, x2 = x[..., 0], x[..., 1]
        common = 8.0 - x1 * x2
        f1 = 0.04 * a2 * x1 * (common - x1**2)
        f2 = 0.04 * b2 * x2 * (common - x2**2)
        return np.stack([f1, f2], axis=-1)

    def jac(t, x):
        x1, x2 = x[..., 0], x[..., 1]
        j11 = 0.04 * a2 * (8.0 - 2.0 * x1 * x2 - 3.0 * x1**2)
        j12 = -0.04 * a2 * x1**2
        j21 = -0.04 * b2 * x2**2
        j22 = 0.04 * b2 * (8.0 - 2.0 * x1 * x2 - 3.0 * x2**2)
        row1 = np.stack([j11, j12], axis=-1)
        row2 = np.stack([j21, j22], axis=-1)
        return np.stack([row1, row2], axis=-2)

    def diffusion(t):
        return np.array([[0.4 * a * (1.0 + t), 0.0], [0.0, 0.4 * b * (2.0 + t)]])

    # det g(t) = 0.16 a b (1+t)(2+t), increasing on [0, 1]
    return SdeModel(
        dimension=2,
        drift=drift,
        diffusion=diffusion,
        drift_jacobian=jac,
        det_bounds=(0.32 * a * b, 0.96 * a * b),
        name="example2",
        params={"a": a, "b": b},
    )


def _linear_test(a: float, g0: float, g1: float, n: int) -> SdeModel:
    # dX = a * X dt + (g0 + g1 t) dW, componentwise.
    eye = np.eye(n)

    def drift(t, x):
        return a * x

    def jac(t, x):
        out = np.broadcast_to(a * eye, np.shape(x)[:-1] + (n, n))
        return np.array(out)

    gmin = min(g0, g0 + g1)
    gmax = max(g0, g0 + g1)
    det_bounds = (gmin**n, gmax**n) if gmin > 0 and gmax > gmin else None
    return SdeModel(
        dimension=n,
        drift=drift,
        diffusion=lambda t: (g0 + g1 * t) * eye,
        drift_jacobian=jac,
        lipschitz_bound=abs(a) if a != 0 else None,
        det_bounds=det_bounds,
        name="linear_test",
        params={"a": a, "g0": g0, "g1": g1, "n": n},
    )


def _zero_drift(n: int, sigma: float) -> SdeModel:
    eye = np.eye(n)

    def drift(t, x):
        return np.zeros_like(x)

    def jac(t, x):
        out = np.broadcast_to(np.zeros((n, n)), np.shape(x)[:-1] + (n, n))
        return np.array(out)

    det_bounds = (0.5 * sigma**n, 2.0 * sigma**n) if sigma > 0 else None
    return SdeModel(
        dimension=n,
        drift=drift,
        diffusion=lambda t: sigma * eye,
        drift_jacobian=jac,
        lipschitz_bound=None,
        det_bounds=det_bounds,
        name="zero_drift",
        params={"n": n, "sigma": sigma},
    )


BUILTIN_MODEL_NAMES = ("example1", "example2", "linear_test", "zero_drift")


def builtin_model(name: str, params: Optional[Mapping] = None) -> SdeModel:
    """Construct a built-in model by name.

    ``example1``: 1-D double well, f = t(4x - x^3), g = t + 1.
    ``example2``: two-scale volatility system; requires params a > 0, b > 0.
    ``linear_test``: f = a * x (default -1), g = (g0 + g1 t) I (default 1).
    ``zero_drift``: f = 0, g = sigma * I (default identity).
    """
    params = dict(params or {})
    if name == "example1":
        _reject_extra(name, params, ())
        return _example1()
    if name == "example2":
        a = float(params.pop("a", 1.0))
        b = float(params.pop("b", 1.0))
        _reject_extra(name, params, ("a", "b"))
        return _example2(a, b)
    if name == "linear_test":
        a = float(params.pop("a", -1.0))
        g0 = float(params.pop("g0", 1.0))
        g1 = float(params.pop("g1", 0.0))
        n = int(params.pop("n", 1))
        _reject_extra(name, params, ("a", "g0", "g1", "n"))
        return _linear_test(a, g0, g1, n)
    if name == "zero_drift":
        n = int(params.pop("n", 1))
        sigma = float(params.pop("sigma", 1.0))
        _reject_extra(name, params, ("n", "sigma"))
        return _zero_drift(n, sigma)
    raise ContractViolation(
        f"unknown model {name!r}; choose one of {', '.join(BUILTIN_MODEL_NAMES)}"
    )


def _reject_extra(name, params, accepted):
    if params:
        raise ContractViolation(
            f"model {name!r} got unexpected parameters {sorted(params)}; accepts {list(accepted)}"
        )


# ---------------------------------------------------------------------------
# model condition checks (advisory by default)
# ---------------------------------------------------------------------------


def check_model(
    model: SdeModel,
    n_probe: int = 100,
    probe_box: float = 3.0,
    seed: int = 0,
    strict: bool = False,
) -> list[str]:
    """Probe a model against its structural conditions.

    Checks, on random points of [0,1] x [-box, box]^n:
    - the supplied Jacobian against central finite differences (rtol 1e-5);
    - |det g(t)| >= m when ``det_bounds`` is supplied, and nonzero always;
    - a sampled Lipschitz estimate against ``lipschitz_bound`` if given.

    Violations are returned as warning strings (and emitted via
    ``warnings.warn``); ``strict=True`` raises instead.  The checks are
    advisory because useful models routinely live outside the global
    hypotheses on a bounded region of interest.
    """
    rng = np.random.default_rng(seed)
    n = model.dimension
    problems: list[str] = []

    ts = rng.uniform(0.0, 1.0, size=n_probe)
    xs = rng.uniform(-probe_box, probe_box, size=(n_probe, n))

    if model.drift_jacobian is not None:
        for t, x in zip(ts, xs):
            J = eval_drift_jacobian(model, float(t), x)
            J_fd = _fd_jacobian(model.drift, float(t), x)
            scale = max(1.0, float(np.max(np.abs(J_fd))))
            err = float(np.max(np.abs(J - J_fd))) / scale
            if err > 1e-5:
                problems.append(
                    f"analytic Jacobian deviates from finite differences by {err:.2e} "
                    f"at t={t:.3f}, x={x}"
                )
                break

    dets = np.array([np.linalg.det(eval_diffusion(model, float(t))) for t in np.linspace(0, 1, 33)])
    if np.any(np.abs(dets) < 1e-300):
        problems.append("diffusion matrix is singular somewhere on [0, 1]")
    elif model.det_bounds is not None:
        m, M = model.det_bounds
        if np.min(np.abs(dets)) < m * (1 - 1e-9):
            problems.append(
                f"min |det g| = {np.min(np.abs(dets)):.6g} undercuts declared bound m = {m}"
            )
        if np.max(np.abs(dets)) > M * (1 + 1e-9):
            problems.append(
                f"max |det g| = {np.max(np.abs(dets)):.6g} exceeds declared bound M = {M}"
            )

    if model.lipschitz_bound is not None:
        L = model.lipschitz_bound
        ys = rng.uniform(-probe_box, probe_box, size=(n_probe, n))
        for t, x, y in zip(ts, xs, ys):
            dx = np.linalg.norm(x - y)
            if dx == 0:
                continue
            df = np.linalg.norm(eval_drift(model, float(t), x) - eval_drift(model, float(t), y))
            if df > L * dx * (1 + 1e-9):
                problems.append(
                    f"sampled Lipschitz ratio {df / dx:.6g} exceeds declared bound {L}"
                )
                break

    for p in problems:
        if strict:
            raise ContractViolation(p)
        warnings.warn(p, stacklevel=2)
    return problems
