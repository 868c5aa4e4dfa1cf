"""Discrete Hölder norms for paths on the uniform grid.

The norm is sup-norm plus alpha-seminorm,

    |path|_alpha = |path|_0 + max_{j<k} |v_k - v_j| / (t_k - t_j)^alpha,

with every quantity computed per coordinate and then averaged over the n
coordinates (the (1/n) Sigma convention; max-over-coordinates is not
used).  Pair distances use the idealized spacing (k - j) * h rather than
differences of the stored grid values, so results are reproducible
bitwise from the index structure alone.

The seminorm scans pairs grouped by lag: for each lag L it vectorizes the
max over offsets.  That visits every pair exactly once, so it IS the
exact O(N^2) pair scan, merely blocked for vectorization; a brute-force
double loop over pairs produces the identical float at any N.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .model import ContractViolation, DiscretePath

__all__ = [
    "HolderParams",
    "sup_norm",
    "holder_seminorm",
    "holder_norm",
    "holder_distance",
]


@dataclass(frozen=True)
class HolderParams:
    """Hölder exponent for the path norm.

    Values must lie in (0, 1); the regime the tube asymptotics cover is
    alpha < 1/4, so anything at or above 1/4 is accepted with a warning.
    """

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a < 1.0):
            raise ContractViolation(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "alpha", a)
        if a >= 0.25:
            warnings.warn(
                f"alpha = {a} is outside the small-tube regime (0, 1/4); "
                "results are still well defined but the tube-probability "
                "asymptotics are only guaranteed below 1/4",
                stacklevel=3,
            )


def _alpha_of(params: Union[HolderParams, float]) -> float:
    if isinstance(params, HolderParams):
        return params.alpha
    return HolderParams(float(params)).alpha


def sup_norm(path: DiscretePath) -> float:
    """Coordinate-averaged sup norm: (1/n) sum_i max_k |v_k[i]|."""
    return float(np.mean(np.max(np.abs(path.values), axis=0)))


def holder_seminorm(path: DiscretePath, params: Union[HolderParams, float]) -> float:
    """Coordinate-averaged alpha-seminorm over all grid pairs."""
    alpha = _alpha_of(params)
    per = _seminorm_per_coord(path.values[None, :, :], path.step, alpha)[0]
    return float(np.mean(per))


def holder_norm(path: DiscretePath, params: Union[HolderParams, float]) -> float:
    """sup_norm plus holder_seminorm."""
    return sup_norm(path) + holder_seminorm(path, params)


def holder_distance(
    a: DiscretePath, b: DiscretePath, params: Union[HolderParams, float]
) -> float:
    """Hölder norm of the difference of two paths on the same grid."""
    if a.n_steps != b.n_steps or a.dim != b.dim:
        raise ContractViolation("paths must share grid size and dimension")
    if not np.allclose(a.grid, b.grid, rtol=0.0, atol=1e-12):
        raise ContractViolation("paths must live on the same grid")
    return holder_norm(DiscretePath(a.grid, a.values - b.values), params)


# ---------------------------------------------------------------------------
# batch kernels (used by the tube estimator)
# ---------------------------------------------------------------------------


def _seminorm_per_coord(
    values: np.ndarray,
    h: float,
    alpha: float,
    lags: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Per-coordinate seminorm of a batch, shape (B, n).

    ``values`` has shape (B, K, n).  ``lags`` restricts the scan to the
    given index gaps (a lower bound); None scans every lag, which is the
    exact value.
    """
    B, K, n = values.shape
    out = np.zeros((B, n))
    lag_list = range(1, K) if lags is None else sorted(set(lags))
    for L in lag_list:
        if not (1 <= L <= K - 1):
            continue
        diff = np.abs(values[:, L:, :] - values[:, :-L, :])
        np.maximum(out, diff.max(axis=1) / (L * h) ** alpha, out=out)
    return out


def _sup_per_coord(values: np.ndarray) -> np.ndarray:
    return np.max(np.abs(values), axis=1)


def _screen_lags(K: int) -> list:
    lags = {1, 2, 4, max(1, (K - 1) // 2), K - 1}
    return sorted(L for L in lags if 1 <= L <= K - 1)


def batch_holder_norm(values: np.ndarray, h: float, alpha: float) -> np.ndarray:
    """Exact Hölder norms of a batch of deviation arrays, shape (B,)."""
    sup = _sup_per_coord(values).mean(axis=1)
    semi = _seminorm_per_coord(values, h, alpha).mean(axis=1)
    return sup + semi


def tube_hits(values: np.ndarray, h: float, alpha: float, radius: float) -> np.ndarray:
    """Boolean mask of rows whose Hölder norm is at most ``radius``.

    ``values`` holds deviations from the tube center, shape (B, K, n).
    A cheap screen over a few lags gives an exact lower bound on the
    norm; rows the screen already pushes past the radius are rejected
    without the full scan, and only the survivors pay for all lags.  The
    decision is exact either way.
    """
    B, K, n = values.shape
    sup = _sup_per_coord(values).mean(axis=1)
    lower = sup + _seminorm_per_coord(values, h, alpha, _screen_lags(K)).mean(axis=1)
    hits = np.zeros(B, dtype=bool)
    maybe = lower <= radius
    if np.any(maybe):
        idx = np.flatnonzero(maybe)
        semi = _seminorm_per_coord(values[idx], h, alpha).mean(axis=1)
        hits[idx] = sup[idx] + semi <= radius
    return hits
