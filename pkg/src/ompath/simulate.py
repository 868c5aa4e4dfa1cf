"""Euler-Maruyama sampling with reproducible per-sample noise streams.

Sample i of an ensemble draws its increments from an independent
generator spawned as SeedSequence(entropy=seed, spawn_key=(i,)), so the
i-th path is a pure function of (model, x0, steps, seed, i): ensembles
are bit-identical no matter how many samples are requested, how they are
batched, or how many worker threads produced them.

The diffusion matrix is evaluated at the left endpoint of each step, as
the definition of the Ito integral suggests.  A trajectory with any
state component beyond 1e6 in magnitude (or non-finite) aborts the call
with :class:`SimulationDiverged` carrying the sample and step indices.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .model import (
    ContractViolation,
    DiscretePath,
    SdeModel,
    _check_state,
    diffusion_on_grid,
    row_drift_evaluator,
    uniform_grid,
)

__all__ = [
    "SimulationDiverged",
    "SimulationSpec",
    "euler_maruyama",
    "simulate_ensemble",
    "sample_paths",
]

#: state norm beyond which a trajectory counts as numerically divergent
DIVERGENCE_BOUND = 1e6

#: samples per streamed block; a memory/throughput tradeoff only,
#: results do not depend on it
_BATCH = 4096


class SimulationDiverged(RuntimeError):
    """A trajectory state component left [-1e6, 1e6] or became non-finite.

    ``sample_index`` and ``step_index`` name the offending trajectory and
    the first grid step at which the bound was exceeded.
    """

    def __init__(self, sample_index: int, step_index: int, time: float):
        self.sample_index = sample_index
        self.step_index = step_index
        self.time = time
        super().__init__(
            f"simulation diverged (|x| > {DIVERGENCE_BOUND:.0e}) in sample "
            f"{sample_index} at step {step_index} (t = {time:.6g})"
        )


@dataclass(frozen=True)
class SimulationSpec:
    """What to simulate: model, start point, grid, seed, ensemble size."""

    model: SdeModel
    x0: np.ndarray
    steps: int
    seed: int
    samples: int = 1

    def __post_init__(self):
        object.__setattr__(self, "x0", _check_state(self.model, self.x0))
        if self.steps < 2:
            raise ContractViolation(f"steps must be >= 2, got {self.steps}")
        if self.samples < 1:
            raise ContractViolation(f"samples must be >= 1, got {self.samples}")
        int(self.seed)


def _increments(seed: int, index: int, steps: int, dim: int) -> np.ndarray:
    """Brownian increments for sample ``index``: shape (steps, dim)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    rng = np.random.Generator(np.random.PCG64(ss))
    return rng.standard_normal((steps, dim)) * np.sqrt(1.0 / steps)


class _SimContext:
    """Grid-level precomputation shared by every sample of one ensemble."""

    def __init__(self, model: SdeModel, x0, steps: int, seed: int):
        self.model = model
        self.x0 = _check_state(model, x0)
        self.steps = int(steps)
        self.seed = int(seed)
        self.grid = uniform_grid(steps)
        self.gs = diffusion_on_grid(model, self.grid)
        # probe with a one-row batch: the evaluator is always fed (b, n)
        self.drift_rows = row_drift_evaluator(model, self.grid[0], self.x0[None, :])

    def block(self, lo: int, hi: int) -> np.ndarray:
        """Paths for samples [lo, hi): shape (hi - lo, steps + 1, dim)."""
        model, steps, dim = self.model, self.steps, self.model.dimension
        h = 1.0 / steps
        b = hi - lo
        dw = np.empty((b, steps, dim))
        for i in range(b):
            dw[i] = _increments(self.seed, lo + i, steps, dim)
        out = np.empty((b, steps + 1, dim))
        out[:, 0] = self.x0
        x = np.broadcast_to(self.x0, (b, dim)).copy()
        for k in range(steps):
            t = self.grid[k]
            fx = self.drift_rows(t, x)
            # einsum instead of matmul: BLAS picks different kernels by
            # batch size, which would break bit-identical chunking
            noise = np.einsum("ij,bj->bi", self.gs[k], dw[:, k])
            x = x + fx * h + noise
            bad = ~np.all(np.abs(x) <= DIVERGENCE_BOUND, axis=1)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise SimulationDiverged(lo + i, k + 1, self.grid[k + 1])
            out[:, k + 1] = x
        return out


def _resolve_workers(workers: Optional[int]) -> int:
    cap = os.environ.get("OMPATH_THREADS", "").strip()
    limit = int(cap) if cap else (os.cpu_count() or 1)
    if limit < 1:
        raise ContractViolation(f"OMPATH_THREADS must be >= 1, got {limit}")
    if workers is None:
        return limit
    if workers < 1:
        raise ContractViolation(f"workers must be >= 1, got {workers}")
    return min(workers, limit)


def sample_paths(spec: SimulationSpec, workers: Optional[int] = None) -> np.ndarray:
    """All trajectories of the ensemble as one array (samples, steps+1, dim).

    Threaded over contiguous sample ranges; the split cannot affect values
    because every sample owns its spawned noise stream.  ``workers``
    defaults to the CPU count, capped by the OMPATH_THREADS environment
    variable.
    """
    ctx = _SimContext(spec.model, spec.x0, spec.steps, spec.seed)
    n = spec.samples
    w = min(_resolve_workers(workers), n)
    if w == 1:
        blocks = [ctx.block(lo, min(lo + _BATCH, n)) for lo in range(0, n, _BATCH)]
        return np.concatenate(blocks, axis=0)
    bounds = np.linspace(0, n, w + 1).astype(int)
    with ThreadPoolExecutor(max_workers=w) as pool:
        futures = [
            pool.submit(ctx.block, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        parts = [f.result() for f in futures]
    return np.concatenate(parts, axis=0)


def euler_maruyama(spec: SimulationSpec) -> DiscretePath:
    """One trajectory: sample 0 of the ensemble ``spec`` describes.

    ``spec.samples`` is ignored; the returned path is identical to the
    first element of :func:`simulate_ensemble` for the same spec.
    """
    ctx = _SimContext(spec.model, spec.x0, spec.steps, spec.seed)
    return DiscretePath(ctx.grid, ctx.block(0, 1)[0])


def simulate_ensemble(spec: SimulationSpec) -> Iterator[DiscretePath]:
    """Yield the ensemble's trajectories one at a time, in sample order.

    Lazily streams blocks of at most a few thousand samples so ensembles
    larger than memory can be consumed incrementally.  Sample i equals
    ``euler_maruyama`` run with the same spec and seed stream i.
    """
    ctx = _SimContext(spec.model, spec.x0, spec.steps, spec.seed)
    for lo in range(0, spec.samples, _BATCH):
        block = ctx.block(lo, min(lo + _BATCH, spec.samples))
        for row in block:
            yield DiscretePath(ctx.grid, row)
